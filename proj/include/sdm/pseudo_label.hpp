// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sdm/dataset_index.hpp"

namespace sdm {

enum class FilterMode { Loose, Balanced, Strict };

inline const char* to_string(FilterMode m) {
    switch (m) {
        case FilterMode::Loose: return "loose";
        case FilterMode::Balanced: return "balanced";
        case FilterMode::Strict: return "strict";
    }
    return "?";
}

inline FilterMode parse_filter_mode(std::string_view s) {
    const std::string l = csv::lower(s);
    if (l == "loose") return FilterMode::Loose;
    if (l == "balanced") return FilterMode::Balanced;
    if (l == "strict") return FilterMode::Strict;
    throw Error("unknown merge mode '" + std::string(s) + "' (expected loose, balanced or strict)");
}

/// Geometry and eligibility rules for patch aggregation. The patch is the
/// 640 m x 640 m square centred on the primary survey.
struct MergeConfig {
    double box_half_km = 0.32;
    /// Circular pre-query radius; must circumscribe the box.
    double radius_threshold_km = 0.32 * std::numbers::sqrt2;
    double lat_km_per_deg = 111.4;
    double lon_km_per_deg_at_equator = 111.32;
    std::size_t rare_count_threshold = 100;
    FilterMode mode = FilterMode::Balanced;

    void validate() const {
        if (!(box_half_km > 0.0) || !std::isfinite(box_half_km)) throw Error("MergeConfig: box_half_km must be > 0");
        if (!(radius_threshold_km >= box_half_km * std::numbers::sqrt2 * (1.0 - 1e-12)))
            throw Error("MergeConfig: radius_threshold_km must be >= box_half_km * sqrt(2) so the pre-query covers the box");
        if (!(lat_km_per_deg > 0.0) || !(lon_km_per_deg_at_equator > 0.0))
            throw Error("MergeConfig: km-per-degree factors must be > 0");
        if (rare_count_threshold < 1) throw Error("MergeConfig: rare_count_threshold must be >= 1");
    }
};

struct MergedRecord {
    SurveyId survey_id = 0;
    double lat = 0.0;
    double lon = 0.0;
    SpeciesSet species;
    /// Constituent survey ids, ascending; always includes survey_id.
    std::vector<SurveyId> source_ids;
    /// Balanced mode: the primary had already been absorbed but stayed
    /// eligible because it carries a rare species.
    bool reserved = false;

    friend bool operator==(const MergedRecord&, const MergedRecord&) = default;
};

/// Smallest absolute longitude difference in degrees, accounting for wrap.
inline double lon_delta_deg(double a, double b) {
    double d = std::abs(a - b);
    if (d > 180.0) d = 360.0 - d;
    return d;
}

/// True when `q` lies inside the patch box of `primary` (boundary inclusive).
/// The longitude scale uses the primary's latitude.
inline bool in_patch_box(const SurveyRecord& primary, const SurveyRecord& q, const MergeConfig& cfg) {
    const double lon_km = cfg.lon_km_per_deg_at_equator * std::cos(primary.lat * (std::numbers::pi / 180.0));
    return std::abs(q.lat - primary.lat) * cfg.lat_km_per_deg <= cfg.box_half_km &&
           lon_delta_deg(q.lon, primary.lon) * lon_km <= cfg.box_half_km;
}

/// Record positions (into `ds.records`) of every survey inside the primary's
/// patch, drawn from a radius pre-query. Ascending by position.
inline std::vector<std::uint32_t> neighbors_in_patch(const geo::GeoIndex& index, const Dataset& ds,
                                                     std::size_t primary_pos, const MergeConfig& cfg,
                                                     std::vector<geo::Neighbor>& scratch) {
    const SurveyRecord& p = ds.records[primary_pos];
    index.radius_query(location(p), cfg.radius_threshold_km, scratch);
    std::vector<std::uint32_t> out;
    out.reserve(scratch.size());
    for (const auto& nb : scratch)
        if (in_patch_box(p, ds.records[nb.slot], cfg)) out.push_back(nb.slot);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::uint32_t> neighbors_in_patch(const geo::GeoIndex& index, const Dataset& ds,
                                                     std::size_t primary_pos, const MergeConfig& cfg) {
    std::vector<geo::Neighbor> scratch;
    return neighbors_in_patch(index, ds, primary_pos, cfg, scratch);
}

/// Processing order for primaries: descending species count, then ascending survey_id.
inline std::vector<std::uint32_t> primary_order(const Dataset& ds) {
    std::vector<std::uint32_t> order(ds.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto& ra = ds.records[a];
        const auto& rb = ds.records[b];
        if (ra.species.size() != rb.species.size()) return ra.species.size() > rb.species.size();
        return ra.survey_id < rb.survey_id;
    });
    return order;
}

/// Species whose occurrence count over the whole dataset is below the rare threshold.
inline std::vector<bool> rare_species_mask(const Dataset& ds, std::size_t threshold) {
    std::vector<bool> rare(ds.catalog.size(), false);
    const auto& counts = ds.catalog.occurrence_count();
    for (std::size_t s = 0; s < rare.size(); ++s) rare[s] = counts[s] < threshold;
    return rare;
}

namespace detail {

inline MergedRecord make_merged(const Dataset& ds, std::uint32_t primary, const std::vector<std::uint32_t>& members) {
    const SurveyRecord& p = ds.records[primary];
    MergedRecord m{p.survey_id, p.lat, p.lon, {}, {}, false};
    for (std::uint32_t j : members) {
        const auto& sp = ds.records[j].species;
        m.species.insert(m.species.end(), sp.begin(), sp.end());
        m.source_ids.push_back(ds.records[j].survey_id);
    }
    normalize_set(m.species);
    std::sort(m.source_ids.begin(), m.source_ids.end());
    return m;
}

}  // namespace detail

/// Patch-coverage label aggregation over presence-only surveys.
///
/// Primaries are visited in `primary_order`. Each eligible primary emits one
/// record whose species are the union over every survey in its patch box.
/// Eligibility:
///   - Loose: every survey is a primary.
///   - Balanced: a survey absorbed by an earlier primary is skipped unless it
///     holds a species rarer than `rare_count_threshold`.
///   - Strict: an absorbed survey never becomes a primary.
/// Absorbed surveys still contribute labels to later primaries in all modes.
/// Output is sorted by survey_id.
inline std::vector<MergedRecord> merge_points(const Dataset& ds, const MergeConfig& cfg) {
    cfg.validate();
    std::vector<MergedRecord> out;
    const std::size_t n = ds.records.size();
    if (n == 0) return out;

    const geo::GeoIndex index = build_index(ds);
    const std::vector<std::uint32_t> order = primary_order(ds);

    if (cfg.mode == FilterMode::Loose) {
        out.resize(n);
        parallel_for(n, [&](std::size_t b, std::size_t e) {
            std::vector<geo::Neighbor> scratch;
            for (std::size_t i = b; i < e; ++i)
                out[i] = detail::make_merged(ds, static_cast<std::uint32_t>(i), neighbors_in_patch(index, ds, i, cfg, scratch));
        });
        return out;
    }

    const std::vector<bool> rare = rare_species_mask(ds, cfg.rare_count_threshold);
    auto has_rare = [&](const SurveyRecord& r) {
        return std::any_of(r.species.begin(), r.species.end(), [&](SpeciesIndex s) { return rare[s]; });
    };

    std::vector<bool> absorbed(n, false);
    std::vector<geo::Neighbor> scratch;
    out.reserve(n);
    for (std::uint32_t i : order) {
        bool reserved = false;
        if (absorbed[i]) {
            if (cfg.mode == FilterMode::Strict || !has_rare(ds.records[i])) continue;
            reserved = true;
        }
        const auto members = neighbors_in_patch(index, ds, i, cfg, scratch);
        for (std::uint32_t j : members) absorbed[j] = true;
        out.push_back(detail::make_merged(ds, i, members));
        out.back().reserved = reserved;
    }
    std::sort(out.begin(), out.end(), [](const MergedRecord& a, const MergedRecord& b) { return a.survey_id < b.survey_id; });
    return out;
}

/// Merged records as a dataset over the input's catalog (counts recomputed).
inline Dataset to_dataset(const std::vector<MergedRecord>& merged, const Dataset& input) {
    Dataset ds;
    ds.kind = input.kind;
    ds.catalog = input.catalog;
    ds.records.reserve(merged.size());
    for (const auto& m : merged) ds.records.push_back({m.survey_id, m.lat, m.lon, m.species});
    ds.catalog.recount(ds.records);
    return ds;
}

/// Wide-format file with an extra sourceIds column (ignored by the parser).
inline void write_merged(const std::vector<MergedRecord>& merged, const Dataset& input, const std::string& path) {
    std::string out = "surveyId,lat,lon,speciesIds,sourceIds\n";
    std::vector<RawSpeciesId> raw;
    for (const auto& m : merged) {
        out += std::to_string(m.survey_id) + ',' + format_double(m.lat) + ',' + format_double(m.lon) + ',';
        raw.clear();
        for (SpeciesIndex s : m.species) raw.push_back(input.catalog.raw(s));
        std::sort(raw.begin(), raw.end());
        for (std::size_t i = 0; i < raw.size(); ++i) out += (i ? " " : "") + std::to_string(raw[i]);
        out += ',';
        for (std::size_t i = 0; i < m.source_ids.size(); ++i) out += (i ? " " : "") + std::to_string(m.source_ids[i]);
        out += '\n';
    }
    csv::write_file(path, out);
}

struct MergeReport {
    std::size_t surveys_before = 0;
    std::size_t surveys_after = 0;
    std::size_t species_before = 0;
    std::size_t species_after = 0;
    double mean_species_before = 0.0;
    double mean_species_after = 0.0;
    /// Surveys that never acted as primary (absorbed and not reserved).
    std::size_t consumed = 0;
    /// Absorbed surveys kept as primaries because they hold a rare species.
    std::size_t reserved = 0;
};

inline MergeReport merge_stats(const Dataset& input, const std::vector<MergedRecord>& output) {
    MergeReport r;
    r.surveys_before = input.records.size();
    r.surveys_after = output.size();
    r.consumed = r.surveys_before >= r.surveys_after ? r.surveys_before - r.surveys_after : 0;

    std::vector<bool> seen_in(input.catalog.size(), false), seen_out(input.catalog.size(), false);
    std::size_t pairs_in = 0, pairs_out = 0;
    for (const auto& rec : input.records) {
        pairs_in += rec.species.size();
        for (SpeciesIndex s : rec.species) seen_in[s] = true;
    }
    for (const auto& m : output) {
        pairs_out += m.species.size();
        for (SpeciesIndex s : m.species) seen_out[s] = true;
        if (m.reserved) ++r.reserved;
    }
    r.species_before = static_cast<std::size_t>(std::count(seen_in.begin(), seen_in.end(), true));
    r.species_after = static_cast<std::size_t>(std::count(seen_out.begin(), seen_out.end(), true));
    if (r.surveys_before) r.mean_species_before = static_cast<double>(pairs_in) / static_cast<double>(r.surveys_before);
    if (r.surveys_after) r.mean_species_after = static_cast<double>(pairs_out) / static_cast<double>(r.surveys_after);
    return r;
}

}  // namespace sdm
