// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdm/common.hpp"
#include "sdm/csv.hpp"

namespace sdm {

enum class DatasetKind { PaTrain, PoTrain, Test };

enum class OccurrenceFormat { Auto, Long, Wide };

inline const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::PaTrain: return "pa";
        case DatasetKind::PoTrain: return "po";
        case DatasetKind::Test: return "test";
    }
    return "?";
}

inline DatasetKind parse_dataset_kind(std::string_view s) {
    const std::string l = csv::lower(s);
    if (l == "pa" || l == "pa_train") return DatasetKind::PaTrain;
    if (l == "po" || l == "po_train") return DatasetKind::PoTrain;
    if (l == "test") return DatasetKind::Test;
    throw Error("unknown dataset kind '" + std::string(s) + "' (expected pa, po or test)");
}

struct SurveyRecord {
    SurveyId survey_id = 0;
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees
    SpeciesSet species;

    friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

/// Bidirectional raw id <-> dense index map. Dense indices follow ascending
/// raw id order, so the mapping depends only on the set of ids seen.
class SpeciesCatalog {
public:
    SpeciesCatalog() = default;

    explicit SpeciesCatalog(std::vector<RawSpeciesId> raw_ids) {
        std::sort(raw_ids.begin(), raw_ids.end());
        raw_ids.erase(std::unique(raw_ids.begin(), raw_ids.end()), raw_ids.end());
        dense_to_raw_ = std::move(raw_ids);
        raw_to_dense_.reserve(dense_to_raw_.size());
        for (std::size_t i = 0; i < dense_to_raw_.size(); ++i)
            raw_to_dense_.emplace(dense_to_raw_[i], static_cast<SpeciesIndex>(i));
        occurrence_count_.assign(dense_to_raw_.size(), 0);
    }

    std::size_t size() const { return dense_to_raw_.size(); }

    RawSpeciesId raw(SpeciesIndex dense) const { return dense_to_raw_.at(dense); }

    std::optional<SpeciesIndex> dense(RawSpeciesId raw) const {
        auto it = raw_to_dense_.find(raw);
        if (it == raw_to_dense_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<RawSpeciesId>& raw_ids() const { return dense_to_raw_; }
    const std::vector<std::size_t>& occurrence_count() const { return occurrence_count_; }

    void recount(const std::vector<SurveyRecord>& records) {
        occurrence_count_.assign(size(), 0);
        for (const auto& r : records)
            for (SpeciesIndex s : r.species) ++occurrence_count_.at(s);
    }

    friend bool operator==(const SpeciesCatalog& a, const SpeciesCatalog& b) {
        return a.dense_to_raw_ == b.dense_to_raw_ && a.occurrence_count_ == b.occurrence_count_;
    }

private:
    std::vector<RawSpeciesId> dense_to_raw_;
    std::unordered_map<RawSpeciesId, SpeciesIndex> raw_to_dense_;
    std::vector<std::size_t> occurrence_count_;
};

/// Records sorted by survey_id; species are dense indices into `catalog`.
struct Dataset {
    DatasetKind kind = DatasetKind::PaTrain;
    std::vector<SurveyRecord> records;
    SpeciesCatalog catalog;

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& r : records) n += r.species.size();
        return n;
    }

    const SurveyRecord* find(SurveyId id) const {
        auto it = std::lower_bound(records.begin(), records.end(), id,
                                   [](const SurveyRecord& r, SurveyId v) { return r.survey_id < v; });
        return it != records.end() && it->survey_id == id ? &*it : nullptr;
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.kind == b.kind && a.records == b.records && a.catalog == b.catalog;
    }
};

inline constexpr double kCoordinateConflictTolerance = 1e-6;

namespace detail {

struct PendingRecord {
    double lat;
    double lon;
    std::size_t first_line;
    std::vector<RawSpeciesId> species;
};

inline void check_coordinates(double lat, double lon, const std::string& at) {
    if (!(lat >= -90.0 && lat <= 90.0)) throw Error(at + "latitude out of range: " + format_double(lat));
    if (!(lon >= -180.0 && lon <= 180.0)) throw Error(at + "longitude out of range: " + format_double(lon));
}

}  // namespace detail

/// Parses a survey table (CSV with header). Long format has one species per
/// row (surveyId,lat,lon,speciesId); wide format carries a space-separated
/// speciesIds column. A header with only surveyId,lat,lon is accepted as a
/// species-less table. Rows sharing a surveyId are grouped.
inline Dataset parse_occurrences_text(std::string_view text, DatasetKind kind,
                                      OccurrenceFormat format = OccurrenceFormat::Auto,
                                      const std::string& source = "<memory>") {
    csv::LineReader reader(text);
    std::string_view line;
    std::vector<std::string_view> fields;

    Dataset ds;
    ds.kind = kind;

    // Header (skip leading blank lines).
    bool have_header = false;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        have_header = true;
        break;
    }
    if (!have_header) throw Error(source + ": missing header row");

    csv::split(line, fields);
    int col_id = -1, col_lat = -1, col_lon = -1, col_sp = -1, col_sps = -1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string name = csv::lower(fields[i]);
        const int idx = static_cast<int>(i);
        if (name == "surveyid") col_id = idx;
        else if (name == "lat") col_lat = idx;
        else if (name == "lon") col_lon = idx;
        else if (name == "speciesid") col_sp = idx;
        else if (name == "speciesids") col_sps = idx;
    }
    if (col_id < 0 || col_lat < 0 || col_lon < 0)
        throw Error(csv::where(source, reader.line_number()) + "header must contain surveyId, lat, lon");

    bool wide;
    switch (format) {
        case OccurrenceFormat::Long:
            if (col_sp < 0) throw Error(source + ": long format requires a speciesId column");
            wide = false;
            break;
        case OccurrenceFormat::Wide:
            if (col_sps < 0) throw Error(source + ": wide format requires a speciesIds column");
            wide = true;
            break;
        default:
            if (col_sp >= 0 && col_sps >= 0)
                throw Error(source + ": header has both speciesId and speciesIds columns");
            wide = col_sp < 0;
            break;
    }
    const int col_species = wide ? col_sps : col_sp;
    const int max_col = std::max({col_id, col_lat, col_lon, col_species});

    std::unordered_map<SurveyId, std::size_t> slot_of;
    std::vector<SurveyId> ids;
    std::vector<detail::PendingRecord> pending;
    std::vector<std::string_view> tokens;

    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const std::string at = csv::where(source, reader.line_number());
        csv::split(line, fields);
        if (static_cast<int>(fields.size()) <= max_col)
            throw Error(at + "malformed row: expected at least " + std::to_string(max_col + 1) + " fields, got " +
                        std::to_string(fields.size()));

        SurveyId sid;
        double lat, lon;
        if (!csv::parse_id(fields[col_id], sid)) throw Error(at + "malformed surveyId '" + std::string(fields[col_id]) + "'");
        if (!csv::parse_double(fields[col_lat], lat)) throw Error(at + "malformed lat '" + std::string(fields[col_lat]) + "'");
        if (!csv::parse_double(fields[col_lon], lon)) throw Error(at + "malformed lon '" + std::string(fields[col_lon]) + "'");
        detail::check_coordinates(lat, lon, at);

        auto [it, inserted] = slot_of.emplace(sid, pending.size());
        if (inserted) {
            pending.push_back({lat, lon, reader.line_number(), {}});
            ids.push_back(sid);
        } else {
            const auto& p = pending[it->second];
            if (std::abs(p.lat - lat) > kCoordinateConflictTolerance ||
                std::abs(p.lon - lon) > kCoordinateConflictTolerance)
                throw Error(at + "conflicting coordinates for surveyId " + std::to_string(sid) + " (first seen on line " +
                            std::to_string(p.first_line) + ")");
        }
        auto& rec = pending[it->second];

        if (col_species >= 0) {
            const std::string_view cell = fields[col_species];
            if (wide) {
                tokens.clear();
                std::size_t start = 0;
                while (start < cell.size()) {
                    while (start < cell.size() && std::isspace(static_cast<unsigned char>(cell[start]))) ++start;
                    std::size_t end = start;
                    while (end < cell.size() && !std::isspace(static_cast<unsigned char>(cell[end]))) ++end;
                    if (end > start) tokens.push_back(cell.substr(start, end - start));
                    start = end;
                }
                for (auto tok : tokens) {
                    RawSpeciesId sp;
                    if (!csv::parse_id(tok, sp)) throw Error(at + "malformed species id '" + std::string(tok) + "'");
                    rec.species.push_back(sp);
                }
            } else if (!cell.empty()) {
                RawSpeciesId sp;
                if (!csv::parse_id(cell, sp)) throw Error(at + "malformed speciesId '" + std::string(cell) + "'");
                rec.species.push_back(sp);
            }
        }
        if (kind == DatasetKind::Test && !rec.species.empty())
            throw Error(at + "test dataset rows must not carry species");
    }

    std::vector<RawSpeciesId> all_species;
    for (const auto& p : pending) all_species.insert(all_species.end(), p.species.begin(), p.species.end());
    ds.catalog = SpeciesCatalog(std::move(all_species));

    std::vector<std::size_t> order(pending.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

    ds.records.reserve(pending.size());
    for (std::size_t i : order) {
        SurveyRecord r{ids[i], pending[i].lat, pending[i].lon, {}};
        r.species.reserve(pending[i].species.size());
        for (RawSpeciesId raw : pending[i].species) r.species.push_back(*ds.catalog.dense(raw));
        normalize_set(r.species);
        ds.records.push_back(std::move(r));
    }
    ds.catalog.recount(ds.records);
    return ds;
}

inline Dataset parse_occurrences(const std::string& path, DatasetKind kind,
                                 OccurrenceFormat format = OccurrenceFormat::Auto) {
    const std::string text = csv::read_file(path);
    return parse_occurrences_text(text, kind, format, path);
}

/// Wide-format serialization. Coordinates use the shortest round-trip
/// representation; species are written as ascending raw ids.
inline std::string format_dataset(const Dataset& ds) {
    std::string out = "surveyId,lat,lon,speciesIds\n";
    out.reserve(ds.records.size() * 48 + out.size());
    std::vector<RawSpeciesId> raw;
    for (const auto& r : ds.records) {
        out += std::to_string(r.survey_id);
        out += ',';
        out += format_double(r.lat);
        out += ',';
        out += format_double(r.lon);
        out += ',';
        raw.clear();
        for (SpeciesIndex s : r.species) raw.push_back(ds.catalog.raw(s));
        std::sort(raw.begin(), raw.end());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(raw[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_dataset(const Dataset& ds, const std::string& path) { csv::write_file(path, format_dataset(ds)); }

/// Rewrites each dataset's species indices against one shared catalog (the
/// union of all raw ids). Occurrence counts stay per dataset.
inline SpeciesCatalog unify_catalogs(const std::vector<Dataset*>& datasets) {
    std::vector<RawSpeciesId> all;
    for (const Dataset* d : datasets) all.insert(all.end(), d->catalog.raw_ids().begin(), d->catalog.raw_ids().end());
    SpeciesCatalog shared(std::move(all));
    for (Dataset* d : datasets) {
        for (auto& r : d->records) {
            for (auto& s : r.species) s = *shared.dense(d->catalog.raw(s));
            normalize_set(r.species);
        }
        SpeciesCatalog local = shared;
        local.recount(d->records);
        d->catalog = std::move(local);
    }
    return shared;
}

}  // namespace sdm
