// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sdm/ingest.hpp"

namespace sdm::stats {

using Histogram = std::map<std::size_t, std::size_t>;

struct SpeciesPerSurvey {
    Histogram bins;  // species count -> number of surveys
    std::size_t surveys = 0;
    /// Most frequent bin; smallest count on ties. 0 for an empty dataset.
    std::size_t mode = 0;
    double mean = 0.0;
};

inline std::size_t histogram_mode(const Histogram& h) {
    std::size_t mode = 0, best = 0;
    for (const auto& [bin, count] : h)
        if (count > best) {
            best = count;
            mode = bin;
        }
    return mode;
}

inline SpeciesPerSurvey species_per_survey_hist(const Dataset& ds) {
    SpeciesPerSurvey r;
    std::size_t total = 0;
    for (const auto& rec : ds.records) {
        ++r.bins[rec.species.size()];
        total += rec.species.size();
    }
    r.surveys = ds.records.size();
    r.mode = histogram_mode(r.bins);
    if (r.surveys) r.mean = static_cast<double>(total) / static_cast<double>(r.surveys);
    return r;
}

struct OccurrencesPerSpecies {
    /// Dense species index -> number of surveys containing it.
    std::vector<std::size_t> per_species;
    /// Occurrence count -> number of species with that count (observed species only).
    Histogram frequency;
    std::size_t observed_species = 0;
    std::size_t tail_cutoff = 50;
    /// Fraction of observed species occurring fewer than `tail_cutoff` times.
    double fraction_below_cutoff = 0.0;
    std::size_t singletons = 0;
};

inline OccurrencesPerSpecies occurrences_per_species_hist(const Dataset& ds, std::size_t tail_cutoff = 50) {
    OccurrencesPerSpecies r;
    r.tail_cutoff = tail_cutoff;
    r.per_species.assign(ds.catalog.size(), 0);
    for (const auto& rec : ds.records)
        for (SpeciesIndex s : rec.species) ++r.per_species[s];
    std::size_t below = 0;
    for (std::size_t c : r.per_species) {
        if (c == 0) continue;
        ++r.observed_species;
        ++r.frequency[c];
        if (c < tail_cutoff) ++below;
        if (c == 1) ++r.singletons;
    }
    if (r.observed_species) r.fraction_below_cutoff = static_cast<double>(below) / static_cast<double>(r.observed_species);
    return r;
}

struct BoundingBox {
    std::size_t points = 0;
    double lat_min = 0, lat_max = 0, lon_min = 0, lon_max = 0;
    /// Quantile levels and their values (linear interpolation between order statistics).
    std::vector<double> levels{0.05, 0.25, 0.5, 0.75, 0.95};
    std::vector<double> lat_quantiles, lon_quantiles;
};

/// Linear-interpolation quantile of sorted data at level q in [0,1].
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline BoundingBox bbox_summary(const Dataset& ds) {
    BoundingBox b;
    b.points = ds.records.size();
    if (ds.records.empty()) {
        b.lat_quantiles.assign(b.levels.size(), 0.0);
        b.lon_quantiles.assign(b.levels.size(), 0.0);
        return b;
    }
    std::vector<double> lats, lons;
    lats.reserve(b.points);
    lons.reserve(b.points);
    for (const auto& r : ds.records) {
        lats.push_back(r.lat);
        lons.push_back(r.lon);
    }
    std::sort(lats.begin(), lats.end());
    std::sort(lons.begin(), lons.end());
    b.lat_min = lats.front();
    b.lat_max = lats.back();
    b.lon_min = lons.front();
    b.lon_max = lons.back();
    for (double q : b.levels) {
        b.lat_quantiles.push_back(quantile_sorted(lats, q));
        b.lon_quantiles.push_back(quantile_sorted(lons, q));
    }
    return b;
}

inline std::string format_histogram(const Histogram& h) {
    std::string out = "bin,count\n";
    for (const auto& [bin, count] : h) out += std::to_string(bin) + ',' + std::to_string(count) + '\n';
    return out;
}

/// Writes species_per_survey.csv, species_frequency.csv, occurrences_per_species.csv
/// and bbox.csv under `dir`.
inline void write_stats(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto sps = species_per_survey_hist(ds);
    const auto ops = occurrences_per_species_hist(ds);
    csv::write_file((dir / "species_per_survey.csv").string(), format_histogram(sps.bins));
    csv::write_file((dir / "species_frequency.csv").string(), format_histogram(ops.frequency));

    std::string per = "speciesId,count\n";
    for (std::size_t s = 0; s < ops.per_species.size(); ++s)
        if (ops.per_species[s]) per += std::to_string(ds.catalog.raw(static_cast<SpeciesIndex>(s))) + ',' + std::to_string(ops.per_species[s]) + '\n';
    csv::write_file((dir / "occurrences_per_species.csv").string(), per);

    const auto bb = bbox_summary(ds);
    std::string box = "statistic,lat,lon\n";
    box += "min," + format_double(bb.lat_min) + ',' + format_double(bb.lon_min) + '\n';
    box += "max," + format_double(bb.lat_max) + ',' + format_double(bb.lon_max) + '\n';
    for (std::size_t i = 0; i < bb.levels.size(); ++i)
        box += "q" + format_double(bb.levels[i]) + ',' + format_double(bb.lat_quantiles[i]) + ',' + format_double(bb.lon_quantiles[i]) + '\n';
    csv::write_file((dir / "bbox.csv").string(), box);
}

}  // namespace sdm::stats
