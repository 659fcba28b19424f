// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "sdm/ingest.hpp"

// Seeded generators for clustered survey data. Used by tests, benchmarks and
// the `synth` CLI subcommand; nothing here feeds production results.

namespace sdm::synth {

inline constexpr double kKmPerDegree = 111.195;

struct Region {
    double lat = 0.0;
    double lon = 0.0;
    /// Raw ids of the species living here, most prevalent first.
    std::vector<RawSpeciesId> pool;
    std::vector<double> prevalence;
};

struct WorldConfig {
    std::size_t regions = 20;
    std::size_t global_species = 400;
    std::size_t pool_size = 40;
    double lat_min = 42.0, lat_max = 55.0;
    double lon_min = -4.0, lon_max = 18.0;
    RawSpeciesId first_species_id = 1000;
};

struct World {
    std::vector<Region> regions;
};

inline World make_world(const WorldConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ulat(cfg.lat_min, cfg.lat_max), ulon(cfg.lon_min, cfg.lon_max);
    // Zipf-like global popularity so some species are shared by many regions.
    std::vector<double> popularity(cfg.global_species);
    for (std::size_t s = 0; s < popularity.size(); ++s) popularity[s] = 1.0 / std::pow(static_cast<double>(s + 1), 0.8);
    World w;
    for (std::size_t r = 0; r < cfg.regions; ++r) {
        Region reg;
        reg.lat = ulat(rng);
        reg.lon = ulon(rng);
        std::vector<double> weights = popularity;
        const std::size_t k = std::min(cfg.pool_size, cfg.global_species);
        for (std::size_t i = 0; i < k; ++i) {
            std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
            const std::size_t s = pick(rng);
            weights[s] = 0.0;
            reg.pool.push_back(cfg.first_species_id + static_cast<RawSpeciesId>(s));
            reg.prevalence.push_back(0.9 / (1.0 + 0.25 * static_cast<double>(i)));
        }
        w.regions.push_back(std::move(reg));
    }
    return w;
}

inline void jitter(double& lat, double& lon, double sigma_km, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sigma_km);
    const double c = std::max(0.05, std::cos(lat * std::numbers::pi / 180.0));
    lat = std::clamp(lat + n(rng) / kKmPerDegree, -90.0, 90.0);
    lon = std::clamp(lon + n(rng) / (kKmPerDegree * c), -180.0, 180.0);
}

inline double round_coord(double v) { return std::round(v * 1e6) / 1e6; }

/// Species list of a PA-style survey: each pool species independently at its prevalence.
inline std::vector<RawSpeciesId> pa_species(const Region& reg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RawSpeciesId> out;
    for (std::size_t i = 0; i < reg.pool.size(); ++i)
        if (u(rng) < reg.prevalence[i]) out.push_back(reg.pool[i]);
    if (out.empty()) out.push_back(reg.pool.front());
    return out;
}

/// Species list of a PO-style survey: one observation most of the time.
inline std::vector<RawSpeciesId> po_species(const Region& reg, std::mt19937_64& rng, double single_prob = 0.85) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::discrete_distribution<std::size_t> pick(reg.prevalence.begin(), reg.prevalence.end());
    std::size_t count = 1;
    while (count < 4 && u(rng) > single_prob) ++count;
    std::vector<RawSpeciesId> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(reg.pool[pick(rng)]);
    return out;
}

/// Builds a dataset from raw rows (ids, coordinates, raw species lists).
struct RawRow {
    SurveyId id;
    double lat, lon;
    std::vector<RawSpeciesId> species;
};

inline Dataset dataset_from_rows(std::vector<RawRow> rows, DatasetKind kind) {
    std::vector<RawSpeciesId> all;
    for (const auto& r : rows) all.insert(all.end(), r.species.begin(), r.species.end());
    Dataset ds;
    ds.kind = kind;
    ds.catalog = SpeciesCatalog(std::move(all));
    std::sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) { return a.id < b.id; });
    for (auto& r : rows) {
        SurveyRecord rec{r.id, r.lat, r.lon, {}};
        for (RawSpeciesId s : r.species) rec.species.push_back(*ds.catalog.dense(s));
        normalize_set(rec.species);
        ds.records.push_back(std::move(rec));
    }
    ds.catalog.recount(ds.records);
    return ds;
}

struct ClusteredPoConfig {
    std::size_t surveys = 50000;
    std::size_t clusters = 500;
    double sigma_km = 0.25;
    double single_prob = 0.85;
    WorldConfig world;
};

/// Presence-only surveys scattered in tight Gaussian clusters, mostly one species each.
inline Dataset clustered_po(const ClusteredPoConfig& cfg, std::uint64_t seed, SurveyId first_id = 1) {
    std::mt19937_64 rng(seed);
    WorldConfig wc = cfg.world;
    wc.regions = cfg.clusters;
    const World w = make_world(wc, rng);
    std::uniform_int_distribution<std::size_t> which(0, w.regions.size() - 1);
    std::vector<RawRow> rows;
    rows.reserve(cfg.surveys);
    for (std::size_t i = 0; i < cfg.surveys; ++i) {
        const Region& reg = w.regions[which(rng)];
        double lat = reg.lat, lon = reg.lon;
        jitter(lat, lon, cfg.sigma_km, rng);
        rows.push_back({first_id + static_cast<SurveyId>(i), round_coord(lat), round_coord(lon), po_species(reg, rng, cfg.single_prob)});
    }
    return dataset_from_rows(std::move(rows), DatasetKind::PoTrain);
}

/// Uniform random points in a lat/lon window with a few random species each.
inline Dataset uniform_points(std::size_t n, std::uint64_t seed, double lat_min = -60, double lat_max = 70,
                              double lon_min = -180, double lon_max = 180, std::size_t species = 50) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ulat(lat_min, lat_max), ulon(lon_min, lon_max);
    std::uniform_int_distribution<RawSpeciesId> usp(1, static_cast<RawSpeciesId>(species));
    std::uniform_int_distribution<int> ucount(1, 3);
    std::vector<RawRow> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RawRow r{static_cast<SurveyId>(i + 1), ulat(rng), ulon(rng), {}};
        const int c = ucount(rng);
        for (int j = 0; j < c; ++j) r.species.push_back(usp(rng));
        rows.push_back(std::move(r));
    }
    return dataset_from_rows(std::move(rows), DatasetKind::PoTrain);
}

struct FixtureConfig {
    WorldConfig world{12, 150, 30};
    std::size_t pa_regions = 6;  // regions with PA coverage (the first ones)
    std::size_t pa_per_region = 40;
    std::size_t po_per_region = 250;
    std::size_t test_per_region = 12;
    double pa_sigma_km = 3.0;
    double po_sigma_km = 0.4;
    double test_sigma_km = 3.0;
};

struct Fixture {
    Dataset pa_train;
    Dataset po_train;
    Dataset test;
    /// Species truth for the test surveys (PA-style labels).
    Dataset test_truth;
};

/// Small world for end-to-end runs: PA coverage in some regions, PO
/// everywhere, test surveys in both covered and uncovered regions.
inline Fixture make_fixture(const FixtureConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const World w = make_world(cfg.world, rng);
    std::vector<RawRow> pa, po, test, truth;
    SurveyId next_pa = 100000, next_po = 500000, next_test = 900000;
    for (std::size_t r = 0; r < w.regions.size(); ++r) {
        const Region& reg = w.regions[r];
        if (r < cfg.pa_regions) {
            for (std::size_t i = 0; i < cfg.pa_per_region; ++i) {
                double lat = reg.lat, lon = reg.lon;
                jitter(lat, lon, cfg.pa_sigma_km, rng);
                pa.push_back({next_pa++, round_coord(lat), round_coord(lon), pa_species(reg, rng)});
            }
        }
        for (std::size_t i = 0; i < cfg.po_per_region; ++i) {
            double lat = reg.lat, lon = reg.lon;
            jitter(lat, lon, cfg.po_sigma_km * (1.0 + static_cast<double>(i % 5)), rng);
            po.push_back({next_po++, round_coord(lat), round_coord(lon), po_species(reg, rng)});
        }
        for (std::size_t i = 0; i < cfg.test_per_region; ++i) {
            double lat = reg.lat, lon = reg.lon;
            jitter(lat, lon, cfg.test_sigma_km, rng);
            const SurveyId id = next_test++;
            test.push_back({id, round_coord(lat), round_coord(lon), {}});
            truth.push_back({id, round_coord(lat), round_coord(lon), pa_species(reg, rng)});
        }
    }
    return {dataset_from_rows(std::move(pa), DatasetKind::PaTrain), dataset_from_rows(std::move(po), DatasetKind::PoTrain),
            dataset_from_rows(std::move(test), DatasetKind::Test), dataset_from_rows(std::move(truth), DatasetKind::PaTrain)};
}

}  // namespace sdm::synth
