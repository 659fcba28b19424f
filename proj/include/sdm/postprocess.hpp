// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdm/dataset_index.hpp"
#include "sdm/losses.hpp"
#include "sdm/predictor.hpp"

namespace sdm::post {

struct TopKConfig {
    double threshold = 0.5;
    std::size_t k_cap = 25;
    bool fallback_top1 = false;

    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("TopKConfig: threshold must be in [0,1]");
        if (k_cap < 1) throw Error("TopKConfig: k_cap must be >= 1");
    }
};

/// Threshold used for the out-of-distribution expert.
inline constexpr double kOodThreshold = 0.475;

struct VoteConfig {
    std::size_t neighbor_count = 5;
    double min_frequency = 0.8;
    bool strictly_greater = true;

    void validate() const {
        if (neighbor_count < 1) throw Error("VoteConfig: neighbor_count must be >= 1");
        if (!(min_frequency > 0.0 && min_frequency <= 1.0)) throw Error("VoteConfig: min_frequency must be in (0,1]");
    }
};

/// Five nearest PA surveys, species present in more than 80% of them.
inline VoteConfig pa_vote() { return {5, 0.8, true}; }
/// Six nearest strict-merged PO surveys, species present in more than half.
inline VoteConfig po_vote() { return {6, 0.5, true}; }

/// Species scoring at least `threshold`, ranked by descending score (ties by
/// ascending index) and truncated to `k_cap`. Species absent from the sparse
/// row score 0. Returned as an ascending set.
inline SpeciesSet threshold_top_k(const std::vector<ScoreEntry>& row, std::size_t num_species, const TopKConfig& cfg) {
    cfg.validate();
    std::vector<ScoreEntry> ranked;
    for (const auto& e : row)
        if (e.score >= cfg.threshold) ranked.push_back(e);
    auto by_rank = [](const ScoreEntry& a, const ScoreEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.species < b.species;
    };
    std::sort(ranked.begin(), ranked.end(), by_rank);
    if (ranked.size() > cfg.k_cap) ranked.resize(cfg.k_cap);

    // A zero threshold admits unscored species; they rank last, by index.
    if (cfg.threshold <= 0.0 && ranked.size() < cfg.k_cap) {
        std::size_t j = 0;
        for (SpeciesIndex s = 0; s < num_species && ranked.size() < cfg.k_cap; ++s) {
            while (j < row.size() && row[j].species < s) ++j;
            if (j < row.size() && row[j].species == s) continue;
            ranked.push_back({s, 0.0});
        }
    }

    if (ranked.empty() && cfg.fallback_top1) {
        if (!row.empty()) {
            ranked.push_back(*std::min_element(row.begin(), row.end(), by_rank));
        } else if (num_species > 0) {
            ranked.push_back({0, 0.0});
        }
    }

    SpeciesSet out;
    out.reserve(ranked.size());
    for (const auto& e : ranked) out.push_back(e.species);
    normalize_set(out);
    return out;
}

/// Species held by more than `min_frequency` of the nearest reference surveys
/// (or at least, when strictly_greater is false). With fewer references than
/// neighbor_count, all of them are used and the denominator shrinks.
inline SpeciesSet neighbor_vote(const geo::GeoPoint& center, const geo::GeoIndex& ref_index, const Dataset& reference,
                                const VoteConfig& cfg) {
    cfg.validate();
    const auto nn = ref_index.knn_query(center, cfg.neighbor_count);
    SpeciesSet out;
    if (nn.empty()) return out;
    std::map<SpeciesIndex, std::size_t> counts;
    for (const auto& nb : nn)
        for (SpeciesIndex s : reference.records[nb.slot].species) ++counts[s];
    const double denom = static_cast<double>(nn.size());
    for (const auto& [s, c] : counts) {
        const double freq = static_cast<double>(c) / denom;
        if (cfg.strictly_greater ? freq > cfg.min_frequency : freq >= cfg.min_frequency) out.push_back(s);
    }
    return out;
}

inline SpeciesSet neighbor_vote(const SurveyRecord& test, const geo::GeoIndex& ref_index, const Dataset& reference,
                                const VoteConfig& cfg) {
    return neighbor_vote(location(test), ref_index, reference, cfg);
}

inline SpeciesSet finalize(const SpeciesSet& predicted, const SpeciesSet& votes) { return set_union(predicted, votes); }

/// Top-K per row of `scores` for every survey in `test`; surveys without a row get an empty score row.
inline Predictions top_k_all(const ScoreMatrix& scores, const Dataset& test, const TopKConfig& cfg) {
    Predictions out;
    static const std::vector<ScoreEntry> kEmpty;
    for (const auto& r : test.records) {
        const auto* row = scores.find(r.survey_id);
        out[r.survey_id] = threshold_top_k(row ? *row : kEmpty, scores.num_species(), cfg);
    }
    return out;
}

inline Predictions votes_all(const Dataset& test, const geo::GeoIndex& ref_index, const Dataset& reference,
                             const VoteConfig& cfg) {
    std::vector<SpeciesSet> sets(test.records.size());
    parallel_for(sets.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) sets[i] = neighbor_vote(test.records[i], ref_index, reference, cfg);
    }, 256);
    Predictions out;
    for (std::size_t i = 0; i < sets.size(); ++i) out[test.records[i].survey_id] = std::move(sets[i]);
    return out;
}

inline Predictions finalize_all(const Predictions& predicted, const Predictions& votes) {
    Predictions out = predicted;
    for (const auto& [id, v] : votes) out[id] = finalize(out[id], v);
    return out;
}

struct GridSpec {
    std::vector<double> thresholds;
    std::vector<std::size_t> k_caps;

    /// thresholds 0.10..0.90 step 0.05, k_cap 5..50 step 5.
    static GridSpec defaults() {
        GridSpec g;
        for (int i = 10; i <= 90; i += 5) g.thresholds.push_back(i / 100.0);
        for (std::size_t k = 5; k <= 50; k += 5) g.k_caps.push_back(k);
        return g;
    }
};

struct GridResult {
    TopKConfig best;
    double f1 = 0.0;
};

/// Exhaustive search for the Top-K parameters maximizing samples-averaged F1
/// against `truth` (after merging with `votes`, which may be empty). Ties keep
/// the earliest grid point (lower threshold, then lower k_cap).
inline GridResult grid_search(const ScoreMatrix& scores, const Dataset& holdout, const Predictions& truth,
                              const Predictions& votes, const GridSpec& grid) {
    if (grid.thresholds.empty() || grid.k_caps.empty()) throw Error("grid_search: empty grid");
    GridResult res;
    bool first = true;
    for (double t : grid.thresholds) {
        for (std::size_t k : grid.k_caps) {
            const TopKConfig cfg{t, k, false};
            const Predictions pred = finalize_all(top_k_all(scores, holdout, cfg), votes);
            const double f1 = samples_f1(truth, pred);
            if (first || f1 > res.f1) {
                res.best = cfg;
                res.f1 = f1;
                first = false;
            }
        }
    }
    return res;
}

/// Submission rows keyed by survey, species as raw ids (ascending).
using RawPredictions = std::map<SurveyId, std::vector<RawSpeciesId>>;

inline RawPredictions to_raw(const Predictions& p, const SpeciesCatalog& catalog) {
    RawPredictions out;
    for (const auto& [id, set] : p) {
        auto& v = out[id];
        for (SpeciesIndex s : set) v.push_back(catalog.raw(s));
        std::sort(v.begin(), v.end());
    }
    return out;
}

inline std::string format_submission(const RawPredictions& p) {
    std::string out = "surveyId,predictions\n";
    for (const auto& [id, v] : p) {
        out += std::to_string(id);
        out += ',';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(v[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_submission(const RawPredictions& p, const std::string& path) {
    csv::write_file(path, format_submission(p));
}

inline RawPredictions parse_submission_text(std::string_view text, const std::string& source = "<memory>") {
    csv::LineReader reader(text);
    std::string_view line;
    std::vector<std::string_view> f;
    bool header = false;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        header = true;
        break;
    }
    if (!header) throw Error(source + ": missing header row");
    csv::split(line, f);
    int ci = -1, cp = -1;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string n = csv::lower(f[i]);
        if (n == "surveyid") ci = static_cast<int>(i);
        else if (n == "predictions") cp = static_cast<int>(i);
    }
    if (ci < 0 || cp < 0) throw Error(source + ": header must contain surveyId, predictions");
    RawPredictions out;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const std::string at = csv::where(source, reader.line_number());
        csv::split(line, f);
        if (static_cast<int>(f.size()) <= std::max(ci, cp)) throw Error(at + "malformed row");
        SurveyId id;
        if (!csv::parse_int(f[ci], id)) throw Error(at + "malformed surveyId '" + std::string(f[ci]) + "'");
        if (out.count(id)) throw Error(at + "duplicate surveyId " + std::to_string(id));
        auto& v = out[id];
        std::string_view cell = f[cp];
        std::size_t pos = 0;
        while (pos < cell.size()) {
            while (pos < cell.size() && cell[pos] == ' ') ++pos;
            std::size_t end = pos;
            while (end < cell.size() && cell[end] != ' ') ++end;
            if (end > pos) {
                RawSpeciesId s;
                if (!csv::parse_int(cell.substr(pos, end - pos), s))
                    throw Error(at + "malformed species id '" + std::string(cell.substr(pos, end - pos)) + "'");
                v.push_back(s);
            }
            pos = end;
        }
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
}

inline RawPredictions read_submission(const std::string& path) {
    return parse_submission_text(csv::read_file(path), path);
}

/// Dataset species as raw-id sets (used as evaluation truth).
inline RawPredictions raw_sets(const Dataset& ds) {
    RawPredictions out;
    for (const auto& r : ds.records) {
        auto& v = out[r.survey_id];
        for (SpeciesIndex s : r.species) v.push_back(ds.catalog.raw(s));
        std::sort(v.begin(), v.end());
    }
    return out;
}

}  // namespace sdm::post
