// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "json.hpp"
#include "sdm/digest.hpp"
#include "sdm/gate.hpp"
#include "sdm/ingest.hpp"
#include "sdm/losses.hpp"
#include "sdm/postprocess.hpp"
#include "sdm/predictor.hpp"
#include "sdm/pseudo_label.hpp"

namespace sdm {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
    std::string pa_train;
    std::string po_train;
    std::string test;
    std::string out_dir = "out";
    /// Optional externally produced expert scores (triplet CSV).
    std::string in_scores;
    std::string ood_scores;
    /// Optional truth for the test surveys; when set the manifest records F1.
    std::string truth;

    double gate_radius_km = gate::kDefaultGateRadiusKm;
    std::size_t predictor_k = 10;
    /// Geometry for both merges; `merge.mode` selects the OOD training set.
    /// The OOD vote reference is always the strict merge.
    MergeConfig merge;

    /// Fixed in-distribution Top-K; when unset it is grid-searched on a PA holdout.
    std::optional<post::TopKConfig> in_top_k;
    post::GridSpec grid = post::GridSpec::defaults();
    double holdout_fraction = 0.2;
    post::TopKConfig ood_top_k{post::kOodThreshold, 25, false};
    post::VoteConfig in_vote = post::pa_vote();
    post::VoteConfig ood_vote = post::po_vote();
    std::uint64_t seed = 42;
};

using nlohmann::json;

inline json to_json(const MergeConfig& m) {
    return {{"box_half_km", m.box_half_km},
            {"radius_threshold_km", m.radius_threshold_km},
            {"lat_km_per_deg", m.lat_km_per_deg},
            {"lon_km_per_deg_at_equator", m.lon_km_per_deg_at_equator},
            {"rare_count_threshold", m.rare_count_threshold},
            {"mode", to_string(m.mode)}};
}

inline void from_json_into(const json& j, MergeConfig& m) {
    if (!j.is_object()) throw Error("config: 'merge' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "box_half_km") m.box_half_km = it->get<double>();
        else if (k == "radius_threshold_km") m.radius_threshold_km = it->get<double>();
        else if (k == "lat_km_per_deg") m.lat_km_per_deg = it->get<double>();
        else if (k == "lon_km_per_deg_at_equator") m.lon_km_per_deg_at_equator = it->get<double>();
        else if (k == "rare_count_threshold") m.rare_count_threshold = it->get<std::size_t>();
        else if (k == "mode") m.mode = parse_filter_mode(it->get<std::string>());
        else throw Error("config: unknown key 'merge." + k + "'");
    }
}

inline json to_json(const post::TopKConfig& t) {
    return {{"threshold", t.threshold}, {"k_cap", t.k_cap}, {"fallback_top1", t.fallback_top1}};
}

inline void from_json_into(const json& j, post::TopKConfig& t, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "threshold") t.threshold = it->get<double>();
        else if (k == "k_cap") t.k_cap = it->get<std::size_t>();
        else if (k == "fallback_top1") t.fallback_top1 = it->get<bool>();
        else throw Error("config: unknown key '" + where + "." + k + "'");
    }
}

inline json to_json(const post::VoteConfig& v) {
    return {{"neighbor_count", v.neighbor_count}, {"min_frequency", v.min_frequency}, {"strictly_greater", v.strictly_greater}};
}

inline void from_json_into(const json& j, post::VoteConfig& v, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "neighbor_count") v.neighbor_count = it->get<std::size_t>();
        else if (k == "min_frequency") v.min_frequency = it->get<double>();
        else if (k == "strictly_greater") v.strictly_greater = it->get<bool>();
        else throw Error("config: unknown key '" + where + "." + k + "'");
    }
}

inline json to_json(const PipelineConfig& c) {
    json j = {{"pa_train", c.pa_train},
              {"po_train", c.po_train},
              {"test", c.test},
              {"out_dir", c.out_dir},
              {"in_scores", c.in_scores},
              {"ood_scores", c.ood_scores},
              {"truth", c.truth},
              {"gate_radius_km", c.gate_radius_km},
              {"predictor_k", c.predictor_k},
              {"merge", to_json(c.merge)},
              {"grid", {{"thresholds", c.grid.thresholds}, {"k_caps", c.grid.k_caps}}},
              {"holdout_fraction", c.holdout_fraction},
              {"ood_top_k", to_json(c.ood_top_k)},
              {"in_vote", to_json(c.in_vote)},
              {"ood_vote", to_json(c.ood_vote)},
              {"seed", c.seed}};
    j["in_top_k"] = c.in_top_k ? to_json(*c.in_top_k) : json(nullptr);
    return j;
}

/// Overlays keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_config(const json& j, PipelineConfig& c) {
    if (!j.is_object()) throw Error("config: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const json& v = *it;
        if (k == "pa_train") c.pa_train = v.get<std::string>();
        else if (k == "po_train") c.po_train = v.get<std::string>();
        else if (k == "test") c.test = v.get<std::string>();
        else if (k == "out_dir") c.out_dir = v.get<std::string>();
        else if (k == "in_scores") c.in_scores = v.get<std::string>();
        else if (k == "ood_scores") c.ood_scores = v.get<std::string>();
        else if (k == "truth") c.truth = v.get<std::string>();
        else if (k == "gate_radius_km") c.gate_radius_km = v.get<double>();
        else if (k == "predictor_k") c.predictor_k = v.get<std::size_t>();
        else if (k == "merge") from_json_into(v, c.merge);
        else if (k == "grid") {
            if (v.contains("thresholds")) c.grid.thresholds = v.at("thresholds").get<std::vector<double>>();
            if (v.contains("k_caps")) c.grid.k_caps = v.at("k_caps").get<std::vector<std::size_t>>();
        } else if (k == "holdout_fraction") c.holdout_fraction = v.get<double>();
        else if (k == "in_top_k") {
            if (v.is_null()) c.in_top_k.reset();
            else {
                post::TopKConfig t = c.in_top_k.value_or(post::TopKConfig{});
                from_json_into(v, t, "in_top_k");
                c.in_top_k = t;
            }
        } else if (k == "ood_top_k") from_json_into(v, c.ood_top_k, "ood_top_k");
        else if (k == "in_vote") from_json_into(v, c.in_vote, "in_vote");
        else if (k == "ood_vote") from_json_into(v, c.ood_vote, "ood_vote");
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else throw Error("config: unknown key '" + k + "'");
    }
}

inline json read_json_file(const std::string& path) {
    try {
        return json::parse(csv::read_file(path));
    } catch (const json::exception& e) {
        throw Error(path + ": invalid JSON: " + e.what());
    }
}

struct PipelineResult {
    std::size_t in_distribution = 0;
    std::size_t out_of_distribution = 0;
    post::TopKConfig in_top_k;
    std::optional<double> holdout_f1;
    std::optional<double> test_f1;
    std::string submission_path;
    std::string manifest_path;
};

/// Concatenates two datasets over a shared catalog; survey ids must not collide.
inline Dataset concat_datasets(const Dataset& a, const Dataset& b, DatasetKind kind) {
    Dataset out;
    out.kind = kind;
    out.catalog = a.catalog;
    out.records = a.records;
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    std::sort(out.records.begin(), out.records.end(), [](const SurveyRecord& x, const SurveyRecord& y) { return x.survey_id < y.survey_id; });
    for (std::size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].survey_id == out.records[i - 1].survey_id)
            throw Error("survey id " + std::to_string(out.records[i].survey_id) + " appears in both PA and PO training data");
    out.catalog.recount(out.records);
    return out;
}

/// Deterministic seeded split of a dataset into (fit, holdout).
inline std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(ds.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    // Fisher-Yates with explicit modulo draws; std::shuffle's algorithm is implementation-defined.
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    const auto n_hold = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    Dataset fit, hold;
    fit.kind = hold.kind = ds.kind;
    fit.catalog = hold.catalog = ds.catalog;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_hold ? hold : fit).records.push_back(ds.records[idx[i]]);
    auto by_id = [](const SurveyRecord& x, const SurveyRecord& y) { return x.survey_id < y.survey_id; };
    std::sort(fit.records.begin(), fit.records.end(), by_id);
    std::sort(hold.records.begin(), hold.records.end(), by_id);
    fit.catalog.recount(fit.records);
    hold.catalog.recount(hold.records);
    return {std::move(fit), std::move(hold)};
}

inline Dataset subset(const Dataset& ds, const std::vector<SurveyId>& ids) {
    Dataset out;
    out.kind = ds.kind;
    out.catalog = ds.catalog;
    for (SurveyId id : ids)
        if (const auto* r = ds.find(id)) out.records.push_back(*r);
    std::sort(out.records.begin(), out.records.end(), [](const SurveyRecord& x, const SurveyRecord& y) { return x.survey_id < y.survey_id; });
    return out;
}

/// merge -> gate -> per-expert scores -> Top-K + neighbor votes -> routed
/// union -> submission. Writes submission.csv, assignments.csv,
/// merged_train.csv, merged_strict.csv and manifest.json into out_dir.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.pa_train.empty() || cfg.po_train.empty() || cfg.test.empty())
        throw Error("pipeline: --pa-train, --po-train and --test are required");
    cfg.merge.validate();
    cfg.ood_top_k.validate();
    cfg.in_vote.validate();
    cfg.ood_vote.validate();
    if (cfg.in_top_k) cfg.in_top_k->validate();
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) throw Error("pipeline: holdout_fraction must be in (0,1)");
    if (cfg.predictor_k < 1) throw Error("pipeline: predictor_k must be >= 1");
    if (!cfg.in_scores.empty() && !cfg.in_top_k)
        throw Error("pipeline: external in-distribution scores need fixed --in-threshold and --in-k-cap");

    namespace fs = std::filesystem;
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);

    Dataset pa = parse_occurrences(cfg.pa_train, DatasetKind::PaTrain);
    Dataset po = parse_occurrences(cfg.po_train, DatasetKind::PoTrain);
    Dataset test = parse_occurrences(cfg.test, DatasetKind::Test);
    std::optional<Dataset> truth;
    if (!cfg.truth.empty()) truth = parse_occurrences(cfg.truth, DatasetKind::PaTrain);
    std::vector<Dataset*> all{&pa, &po, &test};
    if (truth) all.push_back(&*truth);
    const SpeciesCatalog catalog = unify_catalogs(all);

    // Pseudo-labels: training set for the OOD expert and the strict vote reference.
    const auto merged_train = merge_points(po, cfg.merge);
    MergeConfig strict_cfg = cfg.merge;
    strict_cfg.mode = FilterMode::Strict;
    const auto merged_strict = cfg.merge.mode == FilterMode::Strict ? merged_train : merge_points(po, strict_cfg);
    const Dataset po_train_merged = to_dataset(merged_train, po);
    const Dataset po_strict = to_dataset(merged_strict, po);
    write_merged(merged_train, po, (out_dir / "merged_train.csv").string());
    write_merged(merged_strict, po, (out_dir / "merged_strict.csv").string());

    const geo::GeoIndex pa_index = build_index(pa);
    const auto assignments = gate::assign(test, pa_index, cfg.gate_radius_km);
    gate::write_assignments(assignments, (out_dir / "assignments.csv").string());

    std::vector<SurveyId> in_ids, ood_ids;
    for (const auto& a : assignments) (a.side == gate::Side::InDistribution ? in_ids : ood_ids).push_back(a.survey_id);
    const Dataset test_in = subset(test, in_ids);
    const Dataset test_ood = subset(test, ood_ids);

    PipelineResult result;
    result.in_distribution = in_ids.size();
    result.out_of_distribution = ood_ids.size();

    // In-distribution expert.
    post::TopKConfig in_top_k;
    json grid_info = nullptr;
    if (cfg.in_top_k) {
        in_top_k = *cfg.in_top_k;
    } else {
        auto [fit, hold] = holdout_split(pa, cfg.holdout_fraction, cfg.seed);
        if (fit.records.empty() || hold.records.empty()) throw Error("pipeline: PA set too small for a holdout split");
        const geo::GeoIndex fit_index = build_index(fit);
        Dataset hold_query = hold;
        for (auto& r : hold_query.records) r.species.clear();
        const ScoreMatrix hold_scores = neighbor_frequency_predict(fit, fit_index, hold_query, cfg.predictor_k);
        const Predictions hold_votes = post::votes_all(hold_query, fit_index, fit, cfg.in_vote);
        Predictions hold_truth;
        for (const auto& r : hold.records) hold_truth[r.survey_id] = r.species;
        const auto gr = post::grid_search(hold_scores, hold_query, hold_truth, hold_votes, cfg.grid);
        in_top_k = gr.best;
        result.holdout_f1 = gr.f1;
        grid_info = {{"holdout_surveys", hold.records.size()}, {"best", to_json(gr.best)}, {"holdout_f1", gr.f1}};
    }
    result.in_top_k = in_top_k;

    const ScoreMatrix in_scores = cfg.in_scores.empty() ? neighbor_frequency_predict(pa, pa_index, test_in, cfg.predictor_k)
                                                        : load_scores(cfg.in_scores, catalog);
    const Predictions pred_in = post::finalize_all(post::top_k_all(in_scores, test_in, in_top_k),
                                                   post::votes_all(test_in, pa_index, pa, cfg.in_vote));

    // Out-of-distribution expert: PA plus pseudo-labeled PO as training data,
    // strict-merged PO as the vote reference.
    ScoreMatrix ood_scores;
    if (cfg.ood_scores.empty()) {
        const Dataset ood_train = concat_datasets(pa, po_train_merged, DatasetKind::PaTrain);
        ood_scores = neighbor_frequency_predict(ood_train, test_ood, cfg.predictor_k);
    } else {
        ood_scores = load_scores(cfg.ood_scores, catalog);
    }
    const geo::GeoIndex strict_index = build_index(po_strict);
    const Predictions pred_ood = post::finalize_all(post::top_k_all(ood_scores, test_ood, cfg.ood_top_k),
                                                    post::votes_all(test_ood, strict_index, po_strict, cfg.ood_vote));

    const Predictions final_pred = gate::moe_merge(assignments, pred_in, pred_ood);
    const auto raw = post::to_raw(final_pred, catalog);
    result.submission_path = (out_dir / "submission.csv").string();
    post::write_submission(raw, result.submission_path);

    if (truth) result.test_f1 = samples_f1(post::raw_sets(*truth), raw);

    json inputs = json::object();
    auto digest = [&inputs](const char* name, const std::string& path) {
        if (!path.empty()) inputs[name] = {{"path", path}, {"sha256", sha256_file(path)}};
    };
    digest("pa_train", cfg.pa_train);
    digest("po_train", cfg.po_train);
    digest("test", cfg.test);
    digest("in_scores", cfg.in_scores);
    digest("ood_scores", cfg.ood_scores);
    digest("truth", cfg.truth);

    const auto rep_train = merge_stats(po, merged_train);
    const auto rep_strict = merge_stats(po, merged_strict);
    auto report_json = [](const MergeReport& r) {
        return json{{"surveys_before", r.surveys_before}, {"surveys_after", r.surveys_after},
                    {"species_before", r.species_before}, {"species_after", r.species_after},
                    {"consumed", r.consumed},             {"reserved", r.reserved}};
    };

    json manifest = {{"tool", "sdm"},
                     {"version", kVersion},
                     {"config", to_json(cfg)},
                     {"inputs", inputs},
                     {"merge_train", report_json(rep_train)},
                     {"merge_strict", report_json(rep_strict)},
                     {"gate", {{"in_distribution", result.in_distribution}, {"out_of_distribution", result.out_of_distribution}}},
                     {"in_top_k", to_json(in_top_k)},
                     {"grid_search", grid_info},
                     {"outputs", {{"submission.csv", sha256_file(result.submission_path)},
                                  {"assignments.csv", sha256_file((out_dir / "assignments.csv").string())}}}};
    manifest["test_f1"] = result.test_f1 ? json(*result.test_f1) : json(nullptr);
    result.manifest_path = (out_dir / "manifest.json").string();
    csv::write_file(result.manifest_path, manifest.dump(2) + "\n");
    return result;
}

}  // namespace sdm
