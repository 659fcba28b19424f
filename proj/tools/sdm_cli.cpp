// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: one subcommand per pipeline stage plus the full
// `pipeline` chain. Configuration precedence is flags > --config file > defaults.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "sdm/fusion.hpp"
#include "sdm/gate.hpp"
#include "sdm/ingest.hpp"
#include "sdm/pipeline.hpp"
#include "sdm/postprocess.hpp"
#include "sdm/predictor.hpp"
#include "sdm/pseudo_label.hpp"
#include "sdm/stats.hpp"
#include "sdm/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sdm;

namespace {

/// Copies `value` into `target` only when the flag was given on the command line.
template <class T, class U>
void overlay(const CLI::Option* opt, const T& value, U& target) {
    if (opt->count() > 0) target = value;
}

OccurrenceFormat parse_format(const std::string& s) {
    if (s == "auto") return OccurrenceFormat::Auto;
    if (s == "long") return OccurrenceFormat::Long;
    if (s == "wide") return OccurrenceFormat::Wide;
    throw Error("unknown format '" + s + "' (expected auto, long or wide)");
}

struct MergeFlags {
    std::string mode;
    double box_half_km = 0, radius_km = 0, lat_km = 0, lon_km = 0;
    std::size_t rare = 0;
    CLI::Option *o_mode{}, *o_box{}, *o_radius{}, *o_lat{}, *o_lon{}, *o_rare{};

    void add(CLI::App* app) {
        o_mode = app->add_option("--mode", mode, "Filtering mode: loose, balanced or strict");
        o_box = app->add_option("--box-half-km", box_half_km, "Half side of the patch box in km (default 0.32)");
        o_radius = app->add_option("--radius-km", radius_km, "Radius of the circular pre-query in km (default 0.32*sqrt(2))");
        o_lat = app->add_option("--lat-km-per-deg", lat_km, "km per degree of latitude (default 111.4)");
        o_lon = app->add_option("--lon-km-per-deg", lon_km, "km per degree of longitude at the equator (default 111.32)");
        o_rare = app->add_option("--rare-threshold", rare, "Species with fewer occurrences count as rare (default 100)");
    }

    void apply(MergeConfig& m) const {
        if (o_mode->count()) m.mode = parse_filter_mode(mode);
        overlay(o_box, box_half_km, m.box_half_km);
        overlay(o_lat, lat_km, m.lat_km_per_deg);
        overlay(o_lon, lon_km, m.lon_km_per_deg_at_equator);
        overlay(o_rare, rare, m.rare_count_threshold);
        if (o_radius->count()) m.radius_threshold_km = radius_km;
        else if (o_box->count()) m.radius_threshold_km = std::max(m.radius_threshold_km, m.box_half_km * std::numbers::sqrt2);
    }
};

void print_report(const MergeReport& r, FilterMode mode) {
    std::cout << "mode: " << to_string(mode) << "\n"
              << "surveys: " << r.surveys_before << " -> " << r.surveys_after << "\n"
              << "species coverage: " << r.species_before << " -> " << r.species_after << "\n"
              << "mean species per survey: " << format_fixed(r.mean_species_before, 4) << " -> "
              << format_fixed(r.mean_species_after, 4) << "\n"
              << "consumed: " << r.consumed << "\n"
              << "reserved: " << r.reserved << "\n";
}

int run_fusion_check(std::uint64_t seed, std::size_t hidden, std::size_t heads, const std::vector<std::size_t>& dims_in,
                     std::size_t layers) {
    if (dims_in.size() != 3) throw Error("--dims needs exactly three values");
    const fusion::ModalityDims dims{dims_in[0], dims_in[1], dims_in[2]};
    std::vector<fusion::FusionWeights> stack;
    for (std::size_t l = 0; l < layers; ++l) stack.push_back(fusion::init_weights(dims, hidden, heads, seed + l));

    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    fusion::ModalityTriple x;
    for (std::size_t m = 0; m < 3; ++m) {
        x.x[m].resize(dims[m]);
        for (double& v : x.x[m]) v = u(rng);
    }

    bool ok = true;
    auto report = [&ok](const char* name, bool pass) {
        std::cout << (pass ? "PASS " : "FAIL ") << name << "\n";
        ok = ok && pass;
    };

    if (!stack.empty()) {
        fusion::ForwardTrace trace;
        (void)fusion::tri_serial_forward(x, stack.front(), &trace);
        double worst = 0.0;
        for (const auto& per_mod : trace.attention)
            for (const auto& row : per_mod) {
                double s = 0.0;
                for (double w : row) s += w;
                worst = std::max(worst, std::abs(s - 1.0));
            }
        report("attention rows sum to 1 (1e-6)", worst <= 1e-6);

        auto zeroed = stack.front();
        zeroed.zero_output_projections();
        report("zero back-projection is identity", fusion::tri_serial_forward(x, zeroed) == x);
    }
    report("empty stack is identity", fusion::stack_forward(x, {}) == x);

    const auto y1 = fusion::stack_forward(x, stack);
    const auto y2 = fusion::stack_forward(x, stack);
    report("deterministic", y1 == y2);
    bool dims_ok = true, finite = true;
    for (std::size_t m = 0; m < 3; ++m) {
        dims_ok = dims_ok && y1.x[m].size() == dims[m];
        for (double v : y1.x[m]) finite = finite && std::isfinite(v);
    }
    report("output dims equal input dims", dims_ok);
    report("outputs finite", finite);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Presence-only pseudo-labelling, expert routing and multi-label post-processing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sdm ") + kVersion);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse and validate a survey table; optionally rewrite it in wide format");
    std::string in_input, in_kind = "pa", in_format = "auto", in_out;
    ingest->add_option("--input", in_input, "Survey CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--kind", in_kind, "pa, po or test");
    ingest->add_option("--format", in_format, "auto, long or wide");
    ingest->add_option("--out", in_out, "Write the normalized dataset here");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Species-per-survey and per-species occurrence histograms");
    std::string st_input, st_kind = "pa", st_out;
    stats_cmd->add_option("--input", st_input, "Survey CSV")->required()->check(CLI::ExistingFile);
    stats_cmd->add_option("--kind", st_kind, "pa or po");
    stats_cmd->add_option("--out-dir", st_out, "Directory for histogram CSVs")->required();

    // merge
    auto* merge = app.add_subcommand("merge", "Aggregate PO labels over each survey's patch box");
    std::string mg_input, mg_out, mg_config;
    merge->add_option("--input", mg_input, "PO survey CSV")->required()->check(CLI::ExistingFile);
    merge->add_option("--out", mg_out, "Merged dataset CSV")->required();
    merge->add_option("--config", mg_config, "JSON config file (\"merge\" section)")->check(CLI::ExistingFile);
    MergeFlags mg_flags;
    mg_flags.add(merge);

    // gate
    auto* gate_cmd = app.add_subcommand("gate", "Assign test surveys to the in-distribution or OOD expert");
    std::string gt_test, gt_pa, gt_out;
    double gt_radius = gate::kDefaultGateRadiusKm;
    gate_cmd->add_option("--test", gt_test, "Test survey CSV")->required()->check(CLI::ExistingFile);
    gate_cmd->add_option("--pa", gt_pa, "PA training CSV")->required()->check(CLI::ExistingFile);
    gate_cmd->add_option("--radius-km", gt_radius, "Gate radius in km");
    gate_cmd->add_option("--out", gt_out, "Assignment CSV")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "Neighbor-frequency baseline scores");
    std::string pr_train, pr_test, pr_out;
    std::size_t pr_k = 10;
    predict->add_option("--train", pr_train, "Training survey CSV")->required()->check(CLI::ExistingFile);
    predict->add_option("--test", pr_test, "Test survey CSV")->required()->check(CLI::ExistingFile);
    predict->add_option("--k", pr_k, "Number of nearest training surveys")->check(CLI::PositiveNumber);
    predict->add_option("--out", pr_out, "Scores CSV")->required();

    // postprocess
    auto* postp = app.add_subcommand("postprocess", "Threshold Top-K plus neighbor voting -> submission");
    std::string pp_scores, pp_test, pp_ref, pp_out, pp_preset = "in";
    std::vector<std::string> pp_catalog;
    double pp_threshold = 0.5, pp_vote_freq = 0.8;
    std::size_t pp_kcap = 25, pp_vote_n = 5;
    bool pp_fallback = false, pp_inclusive = false, pp_no_vote = false;
    postp->add_option("--scores", pp_scores, "Scores CSV")->required()->check(CLI::ExistingFile);
    postp->add_option("--test", pp_test, "Test survey CSV")->required()->check(CLI::ExistingFile);
    postp->add_option("--reference", pp_ref, "Reference dataset for neighbor voting")->required()->check(CLI::ExistingFile);
    postp->add_option("--catalog", pp_catalog, "Extra datasets whose species may appear in the scores")->check(CLI::ExistingFile);
    postp->add_option("--preset", pp_preset, "in (5 PA neighbors, >80%) or ood (threshold 0.475, 6 neighbors, >50%)");
    auto* o_thr = postp->add_option("--threshold", pp_threshold, "Top-K score threshold");
    auto* o_kcap = postp->add_option("--k-cap", pp_kcap, "Top-K cap")->check(CLI::PositiveNumber);
    postp->add_flag("--fallback-top1", pp_fallback, "Emit the best species when nothing clears the threshold");
    auto* o_vn = postp->add_option("--vote-neighbors", pp_vote_n, "Neighbors consulted for voting")->check(CLI::PositiveNumber);
    auto* o_vf = postp->add_option("--vote-min-frequency", pp_vote_freq, "Vote frequency cut-off");
    postp->add_flag("--vote-inclusive", pp_inclusive, "Use >= instead of > for the vote cut-off");
    postp->add_flag("--no-vote", pp_no_vote, "Skip neighbor voting");
    postp->add_option("--out", pp_out, "Submission CSV")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Samples-averaged F1 of a submission");
    std::string ev_truth, ev_sub;
    evaluate->add_option("--truth", ev_truth, "Truth: survey CSV or submission-format CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--submission", ev_sub, "Submission CSV")->required()->check(CLI::ExistingFile);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "merge -> gate -> predict -> postprocess -> routed submission");
    std::string pl_config, pl_pa, pl_po, pl_test, pl_out, pl_in_scores, pl_ood_scores, pl_truth;
    double pl_gate = 0, pl_in_thr = 0, pl_ood_thr = 0, pl_holdout = 0;
    std::size_t pl_k = 0, pl_in_kcap = 0, pl_ood_kcap = 0;
    std::vector<double> pl_grid_thr;
    std::vector<std::size_t> pl_grid_k;
    std::uint64_t pl_seed = 0;
    pipe->add_option("--config", pl_config, "JSON config file")->check(CLI::ExistingFile);
    auto* o_pa = pipe->add_option("--pa-train", pl_pa, "PA training CSV");
    auto* o_po = pipe->add_option("--po-train", pl_po, "PO training CSV");
    auto* o_test = pipe->add_option("--test", pl_test, "Test survey CSV");
    auto* o_out = pipe->add_option("--out-dir", pl_out, "Output directory");
    auto* o_ins = pipe->add_option("--in-scores", pl_in_scores, "External in-distribution expert scores");
    auto* o_oods = pipe->add_option("--ood-scores", pl_ood_scores, "External OOD expert scores");
    auto* o_truth = pipe->add_option("--truth", pl_truth, "Truth for test surveys (adds F1 to the manifest)");
    auto* o_gate = pipe->add_option("--gate-radius-km", pl_gate, "Gate radius in km (default 10)");
    auto* o_k = pipe->add_option("--k", pl_k, "Neighbors for the baseline predictor (default 10)");
    auto* o_in_thr = pipe->add_option("--in-threshold", pl_in_thr, "Fix the in-distribution threshold (skips grid search)");
    auto* o_in_kcap = pipe->add_option("--in-k-cap", pl_in_kcap, "Fix the in-distribution k cap (skips grid search)");
    auto* o_ood_thr = pipe->add_option("--ood-threshold", pl_ood_thr, "OOD threshold (default 0.475)");
    auto* o_ood_kcap = pipe->add_option("--ood-k-cap", pl_ood_kcap, "OOD k cap (default 25)");
    auto* o_grid_thr = pipe->add_option("--grid-thresholds", pl_grid_thr, "Grid search thresholds");
    auto* o_grid_k = pipe->add_option("--grid-k-caps", pl_grid_k, "Grid search k caps");
    auto* o_holdout = pipe->add_option("--holdout-fraction", pl_holdout, "PA fraction held out for grid search (default 0.2)");
    auto* o_seed = pipe->add_option("--seed", pl_seed, "Seed for the holdout split (default 42)");
    MergeFlags pl_merge;
    pl_merge.add(pipe);

    // fusion-check
    auto* fcheck = app.add_subcommand("fusion-check", "Run invariant checks on the tri-modal attention reference");
    std::uint64_t fc_seed = 0;
    std::size_t fc_hidden = 16, fc_heads = 4, fc_layers = 2;
    std::vector<std::size_t> fc_dims{8, 12, 16};
    fcheck->add_option("--seed", fc_seed, "Weight and input seed");
    fcheck->add_option("--hidden", fc_hidden, "Hidden dim D");
    fcheck->add_option("--heads", fc_heads, "Attention heads h");
    fcheck->add_option("--dims", fc_dims, "Three modality dims")->expected(3);
    fcheck->add_option("--layers", fc_layers, "Stacked layers");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic fixture (pa_train, po_train, test, test_truth)");
    std::uint64_t sy_seed = 7;
    std::string sy_out;
    synth_cmd->add_option("--seed", sy_seed, "Generator seed");
    synth_cmd->add_option("--out-dir", sy_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            const Dataset ds = parse_occurrences(in_input, parse_dataset_kind(in_kind), parse_format(in_format));
            std::cout << "records: " << ds.records.size() << "\nspecies: " << ds.catalog.size()
                      << "\npairs: " << ds.pair_count() << "\n";
            if (!in_out.empty()) write_dataset(ds, in_out);
        } else if (*stats_cmd) {
            const Dataset ds = parse_occurrences(st_input, parse_dataset_kind(st_kind));
            stats::write_stats(ds, st_out);
            const auto sps = stats::species_per_survey_hist(ds);
            const auto ops = stats::occurrences_per_species_hist(ds);
            std::cout << "surveys: " << sps.surveys << "\nspecies-per-survey mode: " << sps.mode
                      << "\nspecies-per-survey mean: " << format_fixed(sps.mean, 4)
                      << "\nobserved species: " << ops.observed_species
                      << "\nfraction of species below " << ops.tail_cutoff << " occurrences: " << format_fixed(ops.fraction_below_cutoff, 4)
                      << "\nsingleton species: " << ops.singletons << "\n";
        } else if (*merge) {
            MergeConfig cfg;
            if (!mg_config.empty()) {
                const json j = read_json_file(mg_config);
                from_json_into(j.contains("merge") ? j.at("merge") : j, cfg);
            }
            mg_flags.apply(cfg);
            const Dataset po = parse_occurrences(mg_input, DatasetKind::PoTrain);
            const auto merged = merge_points(po, cfg);
            write_merged(merged, po, mg_out);
            print_report(merge_stats(po, merged), cfg.mode);
        } else if (*gate_cmd) {
            const Dataset test = parse_occurrences(gt_test, DatasetKind::Test);
            const Dataset pa = parse_occurrences(gt_pa, DatasetKind::PaTrain);
            const auto as = gate::assign(test, pa, gt_radius);
            gate::write_assignments(as, gt_out);
            std::size_t in = 0;
            for (const auto& a : as) in += a.side == gate::Side::InDistribution;
            std::cout << "in-distribution: " << in << "\nout-of-distribution: " << as.size() - in << "\n";
        } else if (*predict) {
            Dataset train = parse_occurrences(pr_train, DatasetKind::PaTrain);
            Dataset test = parse_occurrences(pr_test, DatasetKind::Test);
            const SpeciesCatalog cat = unify_catalogs({&train, &test});
            save_scores(neighbor_frequency_predict(train, test, pr_k), cat, pr_out);
        } else if (*postp) {
            post::TopKConfig top;
            post::VoteConfig vote;
            if (pp_preset == "in") {
                top = {0.5, 25, false};
                vote = post::pa_vote();
            } else if (pp_preset == "ood") {
                top = {post::kOodThreshold, 25, false};
                vote = post::po_vote();
            } else {
                throw Error("unknown preset '" + pp_preset + "' (expected in or ood)");
            }
            overlay(o_thr, pp_threshold, top.threshold);
            overlay(o_kcap, pp_kcap, top.k_cap);
            top.fallback_top1 = pp_fallback;
            overlay(o_vn, pp_vote_n, vote.neighbor_count);
            overlay(o_vf, pp_vote_freq, vote.min_frequency);
            if (pp_inclusive) vote.strictly_greater = false;

            Dataset ref = parse_occurrences(pp_ref, DatasetKind::PaTrain);
            Dataset test = parse_occurrences(pp_test, DatasetKind::Test);
            std::vector<Dataset> extra;
            for (const auto& p : pp_catalog) extra.push_back(parse_occurrences(p, DatasetKind::PaTrain));
            std::vector<Dataset*> all{&ref, &test};
            for (auto& e : extra) all.push_back(&e);
            const SpeciesCatalog cat = unify_catalogs(all);
            const ScoreMatrix scores = load_scores(pp_scores, cat);
            Predictions pred = post::top_k_all(scores, test, top);
            if (!pp_no_vote) pred = post::finalize_all(pred, post::votes_all(test, build_index(ref), ref, vote));
            post::write_submission(post::to_raw(pred, cat), pp_out);
        } else if (*evaluate) {
            const std::string head = csv::read_file(ev_truth).substr(0, 4096);
            const bool submission_format = csv::lower(head.substr(0, head.find('\n'))).find("predictions") != std::string::npos;
            const post::RawPredictions truth = submission_format
                                                   ? post::read_submission(ev_truth)
                                                   : post::raw_sets(parse_occurrences(ev_truth, DatasetKind::PaTrain));
            const post::RawPredictions sub = post::read_submission(ev_sub);
            std::cout << format_fixed(samples_f1(truth, sub), 5) << "\n";
        } else if (*pipe) {
            PipelineConfig cfg;
            if (!pl_config.empty()) apply_config(read_json_file(pl_config), cfg);
            overlay(o_pa, pl_pa, cfg.pa_train);
            overlay(o_po, pl_po, cfg.po_train);
            overlay(o_test, pl_test, cfg.test);
            overlay(o_out, pl_out, cfg.out_dir);
            overlay(o_ins, pl_in_scores, cfg.in_scores);
            overlay(o_oods, pl_ood_scores, cfg.ood_scores);
            overlay(o_truth, pl_truth, cfg.truth);
            overlay(o_gate, pl_gate, cfg.gate_radius_km);
            overlay(o_k, pl_k, cfg.predictor_k);
            if (o_in_thr->count() || o_in_kcap->count()) {
                post::TopKConfig t = cfg.in_top_k.value_or(post::TopKConfig{});
                overlay(o_in_thr, pl_in_thr, t.threshold);
                overlay(o_in_kcap, pl_in_kcap, t.k_cap);
                cfg.in_top_k = t;
            }
            overlay(o_ood_thr, pl_ood_thr, cfg.ood_top_k.threshold);
            overlay(o_ood_kcap, pl_ood_kcap, cfg.ood_top_k.k_cap);
            overlay(o_grid_thr, pl_grid_thr, cfg.grid.thresholds);
            overlay(o_grid_k, pl_grid_k, cfg.grid.k_caps);
            overlay(o_holdout, pl_holdout, cfg.holdout_fraction);
            overlay(o_seed, pl_seed, cfg.seed);
            pl_merge.apply(cfg.merge);

            const auto res = run_pipeline(cfg);
            std::cout << "in-distribution: " << res.in_distribution << "\nout-of-distribution: " << res.out_of_distribution
                      << "\nin-distribution top-k: threshold " << format_double(res.in_top_k.threshold) << ", k_cap "
                      << res.in_top_k.k_cap << "\n";
            if (res.holdout_f1) std::cout << "holdout F1: " << format_fixed(*res.holdout_f1, 5) << "\n";
            if (res.test_f1) std::cout << "test F1: " << format_fixed(*res.test_f1, 5) << "\n";
            std::cout << "submission: " << res.submission_path << "\nmanifest: " << res.manifest_path << "\n";
        } else if (*fcheck) {
            return run_fusion_check(fc_seed, fc_hidden, fc_heads, fc_dims, fc_layers);
        } else if (*synth_cmd) {
            fs::create_directories(sy_out);
            const auto fx = synth::make_fixture(synth::FixtureConfig{}, sy_seed);
            write_dataset(fx.pa_train, (fs::path(sy_out) / "pa_train.csv").string());
            write_dataset(fx.po_train, (fs::path(sy_out) / "po_train.csv").string());
            write_dataset(fx.test, (fs::path(sy_out) / "test.csv").string());
            write_dataset(fx.test_truth, (fs::path(sy_out) / "test_truth.csv").string());
            std::cout << "pa_train: " << fx.pa_train.records.size() << "\npo_train: " << fx.po_train.records.size()
                      << "\ntest: " << fx.test.records.size() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
