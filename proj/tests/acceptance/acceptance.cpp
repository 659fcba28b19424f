// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: one PASS/FAIL line per criterion (SKIP when a conditional
// criterion's data is absent). Exit status is nonzero iff any criterion fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

#include "sdm/fusion.hpp"
#include "sdm/gate.hpp"
#include "sdm/losses.hpp"
#include "sdm/pipeline.hpp"
#include "sdm/pseudo_label.hpp"
#include "sdm/stats.hpp"
#include "sdm/synthetic.hpp"
#include "test_util.hpp"

using namespace sdm;
using Clock = std::chrono::steady_clock;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome = Outcome::Fail;
    std::string detail;
};

Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Verdict verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) { return format_fixed(v, prec); }

// 1 ---------------------------------------------------------------------------
Verdict spatial_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> ulat(-90, 90), ulon(-180, 180), uoff(-0.2, 0.2), ur(0, 1);
    std::size_t queries = 0, mismatches = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng() % 5000;
        const bool clustered = inst % 2 == 0;
        std::vector<geo::IndexedPoint> pts;
        double clat = ulat(rng), clon = ulon(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double lat = ulat(rng), lon = ulon(rng);
            if (clustered) {
                if (i % 100 == 0) clat = ulat(rng), clon = ulon(rng);
                lat = std::clamp(clat + uoff(rng), -90.0, 90.0);
                lon = std::clamp(clon + uoff(rng), -180.0, 180.0);
            }
            // Duplicate ids and coordinates exercise the tie rule.
            if (i > 0 && rng() % 20 == 0) lat = pts.back().point.lat_rad * 180.0 / std::numbers::pi, lon = pts.back().point.lon_rad * 180.0 / std::numbers::pi;
            pts.push_back({geo::GeoPoint::from_degrees(lat, lon), static_cast<SurveyId>(rng() % n)});
        }
        const geo::GeoIndex index(pts);
        for (int q = 0; q < 20; ++q) {
            const geo::GeoPoint c = q % 2 ? pts[rng() % n].point : geo::GeoPoint::from_degrees(ulat(rng), ulon(rng));
            const double r = q % 5 == 0 ? 0.0 : std::pow(10.0, ur(rng) * 4.0 - 1.0);  // 0.1 .. 1000 km
            const std::size_t k = 1 + rng() % 30;
            mismatches += index.radius_query(c, r) != testing::brute_radius(pts, c, r);
            mismatches += index.knn_query(c, k) != testing::brute_knn(pts, c, k);
            queries += 2;
        }
    }
    const double secs = seconds_since(t0);
    return verdict(mismatches == 0 && secs < 60.0,
                   std::to_string(queries) + " queries, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 1) + " s");
}

constexpr FilterMode kModes[] = {FilterMode::Loose, FilterMode::Balanced, FilterMode::Strict};

/// Merge fixtures shared by criteria 2 and 3.
std::vector<Dataset> merge_instances() {
    std::mt19937_64 rng(2002);
    std::vector<Dataset> out;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 1 + rng() % 2000;
        const std::size_t clusters = 1 + rng() % 60;
        const double spread = 0.001 + 0.01 * std::uniform_real_distribution<double>(0, 1)(rng);
        out.push_back(testing::random_clustered(rng, n, clusters, spread, 20 + rng() % 200, 1 + static_cast<int>(rng() % 5)));
    }
    return out;
}

MergeConfig config_for(FilterMode m, std::size_t rare = 100) {
    MergeConfig c;
    c.mode = m;
    c.rare_count_threshold = rare;
    return c;
}

// 2 ---------------------------------------------------------------------------
Verdict merge_oracle(const std::vector<Dataset>& instances) {
    std::size_t runs = 0, mismatches = 0;
    for (std::size_t i = 0; i < instances.size(); ++i)
        for (FilterMode m : kModes) {
            // Vary the rarity threshold so Balanced sees both rare and common species.
            const auto cfg = config_for(m, 1 + (i * 7) % 40);
            mismatches += merge_points(instances[i], cfg) != testing::reference_merge(instances[i], cfg);
            ++runs;
        }
    return verdict(mismatches == 0, std::to_string(runs) + " instance/mode runs, " + std::to_string(mismatches) + " mismatches");
}

struct NoiseCount {
    std::size_t records = 0, untraced = 0, outside_box = 0, coverage_lost = 0, rare_dropped = 0;
};

void check_label_noise(const Dataset& ds, FilterMode mode, std::size_t rare_threshold, NoiseCount& nc) {
    const auto cfg = config_for(mode, rare_threshold);
    const auto out = merge_points(ds, cfg);
    std::unordered_map<SurveyId, const SurveyRecord*> by_id;
    for (const auto& r : ds.records) by_id[r.survey_id] = &r;
    std::set<SpeciesIndex> in_cov, out_cov;
    for (const auto& r : ds.records) in_cov.insert(r.species.begin(), r.species.end());
    std::set<SurveyId> primaries;
    for (const auto& m : out) {
        ++nc.records;
        primaries.insert(m.survey_id);
        const SurveyRecord& p = *by_id.at(m.survey_id);
        for (SurveyId sid : m.source_ids) nc.outside_box += !testing::box_member(p, *by_id.at(sid), cfg);
        for (SpeciesIndex s : m.species) {
            out_cov.insert(s);
            bool traced = false;
            for (SurveyId sid : m.source_ids) {
                const auto& sp = by_id.at(sid)->species;
                if (std::binary_search(sp.begin(), sp.end(), s)) {
                    traced = true;
                    break;
                }
            }
            nc.untraced += !traced;
        }
    }
    if (mode != FilterMode::Strict && in_cov != out_cov) ++nc.coverage_lost;
    if (mode == FilterMode::Balanced) {
        const auto rare = rare_species_mask(ds, rare_threshold);
        for (const auto& r : ds.records) {
            const bool has_rare = std::any_of(r.species.begin(), r.species.end(), [&](SpeciesIndex s) { return rare[s]; });
            nc.rare_dropped += has_rare && !primaries.count(r.survey_id);
        }
    }
}

// 3 ---------------------------------------------------------------------------
Verdict label_noise(const std::vector<Dataset>& instances, const Dataset& clustered, const Dataset& fixture_po) {
    NoiseCount nc;
    for (std::size_t i = 0; i < instances.size(); ++i)
        for (FilterMode m : kModes) check_label_noise(instances[i], m, 1 + (i * 7) % 40, nc);
    for (FilterMode m : kModes) {
        check_label_noise(clustered, m, 100, nc);
        check_label_noise(fixture_po, m, 100, nc);
    }
    const std::size_t violations = nc.untraced + nc.outside_box + nc.coverage_lost + nc.rare_dropped;
    return verdict(violations == 0, std::to_string(nc.records) + " merged records checked; untraced=" + std::to_string(nc.untraced) +
                                        " outside_box=" + std::to_string(nc.outside_box) +
                                        " coverage_lost=" + std::to_string(nc.coverage_lost) +
                                        " rare_dropped=" + std::to_string(nc.rare_dropped));
}

// 4 ---------------------------------------------------------------------------
Verdict smoothing(const Dataset& clustered) {
    const auto raw = stats::species_per_survey_hist(clustered);
    std::string detail = "raw mean " + fmt(raw.mean, 4) + " (mode " + std::to_string(raw.mode) + ")";
    bool ok = true;
    for (FilterMode m : kModes) {
        const auto merged = stats::species_per_survey_hist(to_dataset(merge_points(clustered, config_for(m)), clustered));
        detail += std::string("; ") + to_string(m) + " mean " + fmt(merged.mean, 4) + " over " + std::to_string(merged.surveys);
        if (m == MergeConfig{}.mode) ok = merged.mean > raw.mean;
    }
    return verdict(ok, detail + " (default mode must exceed raw)");
}

// 5 ---------------------------------------------------------------------------
Verdict asl_correctness() {
    auto one = [](double y, double p, AslParams a) {
        const std::vector<double> ys{y}, ps{p};
        return asl_loss({ys, ps}, a);
    };
    const double e1 = std::fabs(one(1, 0.5, {0, 0, 0}) - 0.693147);
    const double e2 = std::fabs(one(0, 0.2, {0, 0, 0.3}) - 0.0);
    const double e3 = std::fabs(one(0, 0.9, {0, 1, 0.05}) - 1.957197);
    const bool closed = e1 <= 1e-6 && e2 <= 1e-6 && e3 <= 1e-6;

    std::mt19937_64 rng(5005);
    std::uniform_real_distribution<double> u(0, 1), g(0, 4);
    std::vector<double> y(10000), p(10000);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = u(rng) < 0.5 ? 1.0 : 0.0;
        p[i] = u(rng);
    }
    const double bce_gap = std::fabs(asl_loss({y, p}, {0, 0, 0}) - bce_loss({y, p}));

    // Samples stay 1e-2 from p = m: closer than that the h = 1e-5 stencil's own
    // truncation error exceeds the tolerance for g- < 1.
    double worst = 0.0;
    const double h = 1e-5;
    for (int s = 0; s < 1000; ++s) {
        const AslParams a{g(rng), g(rng), 0.5 * u(rng)};
        const std::size_t n = 16;
        std::vector<double> ys(n), ps(n);
        for (std::size_t i = 0; i < n; ++i) {
            ys[i] = rng() % 2 ? 1.0 : 0.0;
            do ps[i] = 0.05 + 0.9 * u(rng);
            while (std::fabs(ps[i] - a.clip_m) < 1e-2);
        }
        const auto grad = asl_grad({ys, ps}, a);
        for (std::size_t i = 0; i < n; ++i) {
            auto hi = ps, lo = ps;
            hi[i] += h;
            lo[i] -= h;
            const double fd = (asl_loss({ys, hi}, a) - asl_loss({ys, lo}, a)) / (2 * h);
            worst = std::max(worst, std::fabs(fd - grad.grad[i]));
        }
    }
    const bool ok = closed && bce_gap <= 1e-12 && worst <= 1e-6;
    return verdict(ok, "closed-form errors " + format_double(e1) + "/" + format_double(e2) + "/" + format_double(e3) +
                           ", |ASL-BCE| " + format_double(bce_gap) + ", max grad err " + format_double(worst));
}

// 6 ---------------------------------------------------------------------------
Verdict metric_correctness() {
    std::mt19937_64 rng(6006);
    std::size_t mismatches = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        std::map<SurveyId, std::vector<int>> t, p;
        const int n = 1 + static_cast<int>(rng() % 40);
        double oracle = 0.0;
        for (int id = 0; id < n; ++id) {
            std::set<int> a, b;
            for (int k = static_cast<int>(rng() % 10); k > 0; --k) a.insert(static_cast<int>(rng() % 15));
            for (int k = static_cast<int>(rng() % 10); k > 0; --k) b.insert(static_cast<int>(rng() % 15));
            std::vector<int> inter;
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
            const double tp = static_cast<double>(inter.size());
            const double fp = static_cast<double>(b.size()) - tp, fn = static_cast<double>(a.size()) - tp;
            oracle += (a.empty() && b.empty()) ? 1.0 : tp / (tp + (fp + fn) / 2.0);
            t[id] = {a.begin(), a.end()};
            p[id] = {b.begin(), b.end()};
        }
        oracle /= static_cast<double>(n);
        mismatches += samples_f1(t, p) != oracle;
    }
    const double hand = samples_f1(std::map<int, std::vector<int>>{{1, {1, 2, 3}}}, std::map<int, std::vector<int>>{{1, {2, 3, 4}}});
    return verdict(mismatches == 0 && std::fabs(hand - 0.666667) <= 1e-6,
                   "1000 instances, " + std::to_string(mismatches) + " mismatches; {1,2,3} vs {2,3,4} = " + fmt(hand, 6));
}

// 7 ---------------------------------------------------------------------------
Verdict gate_correctness() {
    std::mt19937_64 rng(7007);
    std::size_t surveys = 0, mismatches = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const Dataset pa = synth::uniform_points(1 + rng() % 500, rng(), 42, 55, -4, 18, 20);
        Dataset test = synth::uniform_points(1 + rng() % 300, rng(), 41, 56, -5, 19, 20);
        for (auto& r : test.records) r.species.clear();
        const auto as = gate::assign(test, pa);
        for (std::size_t i = 0; i < as.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : pa.records) best = std::min(best, geo::haversine_km(location(test.records[i]), location(q)));
            const auto side = best <= gate::kDefaultGateRadiusKm ? gate::Side::InDistribution : gate::Side::OutOfDistribution;
            mismatches += as[i].side != side || as[i].nearest_pa_km != best || as[i].survey_id != test.records[i].survey_id;
            ++surveys;
        }
    }
    const Dataset pa = synth::dataset_from_rows({{1, 48.0, 2.0, {1}}}, DatasetKind::PaTrain);
    const Dataset test = synth::dataset_from_rows({{2, 48.05, 2.0, {}}, {3, 48.0, 2.2, {}}}, DatasetKind::Test);
    const auto ex = gate::assign(test, pa);
    const bool examples = ex[0].side == gate::Side::InDistribution && ex[1].side == gate::Side::OutOfDistribution;
    return verdict(mismatches == 0 && examples, std::to_string(surveys) + " surveys, " + std::to_string(mismatches) +
                                                    " mismatches; examples " + fmt(ex[0].nearest_pa_km, 2) + " km -> " +
                                                    to_string(ex[0].side) + ", " + fmt(ex[1].nearest_pa_km, 2) + " km -> " +
                                                    to_string(ex[1].side));
}

// 8 ---------------------------------------------------------------------------
namespace ref {

using fusion::Linear;

std::vector<double> lin(const Linear& l, const std::vector<double>& x) {
    std::vector<double> y(l.weight.rows);
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < l.weight.cols; ++c) acc += l.weight.data[r * l.weight.cols + c] * x[c];
        y[r] = acc + l.bias[r];
    }
    return y;
}

std::vector<double> norm(const std::vector<double>& x) {
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + 1e-5);
    return y;
}

fusion::ModalityTriple forward(const fusion::ModalityTriple& in, const fusion::FusionWeights& w) {
    const std::size_t D = w.hidden, H = w.heads, dh = D / H;
    std::vector<std::vector<double>> h(3);
    for (int m = 0; m < 3; ++m) h[m] = lin(w.input[m], in.x[m]);
    for (int m = 0; m < 3; ++m) {
        const auto q = lin(w.query[m], h[m]);
        const int a = m == 0 ? 1 : 0, b = m == 2 ? 1 : 2;
        const auto ka = lin(w.key, h[a]), kb = lin(w.key, h[b]), va = lin(w.value, h[a]), vb = lin(w.value, h[b]);
        std::vector<double> s(D);
        for (std::size_t hd = 0; hd < H; ++hd) {
            double la = 0, lb = 0;
            for (std::size_t i = hd * dh; i < (hd + 1) * dh; ++i) la += q[i] * ka[i], lb += q[i] * kb[i];
            const double wa = 1.0 / (1.0 + std::exp((lb - la) / std::sqrt(static_cast<double>(dh))));
            for (std::size_t i = hd * dh; i < (hd + 1) * dh; ++i) s[i] = h[m][i] + wa * va[i] + (1.0 - wa) * vb[i];
        }
        h[m] = norm(s);
    }
    fusion::ModalityTriple out;
    for (int m = 0; m < 3; ++m) {
        auto mid = lin(w.ffn[m].expand, h[m]);
        for (double& v : mid) v = v * 0.5 * std::erfc(-v / std::sqrt(2.0));
        const auto ff = lin(w.ffn[m].contract, mid);
        std::vector<double> s(D);
        for (std::size_t i = 0; i < D; ++i) s[i] = h[m][i] + ff[i];
        const auto back = lin(w.output[m], norm(s));
        out.x[m] = in.x[m];
        for (std::size_t i = 0; i < back.size(); ++i) out.x[m][i] += back[i];
    }
    return out;
}

}  // namespace ref

Verdict fusion_reference() {
    std::mt19937_64 rng(8008);
    std::normal_distribution<double> nd(0, 1);
    const fusion::ModalityDims dims{6, 9, 4};
    std::size_t failures = 0, checks = 0;
    double worst = 0.0;
    for (std::size_t D : {8u, 16u})
        for (std::size_t H : {2u, 4u})
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                fusion::ModalityTriple x;
                for (std::size_t m = 0; m < 3; ++m) {
                    x.x[m].resize(dims[m]);
                    for (double& v : x.x[m]) v = nd(rng);
                }
                auto w = fusion::init_weights(dims, D, H, seed);
                fusion::ForwardTrace trace;
                const auto got = fusion::tri_serial_forward(x, w, &trace);
                const auto want = ref::forward(x, w);
                for (std::size_t m = 0; m < 3; ++m)
                    for (std::size_t i = 0; i < got.x[m].size(); ++i) worst = std::max(worst, std::fabs(got.x[m][i] - want.x[m][i]));
                for (const auto& heads : trace.attention)
                    for (const auto& wts : heads) {
                        double sum = 0.0;
                        for (double v : wts) sum += v;
                        failures += std::fabs(sum - 1.0) > 1e-12;
                    }
                failures += !(fusion::stack_forward(x, {}) == x);
                w.zero_output_projections();
                failures += !(fusion::tri_serial_forward(x, w) == x);
                checks += 3;
            }
    return verdict(failures == 0 && worst <= 1e-10, std::to_string(checks) + " property checks, " + std::to_string(failures) +
                                                        " failures, max oracle deviation " + format_double(worst));
}

// 9 ---------------------------------------------------------------------------
Verdict determinism() {
    const std::string data = SDM_TEST_DATA_DIR "/fixture";
    const std::string golden = csv::read_file(data + "/golden_submission.csv");
    const auto dir = testing::temp_dir("acceptance_pipeline");
    std::vector<std::string> runs;
    for (const char* sub : {"run1", "run2"}) {
        PipelineConfig c;
        c.pa_train = data + "/pa_train.csv";
        c.po_train = data + "/po_train.csv";
        c.test = data + "/test.csv";
        c.out_dir = (dir / sub).string();
        runs.push_back(csv::read_file(run_pipeline(c).submission_path));
    }
    const bool ok = runs[0] == golden && runs[1] == golden;
    return verdict(ok, std::string("run1 ") + (runs[0] == golden ? "==" : "!=") + " golden, run2 " + (runs[1] == golden ? "==" : "!=") +
                           " golden (" + std::to_string(golden.size()) + " bytes)");
}

// 10 --------------------------------------------------------------------------
Verdict performance() {
    synth::ClusteredPoConfig pc;
    pc.surveys = 1'000'000;
    pc.clusters = 10'000;
    pc.sigma_km = 1.5;
    const Dataset big = synth::clustered_po(pc, 10010);

    auto t0 = Clock::now();
    const auto merged = merge_points(big, MergeConfig{});
    const double merge_secs = seconds_since(t0);

    const geo::GeoIndex index = build_index(big);
    const std::size_t nq = 200'000;
    std::mt19937_64 rng(10011);
    std::vector<geo::Neighbor> hits;
    std::size_t total_hits = 0;
    const double radius = MergeConfig{}.radius_threshold_km;
    t0 = Clock::now();
    for (std::size_t q = 0; q < nq; ++q) {
        index.radius_query(location(big.records[rng() % big.records.size()]), radius, hits);
        total_hits += hits.size();
    }
    const double qps = static_cast<double>(nq) / seconds_since(t0);

    // Sampled exactness on the large index.
    std::size_t mismatches = 0;
    std::vector<geo::IndexedPoint> pts;
    pts.reserve(big.records.size());
    for (const auto& r : big.records) pts.push_back({location(r), r.survey_id});
    for (int q = 0; q < 100; ++q) {
        const auto c = location(big.records[rng() % big.records.size()]);
        mismatches += index.radius_query(c, 2.0) != testing::brute_radius(pts, c, 2.0);
    }

    const bool ok = merge_secs < 60.0 && qps >= 1e5 && mismatches == 0;
    return verdict(ok, "merge of " + std::to_string(big.records.size()) + " surveys -> " + std::to_string(merged.size()) + " in " +
                           fmt(merge_secs, 2) + " s; " + fmt(qps, 0) + " radius queries/s (mean " +
                           fmt(static_cast<double>(total_hits) / static_cast<double>(nq), 2) + " hits); " +
                           std::to_string(mismatches) + "/100 sampled mismatches; hardware threads " +
                           std::to_string(std::max(1u, std::thread::hardware_concurrency())));
}

// 11 --------------------------------------------------------------------------
std::string find_file(const std::filesystem::path& dir, const std::vector<std::string>& names) {
    for (const auto& n : names)
        if (std::filesystem::exists(dir / n)) return (dir / n).string();
    return {};
}

Verdict real_data() {
    const char* root = std::getenv("SDM_GLC25_DIR");
    if (!root || !*root) return {Outcome::Skip, "SDM_GLC25_DIR not set; real GLC25 data absent"};
    const std::filesystem::path dir(root);
    const std::string pa_path = find_file(dir, {"GLC25_PA_metadata_train.csv", "PresenceAbsenceSurveys/GLC25_PA_metadata_train.csv"});
    const std::string po_path = find_file(dir, {"GLC25_P0_metadata_train.csv", "GLC25_PO_metadata_train.csv",
                                                "PresenceOnlyOccurrences/GLC25_P0_metadata_train.csv"});
    if (pa_path.empty() || po_path.empty()) return {Outcome::Skip, "GLC25 PA/PO metadata files not found under " + dir.string()};

    const Dataset pa = parse_occurrences(pa_path, DatasetKind::PaTrain);
    const Dataset po = parse_occurrences(po_path, DatasetKind::PoTrain);
    const auto pa_hist = stats::species_per_survey_hist(pa);
    const auto pa_occ = stats::occurrences_per_species_hist(pa);
    const auto po_occ = stats::occurrences_per_species_hist(po);
    const bool peak = pa_hist.mode == 10;
    const bool tail = pa_occ.fraction_below_cutoff >= 0.79;
    const bool singles = std::fabs(static_cast<double>(po_occ.singletons) - 5000.0) <= 500.0;
    return verdict(peak && tail && singles,
                   "PA surveys " + std::to_string(pa.records.size()) + ", peak " + std::to_string(pa_hist.mode) +
                       "; PA species under 50 occurrences " + fmt(100.0 * pa_occ.fraction_below_cutoff, 1) +
                       "%; PO surveys " + std::to_string(po.records.size()) + ", singleton species " +
                       std::to_string(po_occ.singletons));
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&failures](int id, const char* name, const std::function<Verdict()>& fn) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = fail(std::string("exception: ") + e.what());
        }
        const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Skip ? "SKIP" : "FAIL";
        failures += v.outcome == Outcome::Fail;
        std::cout << tag << "  [" << id << "] " << name << ": " << v.detail << " (" << fmt(seconds_since(t0), 1) << " s)" << std::endl;
    };

    const auto instances = merge_instances();
    synth::ClusteredPoConfig cc;  // 50k surveys, tight clusters, mostly one species each
    const Dataset clustered = synth::clustered_po(cc, 4004);
    const Dataset fixture_po = parse_occurrences(SDM_TEST_DATA_DIR "/fixture/po_train.csv", DatasetKind::PoTrain);

    report(1, "spatial exactness", spatial_exactness);
    report(2, "merge oracle", [&] { return merge_oracle(instances); });
    report(3, "no positive label noise", [&] { return label_noise(instances, clustered, fixture_po); });
    report(4, "distribution smoothing", [&] { return smoothing(clustered); });
    report(5, "ASL correctness", asl_correctness);
    report(6, "metric correctness", metric_correctness);
    report(7, "gate correctness", gate_correctness);
    report(8, "fusion reference", fusion_reference);
    report(9, "end-to-end determinism", determinism);
    report(10, "performance", performance);
    report(11, "real-data statistics", real_data);
    std::cout << (failures ? "ACCEPTANCE FAILED: " + std::to_string(failures) + " criterion(s)" : std::string("ACCEPTANCE PASSED"))
              << std::endl;
    return failures ? 1 : 0;
}
