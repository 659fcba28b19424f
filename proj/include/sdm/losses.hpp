// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sdm/common.hpp"

namespace sdm {

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-7;

struct AslParams {
    double gamma_pos = 0.0;
    double gamma_neg = 0.0;
    double clip_m = 0.0;

    void validate() const {
        if (!(gamma_pos >= 0.0) || !(gamma_neg >= 0.0)) throw Error("AslParams: focusing parameters must be >= 0");
        if (!(clip_m >= 0.0 && clip_m < 1.0)) throw Error("AslParams: clip m must be in [0,1)");
    }
};

/// Binary labels and predicted probabilities of equal length.
struct LabeledScores {
    std::span<const double> y;
    std::span<const double> p;

    void validate() const {
        if (y.size() != p.size())
            throw Error("label/probability length mismatch: " + std::to_string(y.size()) + " vs " + std::to_string(p.size()));
        for (double v : y)
            if (v != 0.0 && v != 1.0) throw Error("labels must be 0 or 1");
        for (double v : p)
            if (std::isnan(v)) throw Error("probability is NaN");
    }
};

inline double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

/// Asymmetric loss, averaged over all entries:
///   -y (1-p)^g+ log p - (1-y) max(p-m, 0)^g- log(1-p)
/// The negative term is exactly 0 whenever max(p-m, 0) == 0, for every g- >= 0.
inline double asl_loss(const LabeledScores& data, const AslParams& params) {
    data.validate();
    params.validate();
    if (data.y.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.y.size(); ++i) {
        const double p = clamp_prob(data.p[i]);
        if (data.y[i] == 1.0) {
            sum += -std::pow(1.0 - p, params.gamma_pos) * std::log(p);
        } else {
            const double shifted = std::max(p - params.clip_m, 0.0);
            if (shifted > 0.0) sum += -std::pow(shifted, params.gamma_neg) * std::log(1.0 - p);
        }
    }
    return sum / static_cast<double>(data.y.size());
}

struct AslGradient {
    std::vector<double> grad;
    /// Entries evaluated exactly at p == m where the negative term has no
    /// derivative (g- <= 1); their gradient is reported as 0.
    std::vector<std::size_t> nondifferentiable;
};

/// Analytic dL/dp of `asl_loss` with respect to the clamped probabilities.
inline AslGradient asl_grad(const LabeledScores& data, const AslParams& params) {
    data.validate();
    params.validate();
    AslGradient out;
    const std::size_t n = data.y.size();
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double gp = params.gamma_pos, gn = params.gamma_neg;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = clamp_prob(data.p[i]);
        double g = 0.0;
        if (data.y[i] == 1.0) {
            // d/dp [-(1-p)^g log p] = g (1-p)^(g-1) log p - (1-p)^g / p
            const double q = 1.0 - p;
            g = -std::pow(q, gp) / p;
            if (gp != 0.0) g += gp * std::pow(q, gp - 1.0) * std::log(p);
        } else {
            const double shifted = p - params.clip_m;
            if (shifted == 0.0) {
                if (gn <= 1.0) out.nondifferentiable.push_back(i);
            } else if (shifted > 0.0) {
                // d/dp [-s^g log(1-p)] = -g s^(g-1) log(1-p) + s^g / (1-p)
                g = std::pow(shifted, gn) / (1.0 - p);
                if (gn != 0.0) g += -gn * std::pow(shifted, gn - 1.0) * std::log(1.0 - p);
            }
        }
        out.grad[i] = g * inv_n;
    }
    return out;
}

/// Binary cross-entropy, averaged over all entries.
inline double bce_loss(const LabeledScores& data) {
    data.validate();
    if (data.y.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.y.size(); ++i) {
        const double p = clamp_prob(data.p[i]);
        sum += -(data.y[i] * std::log(p) + (1.0 - data.y[i]) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(data.y.size());
}

struct SetCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// TP/FP/FN between two ascending, duplicate-free sequences.
template <class T>
SetCounts compare_sets(const std::vector<T>& truth, const std::vector<T>& pred) {
    SetCounts c;
    auto a = truth.begin();
    auto b = pred.begin();
    while (a != truth.end() && b != pred.end()) {
        if (*a == *b) {
            ++c.tp;
            ++a;
            ++b;
        } else if (*a < *b) {
            ++c.fn;
            ++a;
        } else {
            ++c.fp;
            ++b;
        }
    }
    c.fn += static_cast<std::size_t>(truth.end() - a);
    c.fp += static_cast<std::size_t>(pred.end() - b);
    return c;
}

/// Per-survey F1 = TP / (TP + (FP + FN) / 2). Empty truth and empty
/// prediction count as 1.
inline double sample_f1(const SetCounts& c) {
    const double denom = static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp + c.fn);
    if (denom == 0.0) return 1.0;
    return static_cast<double>(c.tp) / denom;
}

/// Samples-averaged F1 over surveys. Both sides must cover the same surveys;
/// sets must be sorted and duplicate-free.
template <class Key, class T>
double samples_f1(const std::map<Key, std::vector<T>>& truth, const std::map<Key, std::vector<T>>& pred) {
    std::vector<Key> only_truth, only_pred;
    for (const auto& [k, v] : truth)
        if (!pred.count(k)) only_truth.push_back(k);
    for (const auto& [k, v] : pred)
        if (!truth.count(k)) only_pred.push_back(k);
    if (!only_truth.empty() || !only_pred.empty()) {
        std::string msg = "samples_f1: survey id mismatch.";
        auto list = [&msg](const char* label, const std::vector<Key>& ids) {
            if (ids.empty()) return;
            msg += std::string(" ") + label + ":";
            for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += ' ' + std::to_string(ids[i]);
            if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
        };
        list("missing from predictions", only_truth);
        list("not in truth", only_pred);
        throw Error(msg);
    }
    if (truth.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [k, t] : truth) sum += sample_f1(compare_sets(t, pred.at(k)));
    return sum / static_cast<double>(truth.size());
}

}  // namespace sdm
