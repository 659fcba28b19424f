// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdm/common.hpp"

// Serial tri-modal cross-attention (forward pass only). Each modality is a
// single token. Keys and values come from one shared projection; every
// modality has its own query projection. Modalities are updated in order
// A, B, C, each attending to the latest state of the other two.

namespace sdm::fusion {

using Vector = std::vector<double>;

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// y = W x + b, W is (out x in).
struct Linear {
    Matrix weight;
    Vector bias;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }

    Vector apply(std::span<const double> x) const {
        if (x.size() != weight.cols) throw Error("Linear: input has " + std::to_string(x.size()) + " dims, expected " + std::to_string(weight.cols));
        Vector y(weight.rows);
        for (std::size_t r = 0; r < weight.rows; ++r) {
            double acc = bias[r];
            const double* w = &weight.data[r * weight.cols];
            for (std::size_t c = 0; c < weight.cols; ++c) acc += w[c] * x[c];
            y[r] = acc;
        }
        return y;
    }

    bool all_finite() const {
        for (double v : weight.data) if (!std::isfinite(v)) return false;
        for (double v : bias) if (!std::isfinite(v)) return false;
        return true;
    }
};

struct FeedForward {
    Linear expand;    // D -> 4D
    Linear contract;  // 4D -> D
};

inline constexpr std::size_t kModalities = 3;
inline constexpr std::size_t kFfnExpansion = 4;
inline constexpr double kLayerNormEps = 1e-5;

using ModalityDims = std::array<std::size_t, kModalities>;

struct FusionWeights {
    ModalityDims dims{};
    std::size_t hidden = 0;
    std::size_t heads = 1;
    std::array<Linear, kModalities> input;   // d_x -> D
    std::array<Linear, kModalities> query;   // D -> D
    Linear key;                              // D -> D, shared
    Linear value;                            // D -> D, shared
    std::array<FeedForward, kModalities> ffn;
    std::array<Linear, kModalities> output;  // D -> d_x

    void validate() const {
        if (hidden == 0 || heads == 0 || hidden % heads != 0)
            throw Error("FusionWeights: hidden dim " + std::to_string(hidden) + " not divisible by heads " + std::to_string(heads));
        auto check = [](const Linear& l, std::size_t in, std::size_t out, const char* what) {
            if (l.in_dim() != in || l.out_dim() != out || l.bias.size() != out)
                throw Error(std::string("FusionWeights: bad shape for ") + what);
        };
        for (std::size_t m = 0; m < kModalities; ++m) {
            check(input[m], dims[m], hidden, "input projection");
            check(query[m], hidden, hidden, "query projection");
            check(ffn[m].expand, hidden, kFfnExpansion * hidden, "ffn expand");
            check(ffn[m].contract, kFfnExpansion * hidden, hidden, "ffn contract");
            check(output[m], hidden, dims[m], "output projection");
        }
        check(key, hidden, hidden, "key projection");
        check(value, hidden, hidden, "value projection");
    }

    bool all_finite() const {
        bool ok = key.all_finite() && value.all_finite();
        for (std::size_t m = 0; m < kModalities; ++m)
            ok = ok && input[m].all_finite() && query[m].all_finite() && ffn[m].expand.all_finite() &&
                 ffn[m].contract.all_finite() && output[m].all_finite();
        return ok;
    }

    /// Zeroes every back-projection, which turns the layer into the identity.
    void zero_output_projections() {
        for (auto& o : output) {
            std::fill(o.weight.data.begin(), o.weight.data.end(), 0.0);
            std::fill(o.bias.begin(), o.bias.end(), 0.0);
        }
    }
};

/// One token per modality.
struct ModalityTriple {
    std::array<Vector, kModalities> x;

    friend bool operator==(const ModalityTriple&, const ModalityTriple&) = default;
};

inline Linear uniform_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    Linear l;
    l.weight = Matrix(out, in);
    l.bias.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : l.weight.data) w = dist(rng);
    for (double& b : l.bias) b = dist(rng);
    return l;
}

/// Seeded init; every weight and bias is uniform in +-1/sqrt(fan_in).
inline FusionWeights init_weights(const ModalityDims& dims, std::size_t hidden, std::size_t heads, std::uint64_t seed) {
    if (heads == 0 || hidden == 0 || hidden % heads != 0)
        throw Error("init_weights: hidden dim " + std::to_string(hidden) + " not divisible by heads " + std::to_string(heads));
    for (std::size_t d : dims)
        if (d == 0) throw Error("init_weights: modality dims must be positive");
    std::mt19937_64 rng(seed);
    FusionWeights w;
    w.dims = dims;
    w.hidden = hidden;
    w.heads = heads;
    for (std::size_t m = 0; m < kModalities; ++m) w.input[m] = uniform_linear(dims[m], hidden, rng);
    for (std::size_t m = 0; m < kModalities; ++m) w.query[m] = uniform_linear(hidden, hidden, rng);
    w.key = uniform_linear(hidden, hidden, rng);
    w.value = uniform_linear(hidden, hidden, rng);
    for (std::size_t m = 0; m < kModalities; ++m) {
        w.ffn[m].expand = uniform_linear(hidden, kFfnExpansion * hidden, rng);
        w.ffn[m].contract = uniform_linear(kFfnExpansion * hidden, hidden, rng);
    }
    for (std::size_t m = 0; m < kModalities; ++m) w.output[m] = uniform_linear(hidden, dims[m], rng);
    return w;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

/// Normalizes to zero mean, unit variance (no affine parameters).
inline Vector layer_norm(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv;
    return y;
}

struct AttentionResult {
    Vector output;
    /// weights[head][token]; masked tokens carry weight 0.
    std::vector<Vector> weights;
};

/// Scaled dot-product attention of one query token over context tokens,
/// split into `heads` contiguous slices. `mask[t] == false` excludes token t.
inline AttentionResult multi_head_attention(std::span<const double> query, const std::vector<Vector>& keys,
                                            const std::vector<Vector>& values, std::size_t heads,
                                            const std::vector<bool>* mask = nullptr) {
    const std::size_t D = query.size();
    if (heads == 0 || D % heads != 0) throw Error("multi_head_attention: dim not divisible by heads");
    if (keys.size() != values.size() || keys.empty()) throw Error("multi_head_attention: need matching, non-empty keys/values");
    if (mask && mask->size() != keys.size()) throw Error("multi_head_attention: mask length mismatch");
    const std::size_t T = keys.size();
    const std::size_t dh = D / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    AttentionResult res;
    res.output.assign(D, 0.0);
    res.weights.assign(heads, Vector(T, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        double max_logit = -std::numeric_limits<double>::infinity();
        Vector logits(T, 0.0);
        bool any = false;
        for (std::size_t t = 0; t < T; ++t) {
            if (mask && !(*mask)[t]) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < dh; ++i) dot += query[off + i] * keys[t][off + i];
            logits[t] = dot * scale;
            max_logit = std::max(max_logit, logits[t]);
            any = true;
        }
        if (!any) throw Error("multi_head_attention: every context token is masked");
        double z = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            if (mask && !(*mask)[t]) continue;
            res.weights[h][t] = std::exp(logits[t] - max_logit);
            z += res.weights[h][t];
        }
        for (std::size_t t = 0; t < T; ++t) {
            res.weights[h][t] /= z;
            for (std::size_t i = 0; i < dh; ++i) res.output[off + i] += res.weights[h][t] * values[t][off + i];
        }
    }
    return res;
}

/// Attention weights captured during a forward pass: per modality, per head, per context token.
struct ForwardTrace {
    std::array<std::vector<Vector>, kModalities> attention;
};

inline ModalityTriple tri_serial_forward(const ModalityTriple& in, const FusionWeights& w, ForwardTrace* trace = nullptr) {
    w.validate();
    for (std::size_t m = 0; m < kModalities; ++m)
        if (in.x[m].size() != w.dims[m])
            throw Error("tri_serial_forward: modality " + std::to_string(m) + " has " + std::to_string(in.x[m].size()) +
                        " dims, weights expect " + std::to_string(w.dims[m]));

    std::array<Vector, kModalities> h;
    for (std::size_t m = 0; m < kModalities; ++m) h[m] = w.input[m].apply(in.x[m]);

    // Serial update: modality m attends to the current state of the other two,
    // then its post-norm residual replaces h[m] before the next modality runs.
    for (std::size_t m = 0; m < kModalities; ++m) {
        const Vector q = w.query[m].apply(h[m]);
        std::vector<Vector> keys, values;
        for (std::size_t o = 0; o < kModalities; ++o) {
            if (o == m) continue;
            keys.push_back(w.key.apply(h[o]));
            values.push_back(w.value.apply(h[o]));
        }
        AttentionResult att = multi_head_attention(q, keys, values, w.heads);
        Vector sum(w.hidden);
        for (std::size_t i = 0; i < w.hidden; ++i) sum[i] = h[m][i] + att.output[i];
        h[m] = layer_norm(sum);
        if (trace) trace->attention[m] = std::move(att.weights);
    }

    ModalityTriple out;
    for (std::size_t m = 0; m < kModalities; ++m) {
        Vector mid = w.ffn[m].expand.apply(h[m]);
        for (double& v : mid) v = gelu(v);
        const Vector ff = w.ffn[m].contract.apply(mid);
        Vector sum(w.hidden);
        for (std::size_t i = 0; i < w.hidden; ++i) sum[i] = h[m][i] + ff[i];
        const Vector normed = layer_norm(sum);
        const Vector back = w.output[m].apply(normed);
        out.x[m] = in.x[m];
        for (std::size_t i = 0; i < back.size(); ++i) out.x[m][i] += back[i];
    }
    return out;
}

inline ModalityTriple stack_forward(const ModalityTriple& in, std::span<const FusionWeights> layers) {
    ModalityTriple cur = in;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t m = 0; m < kModalities; ++m)
            if (layers[l].dims[m] != cur.x[m].size())
                throw Error("stack_forward: layer " + std::to_string(l) + " dims do not match the input");
        cur = tri_serial_forward(cur, layers[l]);
    }
    return cur;
}

}  // namespace sdm::fusion
