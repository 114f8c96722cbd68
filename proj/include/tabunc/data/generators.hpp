#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tabunc/core/layers.hpp"
#include "tabunc/core/rng.hpp"
#include "tabunc/data/dataset.hpp"

namespace tabunc {

struct MlpSyntheticConfig {
    std::size_t n = 40000;
    std::size_t d = 20;
    std::size_t f_hidden = 64;
    std::size_t g_hidden = 10;
    double g_gain = 4.0;   // multiplies the raw g-network output
    double g_shift = -1.0; // added after the gain
    double train_fraction = 0.8;
    double val_fraction = 0.1;
};

struct SawConfig {
    std::size_t n_train = 80000;
    std::size_t n_val = 10000;
    std::size_t n_test = 10000;
    std::size_t teeth = 5;
    double noise_exponent = 6.0;
    double noise_denominator = 62500.0;
};

namespace detail {

inline std::vector<Split> sequential_splits(std::size_t n_train, std::size_t n_val, std::size_t n_test) {
    std::vector<Split> s;
    s.reserve(n_train + n_val + n_test);
    s.insert(s.end(), n_train, Split::train);
    s.insert(s.end(), n_val, Split::val);
    s.insert(s.end(), n_test, Split::test);
    return s;
}

inline Matrix run_stack(const std::vector<Affine>& layers, const Matrix& x) {
    const ForwardContext ctx{Phase::eval, nullptr};
    Matrix h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(h, ctx, nullptr);
        if (i + 1 < layers.size()) {
            for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
        }
    }
    return h;
}

} // namespace detail

// Triangle wave with teeth on [2i, 2i+2], apex 1 at odd positions.
inline double saw_profile(double t) {
    const double phase = t - 2.0 * std::floor(t / 2.0);
    return 1.0 - std::abs(phase - 1.0);
}

inline double saw_clean_target(double x1, double x2) { return x1 < saw_profile(x2) ? 1.0 : 0.0; }

inline double saw_noise_scale(double x2, const SawConfig& cfg = {}) {
    return std::pow(x2, cfg.noise_exponent) / cfg.noise_denominator;
}

// Gaussian features; f and g are randomly initialised ReLU networks
// (three affine layers for f, two for g with hidden width 10).
inline Dataset gen_mlp_synthetic(std::uint64_t seed, const MlpSyntheticConfig& cfg = {}) {
    if (cfg.n < 10) throw UsageError("gen_mlp_synthetic: n must be at least 10");
    if (cfg.d < 1) throw UsageError("gen_mlp_synthetic: d must be at least 1");
    Rng root = Rng(seed).split("generate").split("mlp-synth");
    Rng feat_rng = root.split("features");
    Rng f_rng = root.split("f-net");
    Rng g_rng = root.split("g-net");
    Rng noise_rng = root.split("noise");

    Dataset ds;
    ds.generator = "mlp-synth";
    ds.seed = seed;
    ds.x = Matrix(cfg.n, cfg.d);
    for (double& v : ds.x.data()) v = feat_rng.normal();

    std::vector<Affine> f_net;
    f_net.emplace_back(cfg.d, cfg.f_hidden, "f0", f_rng);
    f_net.emplace_back(cfg.f_hidden, cfg.f_hidden, "f1", f_rng);
    f_net.emplace_back(cfg.f_hidden, 1, "f2", f_rng);
    std::vector<Affine> g_net;
    g_net.emplace_back(cfg.d, cfg.g_hidden, "g0", g_rng);
    g_net.emplace_back(cfg.g_hidden, 1, "g1", g_rng);

    const Matrix f = detail::run_stack(f_net, ds.x);
    const Matrix g = detail::run_stack(g_net, ds.x);

    GroundTruth truth;
    truth.f = f.data();
    truth.g.resize(cfg.n);
    truth.eps.resize(cfg.n);
    ds.y.resize(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        truth.g[i] = cfg.g_gain * g[i] + cfg.g_shift;
        truth.eps[i] = noise_rng.normal();
        ds.y[i] = truth.f[i] + std::exp(truth.g[i]) * truth.eps[i];
    }
    ds.truth = std::move(truth);

    const auto n_train = std::size_t(std::llround(double(cfg.n) * cfg.train_fraction));
    const auto n_val = std::size_t(std::llround(double(cfg.n) * cfg.val_fraction));
    ds.split = detail::sequential_splits(n_train, n_val, cfg.n - n_train - n_val);
    for (std::size_t j = 0; j < cfg.d; ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
    return ds;
}

// Two features: x1 in [0, 1] across the teeth, x2 in [0, 10] along them.
// f = 1 left of the saw line (inside triangles (2i,0),(2i+1,1),(2i+2,0)
// written as (x2, x1)); the noise scale x2^6 / 62500 grows along x2 only.
inline Dataset gen_saw(std::uint64_t seed, const SawConfig& cfg = {}) {
    if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1) throw UsageError("gen_saw: split counts must be >= 1");
    Rng root = Rng(seed).split("generate").split("saw");
    Rng feat_rng = root.split("features");
    Rng noise_rng = root.split("noise");
    const std::size_t n = cfg.n_train + cfg.n_val + cfg.n_test;
    const double length = 2.0 * double(cfg.teeth);

    Dataset ds;
    ds.generator = "saw";
    ds.seed = seed;
    ds.x = Matrix(n, 2);
    GroundTruth truth;
    truth.f.resize(n);
    truth.g.resize(n);
    truth.eps.resize(n);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = feat_rng.uniform();
        const double x2 = feat_rng.uniform(0.0, length);
        ds.x(i, 0) = x1;
        ds.x(i, 1) = x2;
        const double scale = saw_noise_scale(x2, cfg);
        truth.f[i] = saw_clean_target(x1, x2);
        truth.g[i] = std::log(scale); // -inf at x2 == 0; exp() restores 0
        truth.eps[i] = noise_rng.normal();
        ds.y[i] = truth.f[i] + std::exp(truth.g[i]) * truth.eps[i];
    }
    ds.truth = std::move(truth);
    ds.split = detail::sequential_splits(cfg.n_train, cfg.n_val, cfg.n_test);
    ds.feature_names = {"x1", "x2"};
    return ds;
}

// Keeps a uniformly random size-`keep` subset of columns in original order.
inline Dataset drop_features(const Dataset& ds, std::size_t keep, std::uint64_t seed) {
    const std::size_t d = ds.features();
    if (keep < 1 || keep > d) {
        throw UsageError("drop_features: keep must lie in [1, " + std::to_string(d) + "], got " + std::to_string(keep));
    }
    Rng rng = Rng(seed).split("drop-features");
    auto perm = rng.permutation(d);
    std::vector<std::size_t> cols(perm.begin(), perm.begin() + std::ptrdiff_t(keep));
    std::sort(cols.begin(), cols.end());

    Dataset out = ds;
    out.x = Matrix(ds.size(), keep);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < keep; ++c) out.x(i, c) = ds.x(i, cols[c]);
    }
    std::vector<std::size_t> original(cols.size());
    for (std::size_t c = 0; c < keep; ++c) {
        original[c] = ds.kept_features.empty() ? cols[c] : ds.kept_features[cols[c]];
    }
    out.kept_features = std::move(original);
    if (!ds.feature_names.empty()) {
        out.feature_names.clear();
        for (auto c : cols) out.feature_names.push_back(ds.feature_names[c]);
    }
    if (ds.standardization.features) {
        auto& st = out.standardization;
        st.feature_mean.clear();
        st.feature_std.clear();
        for (auto c : cols) {
            st.feature_mean.push_back(ds.standardization.feature_mean[c]);
            st.feature_std.push_back(ds.standardization.feature_std[c]);
        }
    }
    return out;
}

} // namespace tabunc
