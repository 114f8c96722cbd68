#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabunc/core/error.hpp"
#include "tabunc/core/matrix.hpp"

namespace tabunc {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

inline const char* to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

// Ground truth of the generative model y = f + exp(g) * eps.
struct GroundTruth {
    std::vector<double> f;   // clean target
    std::vector<double> g;   // log noise scale
    std::vector<double> eps; // standard-normal draw
};

struct Standardization {
    bool features = false;
    bool target = false;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    double target_mean = 0.0;
    double target_std = 1.0;

    double target_to_original(double v) const { return target ? v * target_std + target_mean : v; }
    double target_from_original(double v) const { return target ? (v - target_mean) / target_std : v; }
    double mse_to_original(double mse) const { return target ? mse * target_std * target_std : mse; }
};

struct Dataset {
    std::string generator; // "saw", "mlp-synth", "csv", ...
    std::uint64_t seed = 0;
    Matrix x;
    std::vector<double> y;
    std::optional<GroundTruth> truth;
    std::vector<Split> split;
    Standardization standardization;
    std::vector<std::string> feature_names;
    std::vector<std::size_t> kept_features; // set by drop_features

    std::size_t size() const noexcept { return y.size(); }
    std::size_t features() const noexcept { return x.cols(); }
    bool has_truth() const noexcept { return truth.has_value(); }

    std::vector<std::size_t> rows(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) out.push_back(i);
        return out;
    }
    std::size_t count(Split s) const {
        std::size_t n = 0;
        for (Split t : split) n += (t == s);
        return n;
    }

    Matrix x_rows(const std::vector<std::size_t>& idx) const { return select_rows(x, idx); }
    std::vector<double> y_rows(const std::vector<std::size_t>& idx) const {
        std::vector<double> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
        return out;
    }

    // Data uncertainty exp(2 g) of each row, from ground truth.
    std::vector<double> true_uncertainty(const std::vector<std::size_t>& idx) const {
        if (!truth) throw UsageError("ground truth required");
        std::vector<double> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = std::exp(2.0 * truth->g[idx[i]]);
        return out;
    }

    void validate() const {
        if (x.rows() != y.size() || split.size() != y.size()) {
            throw DimensionError("dataset: inconsistent row counts (x " + x.shape() + ", y " +
                                 std::to_string(y.size()) + ", split " + std::to_string(split.size()) + ")");
        }
        if (truth && (truth->f.size() != y.size() || truth->g.size() != y.size() || truth->eps.size() != y.size())) {
            throw DimensionError("dataset: ground-truth length mismatch");
        }
    }
};

// Rows in `keep` order with all per-row fields carried along.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& keep) {
    Dataset out;
    out.generator = ds.generator;
    out.seed = ds.seed;
    out.x = ds.x_rows(keep);
    out.y = ds.y_rows(keep);
    out.split.reserve(keep.size());
    for (auto i : keep) out.split.push_back(ds.split[i]);
    if (ds.truth) {
        GroundTruth t;
        for (auto i : keep) {
            t.f.push_back(ds.truth->f[i]);
            t.g.push_back(ds.truth->g[i]);
            t.eps.push_back(ds.truth->eps[i]);
        }
        out.truth = std::move(t);
    }
    out.standardization = ds.standardization;
    out.feature_names = ds.feature_names;
    out.kept_features = ds.kept_features;
    return out;
}

// z-scores features with train-split statistics. Constant columns get std 1.
inline Dataset standardize_features(const Dataset& ds) {
    Dataset out = ds;
    const auto train = ds.rows(Split::train);
    if (train.empty()) throw UsageError("standardize: dataset has no train rows");
    const std::size_t d = ds.features();
    auto& st = out.standardization;
    st.features = true;
    st.feature_mean.assign(d, 0.0);
    st.feature_std.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (auto i : train) mean += ds.x(i, j);
        mean /= double(train.size());
        double var = 0.0;
        for (auto i : train) var += (ds.x(i, j) - mean) * (ds.x(i, j) - mean);
        var /= double(train.size());
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        st.feature_mean[j] = mean;
        st.feature_std[j] = sd;
        for (std::size_t i = 0; i < ds.size(); ++i) out.x(i, j) = (ds.x(i, j) - mean) / sd;
    }
    return out;
}

inline Dataset standardize_target(const Dataset& ds) {
    Dataset out = ds;
    const auto train = ds.rows(Split::train);
    if (train.empty()) throw UsageError("standardize: dataset has no train rows");
    double mean = 0.0;
    for (auto i : train) mean += ds.y[i];
    mean /= double(train.size());
    double var = 0.0;
    for (auto i : train) var += (ds.y[i] - mean) * (ds.y[i] - mean);
    var /= double(train.size());
    auto& st = out.standardization;
    st.target = true;
    st.target_mean = mean;
    st.target_std = var > 0.0 ? std::sqrt(var) : 1.0;
    for (auto& v : out.y) v = (v - mean) / st.target_std;
    // keep y = f + exp(g) * eps valid in standardized units
    if (out.truth) {
        const double log_sd = std::log(st.target_std);
        for (auto& v : out.truth->f) v = (v - mean) / st.target_std;
        for (auto& v : out.truth->g) v -= log_sd;
    }
    return out;
}

} // namespace tabunc
