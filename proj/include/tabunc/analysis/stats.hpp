#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tabunc/core/error.hpp"

namespace tabunc::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw UsageError("mean of an empty series");
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

inline double variance(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size());
}

// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::span<const double> v, double q) {
    if (v.empty()) throw UsageError("quantile of an empty series");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double pos = q * double(s.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - double(lo)) * (s[hi] - s[lo]);
}

inline double iqr(std::span<const double> v) { return quantile(v, 0.75) - quantile(v, 0.25); }

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("pearson: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) throw UsageError("pearson: need at least 2 samples");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericError("pearson: constant series");
    return sab / std::sqrt(saa * sbb);
}

// Ranks starting at 1; ties get the average of their ranks.
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("spearman: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    const auto ra = ranks(a), rb = ranks(b);
    return pearson(ra, rb);
}

// Indices that sort `v` ascending; ties keep index order.
inline std::vector<std::size_t> argsort(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    return idx;
}

// Boundaries of `parts` contiguous groups over n items, sizes differing by at most 1.
inline std::vector<std::size_t> partition_bounds(std::size_t n, std::size_t parts) {
    if (parts == 0) throw UsageError("partition into zero parts");
    std::vector<std::size_t> b(parts + 1);
    for (std::size_t p = 0; p <= parts; ++p) b[p] = p * n / parts;
    return b;
}

} // namespace tabunc::stats
