#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tabunc/core/error.hpp"

namespace tabunc {

// Index into [0, n) under half-sample symmetric reflection (d c b a | a b c d).
inline std::size_t reflect_index(std::int64_t i, std::size_t n) {
    const auto period = std::int64_t(2 * n);
    std::int64_t m = i % period;
    if (m < 0) m += period;
    return m < std::int64_t(n) ? std::size_t(m) : std::size_t(period - 1 - m);
}

// Normalized kernel w_j ~ exp(-j^2 / (2 sigma^2)), j in [-r, r], r = ceil(4 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("gaussian_kernel: sigma must be positive and finite");
    const auto r = std::int64_t(std::ceil(4.0 * sigma));
    std::vector<double> w(std::size_t(2 * r + 1));
    double total = 0.0;
    for (std::int64_t j = -r; j <= r; ++j) {
        const double v = std::exp(-double(j * j) / (2.0 * sigma * sigma));
        w[std::size_t(j + r)] = v;
        total += v;
    }
    for (double& v : w) v /= total;
    return w;
}

// Discrete Gaussian smoothing with reflect padding. sigma = 0 is the identity.
// Deviations from the centre value are smoothed, so constant series come
// back bit-for-bit.
inline std::vector<double> gaussian_smooth(std::span<const double> x, double sigma) {
    if (sigma < 0.0) throw UsageError("gaussian_smooth: sigma must be non-negative");
    std::vector<double> out(x.begin(), x.end());
    if (sigma == 0.0 || x.empty()) return out;
    const auto w = gaussian_kernel(sigma);
    const auto r = std::int64_t(w.size() / 2);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::int64_t j = -r; j <= r; ++j) {
            s += w[std::size_t(j + r)] * (x[reflect_index(std::int64_t(i) + j, n)] - x[i]);
        }
        out[i] = x[i] + s;
    }
    return out;
}

// Default width: 2% of the series length.
inline double default_sigma(std::size_t n) { return 0.02 * double(n); }

} // namespace tabunc
