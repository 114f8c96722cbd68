#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tabunc/core/error.hpp"

namespace tabunc {

struct LossResult {
    double value = 0.0;
    std::vector<double> grad; // d value / d prediction, per sample
};

struct GaussianNllResult {
    double value = 0.0;
    std::vector<double> grad_mean;
    std::vector<double> grad_log_scale;
};

struct TripletResult {
    double value = 0.0;
    double grad_pos = 0.0;
    double grad_neg = 0.0;
};

namespace detail {

inline void require_lengths(std::size_t a, std::size_t b, const char* who) {
    if (a != b) {
        throw DimensionError(std::string(who) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
    }
    if (a == 0) throw UsageError(std::string(who) + ": empty batch");
}

} // namespace detail

// mean((pred - target)^2), gradient 2 (pred - target) / n.
inline LossResult loss_mse(std::span<const double> pred, std::span<const double> target) {
    detail::require_lengths(pred.size(), target.size(), "loss_mse");
    const double n = double(pred.size());
    LossResult r;
    r.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        r.value += e * e;
        r.grad[i] = 2.0 * e / n;
    }
    r.value /= n;
    return r;
}

// Mean over samples of 0.5 ln(2 pi) + g + (y - mu)^2 / (2 exp(2 g)).
inline GaussianNllResult loss_gaussian_nll(std::span<const double> mean, std::span<const double> log_scale,
                                           std::span<const double> target) {
    detail::require_lengths(mean.size(), target.size(), "loss_gaussian_nll");
    detail::require_lengths(log_scale.size(), target.size(), "loss_gaussian_nll");
    const double n = double(mean.size());
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    GaussianNllResult r;
    r.grad_mean.resize(mean.size());
    r.grad_log_scale.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double resid = target[i] - mean[i];
        const double inv_var = std::exp(-2.0 * log_scale[i]);
        const double term = half_log_2pi + log_scale[i] + 0.5 * resid * resid * inv_var;
        if (!std::isfinite(term)) {
            throw NumericError("loss_gaussian_nll: non-finite value at sample " + std::to_string(i));
        }
        r.value += term;
        r.grad_mean[i] = -resid * inv_var / n;
        r.grad_log_scale[i] = (1.0 - resid * resid * inv_var) / n;
    }
    r.value /= n;
    return r;
}

// Cross-entropy of softmax([pos, neg]) against class 0: ln(1 + e^(neg - pos)).
inline TripletResult loss_triplet(double sim_pos, double sim_neg) {
    const double z = sim_neg - sim_pos;
    TripletResult r;
    // softplus(z) computed without overflow
    r.value = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    r.grad_pos = -sig;
    r.grad_neg = sig;
    return r;
}

} // namespace tabunc
