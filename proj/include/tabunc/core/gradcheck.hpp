#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabunc/core/layers.hpp"
#include "tabunc/core/rng.hpp"

namespace tabunc {

struct GradCheckOptions {
    std::size_t coords_per_tensor = 20; // all coordinates when the tensor is smaller
    double step = 1e-5;
    // Denominator floor: |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t coordinates_checked = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

// Compares analytic gradients against central differences of `loss` on a
// random sample of coordinates of every tensor. `loss` must read the current
// parameter values; each probed coordinate is restored afterwards.
inline GradCheckReport check_gradients(std::span<Parameter* const> params, std::span<const Matrix> analytic,
                                       const std::function<double()>& loss, Rng rng,
                                       const GradCheckOptions& options = {}) {
    if (params.size() != analytic.size()) throw UsageError("gradient check: parameter/gradient count mismatch");
    GradCheckReport report;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& value = params[t]->value;
        Matrix::require_same_shape(value, analytic[t], "gradient check");
        std::vector<std::size_t> coords;
        if (value.size() <= options.coords_per_tensor) {
            for (std::size_t i = 0; i < value.size(); ++i) coords.push_back(i);
        } else {
            auto perm = rng.permutation(value.size());
            coords.assign(perm.begin(), perm.begin() + std::ptrdiff_t(options.coords_per_tensor));
        }
        for (std::size_t i : coords) {
            const double saved = value[i];
            value[i] = saved + options.step;
            const double up = loss();
            value[i] = saved - options.step;
            const double down = loss();
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double err = relative_error(analytic[t][i], numeric, options.floor);
            ++report.coordinates_checked;
            if (err > report.max_relative_error || report.worst_parameter.empty()) {
                report.max_relative_error = err;
                report.worst_parameter = params[t]->id;
                report.worst_index = i;
            }
        }
    }
    return report;
}

// Finite-difference check of a single layer: loss = sum(forward(x) * probe),
// covering every parameter tensor plus the input gradient.
inline GradCheckReport check_layer(Layer& layer, const Matrix& input, Rng rng, const GradCheckOptions& options = {}) {
    Rng probe_rng = rng.split("probe");
    ForwardContext ctx{Phase::eval, nullptr};
    LayerCache cache;
    Matrix out = layer.forward(input, ctx, &cache);
    Matrix probe(out.rows(), out.cols());
    for (double& v : probe.data()) v = probe_rng.normal();

    std::vector<Parameter*> params = layer.parameters();
    std::vector<Matrix> grads;
    for (auto* p : params) grads.emplace_back(p->value.rows(), p->value.cols());
    Matrix din = layer.backward(cache, probe, grads);

    Parameter input_param{"input", input};
    params.push_back(&input_param);
    grads.push_back(din);

    auto loss = [&] {
        Matrix o = layer.forward(input_param.value, ctx, nullptr);
        double s = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * probe[i];
        return s;
    };
    return check_gradients(params, grads, loss, rng.split("coords"), options);
}

} // namespace tabunc
