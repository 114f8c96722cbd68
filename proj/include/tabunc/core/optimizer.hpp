#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tabunc/core/error.hpp"
#include "tabunc/core/layers.hpp"

namespace tabunc {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0; // decoupled
};

// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
public:
    explicit AdamW(AdamConfig config = {}) : config_(config) {}

    const AdamConfig& config() const noexcept { return config_; }
    std::size_t steps() const noexcept { return step_; }

    // Applies one update. A non-finite gradient aborts the step before any
    // parameter or moment is touched.
    void step(std::span<Parameter* const> params, std::span<const Matrix> grads, double lr) {
        if (params.size() != grads.size()) {
            throw DimensionError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                                 std::to_string(grads.size()) + " gradients");
        }
        if (!(lr >= 0.0)) throw ConfigError("optimizer: learning rate must be non-negative");
        if (first_.empty()) {
            for (const Parameter* p : params) {
                first_.emplace_back(p->value.rows(), p->value.cols());
                second_.emplace_back(p->value.rows(), p->value.cols());
            }
        }
        if (first_.size() != params.size()) throw UsageError("optimizer: parameter set changed between steps");
        for (std::size_t i = 0; i < params.size(); ++i) {
            Matrix::require_same_shape(params[i]->value, grads[i], "optimizer step");
            Matrix::require_same_shape(params[i]->value, first_[i], "optimizer state");
            if (!grads[i].all_finite()) {
                throw NumericError("optimizer: non-finite gradient for parameter '" + params[i]->id + "'");
            }
        }

        ++step_;
        const double bc1 = 1.0 - std::pow(config_.beta1, double(step_));
        const double bc2 = 1.0 - std::pow(config_.beta2, double(step_));
        const double decay = 1.0 - lr * config_.weight_decay;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i]->value.data();
            const auto& g = grads[i].data();
            auto& m = first_[i].data();
            auto& v = second_[i].data();
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
                v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] = p[j] * decay - lr * mhat / (std::sqrt(vhat) + config_.epsilon);
            }
        }
    }

private:
    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
};

} // namespace tabunc
