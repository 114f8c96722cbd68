#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "tabunc/analysis/smoothing.hpp"
#include "tabunc/analysis/stats.hpp"
#include "tabunc/core/artifact.hpp"
#include "tabunc/train/trainer.hpp"
#include "tabunc/uncertainty/estimator.hpp"

namespace tabunc {

// Per-sample errors of a baseline and a candidate model ordered by
// increasing data uncertainty. delta = err_baseline - err_candidate, so
// positive values mean the candidate is better.
struct UncertaintyPlot {
    std::vector<std::size_t> ids; // dataset rows, ascending uncertainty
    std::vector<double> uncertainty;
    std::vector<double> delta;
    std::vector<double> baseline;
    std::vector<double> delta_smooth;
    std::vector<double> baseline_smooth;
    double sigma = 0.0;

    std::size_t size() const noexcept { return ids.size(); }
};

inline std::vector<double> squared_errors(const Model& model, const Dataset& ds, const std::vector<std::size_t>& rows) {
    if (model.input_width() != ds.features()) {
        throw DimensionError("model input width " + std::to_string(model.input_width()) + " does not match dataset with " +
                             std::to_string(ds.features()) + " features");
    }
    const auto pred = predict_mean(model, ds, rows);
    std::vector<double> e(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) e[i] = (pred[i] - ds.y[rows[i]]) * (pred[i] - ds.y[rows[i]]);
    return e;
}

// Builds the plot from per-sample errors aligned with `est.rows`.
inline UncertaintyPlot uncertainty_plot_from_errors(const std::vector<double>& err_baseline,
                                                    const std::vector<double>& err_candidate,
                                                    const UncertaintyEstimate& est, std::optional<double> sigma = {}) {
    if (err_baseline.size() != est.size() || err_candidate.size() != est.size()) {
        throw DimensionError("uncertainty_plot: errors cover " + std::to_string(err_baseline.size()) + "/" +
                             std::to_string(err_candidate.size()) + " samples, estimate covers " +
                             std::to_string(est.size()));
    }
    UncertaintyPlot p;
    p.sigma = sigma.value_or(default_sigma(est.size()));
    for (std::size_t i : stats::argsort(est.uncertainty)) {
        p.ids.push_back(est.rows[i]);
        p.uncertainty.push_back(est.uncertainty[i]);
        p.delta.push_back(err_baseline[i] - err_candidate[i]);
        p.baseline.push_back(err_baseline[i]);
    }
    p.delta_smooth = gaussian_smooth(p.delta, p.sigma);
    p.baseline_smooth = gaussian_smooth(p.baseline, p.sigma);
    return p;
}

inline UncertaintyPlot uncertainty_plot(const Model& baseline, const Model& candidate, const Dataset& ds,
                                        const UncertaintyEstimate& est, std::optional<double> sigma = {}) {
    for (std::size_t r : est.rows) {
        if (r >= ds.size() || ds.split[r] != est.split) {
            throw UsageError("uncertainty_plot: estimate rows do not belong to the " + std::string(to_string(est.split)) +
                             " split of this dataset");
        }
    }
    return uncertainty_plot_from_errors(squared_errors(baseline, ds, est.rows), squared_errors(candidate, ds, est.rows),
                                        est, sigma);
}

struct TercileSummary {
    double low = 0.0, mid = 0.0, high = 0.0;
};

// Mean of `values` (already in ascending-uncertainty order) per contiguous third.
inline TercileSummary tercile_means(const std::vector<double>& values) {
    if (values.size() < 3) throw UsageError("tercile summary needs at least 3 samples");
    const auto b = stats::partition_bounds(values.size(), 3);
    double m[3];
    for (int t = 0; t < 3; ++t) {
        double s = 0.0;
        for (std::size_t i = b[t]; i < b[t + 1]; ++i) s += values[i];
        m[t] = s / double(b[t + 1] - b[t]);
    }
    return {m[0], m[1], m[2]};
}

inline TercileSummary tercile_summary(const UncertaintyPlot& plot) { return tercile_means(plot.delta); }

// One model's per-sample MSE on the estimate's rows, ordered by uncertainty.
struct SplitCurve {
    std::vector<std::size_t> ids;
    std::vector<double> uncertainty;
    std::vector<double> mse;
    std::vector<double> mse_smooth;
    double sigma = 0.0;
};

inline SplitCurve train_split_curve(const Model& model, const Dataset& ds, const UncertaintyEstimate& est,
                                    std::optional<double> sigma = {}) {
    if (est.split != Split::train) throw UsageError("train_split_curve: estimate must cover the train split");
    if (est.rows != ds.rows(Split::train)) throw UsageError("train_split_curve: estimate does not match the train split");
    const auto err = squared_errors(model, ds, est.rows);
    SplitCurve c;
    c.sigma = sigma.value_or(default_sigma(est.size()));
    for (std::size_t i : stats::argsort(est.uncertainty)) {
        c.ids.push_back(est.rows[i]);
        c.uncertainty.push_back(est.uncertainty[i]);
        c.mse.push_back(err[i]);
    }
    c.mse_smooth = gaussian_smooth(c.mse, c.sigma);
    return c;
}

inline void write_plot_csv(const UncertaintyPlot& p, const std::filesystem::path& path, const Provenance& prov) {
    CsvWriter csv(prov, {"sample_id", "uncertainty", "delta_mse", "delta_mse_smooth", "baseline_mse",
                         "baseline_mse_smooth"});
    for (std::size_t i = 0; i < p.size(); ++i) {
        csv.row({std::to_string(p.ids[i]), fmt(p.uncertainty[i]), fmt(p.delta[i]), fmt(p.delta_smooth[i]),
                 fmt(p.baseline[i]), fmt(p.baseline_smooth[i])});
    }
    csv.save(path);
}

} // namespace tabunc
