#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/analysis/stats.hpp"
#include "tabunc/core/artifact.hpp"
#include "tabunc/train/tuner.hpp"

namespace tabunc {

inline constexpr double log_scale_clamp = 15.0;

// Per-sample estimates for one split. f_hat and g_hat are in the units of
// the dataset target (standardized if the dataset is).
struct UncertaintyEstimate {
    Split split = Split::test;
    std::vector<std::size_t> rows; // dataset row ids
    std::vector<double> f_hat;
    std::vector<double> g_hat;       // clamped log-scale
    std::vector<double> uncertainty; // exp(2 g_hat)
    ModelKind estimator = ModelKind::mlp;
    std::uint64_t seed = 0;
    double val_nll = 0.0;
    bool diverged = false;

    std::size_t size() const noexcept { return rows.size(); }
};

inline void to_json(nlohmann::json& j, const UncertaintyEstimate& e) {
    j = {{"split", to_string(e.split)}, {"rows", e.rows.size()}, {"estimator", to_string(e.estimator)},
         {"seed", e.seed},           {"val_nll", e.val_nll},     {"diverged", e.diverged}};
}

// Turns raw 2-column model output into an estimate for `rows`.
inline UncertaintyEstimate make_estimate(const Matrix& pred, Split split, std::vector<std::size_t> rows) {
    if (pred.cols() != 2) throw DimensionError("estimate: expected mean and log-scale columns, got " + pred.shape());
    if (pred.rows() != rows.size()) throw DimensionError("estimate: prediction rows do not match the split size");
    UncertaintyEstimate e;
    e.split = split;
    e.rows = std::move(rows);
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        const double g = std::clamp(pred(i, 1), -log_scale_clamp, log_scale_clamp);
        if (!std::isfinite(pred(i, 0)) || std::isnan(pred(i, 1))) {
            throw NumericError("estimate: non-finite prediction for row " + std::to_string(e.rows[i]));
        }
        e.f_hat.push_back(pred(i, 0));
        e.g_hat.push_back(g);
        e.uncertainty.push_back(std::exp(2.0 * g));
    }
    return e;
}

inline UncertaintyEstimate estimate_from_model(const Model& model, const Dataset& ds, Split split) {
    auto rows = ds.rows(split);
    const Matrix pred = predict_rows(model, ds, rows);
    return make_estimate(pred, split, std::move(rows));
}

struct EstimatorRun {
    std::unique_ptr<Model> model;
    TrainingMetadata meta;
};

// Fits a heteroscedastic network (mlp or mlp-plr) with the Gaussian NLL.
inline EstimatorRun fit_estimator(const Dataset& ds, ModelSpec spec, const TrainConfig& cfg) {
    if (spec.kind != ModelKind::mlp && spec.kind != ModelKind::mlp_plr && spec.kind != ModelKind::mlp_lrlr) {
        throw ConfigError("uncertainty estimator must be mlp, mlp-plr or mlp-lrlr, got " + to_string(spec.kind));
    }
    if (ds.count(Split::train) == 0 || ds.count(Split::val) == 0) {
        throw UsageError("estimate_uncertainty: dataset needs train and val splits");
    }
    spec.heteroscedastic = true;
    EstimatorRun run;
    run.model = fit(spec, ds, cfg, LossKind::nll, &run.meta);
    return run;
}

inline UncertaintyEstimate estimate_uncertainty(const Dataset& ds, const ModelSpec& spec, const TrainConfig& cfg,
                                                Split split = Split::test) {
    auto run = fit_estimator(ds, spec, cfg);
    auto est = estimate_from_model(*run.model, ds, split);
    est.estimator = spec.kind;
    est.seed = cfg.seed;
    est.val_nll = run.meta.best_val_loss;
    est.diverged = run.meta.diverged;
    return est;
}

// Estimate view using the generator's ground truth instead of a model.
inline UncertaintyEstimate true_estimate(const Dataset& ds, Split split) {
    if (!ds.truth) throw UsageError("ground truth required");
    UncertaintyEstimate e;
    e.split = split;
    e.rows = ds.rows(split);
    for (std::size_t r : e.rows) {
        e.f_hat.push_back(ds.truth->f[r]);
        e.g_hat.push_back(ds.truth->g[r]);
        e.uncertainty.push_back(std::exp(2.0 * ds.truth->g[r]));
    }
    return e;
}

struct AgreementReport {
    double pearson = 0.0;  // of log-uncertainties
    double spearman = 0.0; // of log-uncertainties
    std::size_t samples = 0;
};

inline AgreementReport cross_estimator_agreement(const UncertaintyEstimate& a, const UncertaintyEstimate& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cross_estimator_agreement: length mismatch " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    if (a.rows != b.rows) throw UsageError("cross_estimator_agreement: estimates cover different rows");
    std::vector<double> la, lb;
    for (double u : a.uncertainty) la.push_back(std::log(u));
    for (double u : b.uncertainty) lb.push_back(std::log(u));
    return {stats::pearson(la, lb), stats::spearman(la, lb), a.size()};
}

inline void write_estimate_csv(const UncertaintyEstimate& e, const std::filesystem::path& path, const Provenance& prov) {
    CsvWriter csv(prov, {"sample_id", "f_hat", "g_hat", "uncertainty"});
    for (std::size_t i = 0; i < e.size(); ++i) {
        csv.row({std::to_string(e.rows[i]), fmt(e.f_hat[i]), fmt(e.g_hat[i]), fmt(e.uncertainty[i])});
    }
    csv.save(path);
}

// Scatter data of two estimates over the same rows.
inline void write_agreement_csv(const UncertaintyEstimate& a, const UncertaintyEstimate& b,
                                const std::filesystem::path& path, const Provenance& prov) {
    if (a.rows != b.rows) throw UsageError("write_agreement_csv: estimates cover different rows");
    CsvWriter csv(prov, {"sample_id", "log_uncertainty_a", "log_uncertainty_b"});
    for (std::size_t i = 0; i < a.size(); ++i) {
        csv.row({std::to_string(a.rows[i]), fmt(std::log(a.uncertainty[i])), fmt(std::log(b.uncertainty[i]))});
    }
    csv.save(path);
}

} // namespace tabunc
