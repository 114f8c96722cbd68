#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/core/optimizer.hpp"
#include "tabunc/data/dataset.hpp"
#include "tabunc/models/nca.hpp"
#include "tabunc/train/losses.hpp"

namespace tabunc {

enum class LossKind { mse, nll };

inline std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "nll"; }

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 1000;
    std::size_t patience = 16;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr >= 0.0)) throw ConfigError("train config: lr must be non-negative");
        if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be non-negative");
        if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
        if (max_epochs < 1) throw ConfigError("train config: max_epochs must be positive");
        if (patience >= max_epochs) throw ConfigError("train config: patience must be below max_epochs");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"lr", c.lr},
         {"weight_decay", c.weight_decay},
         {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"patience", c.patience},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("batch_size", c.batch_size);
    get("max_epochs", c.max_epochs);
    get("patience", c.patience);
    get("seed", c.seed);
}

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainingMetadata {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0; // 0 = initial parameters
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string divergence_reason;
    std::set<Split> splits_touched;
};

inline void to_json(nlohmann::json& j, const TrainingMetadata& m) {
    std::vector<std::string> splits;
    for (Split s : m.splits_touched) splits.push_back(to_string(s));
    j = {{"epochs_run", m.epochs_run}, {"best_epoch", m.best_epoch}, {"best_val_loss", m.best_val_loss},
         {"seed", m.seed},             {"diverged", m.diverged},     {"divergence_reason", m.divergence_reason},
         {"splits_touched", splits}};
}

struct TrainResult {
    TrainingMetadata meta;
    std::vector<EpochRecord> history;
};

// Eval-mode predictions for dataset rows. Retrieval models exclude each
// train row from its own neighbourhood.
inline Matrix predict_rows(const Model& model, const Dataset& ds, const std::vector<std::size_t>& rows) {
    const Matrix x = ds.x_rows(rows);
    if (const auto* nca = dynamic_cast<const NcaModel*>(&model)) return nca->predict_rows(x, rows);
    return model.predict(x);
}

inline std::vector<double> predict_mean(const Model& model, const Dataset& ds, const std::vector<std::size_t>& rows) {
    return column_of(predict_rows(model, ds, rows), 0);
}

// Loss of already computed predictions (column 0 mean, column 1 log-scale).
inline double evaluate_predictions(const Matrix& pred, std::span<const double> target, LossKind kind) {
    const auto mean = column_of(pred, 0);
    if (kind == LossKind::mse) return loss_mse(mean, target).value;
    if (pred.cols() < 2) throw UsageError("nll evaluation requires a heteroscedastic model");
    return loss_gaussian_nll(mean, column_of(pred, 1), target).value;
}

inline double evaluate(const Model& model, const Dataset& ds, Split split, LossKind kind) {
    const auto rows = ds.rows(split);
    try {
        return evaluate_predictions(predict_rows(model, ds, rows), ds.y_rows(rows), kind);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Loss and upstream gradient for the rows produced by forward_train().
// With k loss rows per sample the loss is the mean over all rows, i.e. the
// mean of per-branch losses.
inline double training_loss(const Matrix& out, std::span<const double> target, std::size_t k, LossKind kind,
                            Matrix& dout) {
    std::vector<double> expanded(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) expanded[r] = target[r / k];
    dout = Matrix(out.rows(), out.cols());
    if (kind == LossKind::mse) {
        auto res = loss_mse(column_of(out, 0), expanded);
        for (std::size_t r = 0; r < out.rows(); ++r) dout(r, 0) = res.grad[r];
        return res.value;
    }
    if (out.cols() < 2) throw UsageError("nll training requires a heteroscedastic model");
    auto res = loss_gaussian_nll(column_of(out, 0), column_of(out, 1), expanded);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        dout(r, 0) = res.grad_mean[r];
        dout(r, 1) = res.grad_log_scale[r];
    }
    return res.value;
}

using EpochCallback = std::function<void(const Model&, std::size_t epoch)>;

// Mini-batch training with early stopping on the validation loss. The
// initial parameters count as epoch 0; training stops once `patience + 1`
// consecutive epochs fail to improve on the best validation loss, and the
// best snapshot is restored into `model`.
inline TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg, LossKind kind,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    const auto train_rows = ds.rows(Split::train);
    if (train_rows.empty() || ds.count(Split::val) == 0) throw UsageError("train: dataset needs train and val splits");

    Rng root = Rng(cfg.seed).split("train");
    Rng shuffle_rng = root.split("shuffle");
    Rng dropout_rng = root.split("dropout");
    Rng candidate_rng = root.split("candidates");

    TrainResult result;
    auto& meta = result.meta;
    meta.seed = cfg.seed;
    meta.splits_touched = {Split::train, Split::val};

    AdamW opt(AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
    auto params = model.parameters();
    const std::size_t k = model.loss_rows_per_sample();

    meta.best_val_loss = evaluate(model, ds, Split::val, kind);
    if (!std::isfinite(meta.best_val_loss)) meta.best_val_loss = std::numeric_limits<double>::infinity();
    auto best = snapshot(model);
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order = train_rows;
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        bool failed = false;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> batch(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(stop));
            const Matrix xb = ds.x_rows(batch);
            const auto yb = ds.y_rows(batch);
            Tape tape;
            const ForwardContext ctx{Phase::train, &dropout_rng};
            try {
                Matrix out = model.forward_train(xb, batch, ctx, candidate_rng, tape);
                Matrix dout;
                const double loss = training_loss(out, yb, k, kind, dout);
                auto grads = zero_grads(model);
                model.backward(tape, dout, grads);
                opt.step(params, grads, cfg.lr);
                loss_sum += loss;
                ++batches;
            } catch (const NumericError& e) {
                meta.diverged = true;
                meta.divergence_reason = e.what();
                failed = true;
                break;
            }
        }
        meta.epochs_run = epoch;
        if (failed) break;

        const double val = evaluate(model, ds, Split::val, kind);
        result.history.push_back({epoch, loss_sum / double(std::max<std::size_t>(batches, 1)), val});
        if (!std::isfinite(val)) {
            meta.diverged = true;
            meta.divergence_reason = "validation loss is not finite at epoch " + std::to_string(epoch);
            break;
        }
        if (val < meta.best_val_loss) {
            meta.best_val_loss = val;
            meta.best_epoch = epoch;
            best = snapshot(model);
            stale = 0;
        } else {
            ++stale;
        }
        if (on_epoch) on_epoch(model, epoch);
        if (stale > cfg.patience) break;
    }
    restore(model, best);
    return result;
}

} // namespace tabunc
