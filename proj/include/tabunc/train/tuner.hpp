#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tabunc/models/zoo.hpp"
#include "tabunc/train/trainer.hpp"

namespace tabunc {

// Random-search space. Learning rate is always searched; the other
// hyperparameters can be pinned (then the base spec/config value is used).
struct TuneSpace {
    std::size_t iterations = 30;
    bool tune_depth = true;
    bool tune_width = true;
    bool tune_dropout = true;
    bool tune_weight_decay = true;
    bool tune_embedding_dim = true;
    bool tune_plr_sigma = true;
    std::size_t depth_min = 1, depth_max = 4;
    std::size_t width_log2_min = 7, width_log2_max = 11;
    double dropout_max = 0.75;
    double weight_decay_min = 1e-6, weight_decay_max = 1e-3;
    double lr_min = 3e-5, lr_max = 1e-3;
    std::vector<std::size_t> embedding_dims{64, 128};
    double plr_sigma_min = 0.01, plr_sigma_max = 10.0;

    void validate() const {
        if (iterations < 1) throw ConfigError("tune space: iterations must be at least 1");
        if (depth_min < 1 || depth_min > depth_max) throw ConfigError("tune space: bad depth range");
        if (width_log2_min > width_log2_max || width_log2_max > 16) throw ConfigError("tune space: bad width range");
        if (!(lr_min > 0.0 && lr_min <= lr_max)) throw ConfigError("tune space: bad lr range");
        if (!(weight_decay_min > 0.0 && weight_decay_min <= weight_decay_max))
            throw ConfigError("tune space: bad weight decay range");
        if (!(dropout_max >= 0.0 && dropout_max < 1.0)) throw ConfigError("tune space: bad dropout range");
        if (embedding_dims.empty()) throw ConfigError("tune space: embedding_dims is empty");
        if (!(plr_sigma_min > 0.0 && plr_sigma_min <= plr_sigma_max)) throw ConfigError("tune space: bad plr_sigma range");
    }

    // Only the learning rate is searched.
    static TuneSpace lr_only(std::size_t iterations) {
        TuneSpace s;
        s.iterations = iterations;
        s.tune_depth = s.tune_width = s.tune_dropout = s.tune_weight_decay = s.tune_embedding_dim = s.tune_plr_sigma =
            false;
        return s;
    }
};

inline void to_json(nlohmann::json& j, const TuneSpace& s) {
    j = {{"iterations", s.iterations},
         {"tune_depth", s.tune_depth},
         {"tune_width", s.tune_width},
         {"tune_dropout", s.tune_dropout},
         {"tune_weight_decay", s.tune_weight_decay},
         {"tune_embedding_dim", s.tune_embedding_dim},
         {"tune_plr_sigma", s.tune_plr_sigma},
         {"depth", {s.depth_min, s.depth_max}},
         {"width_log2", {s.width_log2_min, s.width_log2_max}},
         {"dropout_max", s.dropout_max},
         {"weight_decay", {s.weight_decay_min, s.weight_decay_max}},
         {"lr", {s.lr_min, s.lr_max}},
         {"embedding_dims", s.embedding_dims},
         {"plr_sigma", {s.plr_sigma_min, s.plr_sigma_max}}};
}

inline void from_json(const nlohmann::json& j, TuneSpace& s) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    auto range = [&](const char* key, auto& lo, auto& hi) {
        if (!j.contains(key)) return;
        const auto& r = j.at(key);
        if (!r.is_array() || r.size() != 2) throw ConfigError(std::string("tune space: '") + key + "' must be [lo, hi]");
        r[0].get_to(lo);
        r[1].get_to(hi);
    };
    get("iterations", s.iterations);
    get("tune_depth", s.tune_depth);
    get("tune_width", s.tune_width);
    get("tune_dropout", s.tune_dropout);
    get("tune_weight_decay", s.tune_weight_decay);
    get("tune_embedding_dim", s.tune_embedding_dim);
    get("tune_plr_sigma", s.tune_plr_sigma);
    range("depth", s.depth_min, s.depth_max);
    range("width_log2", s.width_log2_min, s.width_log2_max);
    get("dropout_max", s.dropout_max);
    range("weight_decay", s.weight_decay_min, s.weight_decay_max);
    range("lr", s.lr_min, s.lr_max);
    get("embedding_dims", s.embedding_dims);
    range("plr_sigma", s.plr_sigma_min, s.plr_sigma_max);
}

// Draws one candidate (spec, config) from the space.
inline void sample_trial(const TuneSpace& space, Rng& rng, ModelSpec& spec, TrainConfig& cfg) {
    if (space.tune_depth) spec.depth = std::size_t(rng.uniform_int(int64_t(space.depth_min), int64_t(space.depth_max)));
    if (space.tune_width) {
        spec.width = std::size_t(1) << rng.uniform_int(int64_t(space.width_log2_min), int64_t(space.width_log2_max));
    }
    if (space.tune_dropout) spec.dropout = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, space.dropout_max);
    if (space.tune_weight_decay) {
        cfg.weight_decay = rng.bernoulli(0.5) ? 0.0 : rng.log_uniform(space.weight_decay_min, space.weight_decay_max);
    }
    if (space.tune_embedding_dim && (spec.kind == ModelKind::mlp_plr || spec.kind == ModelKind::mlp_lrlr)) {
        spec.embedding_dim = space.embedding_dims[rng.uniform_index(space.embedding_dims.size())];
    }
    if (space.tune_plr_sigma && spec.kind == ModelKind::mlp_plr) {
        spec.plr_sigma = rng.log_uniform(space.plr_sigma_min, space.plr_sigma_max);
    }
    cfg.lr = rng.log_uniform(space.lr_min, space.lr_max);
}

struct TrialRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    ModelSpec spec;
    TrainConfig config;
    TrainingMetadata meta;
};

inline void to_json(nlohmann::json& j, const TrialRecord& t) {
    j = {{"trial", t.index}, {"seed", t.seed}, {"spec", t.spec}, {"config", t.config}, {"val_loss", t.meta.best_val_loss},
         {"epochs", t.meta.epochs_run}, {"best_epoch", t.meta.best_epoch}, {"diverged", t.meta.diverged}};
}

struct TuneResult {
    TrialRecord best;
    std::unique_ptr<Model> model; // trained best trial
    std::vector<TrialRecord> trials;
    std::set<Split> splits_touched;
};

// Seeds of the trial (model init + training streams).
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
    Rng r = Rng(seed).split("tune").split(trial);
    return r();
}

// Builds and trains one model. Init randomness comes from `seed`.
inline std::unique_ptr<Model> fit(const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg, LossKind loss,
                                  TrainingMetadata* meta = nullptr) {
    Rng init = Rng(cfg.seed).split("init");
    auto model = build_model(spec, ds, init);
    auto res = train(*model, ds, cfg, loss);
    if (meta) *meta = res.meta;
    return model;
}

// Runs `count` jobs on up to `workers` threads; job i writes only to its own
// slot so results do not depend on scheduling.
template <class Job>
void run_parallel(std::size_t count, std::size_t workers, Job&& job) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Random search: each trial samples the space independently, trains with
// early stopping, and is scored by its best validation loss. The trial log
// (one JSON object per line) is appended as trials finish.
inline TuneResult tune(const TuneSpace& space, const ModelSpec& base_spec, const TrainConfig& base_cfg, const Dataset& ds,
                       LossKind loss, std::uint64_t seed, std::size_t workers = 1,
                       const std::optional<std::filesystem::path>& log_path = std::nullopt) {
    space.validate();
    std::vector<TrialRecord> trials(space.iterations);
    std::vector<std::unique_ptr<Model>> models(space.iterations);
    std::mutex log_mutex;
    std::ofstream log;
    if (log_path) {
        log.open(*log_path, std::ios::app);
        if (!log) throw ConfigError("cannot write trial log '" + log_path->string() + "'");
    }
    run_parallel(space.iterations, workers, [&](std::size_t i) {
        TrialRecord t;
        t.index = i;
        t.seed = trial_seed(seed, i);
        t.spec = base_spec;
        t.config = base_cfg;
        Rng sampler = Rng(t.seed).split("space");
        sample_trial(space, sampler, t.spec, t.config);
        t.config.seed = t.seed;
        models[i] = fit(t.spec, ds, t.config, loss, &t.meta);
        if (log_path) {
            std::lock_guard lock(log_mutex);
            log << nlohmann::json(t).dump() << "\n";
            log.flush();
        }
        trials[i] = std::move(t);
    });

    TuneResult res;
    std::optional<std::size_t> best;
    for (const auto& t : trials) {
        res.splits_touched.insert(t.meta.splits_touched.begin(), t.meta.splits_touched.end());
        if (t.meta.diverged || !std::isfinite(t.meta.best_val_loss)) continue;
        if (!best || t.meta.best_val_loss < trials[*best].meta.best_val_loss) best = t.index;
    }
    if (!best) {
        std::string seeds;
        for (const auto& t : trials) seeds += (seeds.empty() ? "" : ", ") + std::to_string(t.seed);
        throw NumericError("tune: all " + std::to_string(trials.size()) + " trials diverged (trial seeds: " + seeds + ")");
    }
    res.best = trials[*best];
    res.model = std::move(models[*best]);
    res.trials = std::move(trials);
    return res;
}

// Trains `spec.ensemble_size` MLP members with seeds derived from cfg.seed.
inline DeepEnsemble build_deep_ensemble(const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg, LossKind loss,
                                        std::size_t workers = 1, std::vector<TrainingMetadata>* metas = nullptr) {
    if (spec.ensemble_size < 2) throw ConfigError("deep-ensemble: need at least 2 members");
    ModelSpec member = spec;
    member.kind = ModelKind::mlp;
    std::vector<std::optional<SequentialModel>> trained(spec.ensemble_size);
    std::vector<TrainingMetadata> meta(spec.ensemble_size);
    run_parallel(spec.ensemble_size, workers, [&](std::size_t i) {
        TrainConfig c = cfg;
        c.seed = Rng(cfg.seed).split("member", i)();
        auto m = fit(member, ds, c, loss, &meta[i]);
        if (meta[i].diverged) {
            throw NumericError("deep-ensemble member " + std::to_string(i) + " diverged: " + meta[i].divergence_reason);
        }
        trained[i].emplace(*dynamic_cast<SequentialModel*>(m.get()));
    });
    std::vector<SequentialModel> members;
    for (auto& t : trained) members.push_back(std::move(*t));
    if (metas) *metas = std::move(meta);
    return DeepEnsemble(spec, std::move(members));
}

} // namespace tabunc
