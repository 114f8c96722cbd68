#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/core/artifact.hpp"
#include "tabunc/core/io.hpp"
#include "tabunc/data/csv.hpp"
#include "tabunc/data/generators.hpp"
#include "tabunc/train/triplet.hpp"
#include "tabunc/train/tuner.hpp"

namespace tabunc::lab {

using nlohmann::json;

namespace detail {

// Rejects keys outside `allowed` so typos in config files surface early.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T parse_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

} // namespace detail

struct DatasetBlock {
    std::string generator = "saw"; // saw | mlp-synth | csv
    json params = json::object();  // generator parameters
    std::string csv_path, target_column = "y";
    SplitSpec split;
    std::optional<std::size_t> keep_features; // drop_features transform
    bool standardize = true;

    json to_json() const {
        json j = {{"generator", generator}, {"params", params}, {"standardize", standardize}};
        if (generator == "csv") {
            j["path"] = csv_path;
            j["target"] = target_column;
            j["split"] = {{"column", split.column ? json(*split.column) : json()},
                          {"val_fraction", split.val_fraction},
                          {"test_fraction", split.test_fraction},
                          {"seed", split.seed}};
        }
        if (keep_features) j["keep_features"] = *keep_features;
        return j;
    }

    static DatasetBlock from_json(const json& j) {
        detail::check_keys(j, {"generator", "params", "path", "target", "split", "keep_features", "standardize"},
                           "dataset");
        DatasetBlock b;
        b.generator = j.value("generator", b.generator);
        if (b.generator != "saw" && b.generator != "mlp-synth" && b.generator != "csv") {
            throw ConfigError("dataset: unknown generator '" + b.generator + "' (expected saw, mlp-synth or csv)");
        }
        b.params = j.value("params", json::object());
        b.standardize = j.value("standardize", true);
        if (j.contains("keep_features")) b.keep_features = detail::parse_as<std::size_t>(j["keep_features"], "dataset");
        if (b.generator == "csv") {
            if (!j.contains("path")) throw ConfigError("dataset: csv generator needs 'path'");
            b.csv_path = j["path"].get<std::string>();
            b.target_column = j.value("target", b.target_column);
            if (j.contains("split")) {
                const auto& s = j["split"];
                detail::check_keys(s, {"column", "val_fraction", "test_fraction", "seed"}, "dataset.split");
                if (s.contains("column") && !s["column"].is_null()) b.split.column = s["column"].get<std::string>();
                b.split.val_fraction = s.value("val_fraction", b.split.val_fraction);
                b.split.test_fraction = s.value("test_fraction", b.split.test_fraction);
                b.split.seed = s.value("seed", b.split.seed);
            }
        }
        return b;
    }

    bool synthetic() const { return generator != "csv"; }
};

inline SawConfig saw_config(const json& p) {
    detail::check_keys(p, {"n_train", "n_val", "n_test", "teeth", "noise_exponent", "noise_denominator"}, "dataset.params");
    SawConfig c;
    c.n_train = p.value("n_train", c.n_train);
    c.n_val = p.value("n_val", c.n_val);
    c.n_test = p.value("n_test", c.n_test);
    c.teeth = p.value("teeth", c.teeth);
    c.noise_exponent = p.value("noise_exponent", c.noise_exponent);
    c.noise_denominator = p.value("noise_denominator", c.noise_denominator);
    return c;
}

inline MlpSyntheticConfig mlp_synth_config(const json& p) {
    detail::check_keys(p, {"n", "d", "f_hidden", "g_hidden", "g_gain", "g_shift", "train_fraction", "val_fraction"}, "dataset.params");
    MlpSyntheticConfig c;
    c.n = p.value("n", c.n);
    c.d = p.value("d", c.d);
    c.f_hidden = p.value("f_hidden", c.f_hidden);
    c.g_hidden = p.value("g_hidden", c.g_hidden);
    c.g_gain = p.value("g_gain", c.g_gain);
    c.g_shift = p.value("g_shift", c.g_shift);
    c.train_fraction = p.value("train_fraction", c.train_fraction);
    c.val_fraction = p.value("val_fraction", c.val_fraction);
    return c;
}

// One trained model of the experiment. With `tune` set, the learning rate
// (and whatever else the space unpins) is random-searched; with `triplet`
// set, the embedder is pretrained with the triplet loss before fine-tuning.
struct ModelBlock {
    std::string name;
    ModelSpec spec;
    std::optional<TrainConfig> train; // overrides the experiment default
    std::optional<TuneSpace> tune;
    std::optional<TripletConfig> triplet;

    json to_json() const {
        json j = {{"name", name}, {"spec", spec}};
        if (train) j["train"] = *train;
        if (tune) j["tune"] = *tune;
        if (triplet) j["triplet"] = *triplet;
        return j;
    }

    static ModelBlock from_json(const json& j) {
        detail::check_keys(j, {"name", "spec", "train", "tune", "triplet"}, "model");
        ModelBlock m;
        if (!j.contains("name")) throw ConfigError("model: missing 'name'");
        m.name = j["name"].get<std::string>();
        const std::string where = "model '" + m.name + "'";
        if (!j.contains("spec")) throw ConfigError(where + ": missing 'spec'");
        m.spec = detail::parse_as<ModelSpec>(j["spec"], where);
        m.spec.validate();
        if (j.contains("train")) m.train = detail::parse_as<TrainConfig>(j["train"], where);
        if (j.contains("tune")) m.tune = detail::parse_as<TuneSpace>(j["tune"], where);
        if (j.contains("triplet")) m.triplet = detail::parse_as<TripletConfig>(j["triplet"], where);
        if (m.triplet && m.spec.kind != ModelKind::mlp_lrlr) {
            throw ConfigError(where + ": triplet pretraining requires kind mlp-lrlr");
        }
        if (m.tune && m.spec.kind == ModelKind::deep_ensemble) {
            throw ConfigError(where + ": spec/tune conflict, deep ensembles reuse the MLP spec and are not tuned");
        }
        if (m.tune && m.triplet) throw ConfigError(where + ": spec/tune conflict, triplet models are trained from spec");
        return m;
    }
};

struct EstimatorBlock {
    ModelSpec spec;
    std::optional<TrainConfig> train;

    json to_json() const {
        json j = {{"spec", spec}};
        if (train) j["train"] = *train;
        return j;
    }

    static EstimatorBlock from_json(const json& j) {
        detail::check_keys(j, {"spec", "train"}, "estimator");
        EstimatorBlock e;
        if (j.contains("spec")) e.spec = detail::parse_as<ModelSpec>(j["spec"], "estimator");
        if (j.contains("train")) e.train = detail::parse_as<TrainConfig>(j["train"], "estimator");
        return e;
    }
};

struct PlotRequest {
    std::string baseline, candidate;
    std::string uncertainty = "estimate"; // estimate | true
};

struct AnalysisBlock {
    std::optional<double> sigma; // default 2% of the split size
    std::size_t buckets = 10;
    std::size_t k_max = 32;
    std::size_t grad_samples = 2000; // train rows used for gradient analyses
    std::size_t heatmap_resolution = 60;
    std::vector<PlotRequest> plots;
    std::vector<std::string> neighbors, train_curves, grad_ratio, branch_alignment, heatmaps, metrics;

    json to_json() const {
        json p = json::array();
        for (const auto& r : plots) {
            p.push_back({{"baseline", r.baseline}, {"candidate", r.candidate}, {"uncertainty", r.uncertainty}});
        }
        json j = {{"buckets", buckets},
                  {"k_max", k_max},
                  {"grad_samples", grad_samples},
                  {"heatmap_resolution", heatmap_resolution},
                  {"uncertainty_plots", p},
                  {"neighbors", neighbors},
                  {"train_curves", train_curves},
                  {"grad_ratio", grad_ratio},
                  {"branch_alignment", branch_alignment},
                  {"heatmaps", heatmaps},
                  {"metrics", metrics}};
        if (sigma) j["sigma"] = *sigma;
        return j;
    }

    static AnalysisBlock from_json(const json& j) {
        detail::check_keys(j,
                           {"sigma", "buckets", "k_max", "grad_samples", "heatmap_resolution", "uncertainty_plots",
                            "neighbors", "train_curves", "grad_ratio", "branch_alignment", "heatmaps", "metrics"},
                           "analysis");
        AnalysisBlock a;
        if (j.contains("sigma") && !j["sigma"].is_null()) a.sigma = j["sigma"].get<double>();
        a.buckets = j.value("buckets", a.buckets);
        a.k_max = j.value("k_max", a.k_max);
        a.grad_samples = j.value("grad_samples", a.grad_samples);
        a.heatmap_resolution = j.value("heatmap_resolution", a.heatmap_resolution);
        for (const auto& p : j.value("uncertainty_plots", json::array())) {
            detail::check_keys(p, {"baseline", "candidate", "uncertainty"}, "analysis.uncertainty_plots");
            PlotRequest r{p.at("baseline").get<std::string>(), p.at("candidate").get<std::string>(),
                          p.value("uncertainty", std::string("estimate"))};
            if (r.uncertainty != "estimate" && r.uncertainty != "true") {
                throw ConfigError("analysis.uncertainty_plots: uncertainty must be 'estimate' or 'true'");
            }
            a.plots.push_back(r);
        }
        auto list = [&](const char* key, std::vector<std::string>& out) {
            out = j.value(key, std::vector<std::string>{});
        };
        list("neighbors", a.neighbors);
        list("train_curves", a.train_curves);
        list("grad_ratio", a.grad_ratio);
        list("branch_alignment", a.branch_alignment);
        list("heatmaps", a.heatmaps);
        list("metrics", a.metrics);
        if (a.buckets < 1) throw ConfigError("analysis: buckets must be positive");
        return a;
    }

    bool needs_estimate() const {
        for (const auto& p : plots)
            if (p.uncertainty == "estimate") return true;
        return !train_curves.empty();
    }
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    DatasetBlock dataset;
    TrainConfig train;
    std::vector<ModelBlock> models;
    std::optional<EstimatorBlock> estimator;
    AnalysisBlock analysis;

    json to_json() const {
        json ms = json::array();
        for (const auto& m : models) ms.push_back(m.to_json());
        json j = {{"name", name},       {"seed", seed}, {"dataset", dataset.to_json()}, {"train", train},
                  {"models", ms},       {"analysis", analysis.to_json()}};
        if (estimator) j["estimator"] = estimator->to_json();
        return j;
    }

    static ExperimentConfig from_json(const json& j) {
        detail::check_keys(j, {"name", "seed", "dataset", "train", "models", "estimator", "analysis", "description"},
                           "config");
        ExperimentConfig c;
        c.name = j.value("name", c.name);
        c.seed = j.value("seed", c.seed);
        if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset' block");
        c.dataset = DatasetBlock::from_json(j["dataset"]);
        if (j.contains("train")) c.train = detail::parse_as<TrainConfig>(j["train"], "train");
        c.train.validate();
        std::set<std::string> names;
        for (const auto& m : j.value("models", json::array())) {
            c.models.push_back(ModelBlock::from_json(m));
            if (!names.insert(c.models.back().name).second) {
                throw ConfigError("config: duplicate model name '" + c.models.back().name + "'");
            }
        }
        if (j.contains("estimator")) c.estimator = EstimatorBlock::from_json(j["estimator"]);
        if (j.contains("analysis")) c.analysis = AnalysisBlock::from_json(j["analysis"]);
        c.check_references();
        return c;
    }

    const ModelBlock* find(const std::string& model) const {
        for (const auto& m : models)
            if (m.name == model) return &m;
        return nullptr;
    }

    const ModelBlock& model(const std::string& model_name) const {
        if (const auto* m = find(model_name)) return *m;
        throw ConfigError("model '" + model_name + "' is not defined in config '" + name + "'");
    }

    void check_references() const {
        auto need = [&](const std::string& m, const char* where) {
            if (!find(m)) throw ConfigError(std::string("analysis.") + where + ": model '" + m + "' is not defined");
        };
        for (const auto& p : analysis.plots) {
            need(p.baseline, "uncertainty_plots");
            need(p.candidate, "uncertainty_plots");
        }
        for (const auto* list : {&analysis.neighbors, &analysis.train_curves, &analysis.grad_ratio,
                                 &analysis.branch_alignment, &analysis.heatmaps, &analysis.metrics}) {
            for (const auto& m : *list) need(m, "diagnostics");
        }
        if (analysis.needs_estimate() && !estimator) {
            throw ConfigError("analysis needs an uncertainty estimate but the config has no 'estimator' block");
        }
    }

    std::string hash() const { return config_hash(to_json()); }
};

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' not found");
    json j;
    try {
        j = json::parse(io::read_text(path), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

} // namespace tabunc::lab
