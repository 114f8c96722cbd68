#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/analysis/gradients.hpp"
#include "tabunc/analysis/neighbors.hpp"
#include "tabunc/analysis/plots.hpp"
#include "tabunc/analysis/svg.hpp"
#include "tabunc/data/cache.hpp"
#include "tabunc/lab/config.hpp"
#include "tabunc/models/checkpoint.hpp"

namespace tabunc::lab {

namespace fs = std::filesystem;

struct LabOptions {
    fs::path out = "runs";
    std::size_t workers = 1;
    bool force = false;
    // When false, a stage whose inputs are missing or stale is an error
    // naming the command that produces it instead of being rebuilt.
    bool build_missing = true;
    std::string analysis_name = "analysis"; // sub-directory of the analysis stage
    std::ostream* log = &std::cerr;
};

// Per-model evaluation in standardized and original target units.
struct ModelReport {
    std::string name;
    ModelKind kind = ModelKind::mlp;
    std::map<std::string, double> mse, mse_original; // by split
    std::map<std::string, double> nll;               // heteroscedastic models only
    json training;                                   // metadata, trials, ...
};

inline void to_json(json& j, const ModelReport& r) {
    j = {{"name", r.name}, {"kind", to_string(r.kind)}, {"mse", r.mse}, {"mse_original", r.mse_original},
         {"training", r.training}};
    if (!r.nll.empty()) j["nll"] = r.nll;
}

inline void from_json(const json& j, ModelReport& r) {
    r.name = j.at("name").get<std::string>();
    r.kind = model_kind_from_string(j.at("kind").get<std::string>());
    r.mse = j.at("mse").get<std::map<std::string, double>>();
    r.mse_original = j.at("mse_original").get<std::map<std::string, double>>();
    if (j.contains("nll")) r.nll = j["nll"].get<std::map<std::string, double>>();
    r.training = j.at("training");
}

// Runs the stages of one experiment under `out/<name>`. Every stage writes
// a stamp (hash of its inputs) last; a stage whose stamp matches is loaded
// from disk instead of recomputed unless `force` is set.
class Lab {
public:
    Lab(ExperimentConfig config, LabOptions options) : cfg_(std::move(config)), opt_(std::move(options)) {}

    const ExperimentConfig& config() const noexcept { return cfg_; }
    void set_build_missing(bool on) noexcept { opt_.build_missing = on; }
    fs::path root() const { return opt_.out / cfg_.name; }
    Provenance provenance() const { return {cfg_.hash(), cfg_.seed}; }

    std::string dataset_hash() const { return config_hash({{"dataset", cfg_.dataset.to_json()}, {"seed", cfg_.seed}}); }

    const Dataset& dataset() {
        if (dataset_) return *dataset_;
        const fs::path dir = root() / "dataset";
        const std::string hash = dataset_hash();
        if (!opt_.force && stamp_matches(dir, hash)) {
            dataset_ = read_dataset(dir);
            return *dataset_;
        }
        require_buildable("dataset cache '" + dir.string() + "' is missing or stale", "generate");
        const auto t0 = now();
        Dataset ds = make_dataset();
        clear_stamp(dir);
        write_dataset(ds, dir);
        write_stamp(dir, hash);
        log("generate", "dataset '" + ds.generator + "' " + std::to_string(ds.size()) + " rows, " +
                            std::to_string(ds.features()) + " features, split " + split_text(ds),
            t0);
        dataset_ = std::move(ds);
        return *dataset_;
    }

    TrainConfig train_config(const ModelBlock& m) const {
        TrainConfig c = m.train.value_or(cfg_.train);
        c.seed = Rng(cfg_.seed).split("train").split(m.name)();
        c.validate();
        return c;
    }

    std::string model_hash(const ModelBlock& m) const {
        return config_hash({{"dataset", dataset_hash()}, {"model", m.to_json()}, {"train", train_config(m)}});
    }

    fs::path model_dir(const std::string& name) const { return root() / "models" / name; }

    bool model_ready(const std::string& name) const {
        return stamp_matches(model_dir(name), model_hash(cfg_.model(name)));
    }

    const Model& model(const std::string& name) {
        if (auto it = models_.find(name); it != models_.end()) return *it->second;
        const ModelBlock& block = cfg_.model(name);
        const fs::path dir = model_dir(name);
        const std::string hash = model_hash(block);
        if (!opt_.force && stamp_matches(dir, hash)) {
            models_[name] = load_checkpoint(dir / "checkpoint");
            reports_[name] = json::parse(io::read_text(dir / "report.json")).get<ModelReport>();
            return *models_[name];
        }
        require_buildable("model '" + name + "' has no up-to-date checkpoint", "train " + name);
        const auto& ds = dataset();
        const auto t0 = now();
        clear_stamp(dir);
        io::ensure_directory(dir);
        json training;
        auto model = train_model(block, ds, dir, training);
        ModelReport report = evaluate_model(name, *model, ds);
        report.training = std::move(training);
        fs::remove_all(dir / "checkpoint");
        save_checkpoint(*model, dir / "checkpoint", {{"config_hash", cfg_.hash()}, {"model_hash", hash}});
        io::write_text(dir / "report.json", json(report).dump(2) + "\n");
        write_stamp(dir, hash);
        log("train", name + " (" + to_string(block.spec.kind) + ") test mse " + fmt_short(report.mse["test"]), t0);
        reports_[name] = std::move(report);
        models_[name] = std::move(model);
        return *models_[name];
    }

    const ModelReport& report(const std::string& name) {
        model(name);
        return reports_.at(name);
    }

    // Heteroscedastic estimator, trained once per experiment.
    std::string estimator_hash() const {
        if (!cfg_.estimator) throw ConfigError("config '" + cfg_.name + "' has no 'estimator' block");
        return config_hash({{"dataset", dataset_hash()}, {"estimator", cfg_.estimator->to_json()},
                            {"train", estimator_train_config()}});
    }

    TrainConfig estimator_train_config() const {
        TrainConfig c = cfg_.estimator->train.value_or(cfg_.train);
        c.seed = Rng(cfg_.seed).split("estimate")();
        c.validate();
        return c;
    }

    const Model& estimator() {
        if (estimator_) return *estimator_;
        const std::string hash = estimator_hash();
        const fs::path dir = root() / "estimator";
        if (!opt_.force && stamp_matches(dir, hash)) {
            estimator_ = load_checkpoint(dir / "checkpoint");
            return *estimator_;
        }
        require_buildable("the uncertainty estimate is missing or stale", "estimate");
        const auto& ds = dataset();
        const auto t0 = now();
        clear_stamp(dir);
        io::ensure_directory(dir);
        auto run = fit_estimator(ds, cfg_.estimator->spec, estimator_train_config());
        if (run.meta.diverged) throw NumericError("uncertainty estimator diverged: " + run.meta.divergence_reason);
        fs::remove_all(dir / "checkpoint");
        save_checkpoint(*run.model, dir / "checkpoint", {{"config_hash", cfg_.hash()}});
        for (Split s : {Split::train, Split::val, Split::test}) {
            auto est = estimate_from_model(*run.model, ds, s);
            write_estimate_csv(est, dir / (std::string("estimate_") + to_string(s) + ".csv"), provenance());
        }
        json meta = run.meta;
        if (ds.truth) {
            const auto est = estimate_from_model(*run.model, ds, Split::test);
            const auto truth = true_estimate(ds, Split::test);
            const auto agree = cross_estimator_agreement(est, truth);
            meta["test_spearman_vs_truth"] = agree.spearman;
            meta["test_pearson_vs_truth"] = agree.pearson;
        }
        io::write_text(dir / "report.json", meta.dump(2) + "\n");
        write_stamp(dir, hash);
        log("estimate", "estimator (" + to_string(cfg_.estimator->spec.kind) + ") val nll " +
                            fmt_short(run.meta.best_val_loss),
            t0);
        estimator_ = std::move(run.model);
        return *estimator_;
    }

    UncertaintyEstimate estimate(Split split) {
        auto est = estimate_from_model(estimator(), dataset(), split);
        est.estimator = cfg_.estimator->spec.kind;
        est.seed = estimator_train_config().seed;
        return est;
    }

    // Runs every requested diagnostic; returns the written artifact paths.
    std::vector<fs::path> analyze() {
        const fs::path dir = root() / opt_.analysis_name;
        const std::string hash = analysis_hash();
        if (!opt_.force && stamp_matches(dir, hash)) {
            log("analyze", "up to date", std::nullopt);
            std::vector<fs::path> out;
            for (const auto& p : json::parse(io::read_text(dir / "artifacts.json"))) out.emplace_back(p.get<std::string>());
            return out;
        }
        const auto t0 = now();
        clear_stamp(dir);
        io::ensure_directory(dir);
        artifacts_.clear();
        summary_ = json::object();
        const auto& a = cfg_.analysis;
        if (!a.metrics.empty()) run_metrics(dir);
        for (const auto& p : a.plots) run_uncertainty_plot(dir, p);
        if (!a.neighbors.empty()) run_neighbors(dir);
        if (!a.train_curves.empty()) run_train_curves(dir);
        if (!a.grad_ratio.empty()) run_grad_ratio(dir);
        for (const auto& m : a.branch_alignment) run_branch_alignment(dir, m);
        for (const auto& m : a.heatmaps) run_heatmap(dir, m);
        add_text(dir / "summary.json", summary_.dump(2) + "\n");
        std::vector<std::string> paths;
        for (const auto& p : artifacts_) paths.push_back(p.string());
        io::write_text(dir / "artifacts.json", json(paths).dump(2) + "\n");
        write_stamp(dir, hash);
        log("analyze", std::to_string(artifacts_.size()) + " artifacts in " + dir.string(), t0);
        return artifacts_;
    }

    json summary() const {
        const fs::path p = root() / opt_.analysis_name / "summary.json";
        if (!fs::exists(p)) throw ConfigError("no analysis summary for '" + cfg_.name + "' (run `analyze` first)");
        return json::parse(io::read_text(p));
    }

    std::string analysis_hash() const {
        json models = json::object();
        for (const auto& m : cfg_.models) models[m.name] = model_hash(m);
        json j = {{"config", cfg_.hash()}, {"models", models}};
        if (cfg_.estimator) j["estimator"] = estimator_hash();
        return config_hash(j);
    }

    // Rows used by the gradient analyses: an evenly spaced subsample of train.
    std::vector<std::size_t> gradient_rows() {
        const auto train = dataset().rows(Split::train);
        const std::size_t n = std::min(cfg_.analysis.grad_samples, train.size());
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = train[i * train.size() / n];
        return rows;
    }

private:
    using Clock = std::chrono::steady_clock;

    ExperimentConfig cfg_;
    LabOptions opt_;
    std::optional<Dataset> dataset_;
    std::map<std::string, std::unique_ptr<Model>> models_;
    std::map<std::string, ModelReport> reports_;
    std::unique_ptr<Model> estimator_;
    std::vector<fs::path> artifacts_;
    json summary_;

    static Clock::time_point now() { return Clock::now(); }

    void require_buildable(const std::string& what, const std::string& command) const {
        if (!opt_.build_missing) throw ConfigError(what + "; run `tabunc " + command + "` first");
    }

    static std::string fmt_short(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.5g", v);
        return buf;
    }

    void log(const std::string& stage, const std::string& msg, std::optional<Clock::time_point> t0) const {
        if (!opt_.log) return;
        *opt_.log << "[" << cfg_.name << "] " << stage << ": " << msg;
        if (t0) *opt_.log << " (" << fmt_short(std::chrono::duration<double>(now() - *t0).count()) << " s)";
        *opt_.log << std::endl;
    }

    static bool stamp_matches(const fs::path& dir, const std::string& hash) {
        const fs::path p = dir / "stamp";
        return fs::exists(p) && io::read_text(p) == hash + "\n";
    }
    static void write_stamp(const fs::path& dir, const std::string& hash) { io::write_text(dir / "stamp", hash + "\n"); }
    static void clear_stamp(const fs::path& dir) { fs::remove(dir / "stamp"); }

    static std::string split_text(const Dataset& ds) {
        return std::to_string(ds.count(Split::train)) + "/" + std::to_string(ds.count(Split::val)) + "/" +
               std::to_string(ds.count(Split::test));
    }

    Dataset make_dataset() const {
        const auto& b = cfg_.dataset;
        const std::uint64_t seed = Rng(cfg_.seed).split("generate")();
        Dataset ds;
        if (b.generator == "saw") {
            ds = gen_saw(seed, saw_config(b.params));
        } else if (b.generator == "mlp-synth") {
            ds = gen_mlp_synthetic(seed, mlp_synth_config(b.params));
        } else {
            ds = load_csv(b.csv_path, b.target_column, b.split, false);
        }
        if (b.keep_features) ds = drop_features(ds, *b.keep_features, Rng(cfg_.seed).split("drop")());
        if (b.standardize) ds = standardize_target(standardize_features(ds));
        return ds;
    }

    std::unique_ptr<Model> train_model(const ModelBlock& block, const Dataset& ds, const fs::path& dir,
                                       json& training) {
        const TrainConfig tc = train_config(block);
        const LossKind loss = block.spec.heteroscedastic ? LossKind::nll : LossKind::mse;
        if (block.tune) {
            const fs::path log_path = dir / "trials.jsonl";
            fs::remove(log_path);
            const std::uint64_t seed = Rng(cfg_.seed).split("tune").split(block.name)();
            auto res = tune(*block.tune, block.spec, tc, ds, loss, seed, opt_.workers, log_path);
            training = {{"tuned", true}, {"best", res.best}, {"trials", res.trials.size()}};
            return std::move(res.model);
        }
        if (block.spec.kind == ModelKind::deep_ensemble) {
            std::vector<TrainingMetadata> metas;
            auto ens = build_deep_ensemble(block.spec, ds, tc, loss, opt_.workers, &metas);
            training = {{"tuned", false}, {"config", tc}, {"members", metas}};
            return std::make_unique<DeepEnsemble>(std::move(ens));
        }
        if (block.triplet) {
            TripletConfig trc = *block.triplet;
            trc.seed = Rng(cfg_.seed).split("triplet").split(block.name)();
            auto pre = pretrain_triplet_embedder(ds, block.spec, trc);
            Rng init = Rng(tc.seed).split("init");
            auto model = std::make_unique<SequentialModel>(build_embedded_mlp(block.spec, ds.features(), init));
            copy_embedder(pre.network, *model);
            const auto res = train(*model, ds, tc, loss);
            if (res.meta.diverged) throw NumericError("model '" + block.name + "' diverged: " + res.meta.divergence_reason);
            training = {{"tuned", false}, {"config", tc}, {"meta", res.meta}, {"triplet", trc},
                        {"triplet_epoch_loss", pre.epoch_loss}};
            return model;
        }
        TrainingMetadata meta;
        auto model = fit(block.spec, ds, tc, loss, &meta);
        if (meta.diverged) throw NumericError("model '" + block.name + "' diverged: " + meta.divergence_reason);
        training = {{"tuned", false}, {"config", tc}, {"meta", meta}};
        return model;
    }

    static ModelReport evaluate_model(const std::string& name, const Model& model, const Dataset& ds) {
        ModelReport r;
        r.name = name;
        r.kind = model.spec().kind;
        for (Split s : {Split::train, Split::val, Split::test}) {
            if (ds.count(s) == 0) continue;
            const auto rows = ds.rows(s);
            const Matrix pred = predict_rows(model, ds, rows);
            const auto y = ds.y_rows(rows);
            const double mse = evaluate_predictions(pred, y, LossKind::mse);
            r.mse[to_string(s)] = mse;
            r.mse_original[to_string(s)] = ds.standardization.mse_to_original(mse);
            if (model.spec().heteroscedastic) r.nll[to_string(s)] = evaluate_predictions(pred, y, LossKind::nll);
        }
        return r;
    }

    void add_text(const fs::path& path, const std::string& text) {
        io::write_text(path, text);
        artifacts_.push_back(path);
    }

    void add_csv(const fs::path& path, const CsvWriter& csv) { add_text(path, csv.str()); }

    void run_metrics(const fs::path& dir) {
        CsvWriter csv(provenance(), {"model", "kind", "split", "mse", "mse_original"});
        for (const auto& name : cfg_.analysis.metrics) {
            const auto& r = report(name);
            json m = json::object();
            for (const auto& [split, v] : r.mse) {
                csv.row({name, to_string(r.kind), split, fmt(v), fmt(r.mse_original.at(split))});
                m[split] = v;
            }
            summary_["metrics"][name] = m;
        }
        add_csv(dir / "metrics.csv", csv);
    }

    void run_uncertainty_plot(const fs::path& dir, const PlotRequest& req) {
        const auto& ds = dataset();
        const Model& base = model(req.baseline);
        const Model& cand = model(req.candidate);
        const auto est = req.uncertainty == "true" ? true_estimate(ds, Split::test) : estimate(Split::test);
        const auto plot = uncertainty_plot(base, cand, ds, est, cfg_.analysis.sigma);
        const std::string stem = "uncertainty_" + req.baseline + "_vs_" + req.candidate +
                                 (req.uncertainty == "true" ? "_true" : "");
        CsvWriter csv(provenance(), {"sample_id", "uncertainty", "delta_mse", "delta_mse_smooth", "baseline_mse",
                                     "baseline_mse_smooth"});
        for (std::size_t i = 0; i < plot.size(); ++i) {
            csv.row({std::to_string(plot.ids[i]), fmt(plot.uncertainty[i]), fmt(plot.delta[i]),
                     fmt(plot.delta_smooth[i]), fmt(plot.baseline[i]), fmt(plot.baseline_smooth[i])});
        }
        add_csv(dir / (stem + ".csv"), csv);
        svg::ChartOptions opt;
        opt.title = req.candidate + " vs " + req.baseline;
        opt.x_label = "test samples sorted by " + std::string(req.uncertainty == "true" ? "true" : "estimated") +
                      " data uncertainty";
        opt.left_label = "delta MSE (" + req.baseline + " - " + req.candidate + ")";
        opt.right_label = "MSE of " + req.baseline;
        add_text(dir / (stem + ".svg"),
                 svg::line_chart({{"delta MSE", plot.delta_smooth, "#1f77b4", false},
                                  {req.baseline + " MSE", plot.baseline_smooth, "#7f7f7f", true}},
                                 opt));
        const auto t = tercile_summary(plot);
        summary_["uncertainty_plots"][stem] = {{"baseline", req.baseline}, {"candidate", req.candidate},
                                               {"uncertainty", req.uncertainty}, {"sigma", plot.sigma},
                                               {"tercile_delta", {t.low, t.mid, t.high}}};
    }

    void run_neighbors(const fs::path& dir) {
        const auto& ds = dataset();
        const std::size_t k_max = cfg_.analysis.k_max;
        std::vector<std::string> cols{"k"};
        std::vector<std::vector<double>> curves;
        for (const auto& name : cfg_.analysis.neighbors) {
            curves.push_back(neighbor_consistency(model(name), ds, k_max));
            cols.push_back(name);
            summary_["neighbors"][name] = curves.back();
        }
        CsvWriter csv(provenance(), cols);
        for (std::size_t k = 0; k < k_max; ++k) {
            std::vector<std::string> row{std::to_string(k + 1)};
            for (const auto& c : curves) row.push_back(fmt(c[k]));
            csv.row(row);
        }
        add_csv(dir / "neighbors.csv", csv);
        std::vector<svg::Series> series;
        for (std::size_t i = 0; i < curves.size(); ++i) {
            series.push_back({cols[i + 1], curves[i], palette(i), false});
        }
        std::vector<double> x(k_max);
        for (std::size_t k = 0; k < k_max; ++k) x[k] = double(k + 1);
        add_text(dir / "neighbors.svg",
                 svg::line_chart(series, {"Neighbour target consistency", "k-th nearest train neighbour",
                                          "mean (y - y_k)^2", "", 720, 420},
                                 x));
    }

    void run_train_curves(const fs::path& dir) {
        const auto& ds = dataset();
        const auto est = estimate(Split::train);
        std::vector<svg::Series> series;
        CsvWriter csv(provenance(), {"model", "sample_id", "uncertainty", "mse", "mse_smooth"});
        std::size_t i = 0;
        for (const auto& name : cfg_.analysis.train_curves) {
            const auto curve = train_split_curve(model(name), ds, est, cfg_.analysis.sigma);
            for (std::size_t s = 0; s < curve.ids.size(); ++s) {
                csv.row({name, std::to_string(curve.ids[s]), fmt(curve.uncertainty[s]), fmt(curve.mse[s]),
                         fmt(curve.mse_smooth[s])});
            }
            const auto t = tercile_means(curve.mse);
            summary_["train_curves"][name] = {{"tercile_mse", {t.low, t.mid, t.high}}};
            series.push_back({name, curve.mse_smooth, palette(i++), false});
        }
        add_csv(dir / "train_curves.csv", csv);
        add_text(dir / "train_curves.svg",
                 svg::line_chart(series, {"Train-split MSE", "train samples sorted by estimated data uncertainty",
                                          "smoothed MSE", "", 720, 420}));
    }

    void run_grad_ratio(const fs::path& dir) {
        const auto& ds = dataset();
        const auto rows = gradient_rows();
        CsvWriter csv(provenance(), {"model", "bucket", "mean_uncertainty", "mean_clean_norm", "mean_noisy_norm",
                                     "ratio", "samples"});
        std::vector<svg::Series> series;
        std::size_t i = 0;
        for (const auto& name : cfg_.analysis.grad_ratio) {
            const auto curve = clean_noisy_ratio_curve(model(name), ds, rows, cfg_.analysis.buckets);
            std::vector<double> ratios;
            for (std::size_t b = 0; b < curve.size(); ++b) {
                const auto& c = curve[b];
                csv.row({name, std::to_string(b), fmt(c.mean_uncertainty), fmt(c.mean_clean), fmt(c.mean_noisy),
                         fmt(c.ratio), std::to_string(c.samples)});
                ratios.push_back(c.ratio);
            }
            summary_["grad_ratio"][name] = ratios;
            series.push_back({name, ratios, palette(i++), false});
        }
        add_csv(dir / "grad_ratio.csv", csv);
        add_text(dir / "grad_ratio.svg",
                 svg::line_chart(series, {"Clean / noisy gradient norm ratio", "true data uncertainty bucket",
                                          "mean ||clean|| / mean ||noisy||", "", 720, 420}));
    }

    void run_branch_alignment(const fs::path& dir, const std::string& name) {
        const auto& ds = dataset();
        const auto curve = branch_alignment_curve(model(name), ds, gradient_rows(), cfg_.analysis.buckets);
        CsvWriter csv(provenance(), {"bucket", "mean_uncertainty", "clean_mean_norm", "clean_branch_norm",
                                     "clean_ratio", "noisy_mean_norm", "noisy_branch_norm", "noisy_ratio", "samples"});
        std::vector<double> clean, noisy;
        for (std::size_t b = 0; b < curve.size(); ++b) {
            const auto& c = curve[b];
            csv.row({std::to_string(b), fmt(c.mean_uncertainty), fmt(c.clean_mean_norm), fmt(c.clean_branch_norm),
                     fmt(c.clean_ratio), fmt(c.noisy_mean_norm), fmt(c.noisy_branch_norm), fmt(c.noisy_ratio),
                     std::to_string(c.samples)});
            clean.push_back(c.clean_ratio);
            noisy.push_back(c.noisy_ratio);
        }
        summary_["branch_alignment"][name] = {{"clean", clean}, {"noisy", noisy}};
        add_csv(dir / ("branch_alignment_" + name + ".csv"), csv);
        add_text(dir / ("branch_alignment_" + name + ".svg"),
                 svg::line_chart({{"clean", clean, "#1f77b4", false}, {"noisy", noisy, "#d62728", false}},
                                 {"Branch alignment (" + name + ")", "true data uncertainty bucket",
                                  "||mean_b g_b|| / mean_b ||g_b||", "", 720, 420}));
    }

    // Predictions over the raw (x1, x2) rectangle of a 2-feature dataset.
    void run_heatmap(const fs::path& dir, const std::string& name) {
        const auto& ds = dataset();
        if (ds.features() != 2) throw ConfigError("heatmaps require a 2-feature dataset (saw)");
        const std::size_t res = cfg_.analysis.heatmap_resolution;
        const auto& st = ds.standardization;
        Matrix x(res * res, 2);
        for (std::size_t r = 0; r < res; ++r) {
            for (std::size_t c = 0; c < res; ++c) {
                const double raw[2] = {(double(c) + 0.5) / double(res), 10.0 * (double(r) + 0.5) / double(res)};
                for (std::size_t j = 0; j < 2; ++j) {
                    x(r * res + c, j) = st.features ? (raw[j] - st.feature_mean[j]) / st.feature_std[j] : raw[j];
                }
            }
        }
        const Matrix pred = model(name).predict(x);
        Matrix grid(res, res);
        CsvWriter csv(provenance(), {"x1", "x2", "prediction"});
        for (std::size_t i = 0; i < res * res; ++i) {
            grid[i] = st.target_to_original(pred(i, 0));
            const double x1 = (double(i % res) + 0.5) / double(res), x2 = 10.0 * (double(i / res) + 0.5) / double(res);
            csv.row({fmt(x1), fmt(x2), fmt(grid[i])});
        }
        add_csv(dir / ("heatmap_" + name + ".csv"), csv);
        add_text(dir / ("heatmap_" + name + ".svg"), svg::heatmap(grid, 0.0, 1.0, name + " predictions", "x1", "x2"));
    }

    static std::string palette(std::size_t i) {
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
        return colors[i % 6];
    }
};

} // namespace tabunc::lab
