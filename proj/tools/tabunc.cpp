#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tabunc/tabunc.hpp"

using namespace tabunc;
using namespace tabunc::lab;

namespace {

constexpr int exit_ok = 0, exit_usage = 1, exit_numeric = 2, exit_verdict = 3;

struct Globals {
    std::string config, preset;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t workers = 0;
    bool force = false;
};

std::size_t env_size(const char* name, std::size_t fallback) {
    const char* v = std::getenv(name);
    if (!v || !*v) return fallback;
    try {
        return std::stoul(v);
    } catch (const std::exception&) {
        throw ConfigError(std::string("environment variable ") + name + " must be a positive integer, got '" + v + "'");
    }
}

ExperimentConfig resolve_config(const Globals& g) {
    if (!g.config.empty() && !g.preset.empty()) throw ConfigError("pass either --config or --preset, not both");
    if (g.config.empty() && g.preset.empty()) throw ConfigError("no experiment given: pass --config FILE or --preset NAME");
    auto cfg = load_config(g.config.empty() ? preset_path(g.preset) : fs::path(g.config));
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

LabOptions lab_options(const Globals& g) {
    LabOptions o;
    const char* env_out = std::getenv("TABUNC_OUT");
    o.out = !g.out.empty() ? fs::path(g.out) : (env_out && *env_out ? fs::path(env_out) : fs::path("runs"));
    // flag beats environment beats default
    o.workers = g.workers ? g.workers : env_size("TABUNC_WORKERS", 1);
    if (o.workers == 0) o.workers = 1;
    o.force = g.force;
    return o;
}

void print_dataset(const Dataset& ds, const fs::path& dir) {
    std::cout << "dataset " << dir.string() << "\n"
              << "  generator " << ds.generator << ", rows " << ds.size() << ", features " << ds.features() << "\n"
              << "  split train " << ds.count(Split::train) << " / val " << ds.count(Split::val) << " / test "
              << ds.count(Split::test) << "\n";
}

void print_report(const ModelReport& r) {
    std::cout << "model " << r.name << " (" << to_string(r.kind) << ")\n";
    for (const auto& [split, mse] : r.mse) {
        std::cout << "  " << split << " mse " << fmt(mse) << " (original units " << fmt(r.mse_original.at(split))
                  << ")";
        if (r.nll.count(split)) std::cout << " nll " << fmt(r.nll.at(split));
        std::cout << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-uncertainty laboratory for tabular deep learning"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config file (JSON)");
    app.add_option("--preset", g.preset, "named preset from the configs directory (e.g. saw, mlp-synth)");
    app.add_option("--seed", g.seed, "root seed (overrides the config)");
    app.add_option("--out", g.out, "output root (default: $TABUNC_OUT or ./runs)");
    app.add_option("--workers", g.workers, "parallel workers for tuning and ensembles (default: $TABUNC_WORKERS or 1)");
    app.add_flag("--force", g.force, "recompute stages even when their stamps are current");

    auto* generate = app.add_subcommand("generate", "generate or load the dataset and write its cache");

    auto* train = app.add_subcommand("train", "train one model of the config");
    std::string train_model;
    std::optional<std::size_t> members;
    train->add_option("model", train_model, "model name from the config")->required();
    train->add_option("--members", members, "deep-ensemble size");

    auto* tune_cmd = app.add_subcommand("tune", "random-search one model's hyperparameters");
    std::string tune_model;
    std::optional<std::size_t> iterations;
    tune_cmd->add_option("model", tune_model, "model name from the config")->required();
    tune_cmd->add_option("--iterations", iterations, "number of trials (default: config, else 30)");

    auto* estimate = app.add_subcommand("estimate", "fit the heteroscedastic uncertainty estimator");
    auto* analyze = app.add_subcommand("analyze", "run the configured diagnostics (needs trained models)");

    auto* reproduce = app.add_subcommand("reproduce", "run a canned figure experiment and judge it");
    std::string figure_id;
    reproduce->add_option("figure", figure_id, "figure id")->required();

    app.add_subcommand("figures", "list reproducible figure ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (app.got_subcommand("figures")) {
            for (const auto& f : figure_registry()) std::cout << f.id << "  " << f.criterion << "\n";
            return exit_ok;
        }

        if (reproduce->parsed()) {
            const Figure& fig = find_figure(figure_id);
            Globals rg = g;
            if (rg.config.empty() && rg.preset.empty()) rg.config = figure_config_path(fig).string();
            LabOptions ro = lab_options(g);
            ro.analysis_name = fig.id;
            Lab lab(resolve_config(rg), ro);
            const auto artifacts = lab.analyze();
            for (const auto& p : artifacts) std::cout << "wrote " << p.string() << "\n";
            const Verdict v = fig.verdict(lab);
            std::cout << "verdict " << fig.id << ": " << (v.pass ? "PASS" : "FAIL") << " (" << fig.criterion << "; "
                      << v.detail << ")\n";
            return v.pass ? exit_ok : exit_verdict;
        }

        ExperimentConfig cfg = resolve_config(g);
        LabOptions opts = lab_options(g);

        if (generate->parsed()) {
            Lab lab(cfg, opts);
            print_dataset(lab.dataset(), lab.root() / "dataset");
            return exit_ok;
        }

        if (train->parsed() || tune_cmd->parsed()) {
            const std::string name = train->parsed() ? train_model : tune_model;
            ExperimentConfig edited = cfg;
            edited.models.clear();
            for (auto m : cfg.models) {
                if (m.name == name) {
                    if (members) {
                        if (m.spec.kind != ModelKind::deep_ensemble) {
                            throw ConfigError("--members applies to deep-ensemble models only");
                        }
                        m.spec.ensemble_size = *members;
                    }
                    if (tune_cmd->parsed()) {
                        if (m.triplet || m.spec.kind == ModelKind::deep_ensemble) {
                            throw ConfigError("model '" + name + "': spec/tune conflict, this kind is not tunable");
                        }
                        if (!m.tune) m.tune = TuneSpace::lr_only(30);
                        if (iterations) m.tune->iterations = *iterations;
                    }
                }
                edited.models.push_back(m);
            }
            edited.model(name); // unknown names fail here
            opts.build_missing = false;
            Lab lab(edited, opts);
            lab.dataset(); // the cache must exist already
            lab.set_build_missing(true);
            lab.model(name);
            print_report(lab.report(name));
            std::cout << "checkpoint " << (lab.model_dir(name) / "checkpoint").string() << "\n";
            return exit_ok;
        }

        if (estimate->parsed()) {
            opts.build_missing = false;
            Lab lab(cfg, opts);
            lab.dataset();
            lab.set_build_missing(true);
            const auto est = lab.estimate(Split::test);
            std::cout << "estimate " << (lab.root() / "estimator").string() << "\n"
                      << "  test rows " << est.size() << ", estimator " << to_string(est.estimator) << "\n";
            if (lab.dataset().has_truth()) {
                const auto a = cross_estimator_agreement(est, true_estimate(lab.dataset(), Split::test));
                std::cout << "  spearman vs true uncertainty " << fmt(a.spearman) << "\n";
            }
            return exit_ok;
        }

        if (analyze->parsed()) {
            opts.build_missing = false;
            Lab lab(cfg, opts);
            for (const auto& p : lab.analyze()) std::cout << "wrote " << p.string() << "\n";
            return exit_ok;
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
