#pragma once

#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tabunc/lab/runner.hpp"

namespace tabunc::lab {

// Bucket range [lo, hi) treated as "middle uncertainty": the central half.
inline std::pair<std::size_t, std::size_t> middle_buckets(std::size_t buckets) {
    const std::size_t lo = buckets / 4;
    return {lo, std::max(lo + 1, buckets - lo)};
}

inline double middle_mean(const std::vector<double>& v) {
    const auto [lo, hi] = middle_buckets(v.size());
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s / double(hi - lo);
}

// Scalar measurements behind each verdict; the acceptance suite aggregates
// them over seeds, `reproduce` judges a single run.
namespace measure {

inline std::vector<double> terciles(const json& summary, const std::string& plot) {
    if (!summary.contains("uncertainty_plots") || !summary["uncertainty_plots"].contains(plot)) {
        throw ConfigError("analysis summary has no uncertainty plot '" + plot + "'");
    }
    return summary["uncertainty_plots"][plot]["tercile_delta"].get<std::vector<double>>();
}

inline std::vector<double> neighbor_curve(const json& summary, const std::string& model) {
    return summary.at("neighbors").at(model).get<std::vector<double>>();
}

inline double train_high_tercile(const json& summary, const std::string& model) {
    return summary.at("train_curves").at(model).at("tercile_mse")[2].get<double>();
}

inline std::vector<double> grad_ratio(const json& summary, const std::string& model) {
    return summary.at("grad_ratio").at(model).get<std::vector<double>>();
}

inline std::vector<double> alignment(const json& summary, const std::string& model, const char* part) {
    return summary.at("branch_alignment").at(model).at(part).get<std::vector<double>>();
}

} // namespace measure

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Figure {
    std::string id;
    std::string config;   // file name under the preset directory
    std::string criterion; // what the verdict checks
    std::function<Verdict(Lab&)> verdict;
};

inline std::string num(double v) {
    std::ostringstream o;
    o.precision(4);
    o << v;
    return o.str();
}

inline std::vector<Figure> figure_registry() {
    std::vector<Figure> f;
    f.push_back({"fig-saw-predictions", "fig-saw-predictions.json",
                 "TabM test MSE below the deep ensemble and a larger high-tercile gain over MLP",
                 [](Lab& lab) {
                     const auto s = lab.summary();
                     const double tabm = lab.report("tabm").mse.at("test");
                     const double ens = lab.report("ensemble").mse.at("test");
                     const double gt = measure::terciles(s, "uncertainty_mlp_vs_tabm_true")[2];
                     const double ge = measure::terciles(s, "uncertainty_mlp_vs_ensemble_true")[2];
                     return Verdict{tabm < ens && gt > ge, "test mse tabm " + num(tabm) + " ensemble " + num(ens) +
                                                               "; high-tercile gain tabm " + num(gt) + " ensemble " +
                                                               num(ge)};
                 }});
    f.push_back({"fig-uncertainty-plr", "fig-uncertainty-plr.json",
                 "MLP-LRLR gain over MLP larger in the high than the low uncertainty tercile",
                 [](Lab& lab) {
                     const auto t = measure::terciles(lab.summary(), "uncertainty_mlp_vs_mlp-lrlr_true");
                     return Verdict{t[2] > t[0], "tercile delta mse low " + num(t[0]) + " mid " + num(t[1]) +
                                                     " high " + num(t[2])};
                 }});
    f.push_back({"fig-neighbors", "fig-neighbors.json",
                 "MLP-PLR neighbour-consistency curve below MLP for every k",
                 [](Lab& lab) {
                     const auto s = lab.summary();
                     const auto a = measure::neighbor_curve(s, "mlp"), b = measure::neighbor_curve(s, "mlp-plr");
                     std::size_t below = 0;
                     for (std::size_t k = 0; k < a.size(); ++k) below += b[k] < a[k];
                     return Verdict{below == a.size(), std::to_string(below) + "/" + std::to_string(a.size()) +
                                                           " k below; k=1 mlp " + num(a[0]) + " mlp-plr " + num(b[0])};
                 }});
    f.push_back({"fig-nca-train", "fig-nca-train.json",
                 "NCA train MSE above MLP in the high uncertainty tercile",
                 [](Lab& lab) {
                     const auto s = lab.summary();
                     const double nca = measure::train_high_tercile(s, "nca");
                     const double mlp = measure::train_high_tercile(s, "mlp");
                     return Verdict{nca > mlp, "high-tercile train mse nca " + num(nca) + " mlp " + num(mlp)};
                 }});
    f.push_back({"fig-grad-ratio", "fig-grad-ratio.json",
                 "TabM clean/noisy gradient ratio above MLP in the middle buckets",
                 [](Lab& lab) {
                     const auto s = lab.summary();
                     const double t = middle_mean(measure::grad_ratio(s, "tabm"));
                     const double m = middle_mean(measure::grad_ratio(s, "mlp"));
                     return Verdict{t > m, "middle-bucket ratio tabm " + num(t) + " mlp " + num(m)};
                 }});
    f.push_back({"fig-branch-alignment", "fig-grad-ratio.json",
                 "TabM branch alignment higher for clean than noisy gradients in the middle buckets",
                 [](Lab& lab) {
                     const auto s = lab.summary();
                     const double c = middle_mean(measure::alignment(s, "tabm", "clean"));
                     const double n = middle_mean(measure::alignment(s, "tabm", "noisy"));
                     return Verdict{c > n, "middle-bucket alignment clean " + num(c) + " noisy " + num(n)};
                 }});
    f.push_back({"table-triplet", "table-triplet.json",
                 "MLP-LRLR-triplet test MSE at most MLP-LRLR, both below MLP",
                 [](Lab& lab) {
                     const double mlp = lab.report("mlp").mse.at("test");
                     const double lrlr = lab.report("mlp-lrlr").mse.at("test");
                     const double trip = lab.report("mlp-lrlr-triplet").mse.at("test");
                     return Verdict{trip <= lrlr && lrlr < mlp && trip < mlp,
                                    "test mse mlp " + num(mlp) + " mlp-lrlr " + num(lrlr) + " mlp-lrlr-triplet " +
                                        num(trip)};
                 }});
    return f;
}

inline const Figure& find_figure(const std::string& id) {
    static const auto registry = figure_registry();
    for (const auto& f : registry)
        if (f.id == id) return f;
    std::string known;
    for (const auto& f : registry) known += (known.empty() ? "" : ", ") + f.id;
    throw ConfigError("unknown figure id '" + id + "' (known: " + known + ")");
}

// Preset directory: $TABUNC_CONFIG_DIR, else the in-repo configs/.
inline fs::path preset_dir() {
    if (const char* env = std::getenv("TABUNC_CONFIG_DIR"); env && *env) return env;
#ifdef TABUNC_SOURCE_DIR
    return fs::path(TABUNC_SOURCE_DIR) / "configs";
#else
    return "configs";
#endif
}

inline fs::path preset_path(const std::string& name) {
    const fs::path direct = preset_dir() / (name + ".json");
    if (fs::exists(direct)) return direct;
    const fs::path figure = preset_dir() / "figures" / (name + ".json");
    if (fs::exists(figure)) return figure;
    throw ConfigError("unknown preset '" + name + "' (no " + direct.string() + ")");
}

inline fs::path figure_config_path(const Figure& f) { return preset_dir() / "figures" / f.config; }

} // namespace tabunc::lab
