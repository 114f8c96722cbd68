#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tabunc/core/io.hpp"
#include "tabunc/data/dataset.hpp"

namespace tabunc {

// On-disk dataset: `meta` (JSON) plus one little-endian f64 file per column.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    io::ensure_directory(dir);
    nlohmann::json meta;
    meta["generator"] = ds.generator;
    meta["seed"] = ds.seed;
    meta["rows"] = ds.size();
    meta["features"] = ds.features();
    meta["feature_names"] = ds.feature_names;
    meta["kept_features"] = ds.kept_features;
    meta["has_truth"] = ds.has_truth();
    meta["split_counts"] = {{"train", ds.count(Split::train)}, {"val", ds.count(Split::val)},
                            {"test", ds.count(Split::test)}};
    const auto& st = ds.standardization;
    meta["standardization"] = {{"features", st.features},       {"target", st.target},
                               {"feature_mean", st.feature_mean}, {"feature_std", st.feature_std},
                               {"target_mean", st.target_mean},   {"target_std", st.target_std}};
    io::write_text(dir / "meta", meta.dump(2) + "\n");

    for (std::size_t j = 0; j < ds.features(); ++j) {
        io::write_f64(dir / ("x_" + std::to_string(j) + ".f64"), column_of(ds.x, j));
    }
    io::write_f64(dir / "y.f64", ds.y);
    std::vector<double> split(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) split[i] = double(static_cast<int>(ds.split[i]));
    io::write_f64(dir / "split.f64", split);
    if (ds.truth) {
        io::write_f64(dir / "f_true.f64", ds.truth->f);
        io::write_f64(dir / "g_true.f64", ds.truth->g);
        io::write_f64(dir / "eps.f64", ds.truth->eps);
    }
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "meta")) {
        throw ConfigError("dataset cache '" + dir.string() + "' not found (run `generate` first)");
    }
    const auto meta = nlohmann::json::parse(io::read_text(dir / "meta"));
    Dataset ds;
    ds.generator = meta.at("generator").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    const auto rows = meta.at("rows").get<std::size_t>();
    const auto d = meta.at("features").get<std::size_t>();
    ds.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    ds.kept_features = meta.at("kept_features").get<std::vector<std::size_t>>();
    const auto& st = meta.at("standardization");
    ds.standardization.features = st.at("features").get<bool>();
    ds.standardization.target = st.at("target").get<bool>();
    ds.standardization.feature_mean = st.at("feature_mean").get<std::vector<double>>();
    ds.standardization.feature_std = st.at("feature_std").get<std::vector<double>>();
    ds.standardization.target_mean = st.at("target_mean").get<double>();
    ds.standardization.target_std = st.at("target_std").get<double>();

    ds.x = Matrix(rows, d);
    for (std::size_t j = 0; j < d; ++j) {
        auto col = io::read_f64(dir / ("x_" + std::to_string(j) + ".f64"));
        if (col.size() != rows) throw DimensionError("dataset cache: column " + std::to_string(j) + " length mismatch");
        for (std::size_t i = 0; i < rows; ++i) ds.x(i, j) = col[i];
    }
    ds.y = io::read_f64(dir / "y.f64");
    for (double s : io::read_f64(dir / "split.f64")) ds.split.push_back(static_cast<Split>(int(s)));
    if (meta.at("has_truth").get<bool>()) {
        GroundTruth t{io::read_f64(dir / "f_true.f64"), io::read_f64(dir / "g_true.f64"),
                      io::read_f64(dir / "eps.f64")};
        ds.truth = std::move(t);
    }
    ds.validate();
    return ds;
}

} // namespace tabunc
