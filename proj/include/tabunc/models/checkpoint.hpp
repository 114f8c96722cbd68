#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "tabunc/core/io.hpp"
#include "tabunc/models/zoo.hpp"

namespace tabunc {

namespace fs = std::filesystem;

namespace detail {

inline void write_parameters(const Model& model, const fs::path& dir, nlohmann::json& shapes) {
    for (const auto* p : model.parameters()) {
        io::write_f64(dir / (p->id + ".f64"), p->value.data());
        shapes[p->id] = {p->value.rows(), p->value.cols()};
    }
}

inline void read_parameters(Model& model, const fs::path& dir) {
    for (auto* p : model.parameters()) {
        auto values = io::read_f64(dir / (p->id + ".f64"));
        if (values.size() != p->value.size()) {
            throw DimensionError("checkpoint: parameter '" + p->id + "' has " + std::to_string(values.size()) +
                                 " values, expected " + std::to_string(p->value.size()));
        }
        p->value.data() = std::move(values);
    }
}

} // namespace detail

// Directory layout: `spec` (JSON: model spec, input width, parameter shapes,
// metadata) and one little-endian f64 blob per parameter named by its id.
// Retrieval models also store their candidates; ensembles store one
// sub-directory per member plus this manifest.
inline void save_checkpoint(const Model& model, const fs::path& dir, const nlohmann::json& metadata = {}) {
    io::ensure_directory(dir);
    nlohmann::json spec;
    spec["model"] = model.spec();
    spec["input_width"] = model.input_width();
    spec["metadata"] = metadata;
    nlohmann::json shapes = nlohmann::json::object();
    if (const auto* ens = dynamic_cast<const DeepEnsemble*>(&model)) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < ens->members().size(); ++i) {
            const std::string name = "member_" + std::to_string(i);
            save_checkpoint(ens->members()[i], dir / name, metadata.contains("members") ? metadata["members"][i]
                                                                                         : nlohmann::json{});
            names.push_back(name);
        }
        spec["members"] = names;
    } else {
        detail::write_parameters(model, dir, shapes);
    }
    if (const auto* nca = dynamic_cast<const NcaModel*>(&model)) {
        io::write_f64(dir / "candidates_x.f64", nca->candidates_x().data());
        io::write_f64(dir / "candidates_y.f64", nca->candidates_y());
        std::vector<double> rows(nca->candidate_rows().begin(), nca->candidate_rows().end());
        io::write_f64(dir / "candidate_rows.f64", rows);
        spec["candidates"] = nca->candidate_rows().size();
    }
    spec["parameters"] = shapes;
    io::write_text(dir / "spec", spec.dump(2) + "\n");
}

inline nlohmann::json read_checkpoint_spec(const fs::path& dir) {
    if (!fs::exists(dir / "spec")) throw ConfigError("checkpoint '" + dir.string() + "' not found (run `train` first)");
    return nlohmann::json::parse(io::read_text(dir / "spec"));
}

inline std::unique_ptr<Model> load_checkpoint(const fs::path& dir) {
    const auto spec_json = read_checkpoint_spec(dir);
    const ModelSpec spec = spec_json.at("model").get<ModelSpec>();
    const auto d = spec_json.at("input_width").get<std::size_t>();
    Rng scratch(0);
    std::unique_ptr<Model> model;
    switch (spec.kind) {
    case ModelKind::mlp: model = std::make_unique<SequentialModel>(build_mlp(spec, d, scratch)); break;
    case ModelKind::mlp_plr:
    case ModelKind::mlp_lrlr: model = std::make_unique<SequentialModel>(build_embedded_mlp(spec, d, scratch)); break;
    case ModelKind::tabm: model = std::make_unique<SequentialModel>(build_tabm(spec, d, scratch)); break;
    case ModelKind::nca: {
        auto cy = io::read_f64(dir / "candidates_y.f64");
        Matrix cx(cy.size(), d, io::read_f64(dir / "candidates_x.f64"));
        std::vector<std::size_t> rows;
        for (double r : io::read_f64(dir / "candidate_rows.f64")) rows.push_back(std::size_t(r));
        model = std::make_unique<NcaModel>(spec, d, std::move(cx), std::move(cy), std::move(rows), scratch);
        break;
    }
    case ModelKind::deep_ensemble: {
        std::vector<SequentialModel> members;
        for (const auto& name : spec_json.at("members")) {
            auto m = load_checkpoint(dir / name.get<std::string>());
            members.push_back(*dynamic_cast<SequentialModel*>(m.get()));
        }
        return std::make_unique<DeepEnsemble>(spec, std::move(members));
    }
    }
    detail::read_parameters(*model, dir);
    return model;
}

} // namespace tabunc
