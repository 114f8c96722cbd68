#pragma once

#include <memory>
#include <vector>

#include "tabunc/data/dataset.hpp"
#include "tabunc/models/builders.hpp"
#include "tabunc/models/ensemble.hpp"
#include "tabunc/models/nca.hpp"

namespace tabunc {

// Retrieval model over the train split of `ds`.
inline NcaModel build_nca(const ModelSpec& spec, const Dataset& ds, Rng& rng) {
    const auto rows = ds.rows(Split::train);
    if (rows.empty()) throw UsageError("build_nca: empty candidate set");
    return NcaModel(spec, ds.features(), ds.x_rows(rows), ds.y_rows(rows), rows, rng);
}

// Any single-network kind. NCA needs the dataset for its candidates.
inline std::unique_ptr<Model> build_model(const ModelSpec& spec, const Dataset& ds, Rng& rng) {
    const std::size_t d = ds.features();
    switch (spec.kind) {
    case ModelKind::mlp: return std::make_unique<SequentialModel>(build_mlp(spec, d, rng));
    case ModelKind::mlp_plr:
    case ModelKind::mlp_lrlr: return std::make_unique<SequentialModel>(build_embedded_mlp(spec, d, rng));
    case ModelKind::tabm: return std::make_unique<SequentialModel>(build_tabm(spec, d, rng));
    case ModelKind::nca: return std::make_unique<NcaModel>(build_nca(spec, ds, rng));
    case ModelKind::deep_ensemble: break;
    }
    throw ConfigError("build_model: deep-ensemble members must be trained via build_deep_ensemble");
}

} // namespace tabunc
