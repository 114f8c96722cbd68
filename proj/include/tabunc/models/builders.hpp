#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tabunc/core/layers.hpp"
#include "tabunc/models/model.hpp"

namespace tabunc {

using LayerStack = std::vector<std::unique_ptr<Layer>>;

// Periodic (cos/sin with trainable frequencies) -> per-feature linear -> ReLU.
// Output width d * m.
inline LayerStack build_plr_embedder(std::size_t d, std::size_t k, std::size_t m, double sigma, Rng& rng) {
    if (k < 1 || m < 1) throw ConfigError("plr embedder: coefficient count and embedding dim must be positive");
    LayerStack s;
    s.push_back(std::make_unique<PeriodicEncoding>(d, k, sigma, "embed.periodic", rng));
    s.push_back(std::make_unique<PerFeatureAffine>(d, 2 * k, m, "embed.linear", rng));
    s.push_back(std::make_unique<ReLU>(d * m));
    return s;
}

// Per-feature linear(1->m) -> ReLU -> linear(m->m) -> ReLU. Output width d * m.
inline LayerStack build_lrlr_embedder(std::size_t d, std::size_t m, Rng& rng) {
    if (m < 1) throw ConfigError("lrlr embedder: embedding dim must be positive");
    LayerStack s;
    s.push_back(std::make_unique<PerFeatureAffine>(d, 1, m, "embed.linear0", rng));
    s.push_back(std::make_unique<ReLU>(d * m));
    s.push_back(std::make_unique<PerFeatureAffine>(d, m, m, "embed.linear1", rng));
    s.push_back(std::make_unique<ReLU>(d * m));
    return s;
}

namespace detail {

// affine -> relu -> dropout blocks, then the head. Returns the index just
// past the first block's activation.
inline std::size_t append_mlp_body(LayerStack& s, std::size_t in, const ModelSpec& spec, Rng& rng) {
    std::size_t first_block_end = 0;
    std::size_t width_in = in;
    for (std::size_t b = 0; b < spec.depth; ++b) {
        const std::string id = "block" + std::to_string(b);
        s.push_back(std::make_unique<Affine>(width_in, spec.width, id + ".affine", rng));
        s.push_back(std::make_unique<ReLU>(spec.width));
        if (b == 0) first_block_end = s.size();
        s.push_back(std::make_unique<Dropout>(spec.width, spec.dropout));
        width_in = spec.width;
    }
    s.push_back(std::make_unique<Affine>(width_in, spec.outputs(), "head", rng));
    return first_block_end;
}

} // namespace detail

inline SequentialModel build_mlp(const ModelSpec& spec, std::size_t d, Rng& rng) {
    if (spec.kind != ModelKind::mlp && spec.kind != ModelKind::deep_ensemble) {
        throw ConfigError("build_mlp: spec kind is " + to_string(spec.kind));
    }
    spec.validate();
    LayerStack s;
    const std::size_t first = detail::append_mlp_body(s, d, spec, rng);
    const std::size_t n = s.size();
    ModelSpec member = spec;
    member.kind = ModelKind::mlp;
    return SequentialModel(member, d, std::move(s), first, n);
}

// MLP whose input is replaced by a numerical-feature embedder of width d*m.
inline SequentialModel build_embedded_mlp(const ModelSpec& spec, std::size_t d, Rng& rng) {
    spec.validate();
    LayerStack s;
    if (spec.kind == ModelKind::mlp_plr) {
        s = build_plr_embedder(d, spec.plr_coefficients, spec.embedding_dim, spec.plr_sigma, rng);
    } else if (spec.kind == ModelKind::mlp_lrlr) {
        s = build_lrlr_embedder(d, spec.embedding_dim, rng);
    } else {
        throw ConfigError("build_embedded_mlp: spec kind is " + to_string(spec.kind));
    }
    const std::size_t first = detail::append_mlp_body(s, d * spec.embedding_dim, spec, rng);
    const std::size_t n = s.size();
    return SequentialModel(spec, d, std::move(s), first, n);
}

// Number of leading layers that form the embedder of an mlp-plr/mlp-lrlr model.
inline std::size_t embedder_layer_count(const ModelSpec& spec) {
    switch (spec.kind) {
    case ModelKind::mlp_plr: return 3;
    case ModelKind::mlp_lrlr: return 4;
    default: return 0;
    }
}

// Shared-weight multi-branch MLP: every shared affine is wrapped by
// per-branch input/output scalers and biases; per-branch heads; the model
// output is the mean over branches.
inline SequentialModel build_tabm(const ModelSpec& spec, std::size_t d, Rng& rng) {
    if (spec.kind != ModelKind::tabm) throw ConfigError("build_tabm: spec kind is " + to_string(spec.kind));
    spec.validate();
    const std::size_t k = spec.branches;
    LayerStack s;
    s.push_back(std::make_unique<ExpandBranches>(d, k));
    std::size_t first_block_end = 0;
    std::size_t width_in = d;
    for (std::size_t b = 0; b < spec.depth; ++b) {
        const std::string id = "block" + std::to_string(b);
        s.push_back(std::make_unique<BranchAffine>(width_in, spec.width, k, id + ".affine", rng));
        s.push_back(std::make_unique<ReLU>(spec.width));
        if (b == 0) first_block_end = s.size();
        s.push_back(std::make_unique<Dropout>(spec.width, spec.dropout));
        width_in = spec.width;
    }
    s.push_back(std::make_unique<BranchHead>(width_in, spec.outputs(), k, "head", rng));
    const std::size_t train_end = s.size();
    s.push_back(std::make_unique<MeanOverBranches>(spec.outputs(), k));
    return SequentialModel(spec, d, std::move(s), first_block_end, train_end, k);
}

} // namespace tabunc
