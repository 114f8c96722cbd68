#pragma once

#include <string>

#include <json.hpp>

#include "tabunc/core/error.hpp"

namespace tabunc {

enum class ModelKind { mlp, mlp_plr, mlp_lrlr, nca, tabm, deep_ensemble };

inline std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::mlp_plr: return "mlp-plr";
    case ModelKind::mlp_lrlr: return "mlp-lrlr";
    case ModelKind::nca: return "nca";
    case ModelKind::tabm: return "tabm";
    case ModelKind::deep_ensemble: return "deep-ensemble";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "mlp") return ModelKind::mlp;
    if (s == "mlp-plr") return ModelKind::mlp_plr;
    if (s == "mlp-lrlr") return ModelKind::mlp_lrlr;
    if (s == "nca") return ModelKind::nca;
    if (s == "tabm") return ModelKind::tabm;
    if (s == "deep-ensemble") return ModelKind::deep_ensemble;
    throw ConfigError("unknown model kind '" + s + "'");
}

struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    std::size_t depth = 3;
    std::size_t width = 256;
    double dropout = 0.0;
    bool heteroscedastic = false; // 2 outputs: mean, log-scale

    // mlp-plr
    std::size_t plr_coefficients = 16;
    double plr_sigma = 1.0;
    // mlp-plr / mlp-lrlr
    std::size_t embedding_dim = 64;

    // tabm
    std::size_t branches = 16;

    // deep-ensemble (members are plain MLPs built from the fields above)
    std::size_t ensemble_size = 5;

    // nca
    std::size_t latent_dim = 64;
    double candidate_fraction = 0.3;
    double temperature = 1.0; // initial value; trained in log space

    std::size_t outputs() const noexcept { return heteroscedastic ? 2 : 1; }

    void validate() const {
        if (depth < 1 || depth > 4) throw ConfigError("model spec: depth must lie in [1, 4]");
        if (width < 1) throw ConfigError("model spec: width must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model spec: dropout must lie in [0, 1)");
        if ((kind == ModelKind::mlp_plr || kind == ModelKind::mlp_lrlr) && embedding_dim < 1) {
            throw ConfigError("model spec: embedding_dim must be positive");
        }
        if (kind == ModelKind::mlp_plr && plr_coefficients < 1) {
            throw ConfigError("model spec: plr_coefficients must be positive");
        }
        if (kind == ModelKind::tabm && branches < 2) throw ConfigError("model spec: tabm needs at least 2 branches");
        if (kind == ModelKind::deep_ensemble && ensemble_size < 2) {
            throw ConfigError("model spec: deep-ensemble needs at least 2 members");
        }
        if (kind == ModelKind::nca) {
            if (latent_dim < 1) throw ConfigError("model spec: latent_dim must be positive");
            if (!(candidate_fraction > 0.0 && candidate_fraction <= 1.0)) {
                throw ConfigError("model spec: candidate_fraction must lie in (0, 1]");
            }
            if (!(temperature > 0.0)) throw ConfigError("model spec: temperature must be positive");
        }
    }
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
    j = nlohmann::json{{"kind", to_string(s.kind)},
                       {"depth", s.depth},
                       {"width", s.width},
                       {"dropout", s.dropout},
                       {"heteroscedastic", s.heteroscedastic},
                       {"plr_coefficients", s.plr_coefficients},
                       {"plr_sigma", s.plr_sigma},
                       {"embedding_dim", s.embedding_dim},
                       {"branches", s.branches},
                       {"ensemble_size", s.ensemble_size},
                       {"latent_dim", s.latent_dim},
                       {"candidate_fraction", s.candidate_fraction},
                       {"temperature", s.temperature}};
}

// Missing fields keep their defaults, so config files may be partial.
inline void from_json(const nlohmann::json& j, ModelSpec& s) {
    if (j.contains("kind")) s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("depth", s.depth);
    get("width", s.width);
    get("dropout", s.dropout);
    get("heteroscedastic", s.heteroscedastic);
    get("plr_coefficients", s.plr_coefficients);
    get("plr_sigma", s.plr_sigma);
    get("embedding_dim", s.embedding_dim);
    get("branches", s.branches);
    get("ensemble_size", s.ensemble_size);
    get("latent_dim", s.latent_dim);
    get("candidate_fraction", s.candidate_fraction);
    get("temperature", s.temperature);
}

} // namespace tabunc
