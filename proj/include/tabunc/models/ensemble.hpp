#pragma once

#include <memory>
#include <vector>

#include "tabunc/models/model.hpp"

namespace tabunc {

// Arithmetic mean of independently trained members.
class DeepEnsemble final : public Model {
public:
    DeepEnsemble(ModelSpec spec, std::vector<SequentialModel> members)
        : spec_(std::move(spec)), members_(std::move(members)) {
        spec_.kind = ModelKind::deep_ensemble;
        if (members_.size() < 2) throw ConfigError("deep-ensemble: need at least 2 members");
        spec_.ensemble_size = members_.size();
    }

    const ModelSpec& spec() const override { return spec_; }
    std::size_t input_width() const override { return members_.front().input_width(); }

    using Model::parameters;
    std::vector<Parameter*> parameters() override {
        std::vector<Parameter*> out;
        for (auto& m : members_) {
            auto ps = m.parameters();
            out.insert(out.end(), ps.begin(), ps.end());
        }
        return out;
    }

    std::unique_ptr<Model> clone() const override { return std::make_unique<DeepEnsemble>(*this); }

    Matrix forward_train(const Matrix&, std::span<const std::size_t>, const ForwardContext&, Rng&,
                         Tape&) const override {
        throw UsageError("deep-ensemble: members are trained independently; train each member instead");
    }
    void backward(const Tape&, const Matrix&, std::span<Matrix>) const override {
        throw UsageError("deep-ensemble: members are trained independently; train each member instead");
    }

    Matrix predict(const Matrix& x) const override {
        Matrix out = members_.front().predict(x);
        for (std::size_t i = 1; i < members_.size(); ++i) out += members_[i].predict(x);
        out *= 1.0 / double(members_.size());
        return out;
    }

    Matrix first_block(const Matrix& x) const override { return members_.front().first_block(x); }

    const std::vector<SequentialModel>& members() const noexcept { return members_; }
    std::vector<SequentialModel>& members() noexcept { return members_; }

private:
    ModelSpec spec_;
    std::vector<SequentialModel> members_;
};

} // namespace tabunc
