#pragma once

#include <memory>
#include <span>
#include <vector>

#include "tabunc/core/layers.hpp"
#include "tabunc/models/spec.hpp"

namespace tabunc {

// Saved state of one training-mode forward pass.
struct Tape {
    std::vector<LayerCache> caches;
    // Optional per-layer upstream gradients, filled by backward when requested.
    bool record_upstream = false;
    mutable std::vector<Matrix> upstream;
    // Model-specific extras (NCA keeps its retrieval state here).
    std::vector<LayerCache> candidate_caches;
    Matrix anchors, candidates, weights, distances, candidate_targets;
    std::vector<std::size_t> candidate_rows;
};

// Common surface of every trainable zoo member.
//
// forward_train() produces the rows the training loss is computed on: one
// per sample for most models, k per sample for TabM (one per branch, the
// loss being the mean of per-branch losses). predict() is the eval-mode
// model output, one row per sample.
class Model {
public:
    virtual ~Model() = default;

    virtual const ModelSpec& spec() const = 0;
    virtual std::size_t input_width() const = 0;
    virtual std::vector<Parameter*> parameters() = 0;
    std::vector<const Parameter*> parameters() const {
        auto ps = const_cast<Model*>(this)->parameters();
        return {ps.begin(), ps.end()};
    }
    virtual std::unique_ptr<Model> clone() const = 0;

    virtual std::size_t loss_rows_per_sample() const { return 1; }

    // `rows` are the dataset row ids of the batch when it is drawn from the
    // train split (retrieval models exclude them as their own candidates);
    // empty otherwise.
    virtual Matrix forward_train(const Matrix& x, std::span<const std::size_t> rows, const ForwardContext& ctx,
                                 Rng& rng, Tape& tape) const = 0;
    virtual void backward(const Tape& tape, const Matrix& dout, std::span<Matrix> grads) const = 0;

    virtual Matrix predict(const Matrix& x) const = 0;

    // Latent representation after the first block, one row per sample.
    virtual Matrix first_block(const Matrix& x) const = 0;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* p : parameters()) n += p->value.size();
        return n;
    }
};

inline std::vector<Matrix> zero_grads(const Model& m) {
    std::vector<Matrix> g;
    for (const auto* p : m.parameters()) g.emplace_back(p->value.rows(), p->value.cols());
    return g;
}

inline std::vector<Matrix> snapshot(const Model& m) {
    std::vector<Matrix> s;
    for (const auto* p : m.parameters()) s.push_back(p->value);
    return s;
}

inline void restore(Model& m, const std::vector<Matrix>& values) {
    auto ps = m.parameters();
    if (ps.size() != values.size()) throw UsageError("restore: snapshot does not match model parameters");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix::require_same_shape(ps[i]->value, values[i], "restore");
        ps[i]->value = values[i];
    }
}

inline bool parameters_finite(const Model& m) {
    for (const auto* p : m.parameters())
        if (!p->value.all_finite()) return false;
    return true;
}

// Layer stack covering mlp, mlp-plr, mlp-lrlr and tabm.
class SequentialModel final : public Model {
public:
    SequentialModel(ModelSpec spec, std::size_t input_width, std::vector<std::unique_ptr<Layer>> layers,
                    std::size_t first_block_end, std::size_t train_end, std::size_t branches = 1)
        : spec_(std::move(spec)), input_width_(input_width), layers_(std::move(layers)),
          first_block_end_(first_block_end), train_end_(train_end), branches_(branches) {}

    SequentialModel(const SequentialModel& other)
        : spec_(other.spec_), input_width_(other.input_width_), first_block_end_(other.first_block_end_),
          train_end_(other.train_end_), branches_(other.branches_) {
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
    }
    SequentialModel& operator=(const SequentialModel& other) {
        if (this != &other) {
            SequentialModel tmp(other);
            *this = std::move(tmp);
        }
        return *this;
    }
    SequentialModel(SequentialModel&&) = default;
    SequentialModel& operator=(SequentialModel&&) = default;

    const ModelSpec& spec() const override { return spec_; }
    std::size_t input_width() const override { return input_width_; }
    std::size_t loss_rows_per_sample() const override { return branches_; }
    std::size_t branches() const noexcept { return branches_; }

    using Model::parameters;
    std::vector<Parameter*> parameters() override {
        std::vector<Parameter*> out;
        for (auto& l : layers_) {
            auto ps = l->parameters();
            out.insert(out.end(), ps.begin(), ps.end());
        }
        return out;
    }

    std::unique_ptr<Model> clone() const override { return std::make_unique<SequentialModel>(*this); }

    std::vector<std::unique_ptr<Layer>>& layers() noexcept { return layers_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }
    std::size_t train_end() const noexcept { return train_end_; }

    // Runs layers [0, end) and records their caches when `tape` is given.
    Matrix run(const Matrix& x, std::size_t end, const ForwardContext& ctx, Tape* tape) const {
        check_input(x);
        Matrix h = x;
        if (tape) tape->caches.assign(end, {});
        for (std::size_t i = 0; i < end; ++i) h = layers_[i]->forward(h, ctx, tape ? &tape->caches[i] : nullptr);
        return h;
    }

    Matrix forward_train(const Matrix& x, std::span<const std::size_t>, const ForwardContext& ctx, Rng&,
                         Tape& tape) const override {
        return run(x, train_end_, ctx, &tape);
    }

    void backward(const Tape& tape, const Matrix& dout, std::span<Matrix> grads) const override {
        backward_to_input(tape, dout, grads);
    }

    // Backward through the taped layers; returns the input gradient.
    Matrix backward_to_input(const Tape& tape, const Matrix& dout, std::span<Matrix> grads) const {
        if (tape.record_upstream) tape.upstream.assign(tape.caches.size(), {});
        return backward_caches(tape.caches, dout, grads, tape.record_upstream ? &tape.upstream : nullptr);
    }

    Matrix backward_caches(const std::vector<LayerCache>& caches, const Matrix& dout, std::span<Matrix> grads,
                           std::vector<Matrix>* upstream = nullptr) const {
        const std::size_t end = caches.size();
        std::vector<std::size_t> offsets(end + 1, 0);
        for (std::size_t i = 0; i < end; ++i) offsets[i + 1] = offsets[i] + layers_[i]->parameters().size();
        if (grads.size() < offsets[end]) throw UsageError("backward: gradient slots do not cover the taped layers");
        Matrix g = dout;
        for (std::size_t i = end; i-- > 0;) {
            if (upstream) (*upstream)[i] = g;
            g = layers_[i]->backward(caches[i], g, grads.subspan(offsets[i], offsets[i + 1] - offsets[i]));
        }
        return g;
    }

    Matrix predict(const Matrix& x) const override {
        return run(x, layers_.size(), ForwardContext{Phase::eval, nullptr}, nullptr);
    }

    Matrix first_block(const Matrix& x) const override {
        Matrix h = run(x, first_block_end_, ForwardContext{Phase::eval, nullptr}, nullptr);
        if (branches_ > 1) {
            // one row per sample: branch rows side by side
            return Matrix(h.rows() / branches_, h.cols() * branches_, std::move(h.data()));
        }
        return h;
    }

private:
    void check_input(const Matrix& x) const {
        if (x.cols() != input_width_) {
            throw DimensionError(to_string(spec_.kind) + ": input " + x.shape() + " does not match model input width " +
                                 std::to_string(input_width_));
        }
    }

    ModelSpec spec_;
    std::size_t input_width_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::size_t first_block_end_;
    std::size_t train_end_;
    std::size_t branches_;
};

} // namespace tabunc
