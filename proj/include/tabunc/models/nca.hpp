#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "tabunc/models/builders.hpp"
#include "tabunc/models/model.hpp"

namespace tabunc {

// Retrieval model: an MLP encoder h(.) followed by a soft nearest-neighbour
// head over stored training candidates,
//   y_hat(x) = sum_j w_j y_j,  w = softmax_j(-||h(x) - h(x_j)||^2 / tau),
// with tau = exp(log_temperature) trainable. In training a random fraction
// of candidates is used per batch and each anchor never sees its own row.
class NcaModel final : public Model {
public:
    NcaModel(const ModelSpec& spec, std::size_t d, Matrix candidates_x, std::vector<double> candidates_y,
             std::vector<std::size_t> candidate_rows, Rng& rng)
        : spec_(spec), cand_x_(std::move(candidates_x)), cand_y_(std::move(candidates_y)),
          cand_rows_(std::move(candidate_rows)), log_temperature_{"log_temperature", Matrix(1, 1)},
          encoder_(make_encoder(spec, d, rng)) {
        if (spec.kind != ModelKind::nca) throw ConfigError("build_nca: spec kind is " + to_string(spec.kind));
        spec.validate();
        if (cand_x_.rows() == 0) throw UsageError("nca: empty candidate set");
        if (cand_x_.rows() != cand_y_.size() || cand_rows_.size() != cand_y_.size()) {
            throw DimensionError("nca: candidate features/targets/row ids disagree in length");
        }
        if (cand_x_.cols() != d) throw DimensionError("nca: candidate width " + cand_x_.shape() + " vs input width " +
                                                      std::to_string(d));
        log_temperature_.value[0] = std::log(spec.temperature);
        if (spec.heteroscedastic) scale_head_.emplace(spec.latent_dim, 1, "scale_head", rng);
    }

    const ModelSpec& spec() const override { return spec_; }
    std::size_t input_width() const override { return encoder_.input_width(); }

    using Model::parameters;
    std::vector<Parameter*> parameters() override {
        auto ps = encoder_.parameters();
        ps.push_back(&log_temperature_);
        if (scale_head_) {
            auto hs = scale_head_->parameters();
            ps.insert(ps.end(), hs.begin(), hs.end());
        }
        return ps;
    }

    std::unique_ptr<Model> clone() const override { return std::make_unique<NcaModel>(*this); }

    double temperature() const { return std::exp(log_temperature_.value[0]); }
    const Matrix& candidates_x() const noexcept { return cand_x_; }
    const std::vector<double>& candidates_y() const noexcept { return cand_y_; }
    const std::vector<std::size_t>& candidate_rows() const noexcept { return cand_rows_; }
    SequentialModel& encoder() noexcept { return encoder_; }

    Matrix encode(const Matrix& x) const { return encoder_.predict(x); }

    Matrix forward_train(const Matrix& x, std::span<const std::size_t> rows, const ForwardContext& ctx, Rng& rng,
                         Tape& tape) const override {
        if (!rows.empty() && rows.size() != x.rows()) {
            throw DimensionError("nca: row ids given for " + std::to_string(rows.size()) + " of " +
                                 std::to_string(x.rows()) + " anchors");
        }
        const std::size_t n_c = cand_x_.rows();
        std::vector<std::size_t> idx;
        if (ctx.phase == Phase::train && spec_.candidate_fraction < 1.0) {
            const auto m = std::max<std::size_t>(1, std::size_t(std::llround(spec_.candidate_fraction * double(n_c))));
            idx.resize(n_c);
            for (std::size_t i = 0; i < n_c; ++i) idx[i] = i;
            for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.uniform_index(n_c - i)]);
            idx.resize(m);
            std::sort(idx.begin(), idx.end());
        } else {
            idx.resize(n_c);
            for (std::size_t i = 0; i < n_c; ++i) idx[i] = i;
        }

        Tape enc_a, enc_c;
        tape.anchors = encoder_.run(x, encoder_.layers().size(), ctx, &enc_a);
        tape.candidates = encoder_.run(select_rows(cand_x_, idx), encoder_.layers().size(), ctx, &enc_c);
        tape.caches = std::move(enc_a.caches);
        tape.candidate_caches = std::move(enc_c.caches);
        tape.candidate_targets = Matrix(idx.size(), 1);
        for (std::size_t j = 0; j < idx.size(); ++j) tape.candidate_targets[j] = cand_y_[idx[j]];
        tape.candidate_rows = idx;

        std::vector<std::size_t> exclude(x.rows(), npos);
        if (!rows.empty()) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                auto it = std::lower_bound(idx.begin(), idx.end(), row_to_candidate(rows[i]));
                if (it != idx.end() && *it == row_to_candidate(rows[i])) exclude[i] = std::size_t(it - idx.begin());
            }
        }
        return head_forward(tape, exclude);
    }

    void backward(const Tape& tape, const Matrix& dout, std::span<Matrix> grads) const override {
        const std::size_t b = tape.anchors.rows();
        const std::size_t m = tape.candidates.rows();
        if (dout.rows() != b || dout.cols() != spec_.outputs()) {
            throw DimensionError("nca: upstream gradient " + dout.shape() + " does not match output " +
                                 Matrix::shape_string(b, spec_.outputs()));
        }
        const std::size_t n_enc = encoder_.parameters().size();
        const double tau = temperature();
        const Matrix& w = tape.weights;
        const Matrix& dist = tape.distances;
        Matrix d_dist(b, m);
        double d_logtemp = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            double pred = 0.0;
            for (std::size_t j = 0; j < m; ++j) pred += w(i, j) * tape.candidate_targets[j];
            for (std::size_t j = 0; j < m; ++j) {
                const double dlogit = w(i, j) * dout(i, 0) * (tape.candidate_targets[j] - pred);
                d_dist(i, j) = -dlogit / tau;
                if (w(i, j) > 0.0) d_logtemp += dlogit * dist(i, j) / tau;
            }
        }
        grads[n_enc][0] += d_logtemp;

        Matrix d_anchor = matmul(d_dist, tape.candidates);
        Matrix d_cand = matmul_tn(d_dist, tape.anchors);
        for (std::size_t i = 0; i < b; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < m; ++j) rs += d_dist(i, j);
            for (std::size_t c = 0; c < d_anchor.cols(); ++c) {
                d_anchor(i, c) = 2.0 * (rs * tape.anchors(i, c) - d_anchor(i, c));
            }
        }
        std::vector<double> cs(m, 0.0);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < m; ++j) cs[j] += d_dist(i, j);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t c = 0; c < d_cand.cols(); ++c) {
                d_cand(j, c) = 2.0 * (cs[j] * tape.candidates(j, c) - d_cand(j, c));
            }
        }

        if (scale_head_) {
            Matrix d_scale(b, 1);
            for (std::size_t i = 0; i < b; ++i) d_scale[i] = dout(i, 1);
            LayerCache hc{tape.anchors, {}, true};
            d_anchor += scale_head_->backward(hc, d_scale, grads.subspan(n_enc + 1, 2));
        }

        auto enc_grads = grads.subspan(0, n_enc);
        encoder_.backward_caches(tape.caches, d_anchor, enc_grads);
        encoder_.backward_caches(tape.candidate_caches, d_cand, enc_grads);
    }

    Matrix predict(const Matrix& x) const override { return predict_impl(x, {}); }

    // Eval-mode prediction for dataset rows; rows present in the candidate
    // set are excluded from their own neighbourhood (leave-one-out).
    Matrix predict_rows(const Matrix& x, std::span<const std::size_t> rows) const { return predict_impl(x, rows); }

    Matrix first_block(const Matrix& x) const override {
        return encoder_.run(x, 2, ForwardContext{Phase::eval, nullptr}, nullptr);
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    static SequentialModel make_encoder(const ModelSpec& spec, std::size_t d, Rng& rng) {
        LayerStack s;
        std::size_t in = d;
        for (std::size_t b = 0; b < spec.depth; ++b) {
            const std::string id = "encoder.block" + std::to_string(b);
            s.push_back(std::make_unique<Affine>(in, spec.width, id + ".affine", rng));
            s.push_back(std::make_unique<ReLU>(spec.width));
            s.push_back(std::make_unique<Dropout>(spec.width, spec.dropout));
            in = spec.width;
        }
        s.push_back(std::make_unique<Affine>(in, spec.latent_dim, "encoder.latent", rng));
        const std::size_t n = s.size();
        ModelSpec enc = spec;
        enc.heteroscedastic = false;
        return SequentialModel(enc, d, std::move(s), 2, n);
    }

    std::size_t row_to_candidate(std::size_t row) const {
        auto it = std::lower_bound(cand_rows_.begin(), cand_rows_.end(), row);
        if (it != cand_rows_.end() && *it == row) return std::size_t(it - cand_rows_.begin());
        return npos;
    }

    // Softmax retrieval over tape.anchors x tape.candidates.
    Matrix head_forward(Tape& tape, const std::vector<std::size_t>& exclude) const {
        const std::size_t b = tape.anchors.rows();
        const std::size_t m = tape.candidates.rows();
        const double tau = temperature();
        tape.distances = pairwise_sq_dist(tape.anchors, tape.candidates);
        tape.weights = Matrix(b, m);
        Matrix out(b, spec_.outputs());
        for (std::size_t i = 0; i < b; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m; ++j) {
                if (j == exclude[i]) continue;
                best = std::max(best, -tape.distances(i, j) / tau);
            }
            if (!std::isfinite(best)) throw UsageError("nca: empty candidate set for anchor " + std::to_string(i));
            double z = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double e = j == exclude[i] ? 0.0 : std::exp(-tape.distances(i, j) / tau - best);
                tape.weights(i, j) = e;
                z += e;
            }
            double pred = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                tape.weights(i, j) /= z;
                pred += tape.weights(i, j) * tape.candidate_targets[j];
            }
            out(i, 0) = pred;
        }
        if (scale_head_) {
            Matrix s = scale_head_->forward(tape.anchors, ForwardContext{}, nullptr);
            for (std::size_t i = 0; i < b; ++i) out(i, 1) = s[i];
        }
        return out;
    }

    static Matrix pairwise_sq_dist(const Matrix& a, const Matrix& c) {
        Matrix d = matmul_nt(a, c);
        std::vector<double> na(a.rows()), nc(c.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (double v : a.row(i)) s += v * v;
            na[i] = s;
        }
        for (std::size_t j = 0; j < c.rows(); ++j) {
            double s = 0.0;
            for (double v : c.row(j)) s += v * v;
            nc[j] = s;
        }
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < c.rows(); ++j) d(i, j) = std::max(0.0, na[i] + nc[j] - 2.0 * d(i, j));
        }
        return d;
    }

    Matrix predict_impl(const Matrix& x, std::span<const std::size_t> rows) const {
        const ForwardContext ctx{Phase::eval, nullptr};
        Tape tape;
        tape.candidates = encoder_.run(cand_x_, encoder_.layers().size(), ctx, nullptr);
        tape.candidate_targets = Matrix::column(cand_y_);
        Matrix out(x.rows(), spec_.outputs());
        constexpr std::size_t chunk = 512;
        for (std::size_t start = 0; start < x.rows(); start += chunk) {
            const std::size_t stop = std::min(x.rows(), start + chunk);
            std::vector<std::size_t> ids(stop - start);
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = start + i;
            tape.anchors = encoder_.run(select_rows(x, ids), encoder_.layers().size(), ctx, nullptr);
            std::vector<std::size_t> exclude(ids.size(), npos);
            if (!rows.empty()) {
                for (std::size_t i = 0; i < ids.size(); ++i) exclude[i] = row_to_candidate(rows[start + i]);
            }
            Matrix part = head_forward(tape, exclude);
            std::copy(part.data().begin(), part.data().end(), out.row(start).begin());
        }
        return out;
    }

    ModelSpec spec_;
    Matrix cand_x_;
    std::vector<double> cand_y_;
    std::vector<std::size_t> cand_rows_; // sorted dataset row ids
    Parameter log_temperature_;
    SequentialModel encoder_;
    std::optional<Affine> scale_head_;
};

} // namespace tabunc
