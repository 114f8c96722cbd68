#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tabunc/core/error.hpp"
#include "tabunc/core/matrix.hpp"
#include "tabunc/core/rng.hpp"

namespace tabunc {

struct Parameter {
    std::string id;
    Matrix value;
};

enum class Phase { train, eval };

struct ForwardContext {
    Phase phase = Phase::eval;
    Rng* dropout_rng = nullptr; // required for dropout in train phase
};

// Activations saved by forward for the matching backward call.
struct LayerCache {
    Matrix input;
    Matrix aux;
    bool filled = false;
};

// A differentiable primitive with a hand-derived backward pass.
// backward() adds parameter gradients into `grads` (one entry per parameter,
// in parameters() order) and returns the gradient w.r.t. the layer input.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t input_width() const = 0;
    virtual std::size_t output_width() const = 0;
    virtual Matrix forward(const Matrix& in, const ForwardContext& ctx, LayerCache* cache) const = 0;
    virtual Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    std::vector<const Parameter*> parameters() const {
        auto ps = const_cast<Layer*>(this)->parameters();
        return {ps.begin(), ps.end()};
    }

    // Rows of the output per input row (k for branch expansion, 1/k for branch mean).
    virtual std::size_t rows_out(std::size_t rows_in) const { return rows_in; }

protected:
    void check_input(const Matrix& in) const {
        if (in.cols() != input_width()) {
            throw DimensionError(kind() + ": input " + in.shape() + " does not match expected width " +
                                 std::to_string(input_width()));
        }
    }
    void check_cache(const LayerCache& cache) const {
        if (!cache.filled) throw UsageError(kind() + ": backward called without saved activations");
    }
    void check_dout(const LayerCache& cache, const Matrix& dout) const {
        const std::size_t expect_rows = rows_out(cache.input.rows());
        if (dout.rows() != expect_rows || dout.cols() != output_width()) {
            throw DimensionError(kind() + ": upstream gradient " + dout.shape() + " does not match output " +
                                 Matrix::shape_string(expect_rows, output_width()));
        }
    }
    static void check_grads(std::span<Matrix> grads, std::size_t n, const std::string& who) {
        if (grads.size() != n) {
            throw UsageError(who + ": expected " + std::to_string(n) + " gradient slots, got " +
                             std::to_string(grads.size()));
        }
    }
};

namespace init {

inline void uniform_fan_in(Matrix& m, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
}

inline void random_sign(Matrix& m, Rng& rng) {
    for (double& v : m.data()) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
}

} // namespace init

// y = x W + b
class Affine final : public Layer {
public:
    Affine(std::size_t in, std::size_t out, std::string id)
        : weight_{id + ".weight", Matrix(in, out)}, bias_{id + ".bias", Matrix(1, out)} {}
    Affine(std::size_t in, std::size_t out, std::string id, Rng& rng) : Affine(in, out, std::move(id)) {
        init::uniform_fan_in(weight_.value, in, rng);
        init::uniform_fan_in(bias_.value, in, rng);
    }

    std::string kind() const override { return "affine"; }
    std::size_t input_width() const override { return weight_.value.rows(); }
    std::size_t output_width() const override { return weight_.value.cols(); }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        Matrix out = matmul(in, weight_.value);
        for (std::size_t r = 0; r < out.rows(); ++r) {
            auto row = out.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias_.value[c];
        }
        if (cache) *cache = {in, {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 2, kind());
        grads[0] += matmul_tn(cache.input, dout);
        for (std::size_t r = 0; r < dout.rows(); ++r) {
            auto row = dout.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) grads[1][c] += row[c];
        }
        return matmul_nt(dout, weight_.value);
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Affine>(*this); }
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;
    Parameter bias_;
};

class ReLU final : public Layer {
public:
    explicit ReLU(std::size_t width) : width_(width) {}

    std::string kind() const override { return "relu"; }
    std::size_t input_width() const override { return width_; }
    std::size_t output_width() const override { return width_; }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        Matrix out = in;
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        if (cache) *cache = {in, {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 0, kind());
        Matrix din = dout;
        const auto& x = cache.input.data();
        for (std::size_t i = 0; i < din.size(); ++i) {
            if (!(x[i] > 0.0)) din[i] = 0.0;
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

private:
    std::size_t width_;
};

// Inverted dropout; identity in eval phase. The mask is kept in the cache.
class Dropout final : public Layer {
public:
    Dropout(std::size_t width, double rate) : width_(width), rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    }

    std::string kind() const override { return "dropout"; }
    std::size_t input_width() const override { return width_; }
    std::size_t output_width() const override { return width_; }
    double rate() const noexcept { return rate_; }

    Matrix forward(const Matrix& in, const ForwardContext& ctx, LayerCache* cache) const override {
        check_input(in);
        if (ctx.phase == Phase::eval || rate_ == 0.0) {
            if (cache) *cache = {Matrix(in.rows(), 0), {}, true};
            return in;
        }
        if (!ctx.dropout_rng) throw UsageError("dropout: train phase requires a dropout stream");
        Matrix mask(in.rows(), in.cols());
        const double keep = 1.0 / (1.0 - rate_);
        for (double& m : mask.data()) m = ctx.dropout_rng->bernoulli(rate_) ? 0.0 : keep;
        Matrix out = in;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
        if (cache) *cache = {Matrix(in.rows(), 0), std::move(mask), true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_grads(grads, 0, kind());
        if (dout.rows() != cache.input.rows() || dout.cols() != width_) {
            throw DimensionError("dropout: upstream gradient " + dout.shape() + " does not match output " +
                                 Matrix::shape_string(cache.input.rows(), width_));
        }
        if (cache.aux.empty()) return dout;
        Matrix din = dout;
        for (std::size_t i = 0; i < din.size(); ++i) din[i] *= cache.aux[i];
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

private:
    std::size_t width_;
    double rate_;
};

// Per feature j with coefficients c_j (k of them):
//   x_j -> [cos(2 pi c_j1 x_j) ... cos(2 pi c_jk x_j), sin(2 pi c_j1 x_j) ... sin(2 pi c_jk x_j)]
// Output is the concatenation over features, width d * 2k.
class PeriodicEncoding final : public Layer {
public:
    PeriodicEncoding(std::size_t features, std::size_t coefficients, std::string id)
        : coeff_{id + ".coefficients", Matrix(features, coefficients)} {}
    PeriodicEncoding(std::size_t features, std::size_t coefficients, double sigma, std::string id, Rng& rng)
        : PeriodicEncoding(features, coefficients, std::move(id)) {
        for (double& v : coeff_.value.data()) v = rng.normal(0.0, sigma);
    }

    std::string kind() const override { return "periodic-encoding"; }
    std::size_t input_width() const override { return coeff_.value.rows(); }
    std::size_t output_width() const override { return coeff_.value.rows() * 2 * coeff_.value.cols(); }
    std::size_t coefficient_count() const noexcept { return coeff_.value.cols(); }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        const std::size_t d = input_width(), k = coefficient_count();
        Matrix out(in.rows(), output_width());
        for (std::size_t r = 0; r < in.rows(); ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                const double x = in(r, j);
                double* dst = &out(r, j * 2 * k);
                for (std::size_t l = 0; l < k; ++l) {
                    const double angle = 2.0 * std::numbers::pi * coeff_.value(j, l) * x;
                    dst[l] = std::cos(angle);
                    dst[k + l] = std::sin(angle);
                }
            }
        }
        if (cache) *cache = {in, {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 1, kind());
        const std::size_t d = input_width(), k = coefficient_count();
        const Matrix& in = cache.input;
        Matrix din(in.rows(), d);
        for (std::size_t r = 0; r < in.rows(); ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                const double x = in(r, j);
                const double* g = &dout(r, j * 2 * k);
                double dx = 0.0;
                for (std::size_t l = 0; l < k; ++l) {
                    const double c = coeff_.value(j, l);
                    const double w = 2.0 * std::numbers::pi;
                    const double angle = w * c * x;
                    // d cos(a)/da = -sin(a), d sin(a)/da = cos(a)
                    const double da = -std::sin(angle) * g[l] + std::cos(angle) * g[k + l];
                    grads[0](j, l) += da * w * x;
                    dx += da * w * c;
                }
                din(r, j) = dx;
            }
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<PeriodicEncoding>(*this); }
    std::vector<Parameter*> parameters() override { return {&coeff_}; }

private:
    Parameter coeff_;
};

// Independent affine map per feature block: input is d blocks of width `in`,
// output d blocks of width `out`; parameters are not shared across features.
class PerFeatureAffine final : public Layer {
public:
    PerFeatureAffine(std::size_t features, std::size_t in, std::size_t out, std::string id)
        : in_(in), out_(out), weight_{id + ".weight", Matrix(features, in * out)},
          bias_{id + ".bias", Matrix(features, out)} {}
    PerFeatureAffine(std::size_t features, std::size_t in, std::size_t out, std::string id, Rng& rng)
        : PerFeatureAffine(features, in, out, std::move(id)) {
        init::uniform_fan_in(weight_.value, in, rng);
        init::uniform_fan_in(bias_.value, in, rng);
    }

    std::string kind() const override { return "per-feature-affine"; }
    std::size_t features() const noexcept { return weight_.value.rows(); }
    std::size_t input_width() const override { return features() * in_; }
    std::size_t output_width() const override { return features() * out_; }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        const std::size_t n = in.rows();
        Matrix out(n, output_width());
        auto src = in.eigen();
        auto dst = out.eigen();
        for (std::size_t j = 0; j < features(); ++j) {
            EigenConstMap w(&weight_.value(j, 0), Eigen::Index(in_), Eigen::Index(out_));
            dst.middleCols(Eigen::Index(j * out_), Eigen::Index(out_)).noalias() =
                src.middleCols(Eigen::Index(j * in_), Eigen::Index(in_)) * w;
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < out_; ++c) out(r, j * out_ + c) += bias_.value(j, c);
            }
        }
        if (cache) *cache = {in, {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 2, kind());
        const Matrix& in = cache.input;
        Matrix din(in.rows(), input_width());
        auto x = in.eigen();
        auto g = dout.eigen();
        auto dx = din.eigen();
        for (std::size_t j = 0; j < features(); ++j) {
            EigenConstMap w(&weight_.value(j, 0), Eigen::Index(in_), Eigen::Index(out_));
            EigenMap dw(&grads[0](j, 0), Eigen::Index(in_), Eigen::Index(out_));
            auto gj = g.middleCols(Eigen::Index(j * out_), Eigen::Index(out_));
            dw.noalias() += x.middleCols(Eigen::Index(j * in_), Eigen::Index(in_)).transpose() * gj;
            dx.middleCols(Eigen::Index(j * in_), Eigen::Index(in_)).noalias() = gj * w.transpose();
            for (std::size_t r = 0; r < in.rows(); ++r) {
                for (std::size_t c = 0; c < out_; ++c) grads[1](j, c) += dout(r, j * out_ + c);
            }
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<PerFeatureAffine>(*this); }
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

private:
    std::size_t in_;
    std::size_t out_;
    Parameter weight_;
    Parameter bias_;
};

// Replicates every row k times: row n*k + b carries input row n for branch b.
class ExpandBranches final : public Layer {
public:
    ExpandBranches(std::size_t width, std::size_t branches) : width_(width), k_(branches) {}

    std::string kind() const override { return "expand-branches"; }
    std::size_t input_width() const override { return width_; }
    std::size_t output_width() const override { return width_; }
    std::size_t rows_out(std::size_t rows_in) const override { return rows_in * k_; }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        Matrix out(in.rows() * k_, width_);
        for (std::size_t r = 0; r < in.rows(); ++r) {
            for (std::size_t b = 0; b < k_; ++b) {
                std::copy(in.row(r).begin(), in.row(r).end(), out.row(r * k_ + b).begin());
            }
        }
        if (cache) *cache = {Matrix(in.rows(), 0), {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_grads(grads, 0, kind());
        const std::size_t n = cache.input.rows();
        if (dout.rows() != n * k_ || dout.cols() != width_) {
            throw DimensionError("expand-branches: upstream gradient " + dout.shape() + " does not match output " +
                                 Matrix::shape_string(n * k_, width_));
        }
        Matrix din(n, width_);
        for (std::size_t r = 0; r < n; ++r) {
            auto dst = din.row(r);
            for (std::size_t b = 0; b < k_; ++b) {
                auto src = dout.row(r * k_ + b);
                for (std::size_t c = 0; c < width_; ++c) dst[c] += src[c];
            }
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<ExpandBranches>(*this); }

private:
    std::size_t width_;
    std::size_t k_;
};

// Shared affine map wrapped by per-branch elementwise scalers and biases:
//   y = ((x * r_b) W) * s_b + bias_b   for rows of branch b = row % k.
class BranchAffine final : public Layer {
public:
    BranchAffine(std::size_t in, std::size_t out, std::size_t branches, std::string id)
        : weight_{id + ".weight", Matrix(in, out)}, in_scale_{id + ".in_scale", Matrix(branches, in, 1.0)},
          out_scale_{id + ".out_scale", Matrix(branches, out, 1.0)}, bias_{id + ".bias", Matrix(branches, out)} {}
    BranchAffine(std::size_t in, std::size_t out, std::size_t branches, std::string id, Rng& rng)
        : BranchAffine(in, out, branches, std::move(id)) {
        init::uniform_fan_in(weight_.value, in, rng);
        init::random_sign(in_scale_.value, rng);
        init::random_sign(out_scale_.value, rng);
    }

    std::string kind() const override { return "branch-affine"; }
    std::size_t input_width() const override { return weight_.value.rows(); }
    std::size_t output_width() const override { return weight_.value.cols(); }
    std::size_t branches() const noexcept { return bias_.value.rows(); }

    // Rows of x * r_b: the per-branch input to the shared weight.
    Matrix scaled_input(const Matrix& in) const {
        Matrix a = in;
        const std::size_t k = branches();
        for (std::size_t r = 0; r < a.rows(); ++r) {
            auto row = a.row(r);
            auto scale = in_scale_.value.row(r % k);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] *= scale[c];
        }
        return a;
    }

    // Rows of dy * s_b: the per-branch upstream seen by the shared weight.
    Matrix scaled_upstream(const Matrix& dout) const {
        Matrix g = dout;
        const std::size_t k = branches();
        for (std::size_t r = 0; r < g.rows(); ++r) {
            auto row = g.row(r);
            auto scale = out_scale_.value.row(r % k);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] *= scale[c];
        }
        return g;
    }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        check_rows(in.rows());
        Matrix z = matmul(scaled_input(in), weight_.value);
        Matrix out(z.rows(), z.cols());
        const std::size_t k = branches();
        for (std::size_t r = 0; r < z.rows(); ++r) {
            const std::size_t b = r % k;
            for (std::size_t c = 0; c < z.cols(); ++c) {
                out(r, c) = z(r, c) * out_scale_.value(b, c) + bias_.value(b, c);
            }
        }
        if (cache) *cache = {in, std::move(z), true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 4, kind());
        const std::size_t k = branches();
        const Matrix& z = cache.aux;
        for (std::size_t r = 0; r < dout.rows(); ++r) {
            const std::size_t b = r % k;
            for (std::size_t c = 0; c < dout.cols(); ++c) {
                grads[2](b, c) += dout(r, c) * z(r, c);
                grads[3](b, c) += dout(r, c);
            }
        }
        const Matrix dz = scaled_upstream(dout);
        grads[0] += matmul_tn(scaled_input(cache.input), dz);
        Matrix da = matmul_nt(dz, weight_.value);
        for (std::size_t r = 0; r < da.rows(); ++r) {
            const std::size_t b = r % k;
            for (std::size_t c = 0; c < da.cols(); ++c) {
                grads[1](b, c) += da(r, c) * cache.input(r, c);
                da(r, c) *= in_scale_.value(b, c);
            }
        }
        return da;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<BranchAffine>(*this); }
    std::vector<Parameter*> parameters() override { return {&weight_, &in_scale_, &out_scale_, &bias_}; }

    Parameter& weight() { return weight_; }
    Parameter& in_scale() { return in_scale_; }
    Parameter& out_scale() { return out_scale_; }
    Parameter& bias() { return bias_; }

private:
    void check_rows(std::size_t rows) const {
        if (rows % branches() != 0) {
            throw DimensionError("branch-affine: row count " + std::to_string(rows) +
                                 " is not a multiple of the branch count " + std::to_string(branches()));
        }
    }

    Parameter weight_;
    Parameter in_scale_;
    Parameter out_scale_;
    Parameter bias_;
};

// Separate affine head per branch (no sharing).
class BranchHead final : public Layer {
public:
    BranchHead(std::size_t in, std::size_t out, std::size_t branches, std::string id)
        : in_(in), out_(out), weight_{id + ".weight", Matrix(branches, in * out)},
          bias_{id + ".bias", Matrix(branches, out)} {}
    BranchHead(std::size_t in, std::size_t out, std::size_t branches, std::string id, Rng& rng)
        : BranchHead(in, out, branches, std::move(id)) {
        init::uniform_fan_in(weight_.value, in, rng);
        init::uniform_fan_in(bias_.value, in, rng);
    }

    std::string kind() const override { return "branch-head"; }
    std::size_t input_width() const override { return in_; }
    std::size_t output_width() const override { return out_; }
    std::size_t branches() const noexcept { return weight_.value.rows(); }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        const std::size_t k = branches();
        Matrix out(in.rows(), out_);
        for (std::size_t r = 0; r < in.rows(); ++r) {
            const std::size_t b = r % k;
            for (std::size_t o = 0; o < out_; ++o) {
                double s = bias_.value(b, o);
                for (std::size_t i = 0; i < in_; ++i) s += in(r, i) * weight_.value(b, i * out_ + o);
                out(r, o) = s;
            }
        }
        if (cache) *cache = {in, {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_dout(cache, dout);
        check_grads(grads, 2, kind());
        const std::size_t k = branches();
        const Matrix& in = cache.input;
        Matrix din(in.rows(), in_);
        for (std::size_t r = 0; r < in.rows(); ++r) {
            const std::size_t b = r % k;
            for (std::size_t o = 0; o < out_; ++o) {
                const double g = dout(r, o);
                grads[1](b, o) += g;
                for (std::size_t i = 0; i < in_; ++i) {
                    grads[0](b, i * out_ + o) += in(r, i) * g;
                    din(r, i) += weight_.value(b, i * out_ + o) * g;
                }
            }
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<BranchHead>(*this); }
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    std::size_t in_;
    std::size_t out_;
    Parameter weight_;
    Parameter bias_;
};

// Averages the k consecutive branch rows belonging to each sample.
class MeanOverBranches final : public Layer {
public:
    MeanOverBranches(std::size_t width, std::size_t branches) : width_(width), k_(branches) {}

    std::string kind() const override { return "mean-over-branches"; }
    std::size_t input_width() const override { return width_; }
    std::size_t output_width() const override { return width_; }
    std::size_t rows_out(std::size_t rows_in) const override { return rows_in / k_; }

    Matrix forward(const Matrix& in, const ForwardContext&, LayerCache* cache) const override {
        check_input(in);
        if (in.rows() % k_ != 0) {
            throw DimensionError("mean-over-branches: row count " + std::to_string(in.rows()) +
                                 " is not a multiple of " + std::to_string(k_));
        }
        const std::size_t n = in.rows() / k_;
        Matrix out(n, width_);
        for (std::size_t r = 0; r < n; ++r) {
            auto dst = out.row(r);
            for (std::size_t b = 0; b < k_; ++b) {
                auto src = in.row(r * k_ + b);
                for (std::size_t c = 0; c < width_; ++c) dst[c] += src[c];
            }
            for (double& v : dst) v /= double(k_);
        }
        if (cache) *cache = {Matrix(in.rows(), 0), {}, true};
        return out;
    }

    Matrix backward(const LayerCache& cache, const Matrix& dout, std::span<Matrix> grads) const override {
        check_cache(cache);
        check_grads(grads, 0, kind());
        const std::size_t rows = cache.input.rows();
        if (dout.rows() != rows / k_ || dout.cols() != width_) {
            throw DimensionError("mean-over-branches: upstream gradient " + dout.shape() + " does not match output " +
                                 Matrix::shape_string(rows / k_, width_));
        }
        Matrix din(rows, width_);
        for (std::size_t r = 0; r < rows; ++r) {
            auto src = dout.row(r / k_);
            auto dst = din.row(r);
            for (std::size_t c = 0; c < width_; ++c) dst[c] = src[c] / double(k_);
        }
        return din;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<MeanOverBranches>(*this); }

private:
    std::size_t width_;
    std::size_t k_;
};

} // namespace tabunc
