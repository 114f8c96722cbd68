#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tabunc/analysis/stats.hpp"
#include "tabunc/data/dataset.hpp"
#include "tabunc/models/model.hpp"

namespace tabunc {

// Per-sample split of the squared-error gradient
//   d(phi - y)^2 = 2 (phi - f) dphi  -  2 e^g eps dphi
// into a clean and a noisy part. Multi-branch models are trained on the
// mean of per-branch losses, so phi_b replaces phi inside a 1/k sum.
struct GradDecompRecord {
    std::size_t row = 0;
    double uncertainty = 0.0; // true exp(2 g)
    double clean_norm = 0.0;  // over all parameters
    double noisy_norm = 0.0;
    double identity_error = 0.0; // max |clean + noisy - full| / max(1, max |full|)
    // multi-branch only, over the shared weights
    std::vector<double> clean_branch_norms, noisy_branch_norms;
    double clean_mean_norm = 0.0; // norm of the branch-averaged gradient
    double noisy_mean_norm = 0.0;
};

struct GradDecompOptions {
    bool check_identity = true;
    bool branch_alignment = false;
};

namespace detail {

inline const SequentialModel& require_layer_model(const Model& model, const char* who) {
    const auto* seq = dynamic_cast<const SequentialModel*>(&model);
    if (!seq) throw UsageError(std::string(who) + ": supported for layer-stack models (mlp, mlp-plr, mlp-lrlr, tabm)");
    if (seq->spec().heteroscedastic) throw UsageError(std::string(who) + ": model must be trained with MSE");
    return *seq;
}

inline double norm_of(const std::vector<Matrix>& grads) {
    double s = 0.0;
    for (const auto& g : grads) s += g.squared_norm();
    return std::sqrt(s);
}

inline double dot_rows(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
    auto ra = a.row(i);
    auto rb = b.row(j);
    double s = 0.0;
    for (std::size_t c = 0; c < ra.size(); ++c) s += ra[c] * rb[c];
    return s;
}

// Per-branch shared-weight gradient of a branch affine layer is the outer
// product a_b c_b^T (scaled input, scaled upstream), so its norms and the
// norm of the branch sum follow from row dot products.
struct BranchGram {
    std::vector<double> branch_sq; // ||g_b||^2 summed over layers
    double sum_sq = 0.0;           // ||sum_b g_b||^2 summed over layers
};

inline void accumulate_branch_gram(const BranchAffine& layer, const LayerCache& cache, const Matrix& upstream,
                                   BranchGram& out) {
    const Matrix a = layer.scaled_input(cache.input);
    const Matrix c = layer.scaled_upstream(upstream);
    const std::size_t k = a.rows();
    if (out.branch_sq.empty()) out.branch_sq.assign(k, 0.0);
    std::vector<double> aa(k * k), cc(k * k);
    for (std::size_t b = 0; b < k; ++b) {
        for (std::size_t b2 = b; b2 < k; ++b2) {
            aa[b * k + b2] = aa[b2 * k + b] = dot_rows(a, b, a, b2);
            cc[b * k + b2] = cc[b2 * k + b] = dot_rows(c, b, c, b2);
        }
    }
    for (std::size_t b = 0; b < k; ++b) {
        out.branch_sq[b] += aa[b * k + b] * cc[b * k + b];
        for (std::size_t b2 = 0; b2 < k; ++b2) out.sum_sq += aa[b * k + b2] * cc[b * k + b2];
    }
}

inline BranchGram branch_gram(const SequentialModel& model, const Tape& tape) {
    BranchGram g;
    for (std::size_t i = 0; i < tape.caches.size(); ++i) {
        if (const auto* ba = dynamic_cast<const BranchAffine*>(model.layers()[i].get())) {
            accumulate_branch_gram(*ba, tape.caches[i], tape.upstream[i], g);
        }
    }
    return g;
}

} // namespace detail

// Decomposes the per-sample gradient for each dataset row in `rows`, with
// the model in eval mode (no dropout).
inline std::vector<GradDecompRecord> grad_decompose(const Model& model, const Dataset& ds,
                                                    const std::vector<std::size_t>& rows,
                                                    const GradDecompOptions& opt = {}) {
    if (!ds.truth) throw UsageError("ground truth required");
    const auto& seq = detail::require_layer_model(model, "grad_decompose");
    const std::size_t k = seq.loss_rows_per_sample();
    if (opt.branch_alignment && k < 2) throw UsageError("branch alignment needs a multi-branch model (k >= 2)");
    const auto& truth = *ds.truth;
    Rng unused(0);
    std::vector<GradDecompRecord> out;
    out.reserve(rows.size());
    for (std::size_t row : rows) {
        GradDecompRecord rec;
        rec.row = row;
        rec.uncertainty = std::exp(2.0 * truth.g[row]);
        Tape tape;
        tape.record_upstream = opt.branch_alignment;
        const Matrix phi =
            seq.forward_train(ds.x_rows({row}), {}, ForwardContext{Phase::eval, nullptr}, unused, tape);
        const double noise = std::exp(truth.g[row]) * truth.eps[row];
        Matrix d_clean(k, 1), d_noisy(k, 1), d_full(k, 1);
        for (std::size_t b = 0; b < k; ++b) {
            d_clean(b, 0) = 2.0 / double(k) * (phi(b, 0) - truth.f[row]);
            d_noisy(b, 0) = -2.0 / double(k) * noise;
            d_full(b, 0) = 2.0 / double(k) * (phi(b, 0) - ds.y[row]);
        }
        auto g_clean = zero_grads(seq);
        seq.backward(tape, d_clean, g_clean);
        detail::BranchGram gram_clean;
        if (opt.branch_alignment) gram_clean = detail::branch_gram(seq, tape);
        auto g_noisy = zero_grads(seq);
        seq.backward(tape, d_noisy, g_noisy);
        detail::BranchGram gram_noisy;
        if (opt.branch_alignment) gram_noisy = detail::branch_gram(seq, tape);
        rec.clean_norm = detail::norm_of(g_clean);
        rec.noisy_norm = detail::norm_of(g_noisy);
        if (opt.check_identity) {
            auto g_full = zero_grads(seq);
            Tape plain = tape;
            plain.record_upstream = false;
            seq.backward(plain, d_full, g_full);
            double scale = 1.0, worst = 0.0;
            for (std::size_t p = 0; p < g_full.size(); ++p) {
                for (std::size_t i = 0; i < g_full[p].size(); ++i) {
                    scale = std::max(scale, std::abs(g_full[p][i]));
                    worst = std::max(worst, std::abs(g_clean[p][i] + g_noisy[p][i] - g_full[p][i]));
                }
            }
            rec.identity_error = worst / scale;
        }
        if (opt.branch_alignment) {
            for (double s : gram_clean.branch_sq) rec.clean_branch_norms.push_back(std::sqrt(s));
            for (double s : gram_noisy.branch_sq) rec.noisy_branch_norms.push_back(std::sqrt(s));
            rec.clean_mean_norm = std::sqrt(std::max(0.0, gram_clean.sum_sq)) / double(k);
            rec.noisy_mean_norm = std::sqrt(std::max(0.0, gram_noisy.sum_sq)) / double(k);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// Rows ordered by true uncertainty and cut into equal-count buckets.
inline std::vector<std::vector<std::size_t>> uncertainty_buckets(const Dataset& ds, const std::vector<std::size_t>& rows,
                                                                 std::size_t buckets) {
    if (!ds.truth) throw UsageError("ground truth required");
    if (buckets == 0 || rows.size() < buckets) {
        throw UsageError("cannot split " + std::to_string(rows.size()) + " rows into " + std::to_string(buckets) +
                         " non-empty buckets");
    }
    std::vector<double> g;
    for (std::size_t r : rows) g.push_back(ds.truth->g[r]);
    const auto order = stats::argsort(g);
    const auto bounds = stats::partition_bounds(rows.size(), buckets);
    std::vector<std::vector<std::size_t>> out(buckets);
    for (std::size_t b = 0; b < buckets; ++b)
        for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) out[b].push_back(rows[order[i]]);
    return out;
}

struct RatioBucket {
    double mean_uncertainty = 0.0;
    double mean_clean = 0.0;
    double mean_noisy = 0.0;
    double ratio = 0.0; // mean_clean / mean_noisy
    std::size_t samples = 0;
};

// Bucketed mean(||clean||) / mean(||noisy||).
inline std::vector<RatioBucket> clean_noisy_ratio_curve(const Model& model, const Dataset& ds,
                                                        const std::vector<std::size_t>& rows, std::size_t buckets) {
    std::vector<RatioBucket> out;
    for (const auto& bucket : uncertainty_buckets(ds, rows, buckets)) {
        const auto recs = grad_decompose(model, ds, bucket, {.check_identity = false});
        RatioBucket rb;
        rb.samples = recs.size();
        for (const auto& r : recs) {
            rb.mean_uncertainty += r.uncertainty / double(recs.size());
            rb.mean_clean += r.clean_norm / double(recs.size());
            rb.mean_noisy += r.noisy_norm / double(recs.size());
        }
        rb.ratio = rb.mean_noisy > 0.0 ? rb.mean_clean / rb.mean_noisy : 0.0;
        out.push_back(rb);
    }
    return out;
}

struct AlignmentBucket {
    double mean_uncertainty = 0.0;
    // mean over samples of the branch-averaged gradient norm and of the
    // average per-branch norm; ratio = averaged / per-branch (1 = aligned)
    double clean_mean_norm = 0.0, clean_branch_norm = 0.0, clean_ratio = 0.0;
    double noisy_mean_norm = 0.0, noisy_branch_norm = 0.0, noisy_ratio = 0.0;
    std::size_t samples = 0;
};

inline std::vector<AlignmentBucket> branch_alignment_curve(const Model& model, const Dataset& ds,
                                                           const std::vector<std::size_t>& rows, std::size_t buckets) {
    if (model.loss_rows_per_sample() < 2) throw UsageError("branch alignment needs a multi-branch model (k >= 2)");
    std::vector<AlignmentBucket> out;
    for (const auto& bucket : uncertainty_buckets(ds, rows, buckets)) {
        const auto recs = grad_decompose(model, ds, bucket, {.check_identity = false, .branch_alignment = true});
        AlignmentBucket ab;
        ab.samples = recs.size();
        const double n = double(recs.size());
        for (const auto& r : recs) {
            const double kb = double(r.clean_branch_norms.size());
            double cb = 0.0, nb = 0.0;
            for (double v : r.clean_branch_norms) cb += v / kb;
            for (double v : r.noisy_branch_norms) nb += v / kb;
            ab.mean_uncertainty += r.uncertainty / n;
            ab.clean_mean_norm += r.clean_mean_norm / n;
            ab.clean_branch_norm += cb / n;
            ab.noisy_mean_norm += r.noisy_mean_norm / n;
            ab.noisy_branch_norm += nb / n;
        }
        ab.clean_ratio = ab.clean_branch_norm > 0.0 ? ab.clean_mean_norm / ab.clean_branch_norm : 0.0;
        ab.noisy_ratio = ab.noisy_branch_norm > 0.0 ? ab.noisy_mean_norm / ab.noisy_branch_norm : 0.0;
        out.push_back(ab);
    }
    return out;
}

} // namespace tabunc
