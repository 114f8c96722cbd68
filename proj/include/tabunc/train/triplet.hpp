#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/core/optimizer.hpp"
#include "tabunc/data/dataset.hpp"
#include "tabunc/models/builders.hpp"
#include "tabunc/train/losses.hpp"

namespace tabunc {

struct TripletConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 256;
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const TripletConfig& c) {
    j = {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"weight_decay", c.weight_decay},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TripletConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("seed", c.seed);
}

// Anchor plus the two sampled rows, already ordered as (positive, negative).
struct Triplet {
    std::size_t anchor, positive, negative;
};

struct TripletPretrainResult {
    SequentialModel network; // embedder + linear head
    std::vector<double> epoch_loss;
    std::set<Split> splits_touched;
};

// Embedder followed by a linear head of width m; similarities are dot
// products of head outputs.
inline SequentialModel build_triplet_network(const ModelSpec& spec, std::size_t d, Rng& rng) {
    if (spec.kind != ModelKind::mlp_lrlr && spec.kind != ModelKind::mlp_plr) {
        throw ConfigError("triplet pretraining needs an embedded model kind, got " + to_string(spec.kind));
    }
    LayerStack s = spec.kind == ModelKind::mlp_lrlr
                       ? build_lrlr_embedder(d, spec.embedding_dim, rng)
                       : build_plr_embedder(d, spec.plr_coefficients, spec.embedding_dim, spec.plr_sigma, rng);
    const std::size_t m = spec.embedding_dim;
    s.push_back(std::make_unique<Affine>(d * m, m, "triplet.head", rng));
    const std::size_t n = s.size();
    return SequentialModel(spec, d, std::move(s), n - 1, n);
}

// For each anchor draw two other rows from `pool`; the one whose target is
// closer to the anchor's is the positive (ties: the first drawn).
inline std::vector<Triplet> sample_triplets(const Dataset& ds, const std::vector<std::size_t>& anchors,
                                            const std::vector<std::size_t>& pool, Rng& rng) {
    if (pool.size() < 3) throw UsageError("triplet sampling needs at least 3 rows, got " + std::to_string(pool.size()));
    std::vector<Triplet> out;
    out.reserve(anchors.size());
    for (std::size_t a : anchors) {
        std::size_t p, q;
        do p = pool[rng.uniform_index(pool.size())]; while (p == a);
        do q = pool[rng.uniform_index(pool.size())]; while (q == a || q == p);
        const double dp = std::abs(ds.y[p] - ds.y[a]);
        const double dq = std::abs(ds.y[q] - ds.y[a]);
        out.push_back(dq < dp ? Triplet{a, q, p} : Triplet{a, p, q});
    }
    return out;
}

struct TripletBatchLoss {
    double loss = 0.0;
    double mean_sim_pos = 0.0;
    double mean_sim_neg = 0.0;
};

// Mean triplet loss of a batch; accumulates parameter gradients when `grads`
// is non-empty.
inline TripletBatchLoss triplet_batch(const SequentialModel& net, const Dataset& ds, const std::vector<Triplet>& batch,
                                      Rng& rng, std::span<Matrix> grads) {
    const std::size_t b = batch.size();
    std::vector<std::size_t> rows;
    rows.reserve(3 * b);
    for (const auto& t : batch) rows.push_back(t.anchor);
    for (const auto& t : batch) rows.push_back(t.positive);
    for (const auto& t : batch) rows.push_back(t.negative);
    Tape tape;
    const Matrix e = net.forward_train(ds.x_rows(rows), {}, ForwardContext{Phase::train, &rng}, rng, tape);
    const std::size_t m = e.cols();
    Matrix de(e.rows(), m);
    TripletBatchLoss out;
    for (std::size_t i = 0; i < b; ++i) {
        auto ea = e.row(i), ep = e.row(b + i), en = e.row(2 * b + i);
        double sp = 0.0, sn = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            sp += ea[c] * ep[c];
            sn += ea[c] * en[c];
        }
        const auto l = loss_triplet(sp, sn);
        if (!std::isfinite(l.value)) throw NumericError("triplet loss is not finite at anchor row " + std::to_string(batch[i].anchor));
        out.loss += l.value / double(b);
        out.mean_sim_pos += sp / double(b);
        out.mean_sim_neg += sn / double(b);
        const double gp = l.grad_pos / double(b), gn = l.grad_neg / double(b);
        auto da = de.row(i), dp = de.row(b + i), dn = de.row(2 * b + i);
        for (std::size_t c = 0; c < m; ++c) {
            da[c] += gp * ep[c] + gn * en[c];
            dp[c] += gp * ea[c];
            dn[c] += gn * ea[c];
        }
    }
    if (!grads.empty()) net.backward(tape, de, grads);
    return out;
}

// Trains embedder + head with the triplet loss on train rows only. The
// caller keeps the embedder (see copy_embedder) and discards the head.
inline TripletPretrainResult pretrain_triplet_embedder(const Dataset& ds, const ModelSpec& spec,
                                                       const TripletConfig& cfg) {
    const auto train_rows = ds.rows(Split::train);
    if (train_rows.size() < 3) {
        throw UsageError("triplet pretraining needs at least 3 train rows, got " + std::to_string(train_rows.size()));
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw ConfigError("triplet config: epochs and batch_size must be positive");
    Rng root = Rng(cfg.seed).split("triplet");
    Rng init_rng = root.split("init");
    Rng sample_rng = root.split("sample");
    Rng shuffle_rng = root.split("shuffle");
    TripletPretrainResult res{build_triplet_network(spec, ds.features(), init_rng), {}, {}};
    auto params = res.network.parameters();
    AdamW opt(AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = train_rows;
        shuffle_rng.shuffle(order);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> anchors(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(stop));
            const auto triplets = sample_triplets(ds, anchors, train_rows, sample_rng);
            for (const auto& t : triplets) {
                for (std::size_t r : {t.anchor, t.positive, t.negative}) {
                    if (ds.split[r] != Split::train) throw UsageError("triplet sampling touched a non-train row");
                    res.splits_touched.insert(ds.split[r]);
                }
            }
            auto grads = zero_grads(res.network);
            total += triplet_batch(res.network, ds, triplets, sample_rng, grads).loss;
            opt.step(params, grads, cfg.lr);
            ++batches;
        }
        res.epoch_loss.push_back(total / double(batches));
    }
    return res;
}

// Mean similarities on triplets drawn within `split` (held-out evaluation).
inline TripletBatchLoss evaluate_triplets(const SequentialModel& net, const Dataset& ds, Split split, std::size_t count,
                                          std::uint64_t seed) {
    const auto pool = ds.rows(split);
    Rng rng = Rng(seed).split("triplet-eval");
    std::vector<std::size_t> anchors(count);
    for (auto& a : anchors) a = pool[rng.uniform_index(pool.size())];
    return triplet_batch(net, ds, sample_triplets(ds, anchors, pool, rng), rng, {});
}

// Copies every embedder parameter ("embed.*") of `source` into `target`.
inline void copy_embedder(const Model& source, Model& target) {
    std::size_t copied = 0;
    for (auto* dst : target.parameters()) {
        if (dst->id.rfind("embed.", 0) != 0) continue;
        bool found = false;
        for (const auto* src : source.parameters()) {
            if (src->id != dst->id) continue;
            Matrix::require_same_shape(src->value, dst->value, "copy_embedder");
            dst->value = src->value;
            found = true;
            ++copied;
        }
        if (!found) throw UsageError("copy_embedder: source has no parameter '" + dst->id + "'");
    }
    if (copied == 0) throw UsageError("copy_embedder: target model has no embedder");
}

} // namespace tabunc
