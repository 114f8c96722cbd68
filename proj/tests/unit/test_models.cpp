#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tabunc/data/generators.hpp"
#include "tabunc/models/checkpoint.hpp"
#include "tabunc/models/gradcheck.hpp"
#include "tabunc/models/zoo.hpp"

using namespace tabunc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal(0.0, scale);
    return m;
}

ModelSpec small(ModelKind kind) {
    ModelSpec s;
    s.kind = kind;
    s.depth = 2;
    s.width = 8;
    s.embedding_dim = 4;
    s.plr_coefficients = 3;
    s.plr_sigma = 0.3;
    s.branches = 3;
    s.latent_dim = 4;
    return s;
}

Dataset tiny_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
    MlpSyntheticConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.f_hidden = 8;
    return gen_mlp_synthetic(seed, cfg);
}

NcaModel nca_over(const Matrix& cx, const std::vector<double>& cy, ModelSpec spec, Rng& rng) {
    std::vector<std::size_t> rows(cy.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return NcaModel(spec, cx.cols(), cx, cy, rows, rng);
}

// Zero-initialised biases can leave a whole hidden row at exactly 0, where
// ReLU's one-sided derivative defeats central differences; jitter them.
void jitter_biases(Model& m, Rng& rng) {
    for (auto* p : m.parameters())
        if (p->id.ends_with(".bias"))
            for (double& v : p->value.data()) v += rng.normal(0.0, 0.1);
}

} // namespace

TEST(Mlp, ParameterCount) {
    Rng rng(0);
    ModelSpec s;
    const std::size_t d = 7;
    auto m = build_mlp(s, d, rng);
    EXPECT_EQ(m.parameter_count(), d * 256 + 256 + 2 * (256 * 256 + 256) + 256 + 1);
    s.heteroscedastic = true;
    EXPECT_EQ(build_mlp(s, d, rng).predict(Matrix(3, d)).cols(), 2u);
}

TEST(Mlp, ZeroHeadPredictsBias) {
    Rng rng(1);
    auto m = build_mlp(small(ModelKind::mlp), 4, rng);
    for (auto* p : m.parameters()) {
        if (p->id == "head.weight") p->value.fill(0.0);
        if (p->id == "head.bias") p->value[0] = 0.75;
    }
    const Matrix out = m.predict(random_matrix(10, 4, rng));
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(out[i], 0.75);
}

TEST(Mlp, EvalForwardIsDeterministic) {
    Rng rng(2);
    ModelSpec s = small(ModelKind::mlp);
    s.dropout = 0.5;
    auto m = build_mlp(s, 4, rng);
    const Matrix x = random_matrix(6, 4, rng);
    EXPECT_EQ(m.predict(x), m.predict(x));
}

TEST(Mlp, WrongInputWidth) {
    Rng rng(3);
    auto m = build_mlp(small(ModelKind::mlp), 4, rng);
    EXPECT_THROW(m.predict(Matrix(2, 5)), DimensionError);
}

TEST(Embedders, PlrAtZeroAndWidth) {
    Rng rng(4);
    auto s = build_plr_embedder(8, 5, 24, 1.0, rng);
    Matrix h = s[0]->forward(Matrix(2, 8), {}, nullptr);
    for (std::size_t j = 0; j < 8; ++j) {
        for (std::size_t l = 0; l < 5; ++l) {
            EXPECT_EQ(h(0, j * 10 + l), 1.0);
            EXPECT_EQ(h(0, j * 10 + 5 + l), 0.0);
        }
    }
    for (std::size_t i = 1; i < s.size(); ++i) h = s[i]->forward(h, {}, nullptr);
    EXPECT_EQ(h.cols(), 192u);
}

TEST(Embedders, LrlrNegativeAndWidth) {
    Rng rng(5);
    auto s = build_lrlr_embedder(2, 64, rng);
    auto* first = dynamic_cast<PerFeatureAffine*>(s[0].get());
    ASSERT_NE(first, nullptr);
    for (auto* p : first->parameters()) {
        if (p->id.ends_with(".bias")) p->value.fill(-1.0);
        else p->value.fill(0.0);
    }
    Matrix h = Matrix{{0.3, -2.0}};
    for (auto& l : s) h = l->forward(h, {}, nullptr);
    EXPECT_EQ(h.cols(), 128u);
    // second affine sees zeros; its ReLU output is relu(bias) only
    auto* second = dynamic_cast<PerFeatureAffine*>(s[2].get());
    for (auto* p : second->parameters())
        if (p->id.ends_with(".bias")) p->value.fill(-0.5);
    h = Matrix{{0.3, -2.0}};
    for (auto& l : s) h = l->forward(h, {}, nullptr);
    for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Embedders, DropInWidth) {
    Rng rng(6);
    auto m = build_embedded_mlp(small(ModelKind::mlp_lrlr), 3, rng);
    auto* first_affine = dynamic_cast<Affine*>(m.layers()[embedder_layer_count(m.spec())].get());
    ASSERT_NE(first_affine, nullptr);
    EXPECT_EQ(first_affine->input_width(), 3u * 4);
}

class ModelGradients : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradients, FiniteDifferences) {
    Rng rng(7);
    ModelSpec s = small(GetParam());
    s.dropout = 0.2;
    const auto ds = tiny_dataset(30, 3, 1);
    auto model = build_model(s, ds, rng);
    jitter_biases(*model, rng);
    std::vector<std::size_t> rows{0, 4, 9, 17};
    const Matrix x = ds.x_rows(rows);
    if (GetParam() != ModelKind::nca) rows.clear();
    const auto rep = check_model(*model, x, rows, rng.split("check"));
    EXPECT_LT(rep.max_relative_error, 1e-4) << rep.worst_parameter << "[" << rep.worst_index << "]";
    EXPECT_GE(rep.coordinates_checked, 20u);
}

TEST_P(ModelGradients, HeteroscedasticFiniteDifferences) {
    Rng rng(8);
    ModelSpec s = small(GetParam());
    s.heteroscedastic = true;
    const auto ds = tiny_dataset(30, 3, 2);
    auto model = build_model(s, ds, rng);
    jitter_biases(*model, rng);
    std::vector<std::size_t> rows{1, 2, 3};
    const Matrix x = ds.x_rows(rows);
    if (GetParam() != ModelKind::nca) rows.clear();
    EXPECT_LT(check_model(*model, x, rows, rng.split("check")).max_relative_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Zoo, ModelGradients,
                         ::testing::Values(ModelKind::mlp, ModelKind::mlp_plr, ModelKind::mlp_lrlr, ModelKind::nca,
                                           ModelKind::tabm),
                         [](const auto& info) {
                             auto n = to_string(info.param);
                             std::replace(n.begin(), n.end(), '-', '_');
                             return n;
                         });

TEST(Nca, SingleCandidate) {
    Rng rng(9);
    auto m = nca_over(Matrix{{1.0, 2.0}}, {3.5}, small(ModelKind::nca), rng);
    const Matrix out = m.predict(random_matrix(5, 2, rng, 10.0));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(out[i], 3.5);
}

TEST(Nca, EquidistantCandidates) {
    Rng rng(10);
    // identical candidates encode identically, so they are equidistant from any query
    auto m = nca_over(Matrix{{0.2, -0.4}, {0.2, -0.4}}, {0.0, 1.0}, small(ModelKind::nca), rng);
    const Matrix out = m.predict(random_matrix(4, 2, rng));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out[i], 0.5);
}

TEST(Nca, ColdTemperatureApproachesNearestNeighbour) {
    Rng rng(11);
    ModelSpec s = small(ModelKind::nca);
    s.temperature = 1e-9;
    const Matrix cx = random_matrix(10, 2, rng);
    std::vector<double> cy(10);
    for (std::size_t i = 0; i < 10; ++i) cy[i] = double(i);
    auto m = nca_over(cx, cy, s, rng);
    const Matrix q = random_matrix(20, 2, rng);
    const Matrix hq = m.encode(q), hc = m.encode(cx);
    const Matrix out = m.predict(q);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t j = 0; j < 10; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < hq.cols(); ++c) d += (hq(i, c) - hc(j, c)) * (hq(i, c) - hc(j, c));
            if (d < best_d) best_d = d, best = j;
        }
        EXPECT_NEAR(out[i], cy[best], 1e-9) << "query " << i;
    }
}

TEST(Nca, WeightsAreDistributionAndExcludeSelf) {
    Rng rng(12);
    const auto ds = tiny_dataset(40, 3, 3);
    ModelSpec s = small(ModelKind::nca);
    auto m = build_nca(s, ds, rng);
    const auto train = ds.rows(Split::train);
    std::vector<std::size_t> rows(train.begin(), train.begin() + 6);
    Tape tape;
    Rng r(1);
    m.forward_train(ds.x_rows(rows), rows, ForwardContext{Phase::train, &r}, r, tape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < tape.weights.cols(); ++j) {
            EXPECT_GE(tape.weights(i, j), 0.0);
            sum += tape.weights(i, j);
            if (m.candidate_rows()[tape.candidate_rows[j]] == rows[i]) {
                EXPECT_EQ(tape.weights(i, j), 0.0);
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    // 30% of candidates per batch
    EXPECT_EQ(tape.candidate_rows.size(), std::size_t(std::llround(0.3 * double(train.size()))));
}

TEST(Nca, LeaveOneOutPrediction) {
    Rng rng(13);
    // two candidates: each row predicts the other's target when excluded
    auto m = nca_over(Matrix{{0.0, 0.0}, {1.0, 1.0}}, {2.0, 5.0}, small(ModelKind::nca), rng);
    const std::vector<std::size_t> rows{0, 1};
    const Matrix out = m.predict_rows(m.candidates_x(), rows);
    EXPECT_DOUBLE_EQ(out[0], 5.0);
    EXPECT_DOUBLE_EQ(out[1], 2.0);
}

TEST(Nca, EmptyCandidates) {
    Rng rng(14);
    EXPECT_THROW(nca_over(Matrix(0, 2), {}, small(ModelKind::nca), rng), UsageError);
}

namespace {

// Ties every per-branch parameter of a TabM to branch 0 and sets scalers to +1.
void tie_branches(SequentialModel& m) {
    for (auto* p : m.parameters()) {
        if (p->id.ends_with("in_scale") || p->id.ends_with("out_scale")) {
            p->value.fill(1.0);
        } else if (!(p->id.starts_with("block") && p->id.ends_with(".weight"))) {
            for (std::size_t r = 1; r < p->value.rows(); ++r)
                for (std::size_t c = 0; c < p->value.cols(); ++c) p->value(r, c) = p->value(0, c);
        }
    }
}

} // namespace

TEST(TabM, DefaultBranches) { EXPECT_EQ(ModelSpec{}.branches, 16u); }

TEST(TabM, TiedBranchesMatchSingleMlp) {
    Rng rng(15);
    ModelSpec ts = small(ModelKind::tabm);
    auto tabm = build_tabm(ts, 3, rng);
    tie_branches(tabm);
    ModelSpec ms = small(ModelKind::mlp);
    auto mlp = build_mlp(ms, 3, rng);
    // copy weights: shared affine -> affine, branch-0 bias -> bias, branch-0 head -> head
    auto tp = tabm.parameters();
    auto mp = mlp.parameters();
    auto find = [&](const std::string& id) {
        for (auto* p : tp)
            if (p->id == id) return p;
        throw std::runtime_error(id);
    };
    for (auto* p : mp) {
        if (p->id == "head.weight") {
            const Matrix& hw = find("head.weight")->value;
            for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = hw(0, i);
        } else if (p->id.ends_with(".bias")) {
            const Matrix& b = find(p->id)->value;
            for (std::size_t c = 0; c < p->value.cols(); ++c) p->value[c] = b(0, c);
        } else {
            p->value = find(p->id)->value;
        }
    }
    const Matrix x = random_matrix(7, 3, rng);
    const Matrix a = tabm.predict(x), b = mlp.predict(x);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    // every branch row of the training output is identical
    Tape tape;
    Rng r(0);
    const Matrix rowsk = tabm.forward_train(x, {}, ForwardContext{Phase::eval, nullptr}, r, tape);
    ASSERT_EQ(rowsk.rows(), 7u * 3);
    for (std::size_t i = 0; i < rowsk.rows(); ++i) EXPECT_NEAR(rowsk[i], b[i / 3], 1e-12);
}

TEST(TabM, SharedWeightGradientIsMeanOfPerBranchGradients) {
    // Oracle: branch b is a plain affine with weight diag(r_b) W diag(s_b);
    // the gradient w.r.t. W of the mean prediction is
    //   (1/k) sum_b diag(r_b) dL_b/dW_b diag(s_b).
    Rng rng(16);
    ModelSpec s = small(ModelKind::tabm);
    s.depth = 1;
    auto tabm = build_tabm(s, 3, rng);
    const std::size_t k = s.branches;
    const Matrix x = random_matrix(5, 3, rng);

    Tape tape;
    Rng r(0);
    const Matrix out = tabm.forward_train(x, {}, ForwardContext{Phase::eval, nullptr}, r, tape);
    Matrix dout(out.rows(), 1, 1.0 / double(k * x.rows())); // d mean(prediction) / d branch outputs
    auto grads = zero_grads(tabm);
    tabm.backward(tape, dout, grads);
    const auto params = tabm.parameters();
    std::size_t wi = 0;
    while (params[wi]->id != "block0.affine.weight") ++wi;
    const Matrix& W = params[wi]->value;
    const Matrix& rin = params[wi + 1]->value;
    const Matrix& sout = params[wi + 2]->value;
    const Matrix& bias = params[wi + 3]->value;
    const Matrix& hw = params[wi + 4]->value;

    Matrix expected(W.rows(), W.cols());
    for (std::size_t b = 0; b < k; ++b) {
        Affine aff(W.rows(), W.cols(), "branch");
        for (std::size_t i = 0; i < W.rows(); ++i)
            for (std::size_t o = 0; o < W.cols(); ++o) aff.weight().value(i, o) = rin(b, i) * W(i, o) * sout(b, o);
        for (std::size_t o = 0; o < W.cols(); ++o) aff.bias().value[o] = bias(b, o);
        ReLU relu(W.cols());
        LayerCache c1, c2;
        const Matrix h = relu.forward(aff.forward(x, {}, &c1), {}, &c2);
        // head of branch b, loss = mean over samples of branch output
        Matrix dh(h.rows(), h.cols());
        for (std::size_t n = 0; n < h.rows(); ++n)
            for (std::size_t i = 0; i < h.cols(); ++i) dh(n, i) = hw(b, i) / double(x.rows());
        std::vector<Matrix> g{Matrix(W.rows(), W.cols()), Matrix(1, W.cols())};
        aff.backward(c1, relu.backward(c2, dh, {}), g);
        for (std::size_t i = 0; i < W.rows(); ++i)
            for (std::size_t o = 0; o < W.cols(); ++o) expected(i, o) += rin(b, i) * g[0](i, o) * sout(b, o) / double(k);
    }
    for (std::size_t i = 0; i < W.size(); ++i) EXPECT_NEAR(grads[wi][i], expected[i], 1e-12);
}

TEST(TabM, ScalersAreSignsAndBiasesZero) {
    Rng rng(17);
    auto m = build_tabm(small(ModelKind::tabm), 3, rng);
    bool saw_negative = false;
    for (auto* p : m.parameters()) {
        if (p->id.ends_with("scale")) {
            for (double v : p->value.data()) {
                EXPECT_TRUE(v == 1.0 || v == -1.0);
                saw_negative |= v < 0.0;
            }
        }
        if (p->id.starts_with("block") && p->id.ends_with(".bias")) {
            for (double v : p->value.data()) EXPECT_EQ(v, 0.0);
        }
    }
    EXPECT_TRUE(saw_negative);
    ModelSpec bad = small(ModelKind::tabm);
    bad.branches = 1;
    EXPECT_THROW(build_tabm(bad, 3, rng), ConfigError);
}

TEST(DeepEnsemble, IdenticalMembersEqualSingleModel) {
    Rng rng(18);
    ModelSpec s = small(ModelKind::deep_ensemble);
    auto member = build_mlp(s, 3, rng);
    DeepEnsemble ens(s, {member, member, member});
    const Matrix x = random_matrix(6, 3, rng);
    const Matrix a = ens.predict(x), b = member.predict(x);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_EQ(ens.spec().ensemble_size, 3u);
    EXPECT_THROW(DeepEnsemble(s, {member}), ConfigError);
    EXPECT_EQ(ModelSpec{}.ensemble_size, 5u);
}

TEST(DeepEnsemble, MseNoWorseThanMeanMemberMse) {
    Rng rng(19);
    ModelSpec s = small(ModelKind::deep_ensemble);
    std::vector<SequentialModel> members;
    for (int i = 0; i < 5; ++i) members.push_back(build_mlp(s, 3, rng));
    DeepEnsemble ens(s, members);
    const Matrix x = random_matrix(50, 3, rng);
    const Matrix y = random_matrix(50, 1, rng);
    auto mse = [&](const Matrix& p) {
        double e = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) e += (p[i] - y[i]) * (p[i] - y[i]);
        return e / double(p.size());
    };
    double mean_member = 0.0;
    for (const auto& m : members) mean_member += mse(m.predict(x)) / 5.0;
    EXPECT_LE(mse(ens.predict(x)), mean_member + 1e-15);
}

TEST(Checkpoint, RoundTripEveryKind) {
    const auto ds = tiny_dataset(30, 3, 4);
    const auto root = std::filesystem::temp_directory_path() / "tabunc_ckpt";
    std::filesystem::remove_all(root);
    for (auto kind : {ModelKind::mlp, ModelKind::mlp_plr, ModelKind::mlp_lrlr, ModelKind::nca, ModelKind::tabm}) {
        Rng rng(20);
        auto m = build_model(small(kind), ds, rng);
        const auto dir = root / to_string(kind);
        save_checkpoint(*m, dir);
        auto back = load_checkpoint(dir);
        const Matrix x = ds.x_rows(ds.rows(Split::test));
        EXPECT_EQ(m->predict(x), back->predict(x)) << to_string(kind);
    }
    Rng rng(21);
    ModelSpec s = small(ModelKind::deep_ensemble);
    DeepEnsemble ens(s, {build_mlp(s, 3, rng), build_mlp(s, 3, rng)});
    save_checkpoint(ens, root / "ens");
    EXPECT_EQ(load_checkpoint(root / "ens")->predict(ds.x), ens.predict(ds.x));
    EXPECT_THROW(load_checkpoint(root / "missing"), ConfigError);
}

TEST(Spec, JsonRoundTripAndValidation) {
    ModelSpec s = small(ModelKind::mlp_plr);
    ModelSpec back = nlohmann::json(s).get<ModelSpec>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(s));
    EXPECT_THROW(model_kind_from_string("resnet"), ConfigError);
    s.depth = 5;
    EXPECT_THROW(s.validate(), ConfigError);
    s.depth = 1;
    s.dropout = 1.0;
    EXPECT_THROW(s.validate(), ConfigError);
}
