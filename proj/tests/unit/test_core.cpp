#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tabunc/core/artifact.hpp"
#include "tabunc/core/gradcheck.hpp"
#include "tabunc/core/io.hpp"
#include "tabunc/core/layers.hpp"
#include "tabunc/core/matrix.hpp"
#include "tabunc/core/optimizer.hpp"
#include "tabunc/core/rng.hpp"

using namespace tabunc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

std::vector<Matrix> grads_for(Layer& layer) {
    std::vector<Matrix> g;
    for (auto* p : layer.parameters()) g.emplace_back(p->value.rows(), p->value.cols());
    return g;
}

} // namespace

TEST(Matrix, ShapeAndAccess) {
    Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 2), 6.0);
    EXPECT_EQ(m.shape(), "[2 x 3]");
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Matrix, MatmulAgreesWithLoops) {
    Rng rng(1);
    const Matrix a = random_matrix(5, 4, rng), b = random_matrix(4, 3, rng);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            EXPECT_NEAR(c(i, j), s, 1e-12);
        }
    }
    const Matrix at = random_matrix(4, 5, rng);
    const Matrix tn = matmul_tn(at, b);
    EXPECT_EQ(tn.rows(), 5u);
    EXPECT_EQ(tn.cols(), 3u);
    const Matrix nt = matmul_nt(a, random_matrix(2, 4, rng));
    EXPECT_EQ(nt.shape(), "[5 x 2]");
}

TEST(Matrix, DimensionErrorNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 5));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2 x 3]"), std::string::npos);
        EXPECT_NE(msg.find("[4 x 5]"), std::string::npos);
    }
}

TEST(Rng, DeterministicAndSplittable) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
    Rng c = Rng(42).split("x"), d = Rng(42).split("x"), e = Rng(42).split("y");
    EXPECT_EQ(c(), d());
    EXPECT_NE(Rng(42).split("x")(), e());
    EXPECT_NE(Rng(42).split(std::uint64_t{0})(), Rng(42).split(std::uint64_t{1})());
}

TEST(Rng, DistributionsLookRight) {
    Rng rng(7);
    const int n = 200000;
    double s = 0.0, s2 = 0.0, u = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
        u += rng.uniform();
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.015);
    EXPECT_NEAR(u / n, 0.5, 0.005);
    for (int i = 0; i < 1000; ++i) {
        const auto k = rng.uniform_int(3, 7);
        EXPECT_GE(k, 3);
        EXPECT_LE(k, 7);
        const double l = rng.log_uniform(1e-6, 1e-3);
        EXPECT_GE(l, 1e-6);
        EXPECT_LE(l, 1e-3);
    }
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
}

TEST(Layers, ReluDefinition) {
    ReLU relu(2);
    const Matrix out = relu.forward(Matrix{{-1, 2}}, {}, nullptr);
    EXPECT_EQ(out, (Matrix{{0, 2}}));
}

TEST(Layers, AffineZeroWeightsGivesBias) {
    Affine aff(3, 2, "a");
    aff.parameters()[1]->value = Matrix{{0.5, -1.5}};
    Rng rng(3);
    const Matrix out = aff.forward(random_matrix(4, 3, rng), {}, nullptr);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(out(r, 0), 0.5);
        EXPECT_EQ(out(r, 1), -1.5);
    }
}

TEST(Layers, PeriodicEncodingAtZero) {
    Rng rng(5);
    PeriodicEncoding pe(3, 4, 1.0, "p", rng);
    const Matrix out = pe.forward(Matrix(2, 3), {}, nullptr);
    ASSERT_EQ(out.cols(), 3u * 2 * 4);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t l = 0; l < 4; ++l) {
                EXPECT_EQ(out(r, j * 8 + l), 1.0);
                EXPECT_EQ(out(r, j * 8 + 4 + l), 0.0);
            }
        }
    }
}

TEST(Layers, ShapeMismatchIsDimensionError) {
    Affine aff(3, 2, "a");
    try {
        aff.forward(Matrix(1, 4), {}, nullptr);
        FAIL();
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("[1 x 4]"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    }
}

TEST(Layers, BackwardWithoutCacheIsUsageError) {
    Affine aff(3, 2, "a");
    auto g = grads_for(aff);
    EXPECT_THROW(aff.backward(LayerCache{}, Matrix(1, 2), g), UsageError);
    ReLU relu(2);
    EXPECT_THROW(relu.backward(LayerCache{}, Matrix(1, 2), {}), UsageError);
}

TEST(Layers, DropoutEvalIsIdentityAndTrainIsSeeded) {
    Dropout drop(4, 0.5);
    Rng rng(9);
    const Matrix x = random_matrix(8, 4, rng);
    EXPECT_EQ(drop.forward(x, ForwardContext{Phase::eval, nullptr}, nullptr), x);
    Rng r1(11), r2(11);
    LayerCache c1, c2;
    const Matrix a = drop.forward(x, ForwardContext{Phase::train, &r1}, &c1);
    const Matrix b = drop.forward(x, ForwardContext{Phase::train, &r2}, &c2);
    EXPECT_EQ(a, b);
    // backward replays the saved mask
    Matrix ones(8, 4, 1.0);
    const Matrix din = drop.backward(c1, ones, {});
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(din[i], x[i] == 0.0 ? din[i] : a[i] / x[i]);
}

namespace {

std::vector<std::unique_ptr<Layer>> all_layers(Rng& rng) {
    std::vector<std::unique_ptr<Layer>> v;
    v.push_back(std::make_unique<Affine>(5, 4, "affine", rng));
    v.push_back(std::make_unique<ReLU>(5));
    v.push_back(std::make_unique<PeriodicEncoding>(5, 3, 0.5, "periodic", rng));
    v.push_back(std::make_unique<PerFeatureAffine>(5, 1, 3, "pfa", rng));
    v.push_back(std::make_unique<ExpandBranches>(5, 4));
    v.push_back(std::make_unique<BranchAffine>(5, 3, 4, "branch", rng));
    v.push_back(std::make_unique<BranchHead>(5, 2, 4, "head", rng));
    v.push_back(std::make_unique<MeanOverBranches>(5, 4));
    return v;
}

} // namespace

TEST(Layers, FiniteDifferenceCheckEveryPrimitive) {
    Rng rng(21);
    for (auto& layer : all_layers(rng)) {
        const std::size_t rows = layer->kind() == "per-feature-affine" || layer->kind() == "expand-branches" ? 3 : 8;
        const Matrix x = random_matrix(rows, layer->input_width(), rng);
        const auto rep = check_layer(*layer, x, rng.split(layer->kind()));
        EXPECT_LT(rep.max_relative_error, 1e-4) << layer->kind() << " worst " << rep.worst_parameter;
        EXPECT_GT(rep.coordinates_checked, 0u);
    }
    // 1 -> m per-feature affine and the 2k -> m one used by the embedders
    PerFeatureAffine wide(4, 6, 5, "wide", rng);
    EXPECT_LT(check_layer(wide, random_matrix(6, 24, rng), rng.split("wide")).max_relative_error, 1e-4);
}

TEST(Layers, ZeroUpstreamGivesZeroGradients) {
    Rng rng(22);
    for (auto& layer : all_layers(rng)) {
        const Matrix x = random_matrix(8, layer->input_width(), rng);
        LayerCache cache;
        const Matrix out = layer->forward(x, {}, &cache);
        auto g = grads_for(*layer);
        const Matrix din = layer->backward(cache, Matrix(out.rows(), out.cols()), g);
        EXPECT_EQ(din.squared_norm(), 0.0) << layer->kind();
        for (const auto& m : g) EXPECT_EQ(m.squared_norm(), 0.0) << layer->kind();
    }
}

TEST(Layers, BatchGradientIsSumOfPerSampleGradients) {
    Rng rng(23);
    Affine aff(3, 2, "a", rng);
    PeriodicEncoding pe(3, 2, 1.0, "p", rng);
    for (Layer* layer : std::initializer_list<Layer*>{&aff, &pe}) {
        const Matrix x = random_matrix(4, 3, rng);
        const Matrix up = random_matrix(4, layer->output_width(), rng);
        LayerCache cache;
        layer->forward(x, {}, &cache);
        auto batch = grads_for(*layer);
        layer->backward(cache, up, batch);
        auto summed = grads_for(*layer);
        for (std::size_t r = 0; r < 4; ++r) {
            LayerCache c1;
            layer->forward(select_rows(x, std::vector<std::size_t>{r}), {}, &c1);
            layer->backward(c1, select_rows(up, std::vector<std::size_t>{r}), summed);
        }
        for (std::size_t p = 0; p < batch.size(); ++p)
            for (std::size_t i = 0; i < batch[p].size(); ++i) EXPECT_NEAR(batch[p][i], summed[p][i], 1e-12);
    }
}

TEST(Optimizer, ZeroGradientLeavesParamsUnchanged) {
    Parameter p{"w", Matrix{{1.0, -2.0}}};
    AdamW opt;
    std::vector<Parameter*> ps{&p};
    std::vector<Matrix> g{Matrix(1, 2)};
    opt.step(ps, g, 0.1);
    EXPECT_EQ(p.value, (Matrix{{1.0, -2.0}}));
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, FirstStepMatchesHandComputation) {
    // m = 0.1, v = 0.001; bias-corrected both 1 -> update lr * 1 / (1 + eps)
    Parameter p{"w", Matrix(1, 1)};
    AdamW opt;
    std::vector<Parameter*> ps{&p};
    std::vector<Matrix> g{Matrix(1, 1, 1.0)};
    opt.step(ps, g, 0.1);
    const double m_hat = (0.1 * 1.0) / (1 - 0.9);
    const double v_hat = (0.001 * 1.0) / (1 - 0.999);
    EXPECT_NEAR(p.value[0], -0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
    EXPECT_NEAR(p.value[0], -0.1, 1e-8);
}

TEST(Optimizer, DecoupledWeightDecay) {
    Parameter p{"w", Matrix{{2.0, -4.0}}};
    AdamW opt(AdamConfig{0.9, 0.999, 1e-8, 0.5});
    std::vector<Parameter*> ps{&p};
    std::vector<Matrix> g{Matrix(1, 2)};
    opt.step(ps, g, 0.1);
    EXPECT_DOUBLE_EQ(p.value[0], 2.0 * (1 - 0.1 * 0.5));
    EXPECT_DOUBLE_EQ(p.value[1], -4.0 * (1 - 0.1 * 0.5));
}

TEST(Optimizer, NonFiniteGradientAbortsAndNamesParameter) {
    Parameter a{"block0.affine.weight", Matrix(1, 1, 1.0)}, b{"head.bias", Matrix(1, 1, 1.0)};
    AdamW opt;
    std::vector<Parameter*> ps{&a, &b};
    std::vector<Matrix> g{Matrix(1, 1, 1.0), Matrix(1, 1, NAN)};
    try {
        opt.step(ps, g, 0.1);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("head.bias"), std::string::npos);
    }
    EXPECT_EQ(a.value[0], 1.0);
    EXPECT_EQ(opt.steps(), 0u);
}

TEST(GradCheck, DetectsAWrongGradient) {
    Parameter p{"w", Matrix{{0.3, -0.7}}};
    std::vector<Parameter*> ps{&p};
    auto loss = [&] { return p.value[0] * p.value[0] + 3.0 * p.value[1]; };
    std::vector<Matrix> good{Matrix{{0.6, 3.0}}}, bad{Matrix{{0.6, 2.0}}};
    EXPECT_LT(check_gradients(ps, good, loss, Rng(1)).max_relative_error, 1e-8);
    const auto rep = check_gradients(ps, bad, loss, Rng(1));
    EXPECT_GT(rep.max_relative_error, 0.1);
    EXPECT_EQ(rep.worst_parameter, "w");
    EXPECT_EQ(rep.worst_index, 1u);
}

TEST(Io, FloatBlobRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "tabunc_io_test";
    io::ensure_directory(dir);
    const std::vector<double> v{0.0, -1.5, 1e-300, 3.141592653589793, -0.0};
    io::write_f64(dir / "v.f64", v);
    const auto back = io::read_f64(dir / "v.f64");
    ASSERT_EQ(back.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i]), std::bit_cast<std::uint64_t>(v[i]));
    EXPECT_EQ(std::filesystem::file_size(dir / "v.f64"), 8 * v.size());
    std::filesystem::remove_all(dir);
}

TEST(Artifact, CsvHeaderCarriesHashAndSeed) {
    const auto h = config_hash(nlohmann::json{{"a", 1}});
    EXPECT_EQ(h.size(), 16u);
    EXPECT_EQ(h, config_hash(nlohmann::json{{"a", 1}}));
    EXPECT_NE(h, config_hash(nlohmann::json{{"a", 2}}));
    CsvWriter csv({h, 7}, {"x", "y"});
    csv.row({fmt(0.1), fmt(2.0)});
    EXPECT_EQ(csv.str(), "# config_hash=" + h + " seed=7\nx,y\n0.10000000000000001,2\n");
    EXPECT_THROW(csv.row({"1"}), DimensionError);
}
