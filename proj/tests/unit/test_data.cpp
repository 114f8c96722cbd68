#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tabunc/data/cache.hpp"
#include "tabunc/data/csv.hpp"
#include "tabunc/data/generators.hpp"

using namespace tabunc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tabunc_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

void expect_eq1_identity(const Dataset& ds) {
    ASSERT_TRUE(ds.has_truth());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ASSERT_EQ(ds.y[i], ds.truth->f[i] + std::exp(ds.truth->g[i]) * ds.truth->eps[i]) << "row " << i;
    }
}

} // namespace

TEST(MlpSynthetic, Eq1IdentityAndDefaults) {
    const auto ds = gen_mlp_synthetic(0);
    EXPECT_EQ(ds.size(), 40000u);
    EXPECT_EQ(ds.features(), 20u);
    EXPECT_EQ(ds.count(Split::train), 32000u);
    EXPECT_EQ(ds.count(Split::val), 4000u);
    EXPECT_EQ(ds.count(Split::test), 4000u);
    expect_eq1_identity(ds);
}

TEST(MlpSynthetic, ColumnMeansWithinCltBound) {
    const auto ds = gen_mlp_synthetic(3);
    const double bound = 4.0 / std::sqrt(40000.0);
    for (std::size_t j = 0; j < ds.features(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) m += ds.x(i, j);
        EXPECT_LT(std::abs(m / double(ds.size())), bound) << "column " << j;
    }
}

TEST(MlpSynthetic, DeterministicUnderSeed) {
    MlpSyntheticConfig cfg;
    cfg.n = 500;
    const auto a = gen_mlp_synthetic(11, cfg), b = gen_mlp_synthetic(11, cfg), c = gen_mlp_synthetic(12, cfg);
    EXPECT_TRUE(bit_equal(a.x.data(), b.x.data()));
    EXPECT_TRUE(bit_equal(a.y, b.y));
    EXPECT_TRUE(bit_equal(a.truth->g, b.truth->g));
    EXPECT_FALSE(bit_equal(a.y, c.y));
}

TEST(MlpSynthetic, NoiseScalesSpanOrdersOfMagnitude) {
    const auto ds = gen_mlp_synthetic(0);
    const auto [lo, hi] = std::minmax_element(ds.truth->g.begin(), ds.truth->g.end());
    EXPECT_GT(*hi - *lo, std::log(10.0));
}

TEST(MlpSynthetic, Preconditions) {
    MlpSyntheticConfig cfg;
    cfg.n = 9;
    EXPECT_THROW(gen_mlp_synthetic(0, cfg), UsageError);
    cfg.n = 10;
    cfg.d = 0;
    EXPECT_THROW(gen_mlp_synthetic(0, cfg), UsageError);
}

TEST(Saw, Eq1IdentityAndSizes) {
    const auto ds = gen_saw(0);
    EXPECT_EQ(ds.size(), 100000u);
    EXPECT_EQ(ds.count(Split::train), 80000u);
    EXPECT_EQ(ds.count(Split::val), 10000u);
    EXPECT_EQ(ds.count(Split::test), 10000u);
    expect_eq1_identity(ds);
}

TEST(Saw, NoiseLaw) {
    EXPECT_DOUBLE_EQ(saw_noise_scale(10.0), 16.0);
    EXPECT_EQ(saw_noise_scale(0.0), 0.0);
    for (double t = 0.0; t < 10.0; t += 0.37) EXPECT_LE(saw_noise_scale(t), saw_noise_scale(t + 0.01));
    // zero noise at x2 = 0: y equals f exactly
    const double g = std::log(saw_noise_scale(0.0));
    EXPECT_EQ(saw_clean_target(0.1, 1.0) + std::exp(g) * 1.7, saw_clean_target(0.1, 1.0));
    // configurable denominator
    SawConfig alt;
    alt.noise_denominator = 4.0;
    EXPECT_DOUBLE_EQ(saw_noise_scale(1.0, alt), 0.25);
}

TEST(Saw, GeometryAndRectangle) {
    const auto ds = gen_saw(1);
    std::size_t ones = 0, train = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double x1 = ds.x(i, 0), x2 = ds.x(i, 1);
        ASSERT_GE(x1, 0.0);
        ASSERT_LE(x1, 1.0);
        ASSERT_GE(x2, 0.0);
        ASSERT_LE(x2, 10.0);
        const double f = ds.truth->f[i];
        ASSERT_TRUE(f == 0.0 || f == 1.0);
        // noise depends on x2 only
        ASSERT_NEAR(std::exp(ds.truth->g[i]), saw_noise_scale(x2), 1e-12 * (1.0 + saw_noise_scale(x2)));
        if (ds.split[i] == Split::train) {
            ++train;
            ones += f == 1.0;
        }
    }
    EXPECT_NEAR(double(ones) / double(train), 0.5, 0.01);
    // apex of the first tooth at x2 = 1, base corners at 0 and 2
    EXPECT_EQ(saw_clean_target(0.99, 1.0), 1.0);
    EXPECT_EQ(saw_clean_target(0.01, 0.0), 0.0);
    EXPECT_EQ(saw_clean_target(0.01, 2.0), 0.0);
    EXPECT_EQ(saw_clean_target(0.4, 0.5), 1.0);
    EXPECT_EQ(saw_clean_target(0.6, 0.5), 0.0);
}

TEST(Saw, TeethAreaOracle) {
    // Monte-Carlo over the profile alone: mean of the triangle wave is 1/2
    Rng rng(5);
    double area = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) area += saw_profile(rng.uniform(0.0, 10.0));
    EXPECT_NEAR(area / n, 0.5, 0.005);
}

TEST(Saw, Preconditions) {
    SawConfig cfg;
    cfg.n_val = 0;
    EXPECT_THROW(gen_saw(0, cfg), UsageError);
}

TEST(DropFeatures, KeepAllPreservesOrder) {
    MlpSyntheticConfig cfg;
    cfg.n = 50;
    cfg.d = 6;
    const auto ds = gen_mlp_synthetic(0, cfg);
    const auto out = drop_features(ds, 6, 9);
    EXPECT_EQ(out.x, ds.x);
    EXPECT_EQ(out.kept_features, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(DropFeatures, DeterministicAndPreservesRows) {
    MlpSyntheticConfig cfg;
    cfg.n = 50;
    cfg.d = 6;
    const auto ds = gen_mlp_synthetic(0, cfg);
    const auto a = drop_features(ds, 1, 4), b = drop_features(ds, 1, 4);
    EXPECT_EQ(a.kept_features, b.kept_features);
    ASSERT_EQ(a.x.cols(), 1u);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(a.x(i, 0), ds.x(i, a.kept_features[0]));
    EXPECT_TRUE(bit_equal(a.y, ds.y));
    EXPECT_EQ(a.split, ds.split);
    EXPECT_TRUE(bit_equal(a.truth->eps, ds.truth->eps));
}

TEST(DropFeatures, WideInput) {
    MlpSyntheticConfig cfg;
    cfg.n = 10;
    cfg.d = 3072;
    cfg.f_hidden = 4;
    const auto out = drop_features(gen_mlp_synthetic(0, cfg), 50, 1);
    EXPECT_EQ(out.features(), 50u);
    EXPECT_EQ(out.kept_features.size(), 50u);
    EXPECT_TRUE(std::is_sorted(out.kept_features.begin(), out.kept_features.end()));
}

TEST(DropFeatures, OutOfRange) {
    MlpSyntheticConfig cfg;
    cfg.n = 10;
    cfg.d = 3;
    const auto ds = gen_mlp_synthetic(0, cfg);
    EXPECT_THROW(drop_features(ds, 0, 0), UsageError);
    EXPECT_THROW(drop_features(ds, 4, 0), UsageError);
}

TEST(Csv, ConstantColumnBecomesZero) {
    const auto dir = scratch("const");
    const auto path = write_file(dir, "a.csv", "a,b,y\n5,1,0\n5,2,2\n5,3,4\n");
    SplitSpec sp;
    sp.val_fraction = sp.test_fraction = 0.0;
    const auto ds = load_csv(path.string(), "y", sp, true);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ds.x(i, 0), 0.0);
    EXPECT_EQ(ds.standardization.feature_std[0], 1.0);
}

TEST(Csv, TwoRowTargetsStandardize) {
    const auto dir = scratch("two");
    const auto path = write_file(dir, "a.csv", "x,y\n1,0\n2,2\n");
    SplitSpec sp;
    sp.val_fraction = sp.test_fraction = 0.0;
    const auto ds = load_csv(path.string(), "y", sp, true);
    EXPECT_DOUBLE_EQ(ds.y[0], -1.0);
    EXPECT_DOUBLE_EQ(ds.y[1], 1.0);
}

TEST(Csv, RoundTripInverse) {
    const auto dir = scratch("round");
    const auto path = write_file(dir, "a.csv", "x,y,split\n1,0.3,train\n2,-7.25,train\n3,11.5,train\n4,2,val\n5,9,test\n");
    SplitSpec sp;
    sp.column = "split";
    const auto ds = load_csv(path.string(), "y", sp, true);
    EXPECT_EQ(ds.count(Split::train), 3u);
    EXPECT_EQ(ds.features(), 1u);
    const auto back = inverse_target(ds, ds.y);
    const std::vector<double> orig{0.3, -7.25, 11.5, 2, 9};
    for (std::size_t i = 0; i < orig.size(); ++i) EXPECT_NEAR(back[i], orig[i], 1e-12);
}

TEST(Csv, Errors) {
    const auto dir = scratch("err");
    const auto bad = write_file(dir, "bad.csv", "x,y\n1,2\n3,abc\n");
    try {
        load_csv(bad.string(), "y");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.column(), 2u);
    }
    const auto good = write_file(dir, "good.csv", "x,y\n1,2\n");
    EXPECT_THROW(load_csv(good.string(), "target"), ConfigError);
    EXPECT_THROW(load_csv((dir / "missing.csv").string(), "y"), ConfigError);
}

TEST(Standardize, TruthStaysConsistent) {
    MlpSyntheticConfig cfg;
    cfg.n = 200;
    const auto ds = standardize_target(gen_mlp_synthetic(2, cfg));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_NEAR(ds.y[i], ds.truth->f[i] + std::exp(ds.truth->g[i]) * ds.truth->eps[i], 1e-12);
    }
}

TEST(Cache, RoundTripIsBitExactAndBytesStable) {
    SawConfig cfg;
    cfg.n_train = 100;
    cfg.n_val = cfg.n_test = 20;
    const auto ds = gen_saw(4, cfg);
    const auto a = scratch("cache_a"), b = scratch("cache_b");
    write_dataset(ds, a);
    write_dataset(gen_saw(4, cfg), b);
    for (const auto& e : fs::directory_iterator(a)) {
        EXPECT_EQ(io::read_text(e.path()), io::read_text(b / e.path().filename())) << e.path();
    }
    const auto back = read_dataset(a);
    EXPECT_TRUE(bit_equal(back.x.data(), ds.x.data()));
    EXPECT_TRUE(bit_equal(back.y, ds.y));
    EXPECT_TRUE(bit_equal(back.truth->g, ds.truth->g));
    EXPECT_EQ(back.split, ds.split);
    EXPECT_EQ(back.generator, "saw");
    EXPECT_THROW(read_dataset(scratch("empty")), ConfigError);
}
