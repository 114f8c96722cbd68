#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output; // stdout and stderr interleaved
};

Run run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" TABUNC_CLI_PATH "' " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), int(buf.size()), p)) r.output += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory holding a small saw experiment config.
class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tabunc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write_config("tiny.json", 1e-3);
    }
    void TearDown() override { fs::remove_all(dir_); }

    void write_config(const std::string& name, double lr, const std::string& extra_models = "") {
        std::ofstream(dir_ / name) << R"({
  // comments are allowed
  "name": "tiny", "seed": 1,
  "dataset": {"generator": "saw", "params": {"n_train": 400, "n_val": 100, "n_test": 100}},
  "train": {"lr": )" << lr << R"(, "batch_size": 64, "max_epochs": 3, "patience": 1},
  "models": [{"name": "mlp", "spec": {"kind": "mlp", "depth": 1, "width": 16, "dropout": 0.0}})"
                                    << extra_models << R"(],
  "estimator": {"spec": {"kind": "mlp", "depth": 1, "width": 16, "dropout": 0.0}},
  "analysis": {"metrics": ["mlp"]}
})";
    }

    std::string base(const std::string& config = "tiny.json") const {
        return "--config '" + (dir_ / config).string() + "' --out '" + (dir_ / "out").string() + "'";
    }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run("").code, 1); }

TEST_F(Cli, FiguresListsRegistry) {
    const auto r = run("figures");
    EXPECT_EQ(r.code, 0);
    for (const char* id : {"fig-saw-predictions", "fig-uncertainty-plr", "fig-neighbors", "fig-nca-train",
                           "fig-grad-ratio", "fig-branch-alignment", "table-triplet"}) {
        EXPECT_NE(r.output.find(id), std::string::npos) << id;
    }
}

TEST_F(Cli, MissingConfigIsUsageError) {
    const auto r = run("generate");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--config"), std::string::npos);
}

TEST_F(Cli, UnknownConfigKeyIsRejected) {
    std::ofstream(dir_ / "bad.json") << R"({"name": "x", "seed": 0, "datset": {}})";
    const auto r = run(base("bad.json") + " generate");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("datset"), std::string::npos) << r.output;
}

TEST_F(Cli, GenerateReportsSplitCounts) {
    const auto r = run(base() + " generate");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("rows 600"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("train 400 / val 100 / test 100"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "tiny" / "dataset"));
}

TEST_F(Cli, TrainBeforeGenerateNamesMissingStage) {
    const auto r = run(base() + " train mlp");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("run `tabunc generate` first"), std::string::npos) << r.output;
}

TEST_F(Cli, AnalyzeBeforeTrainNamesMissingStage) {
    ASSERT_EQ(run(base() + " generate").code, 0);
    const auto r = run(base() + " analyze");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("run `tabunc train mlp` first"), std::string::npos) << r.output;
}

TEST_F(Cli, TrainWritesCheckpointAndIsMemoized) {
    ASSERT_EQ(run(base() + " generate").code, 0);
    const auto first = run(base() + " train mlp");
    ASSERT_EQ(first.code, 0) << first.output;
    EXPECT_NE(first.output.find("test mse"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir_ / "out" / "tiny" / "models" / "mlp" / "checkpoint"));
    const auto second = run(base() + " train mlp");
    ASSERT_EQ(second.code, 0);
    // A cache hit logs nothing about training, only the report.
    EXPECT_EQ(second.output.find("train: mlp"), std::string::npos) << second.output;
    const auto report = [](const std::string& s) { return s.substr(s.find("model mlp")); };
    EXPECT_EQ(report(first.output), report(second.output));
}

TEST_F(Cli, UnknownModelIsUsageError) {
    ASSERT_EQ(run(base() + " generate").code, 0);
    const auto r = run(base() + " train nope");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("nope"), std::string::npos);
}

TEST_F(Cli, MembersOnlyForEnsembles) {
    ASSERT_EQ(run(base() + " generate").code, 0);
    EXPECT_EQ(run(base() + " train mlp --members 3").code, 1);
}

TEST_F(Cli, DivergenceExitsNumeric) {
    write_config("hot.json", 1e100);
    ASSERT_EQ(run(base("hot.json") + " generate").code, 0);
    const auto r = run(base("hot.json") + " train mlp");
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("diverged"), std::string::npos);
}

TEST_F(Cli, EstimateWritesCsv) {
    ASSERT_EQ(run(base() + " generate").code, 0);
    const auto r = run(base() + " estimate");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("spearman vs true uncertainty"), std::string::npos);
    const auto csv = read_file(dir_ / "out" / "tiny" / "estimator" / "estimate_test.csv");
    EXPECT_EQ(csv.rfind("# config_hash=", 0), 0u);
    EXPECT_NE(csv.find("sample_id,f_hat,g_hat,uncertainty\n"), std::string::npos);
}

TEST_F(Cli, SeedFlagOverridesConfig) {
    const auto a = run(base() + " generate");
    const auto b = run(base() + " --seed 7 generate");
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    // New seed means a new dataset hash, so generation runs again.
    EXPECT_NE(b.output.find("generate: dataset"), std::string::npos) << b.output;
}

TEST_F(Cli, EnvironmentSetsOutputRoot) {
    const auto r = run("--config '" + (dir_ / "tiny.json").string() + "' generate",
                       "TABUNC_OUT='" + (dir_ / "envout").string() + "'");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "envout" / "tiny" / "dataset"));
}

TEST_F(Cli, ReproduceUnknownFigure) {
    const auto r = run("--out '" + (dir_ / "out").string() + "' reproduce fig-nope");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("known:"), std::string::npos);
}

TEST_F(Cli, FailedVerdictExitsThree) {
    // Frozen LRLR models cannot beat a trained MLP, so the triplet table fails.
    fs::create_directories(dir_ / "presets" / "figures");
    std::ofstream(dir_ / "presets" / "figures" / "table-triplet.json") << R"({
  "name": "frozen", "seed": 2,
  "dataset": {"generator": "saw", "params": {"n_train": 400, "n_val": 100, "n_test": 100}},
  "train": {"lr": 0.003, "batch_size": 64, "max_epochs": 20, "patience": 5},
  "models": [
    {"name": "mlp", "spec": {"kind": "mlp", "depth": 1, "width": 32, "dropout": 0.0}},
    {"name": "mlp-lrlr", "spec": {"kind": "mlp-lrlr", "depth": 1, "width": 8, "dropout": 0.0, "embedding_dim": 4},
     "train": {"lr": 1e-12, "batch_size": 64, "max_epochs": 2, "patience": 1}},
    {"name": "mlp-lrlr-triplet", "spec": {"kind": "mlp-lrlr", "depth": 1, "width": 8, "dropout": 0.0, "embedding_dim": 4},
     "train": {"lr": 1e-12, "batch_size": 64, "max_epochs": 2, "patience": 1},
     "triplet": {"epochs": 1, "batch_size": 64, "lr": 1e-12}}
  ],
  "analysis": {"metrics": ["mlp", "mlp-lrlr", "mlp-lrlr-triplet"]}
})";
    const auto r = run("--out '" + (dir_ / "out").string() + "' reproduce table-triplet",
                       "TABUNC_CONFIG_DIR='" + (dir_ / "presets").string() + "'");
    EXPECT_EQ(r.code, 3) << r.output;
    EXPECT_NE(r.output.find("verdict table-triplet: FAIL"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "frozen" / "table-triplet" / "metrics.csv"));
}
