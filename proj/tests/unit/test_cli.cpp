#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metats/cli.hpp"
#include "metats/csv_io.hpp"
#include "oracles.hpp"

using namespace metats;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "metats");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("metats_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string write(const std::string& name, const std::string& text) {
        std::ofstream(dir_ / name) << text;
        return (dir_ / name).string();
    }
    fs::path dir_;
};

}  // namespace

TEST(Cli, HelpAndUsage) {
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_EQ(cli({}).code, kExitInvalid);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitInvalid);
    EXPECT_EQ(cli({"bounds", "--lambda-min", "x"}).code, kExitInvalid);
}

TEST_F(CliDir, RunMinimalConfigWritesBothCsvs) {
    const std::string cfg = write("c.json", R"({"runs": 1, "m": 1, "n": 2})");
    const Result r = cli({"run", "--config", cfg, "--out", (dir_ / "out").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "trace.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "summary.csv"));
    std::ifstream s(dir_ / "out" / "summary.csv");
    EXPECT_EQ(read_summary(s).size(), 4u);
}

TEST_F(CliDir, RunOverridesAndEnvLog) {
    const std::string cfg = write("c.json", R"({"runs": 2, "m": 2, "n": 3, "k": 3, "d": 2})");
    const Result r = cli({"run", "--config", cfg, "--out", dir_.string(), "--seed", "5", "--agents", "oracle_ts,meta_ts",
                          "--env-log", "--threads", "2", "--normalize-contexts", "--shared-contexts"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "env_log.csv"));
    std::ifstream s(dir_ / "trace.csv");
    EXPECT_EQ(read_trace(s).records.size(), 2u * 2u * 2u * 3u);
}

TEST_F(CliDir, RunGeneralizationWritesOneFilePerNorm) {
    const std::string cfg =
        write("g.json", R"({"experiment": "generalization", "runs": 1, "m": 2, "n": 3, "k": 3, "d": 2, "epsilon_norms": [0, 1.5]})");
    ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir_.string()}).code, kExitOk);
    EXPECT_TRUE(fs::exists(dir_ / "trace_eps0.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "summary_eps1.5.csv"));
}

TEST_F(CliDir, RunErrors) {
    Result r = cli({"run", "--config", (dir_ / "missing.json").string()});
    EXPECT_EQ(r.code, kExitInvalid);
    EXPECT_NE(r.err.find("missing.json"), std::string::npos);
    const std::string bad = write("bad.json", R"({"m": -1})");
    EXPECT_EQ(cli({"run", "--config", bad}).code, kExitInvalid);
    const std::string ok = write("ok.json", R"({"runs": 1, "m": 1, "n": 1})");
    EXPECT_EQ(cli({"run", "--config", ok, "--agents", "ucb"}).code, kExitInvalid);
    EXPECT_EQ(cli({"run"}).code, kExitInvalid);
}

TEST(Cli, BoundsMatchExtendedPrecision) {
    const Result r = cli({"bounds", "--m", "20", "--n", "200", "--k", "20", "--d", "5", "--v", "0.2", "--delta", "0.045",
                          "--lambda-min", "0.5", "--lambda-max", "4", "--lambda-max-sigma-q", "3", "--vartheta", "0.01",
                          "--json"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    const auto w = oracle::wide_bounds(20, 200, 20, 5, 0.2, 0.045, 0.5, 4.0, 3.0, 0.0, 0.01);
    EXPECT_NEAR(j["u2"].get<double>() / w.u2, 1.0, 1e-12);
    EXPECT_NEAR(j["rhs_meta_tslb"].get<double>() / w.rhs_tslb, 1.0, 1e-12);
    EXPECT_NEAR(j["rhs_meta_ts"].get<double>() / w.rhs_ts, 1.0, 1e-12);
    EXPECT_NEAR(j["generalization_threshold"].get<double>() / w.threshold, 1.0, 1e-12);
    EXPECT_GE(j["rhs_meta_ts"].get<double>(), j["rhs_meta_tslb"].get<double>());
}

TEST(Cli, BoundsBoundaryPrintsZero) {
    // 2/(175·0.5) exactly
    const Result r = cli({"bounds", "--lambda-min", "0.5", "--lambda-max", "1", "--lambda-max-sigma-q",
                          "0.022857142857142857", "--vartheta", "0.1"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("u2                        0\n"), std::string::npos) << r.out;
}

TEST(Cli, BoundsEigenvalueConditionFailure) {
    const Result r = cli({"bounds", "--lambda-min", "0.5", "--lambda-max", "1", "--lambda-max-sigma-q", "0.001",
                          "--vartheta", "0.1"});
    EXPECT_EQ(r.code, kExitInvalid);
    EXPECT_NE(r.err.find("eigenvalue condition"), std::string::npos);
}

TEST_F(CliDir, Vartheta) {
    const std::string cfg = write("c.json", R"({"n": 20, "k": 3, "d": 2, "normalize_contexts": true})");
    Result r = cli({"vartheta", "--config", cfg, "--json"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto exact = nlohmann::json::parse(r.out);
    EXPECT_FALSE(exact["estimate"].get<bool>());
    EXPECT_GT(exact["vartheta"].get<double>(), 0.0);
    r = cli({"vartheta", "--config", cfg, "--mode", "monte_carlo", "--json"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto mc = nlohmann::json::parse(r.out);
    EXPECT_TRUE(mc["estimate"].get<bool>());
    EXPECT_GE(mc["rho_min"].get<double>(), exact["rho_min"].get<double>());
    EXPECT_EQ(cli({"vartheta", "--config", cfg, "--mode", "guess"}).code, kExitInvalid);
    const std::string big = write("big.json", R"({"n": 200, "k": 20, "d": 5})");
    EXPECT_EQ(cli({"vartheta", "--config", big}).code, kExitInvalid);
}

TEST(Cli, VerifyExitCodes) {
    Result r = cli({"verify", "--checks", "recursion-batch,symmetry"});
    EXPECT_EQ(r.code, kExitOk) << r.out;
    r = cli({"verify", "--fault", "skip-symmetrize"});
    EXPECT_EQ(r.code, kExitInvariant);
    EXPECT_NE(r.out.find("FAIL symmetry"), std::string::npos);
    EXPECT_EQ(cli({"verify", "--checks", ""}).code, kExitInvalid);
    EXPECT_EQ(cli({"verify", "--checks", "bogus"}).code, kExitInvalid);
    EXPECT_EQ(cli({"verify", "--fault", "bogus"}).code, kExitInvalid);
}

TEST_F(CliDir, ReportValidAndBrokenTraces) {
    const std::string cfg = write("c.json", R"({"runs": 3, "m": 2, "n": 5, "k": 4, "d": 2})");
    ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir_.string()}).code, kExitOk);
    Result r = cli({"report", "--trace", (dir_ / "trace.csv").string(), "--json"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["agents"].size(), 4u);
    EXPECT_EQ(j["sign_tests"].size(), 3u);

    const std::string broken = write("broken.csv", std::string(kTraceHeader) + "\n0,1,1,meta_ts,-1,-1\n");
    EXPECT_EQ(cli({"report", "--trace", broken}).code, kExitInvariant);
    const std::string garbage = write("garbage.csv", "run,task\n0,1\n");
    EXPECT_EQ(cli({"report", "--trace", garbage}).code, kExitInvalid);
    EXPECT_EQ(cli({"report", "--trace", (dir_ / "none.csv").string()}).code, kExitInvalid);
}
