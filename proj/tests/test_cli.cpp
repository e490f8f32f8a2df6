// Copyright 2026 The QNBM Stress Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qnbm/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "qnbm");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = qnbm::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("qnbm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    std::string write(const std::string &name, const std::string &content) const {
        std::ofstream(path(name)) << content;
        return path(name);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, TrainWritesTraceAndPrintsKl) {
    const auto r = run_cli({"train", "--structure", "1,0,2", "--seed", "7", "--iterations", "50", "--out", path("t.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("final KL"), std::string::npos);
    ASSERT_TRUE(fs::exists(path("t.json")));
    ASSERT_TRUE(fs::exists(path("t.csv")));
    const auto j = nlohmann::json::parse(slurp(path("t.json")));
    EXPECT_EQ(j["loss_history"].size(), 51u);
    EXPECT_EQ(j["structure"], "1,0,2");
}

TEST_F(CliTest, TrainRejectsHiddenLayers) {
    const auto r = run_cli({"train", "--structure", "2,1,2", "--out", path("t.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("hidden layers unsupported"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainRejectsZeroIterations) {
    const auto r = run_cli({"train", "--structure", "1,0,2", "--iterations", "0", "--out", path("t.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--iterations"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("t.json")));
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
    EXPECT_EQ(run_cli({"train", "--bogus"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
}

TEST_F(CliTest, SampleDefaultsToShotBudget) {
    ASSERT_EQ(run_cli({"train", "--structure", "1,0,2", "--seed", "1", "--iterations", "20", "--out", path("t.json")}).code, 0);
    const auto r = run_cli({"sample", "--structure", "1,0,2", "--params", path("t.json"), "--mode", "cc", "--out",
                            path("h.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto h = nlohmann::json::parse(slurp(path("h.json")));
    EXPECT_EQ(h["total_shots"], 400);
    EXPECT_EQ(h["mode"], "classical_control");
    EXPECT_EQ(h["entries"].size(), 4u);

    ASSERT_EQ(run_cli({"sample", "--structure", "1,0,2", "--params", path("t.json"), "--mode", "post_selection", "--shots",
                       "50", "--out", path("h50.json")})
                  .code,
              0);
    const auto h50 = nlohmann::json::parse(slurp(path("h50.json")));
    EXPECT_EQ(h50["total_shots"], 50);
}

TEST_F(CliTest, SampleRejectsMismatchedParams) {
    const auto params = write("p.json", R"({"weights": [[0.1, 0.2, 0.3]], "biases": [0.1]})");
    const auto r = run_cli({"sample", "--structure", "1,0,2", "--params", params, "--mode", "cc", "--out", path("h.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--params"), std::string::npos) << r.err;
    EXPECT_EQ(run_cli({"sample", "--structure", "1,0,2", "--params", path("missing.json"), "--mode", "cc"}).code, 2);
}

TEST_F(CliTest, SampleRejectsUnknownMode) {
    const auto params = write("p.json", R"({"weights": [[0.1], [0.2]], "biases": [0.1, 0.0]})");
    EXPECT_EQ(run_cli({"sample", "--structure", "1,0,2", "--params", params, "--mode", "quantum"}).code, 2);
}

TEST_F(CliTest, StressRejectsUnknownMode) {
    const auto r = run_cli({"stress", "--modes", "cc,teleport", "--out", path("r.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--modes"), std::string::npos) << r.err;
}

TEST_F(CliTest, StressSingleTrialHasZeroStd) {
    const auto r = run_cli({"stress", "--structures", "1,0,2", "--modes", "cc", "--trials", "1", "--iterations", "20",
                            "--reproducible", "--out", path("r.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_EQ(j["structures"][0]["cells"][0]["kl_std"], 0.0);
    EXPECT_FALSE(j.contains("generated_at"));
}

TEST_F(CliTest, StressWritesCsv) {
    const auto r = run_cli({"stress", "--structures", "1,0,2;2,0,3", "--modes", "cc,ps", "--trials", "2", "--iterations",
                            "10", "--K", "5", "--format", "csv", "--out", path("r.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(path("r.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2 + 4 + 1);
}

TEST_F(CliTest, StressAllCellsFailingIsRuntimeError) {
    const auto r = run_cli({"stress", "--structures", "1,0,2", "--modes", "cc", "--trials", "1", "--iterations", "5",
                            "--max-attempts", "1", "--shots", "1", "--out", path("r.json")});
    // A single shot can still succeed; only assert the exit code is a valid outcome.
    EXPECT_TRUE(r.code == 0 || r.code == 1);
    EXPECT_EQ(run_cli({"stress", "--structures", "1,0,2", "--trials", "0"}).code, 2);
}

TEST_F(CliTest, StressIsByteIdenticalWhenReproducible) {
    std::vector<std::string> base{"stress", "--structures", "1,0,2;2,0,3", "--trials", "2", "--iterations", "15",
                                  "--K", "10", "--seed", "3", "--reproducible", "--out"};
    auto a = base, b = base;
    a.push_back(path("a.json"));
    b.push_back(path("b.json"));
    ASSERT_EQ(run_cli(a).code, 0);
    ASSERT_EQ(run_cli(b).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(CliTest, ResourcesTable) {
    auto r = run_cli({"resources", "2,0,3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("parameterized_2q          12\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("cc_shots                  800\n"), std::string::npos);
    EXPECT_NE(r.out.find("ps_shots                  6400\n"), std::string::npos);

    r = run_cli({"resources", "3,0,4"});
    EXPECT_NE(r.out.find("parameterized_2q          24\n"), std::string::npos);
    EXPECT_NE(r.out.find("cc_shots                  1600\n"), std::string::npos);
    EXPECT_NE(r.out.find("ps_shots                  25600\n"), std::string::npos);

    r = run_cli({"resources", "1,0,2", "--K", "10"});
    EXPECT_NE(r.out.find("cc_shots                  40\n"), std::string::npos);
    EXPECT_NE(r.out.find("cc_hqc"), std::string::npos);
    EXPECT_NE(r.out.find("ps_hqc"), std::string::npos);
}

TEST_F(CliTest, ResourcesRejectsBadPricing) {
    const auto bad = write("bad.json", R"({"divisor": 0})");
    EXPECT_EQ(run_cli({"resources", "1,0,2", "--pricing", bad}).code, 2);
    const auto garbage = write("garbage.json", "not json");
    EXPECT_EQ(run_cli({"resources", "1,0,2", "--pricing", garbage}).code, 2);
    const auto ok = write("ok.json", R"({"base": 0, "per_1q_weight": 0, "per_2q_weight": 0, "per_measurement_weight": 0})");
    const auto r = run_cli({"resources", "1,0,2", "--pricing", ok});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("cc_hqc                    0.00\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
    ::setenv(qnbm::cli::kOutputDirEnv, dir_.c_str(), 1);
    const auto r = run_cli({"train", "--structure", "1,0,2", "--iterations", "2"});
    ::unsetenv(qnbm::cli::kOutputDirEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "trace.json"));
}
