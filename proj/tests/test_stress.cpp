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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qnbm/stress.hpp"

using namespace qnbm;

namespace {

const NeuronStructure k102{{1, 0, 2}};
const NeuronStructure k203{{2, 0, 3}};
const NeuronStructure k304{{3, 0, 4}};

StressConfig quick_config(uint64_t seed = 0) {
    StressConfig c;
    c.seed = seed;
    c.training.iterations = 40;
    c.K = 10;
    return c;
}

size_t count_lines(const std::string &s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

size_t csv_fields(const std::string &line) {
    size_t n = 1;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        n += c == ',' && !quoted;
    }
    return n;
}

}  // namespace

TEST(ShotRequirements, ReferenceTable) {
    const uint64_t cc[] = {400, 800, 1600};
    const uint64_t ps[] = {1600, 6400, 25600};
    for (int n = 2; n <= 4; ++n) {
        EXPECT_EQ(shot_requirements(n, 100, SampleMode::classical_control), cc[n - 2]);
        EXPECT_EQ(shot_requirements(n, 100, SampleMode::post_selection), ps[n - 2]);
    }
    EXPECT_EQ(ShotPlan::make(SampleMode::post_selection, 3).shots, 6400u);
    EXPECT_EQ(shot_requirements(2, 10, SampleMode::classical_control), 40u);
    EXPECT_THROW(shot_requirements(0, 100, SampleMode::classical_control), std::invalid_argument);
    EXPECT_THROW(shot_requirements(2, 0, SampleMode::post_selection), std::invalid_argument);
}

TEST(GateCensus, WorkedExamples) {
    const auto a = gate_census(k203);
    EXPECT_EQ(a.parameterized_2q, 12);
    EXPECT_EQ(a.fixed_1q, 3);
    EXPECT_EQ(a.fixed_2q, 3);
    EXPECT_EQ(a.qubits, 6);
    const auto b = gate_census(k304);
    EXPECT_EQ(b.parameterized_2q, 24);
    EXPECT_EQ(b.fixed_1q, 4);
    EXPECT_EQ(b.fixed_2q, 4);
    const auto c = gate_census(k102, 6);
    EXPECT_EQ(c.parameterized_2q, 4);
    EXPECT_EQ(c.fixed_1q, 2);
    EXPECT_EQ(c.fixed_2q, 2);
    EXPECT_EQ(c.classical_registers, 12);
    EXPECT_EQ(c.mid_circuit_measurements, 2);
    EXPECT_THROW(gate_census(NeuronStructure{{2, 1, 2}}), std::invalid_argument);
}

TEST(GateCensus, JsonRoundTrip) {
    const auto r = gate_census(k304, 3);
    EXPECT_EQ(resources_from_json(to_json(r)), r);
}

TEST(HqcEstimate, ZeroWeightsGiveBase) {
    PricingSpec p{7.5, 0, 0, 0, 1};
    EXPECT_DOUBLE_EQ(hqc_estimate(gate_census(k203), 6400, 1.3, p), 7.5);
}

TEST(HqcEstimate, VariablePartIsLinearInShots) {
    const PricingSpec p;
    const auto c = gate_census(k304);
    const double v1 = hqc_estimate(c, 1000, 1.4, p) - p.base;
    const double v2 = hqc_estimate(c, 2000, 1.4, p) - p.base;
    EXPECT_DOUBLE_EQ(v2, 2 * v1);
}

TEST(HqcEstimate, DefaultPricingNearReferenceCost) {
    const double h = hqc_estimate(gate_census(k102), 1600, 1.0, PricingSpec{});
    EXPECT_GE(h, 36.0 / 2);
    EXPECT_LE(h, 36.0 * 2);
}

TEST(HqcEstimate, RejectsBadPricing) {
    EXPECT_THROW(hqc_estimate(gate_census(k102), 10, 1.0, PricingSpec{-1, 1, 1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(hqc_estimate(gate_census(k102), 10, 1.0, PricingSpec{1, 1, 1, 1, 0}), std::invalid_argument);
    EXPECT_THROW(pricing_from_json(nlohmann::json{{"divisor", -2}}), std::invalid_argument);
    EXPECT_EQ(pricing_from_json(nlohmann::json{{"base", 2}}).base, 2.0);
}

TEST(CappedGeometricMean, Examples) {
    EXPECT_DOUBLE_EQ(capped_geometric_mean(1.0, 6), 1.0);
    EXPECT_NEAR(capped_geometric_mean(0.5, 50), 2.0, 1e-12);
    EXPECT_NEAR(capped_geometric_mean(0.5, 1), 1.0, 1e-15);
}

TEST(FitTrend, CollinearReferenceLine) {
    const auto t = fit_trend({{0, 0.053}, {1, 0.231}, {2, 0.409}});
    EXPECT_NEAR(t.slope, 0.178, 1e-12);
    EXPECT_NEAR(t.intercept, 0.053, 1e-12);
}

TEST(FitTrend, TwoPointsInterpolate) {
    const auto t = fit_trend({{1, 3}, {3, 7}});
    EXPECT_NEAR(t.slope, 2.0, 1e-15);
    EXPECT_NEAR(t.intercept, 1.0, 1e-15);
}

TEST(FitTrend, FlatLine) {
    const auto t = fit_trend({{0, 1}, {1, 1}, {2, 1}});
    EXPECT_NEAR(t.slope, 0.0, 1e-15);
    EXPECT_NEAR(t.intercept, 1.0, 1e-15);
}

TEST(FitTrend, DegenerateInput) {
    EXPECT_THROW(fit_trend({{1, 2}}), std::invalid_argument);
    EXPECT_THROW(fit_trend({{1, 2}, {1, 3}}), std::invalid_argument);
}

TEST(FitTrend, ReportedHardwarePointsUnderOls) {
    // OLS over (0, 0.053), (1, 0.37), (2, 0.39) does not give 0.178x + 0.053.
    const auto t = fit_trend({{0, 0.053}, {1, 0.37}, {2, 0.39}});
    EXPECT_NEAR(t.slope, 0.1685, 1e-12);
    EXPECT_NEAR(t.intercept, 0.1025, 1e-12);
}

TEST(StressTest, EmptyStructureList) {
    const auto r = run_stress_test({}, {SampleMode::classical_control}, 8, quick_config());
    EXPECT_TRUE(r.structures.empty());
    EXPECT_FALSE(r.trend.has_value());
    const auto j = to_json(r);
    EXPECT_EQ(stress_report_from_json(j), r);
    std::ostringstream os;
    write_report_csv(os, r);
    EXPECT_EQ(count_lines(os.str()), 2u);  // header + trend
}

TEST(StressTest, RejectsZeroTrials) {
    EXPECT_THROW(run_stress_test({k102}, {SampleMode::classical_control}, 0, quick_config()), std::invalid_argument);
}

TEST(StressTest, CellsAndSummaries) {
    const auto r = run_stress_test({k102, k203}, {SampleMode::classical_control, SampleMode::post_selection}, 3,
                                   quick_config(4));
    ASSERT_EQ(r.structures.size(), 2u);
    for (const auto &sr : r.structures) {
        ASSERT_EQ(sr.cells.size(), 2u);
        ASSERT_TRUE(sr.p_prime_target.has_value());
        for (const auto &c : sr.cells) {
            EXPECT_FALSE(c.error.has_value());
            ASSERT_EQ(c.trials.size(), 3u);
            EXPECT_EQ(c.shots, shot_requirements(sr.structure.n_out(), 10, c.mode));
            double best = c.trials[0].kl;
            for (const auto &t : c.trials) best = std::min(best, t.kl);
            EXPECT_EQ(c.kl_best, best);
            EXPECT_LE(c.kl_best, c.kl_mean);
            EXPECT_GE(c.kl_std, 0.0);
            EXPECT_GE(c.expected_attempts_per_block, 1.0);
            EXPECT_GT(c.hqc_estimate, PricingSpec{}.base);
        }
        EXPECT_DOUBLE_EQ(sr.cells[1].expected_attempts_per_block, 1.0);
    }
    ASSERT_TRUE(r.trend.has_value());
    EXPECT_EQ(*r.trend_mode, SampleMode::classical_control);
    EXPECT_TRUE(std::isfinite(r.trend->slope));
}

TEST(StressTest, SingleTrialHasZeroStd) {
    const auto r = run_stress_test({k102}, {SampleMode::classical_control}, 1, quick_config());
    EXPECT_EQ(r.structures[0].cells[0].kl_std, 0.0);
    EXPECT_EQ(r.structures[0].cells[0].kl_best, r.structures[0].cells[0].kl_mean);
}

TEST(StressTest, HiddenLayerFailureIsRecordedPerCell) {
    const auto r = run_stress_test({k102, NeuronStructure{{2, 1, 2}}}, {SampleMode::classical_control}, 2, quick_config());
    ASSERT_EQ(r.structures.size(), 2u);
    EXPECT_FALSE(r.structures[0].cells[0].error.has_value());
    ASSERT_TRUE(r.structures[1].cells[0].error.has_value());
    EXPECT_NE(r.structures[1].cells[0].error->find("hidden"), std::string::npos);
    EXPECT_FALSE(r.trend.has_value());  // only one usable point
}

TEST(StressTest, DeterministicAndJobIndependent) {
    auto cfg = quick_config(11);
    const std::vector<NeuronStructure> s{k102, k203};
    const std::vector<SampleMode> m{SampleMode::classical_control, SampleMode::post_selection};
    const auto a = run_stress_test(s, m, 2, cfg);
    cfg.jobs = 3;
    const auto b = run_stress_test(s, m, 2, cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    cfg.seed = 12;
    EXPECT_NE(run_stress_test(s, m, 2, cfg), a);
}

TEST(StressReport, JsonRoundTrip) {
    auto r = run_stress_test({k102, k203}, {SampleMode::post_selection}, 2, quick_config(2));
    r.generated_at = "2026-01-01T00:00:00Z";
    const auto back = stress_report_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
    EXPECT_EQ(back.structures.size(), 2u);
    EXPECT_EQ(back.trend_mode, r.trend_mode);
}

TEST(StressReport, RejectsUnknownSchemaVersion) {
    auto j = to_json(run_stress_test({}, {}, 1, quick_config()));
    j["schema_version"] = 99;
    EXPECT_THROW(stress_report_from_json(j), std::invalid_argument);
}

TEST(StressReport, CsvRowCountAndWidth) {
    const int trials = 3;
    const auto r = run_stress_test({k102, k203}, {SampleMode::classical_control, SampleMode::post_selection}, trials,
                                   quick_config(5));
    std::ostringstream os;
    write_report_csv(os, r);
    std::istringstream in(os.str());
    std::string line;
    size_t rows = 0, trial_rows = 0, summary_rows = 0, trend_rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(csv_fields(line), 17u) << line;
        if (rows++ == 0) continue;
        trial_rows += line.rfind("trial,", 0) == 0;
        summary_rows += line.rfind("summary,", 0) == 0;
        trend_rows += line.rfind("trend,", 0) == 0;
    }
    EXPECT_EQ(trial_rows, 2u * 2 * trials);
    EXPECT_EQ(summary_rows, 4u);
    EXPECT_EQ(trend_rows, 1u);
    EXPECT_EQ(rows, 1 + trial_rows + summary_rows + trend_rows);
}
