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

// Stress-test harness: scale the number of RUS blocks, train each structure
// on the exact simulator, then sample it repeatedly in both execution modes
// and record KL statistics, shot budgets, gate census and cost estimates.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distribution.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "target.hpp"
#include "training.hpp"

namespace qnbm {

constexpr int kDefaultK = 100;
constexpr int kDefaultTrials = 8;
constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Shot budgets

/// Classical control needs 2^N_out * K shots. Post-selection divides that by
/// the planning success rate 1/2^N_out, i.e. 4^N_out * K.
inline uint64_t shot_requirements(int n_out, int K, SampleMode mode) {
    if (n_out < 1 || n_out > 30) throw std::invalid_argument("shot_requirements: n_out out of range");
    if (K < 1) throw std::invalid_argument("shot_requirements: K must be >= 1");
    const uint64_t base = (uint64_t{1} << n_out) * static_cast<uint64_t>(K);
    return mode == SampleMode::classical_control ? base : base << n_out;
}

struct ShotPlan {
    SampleMode mode = SampleMode::classical_control;
    int K = kDefaultK;
    int n_out = 1;
    uint64_t shots = 0;

    static ShotPlan make(SampleMode mode, int n_out, int K = kDefaultK) {
        return {mode, K, n_out, shot_requirements(n_out, K, mode)};
    }
};

// ---------------------------------------------------------------------------
// Gate census and cost

/// Per-shot resources of a zero-hidden QNBM, counting each RUS block once.
///
/// parameterized_2q: the 2 * N_in controlled weight rotations per block.
/// parameterized_1q: the two bias rotations on the ancilla per block.
/// fixed_1q: one per block (the classically controlled X that resets the ancilla).
/// fixed_2q: one per block (the controlled Y onto the output neuron).
struct ResourceEstimate {
    int qubits = 0;
    int parameterized_2q = 0;
    int parameterized_1q = 0;
    int fixed_1q = 0;
    int fixed_2q = 0;
    int input_hadamards = 0;
    int mid_circuit_measurements = 0;
    int classical_registers = 0;
    int final_measurements = 0;

    friend bool operator==(const ResourceEstimate &, const ResourceEstimate &) = default;
};

inline ResourceEstimate gate_census(const NeuronStructure &s, int max_attempts = kDefaultMaxAttempts) {
    s.validate_executable();
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    const int in = s.n_in(), out = s.n_out();
    ResourceEstimate r;
    r.qubits = in + out + 1;
    r.parameterized_2q = 2 * in * out;
    r.parameterized_1q = 2 * out;
    r.fixed_1q = out;
    r.fixed_2q = out;
    r.input_hadamards = in;
    r.mid_circuit_measurements = out;
    r.classical_registers = out * max_attempts;
    r.final_measurements = out;
    return r;
}

/// Linear HQC-style cost model. The reference coefficients are unknown, so this is
/// pluggable; defaults give order-of-magnitude agreement with the reference
/// table in data/reference_hqc.json.
struct PricingSpec {
    double base = 5.0;
    double per_1q_weight = 1.0;
    double per_2q_weight = 10.0;
    double per_measurement_weight = 5.0;
    double divisor = 5000.0;

    void validate() const {
        for (double v : {base, per_1q_weight, per_2q_weight, per_measurement_weight}) {
            if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("pricing coefficients must be non-negative");
        }
        if (!std::isfinite(divisor) || divisor <= 0.0) throw std::invalid_argument("pricing divisor must be > 0");
    }
};

template <class Json>
PricingSpec pricing_from_json(const Json &j) {
    PricingSpec p;
    p.base = j.value("base", p.base);
    p.per_1q_weight = j.value("per_1q_weight", p.per_1q_weight);
    p.per_2q_weight = j.value("per_2q_weight", p.per_2q_weight);
    p.per_measurement_weight = j.value("per_measurement_weight", p.per_measurement_weight);
    p.divisor = j.value("divisor", p.divisor);
    p.validate();
    return p;
}

/// base + shots * (w1 * n1 + w2 * n2 + wm * nm) / divisor, where per-block
/// gates and mid-circuit measurements are scaled by the expected attempts per
/// block (1 for post-selection).
inline double hqc_estimate(const ResourceEstimate &census, uint64_t shots, double expected_attempts_per_block,
                           const PricingSpec &pricing) {
    pricing.validate();
    if (!(expected_attempts_per_block >= 0.0)) throw std::invalid_argument("expected attempts must be >= 0");
    const double e = expected_attempts_per_block;
    const double n1 = census.input_hadamards + e * (census.fixed_1q + census.parameterized_1q);
    const double n2 = e * (census.parameterized_2q + census.fixed_2q);
    const double nm = e * census.mid_circuit_measurements + census.final_measurements;
    const double per_shot = pricing.per_1q_weight * n1 + pricing.per_2q_weight * n2 + pricing.per_measurement_weight * nm;
    return pricing.base + static_cast<double>(shots) * per_shot / pricing.divisor;
}

/// Expected attempts of one capped RUS loop with a fixed success probability.
inline double capped_geometric_mean(double p_success, int max_attempts) {
    if (!(p_success > 0.0 && p_success <= 1.0)) throw std::invalid_argument("success probability must be in (0, 1]");
    return (1.0 - std::pow(1.0 - p_success, max_attempts)) / p_success;
}

// ---------------------------------------------------------------------------
// Trend

struct Trend {
    double slope = 0.0;
    double intercept = 0.0;
    friend bool operator==(const Trend &, const Trend &) = default;
};

/// Ordinary least squares y = slope * x + intercept.
inline Trend fit_trend(const std::vector<std::pair<double, double>> &points) {
    if (points.size() < 2) throw std::invalid_argument("fit_trend needs at least two points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto &[x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto &[x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_trend: x values are degenerate");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

// ---------------------------------------------------------------------------
// Sweep

struct StressConfig {
    TrainingConfig training;
    int K = kDefaultK;
    int max_attempts = kDefaultMaxAttempts;
    int cardinality = 1;
    uint64_t seed = 0;
    int jobs = 1;
    /// 0 = ShotPlan default.
    uint64_t shots_override = 0;
    PricingSpec pricing;
};

struct TrialResult {
    int trial = 0;
    double kl = 0.0;
    Histogram histogram;
    friend bool operator==(const TrialResult &, const TrialResult &) = default;
};

struct CellReport {
    SampleMode mode = SampleMode::classical_control;
    uint64_t shots = 0;
    std::vector<TrialResult> trials;
    double kl_best = 0.0;
    double kl_mean = 0.0;
    double kl_std = 0.0;
    double discard_rate = 0.0;
    double expected_attempts_per_block = 1.0;
    double hqc_estimate = 0.0;
    std::optional<std::string> error;
    friend bool operator==(const CellReport &, const CellReport &) = default;
};

struct StructureReport {
    NeuronStructure structure;
    ResourceEstimate resources;
    double training_final_kl = 0.0;
    std::optional<ParameterSet> trained_params;
    std::optional<Distribution> p_prime_target;
    std::vector<CellReport> cells;
    friend bool operator==(const StructureReport &, const StructureReport &) = default;
};

struct StressReport {
    int schema_version = kReportSchemaVersion;
    uint64_t seed = 0;
    int trials = 0;
    int K = kDefaultK;
    int max_attempts = kDefaultMaxAttempts;
    std::vector<SampleMode> modes;
    std::vector<StructureReport> structures;
    /// Fitted over (structure index, best KL) of `trend_mode`.
    std::optional<Trend> trend;
    std::optional<SampleMode> trend_mode;
    std::optional<std::string> generated_at;
    friend bool operator==(const StressReport &, const StressReport &) = default;
};

using ProgressFn = std::function<void(const std::string &)>;

namespace detail {
inline uint64_t cell_seed(uint64_t master, size_t structure, size_t mode, size_t trial) {
    return mix64(mix64(mix64(master + 0xA24BAED4963EE407ULL * (structure + 1)) + mode) + trial);
}
inline uint64_t training_seed(uint64_t master, size_t structure) { return mix64(master ^ (0x9FB21C651E98DF25ULL * (structure + 1))); }

inline void summarize(CellReport &cell) {
    const double n = static_cast<double>(cell.trials.size());
    cell.kl_best = cell.trials.front().kl;
    double sum = 0.0, discard = 0.0;
    for (const auto &t : cell.trials) {
        cell.kl_best = std::min(cell.kl_best, t.kl);
        sum += t.kl;
        discard += static_cast<double>(t.histogram.discarded_shots) / static_cast<double>(t.histogram.total_shots);
    }
    cell.kl_mean = sum / n;
    double var = 0.0;
    for (const auto &t : cell.trials) var += (t.kl - cell.kl_mean) * (t.kl - cell.kl_mean);
    cell.kl_std = std::sqrt(var / n);
    cell.discard_rate = discard / n;
}
}  // namespace detail

/// For each structure: train on the exact simulator, take the trained model's
/// exact distribution as P'_target, then per mode and trial sample the
/// structure's shot plan and score KL(P'_target || empirical). Failures are
/// recorded on the affected cells; the sweep continues.
inline StressReport run_stress_test(const std::vector<NeuronStructure> &structures, const std::vector<SampleMode> &modes,
                                    int trials, const StressConfig &config, const ProgressFn &progress = {}) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    config.pricing.validate();
    StressReport report;
    report.seed = config.seed;
    report.trials = trials;
    report.K = config.K;
    report.max_attempts = config.max_attempts;
    report.modes = modes;
    report.structures.resize(structures.size());

    // Stage 1: training, one task per structure.
    std::vector<std::optional<std::string>> training_error(structures.size());
    parallel_for(structures.size(), config.jobs, [&](size_t s) {
        auto &sr = report.structures[s];
        sr.structure = structures[s];
        try {
            sr.resources = gate_census(structures[s], config.max_attempts);
            TrainingConfig tc = config.training;
            tc.seed = detail::training_seed(config.seed, s);
            const auto target = cardinality_distribution({structures[s].n_out(), config.cardinality});
            const auto trace = train(structures[s], target, tc);
            sr.training_final_kl = trace.final_loss();
            sr.trained_params = trace.final_params;
            sr.p_prime_target = derive_p_prime_target(trace.final_params, structures[s]);
        } catch (const std::exception &e) {
            training_error[s] = std::string("training failed: ") + e.what();
        }
        if (progress) progress("trained " + structures[s].to_string() + (training_error[s] ? " (failed)" : ""));
    });

    // Stage 2: independent (structure, mode, trial) cells.
    const size_t n_modes = modes.size();
    const size_t n_trials = static_cast<size_t>(trials);
    for (auto &sr : report.structures) {
        sr.cells.resize(n_modes);
        for (size_t m = 0; m < n_modes; ++m) {
            sr.cells[m].mode = modes[m];
            sr.cells[m].trials.resize(n_trials);
        }
    }
    std::vector<std::optional<std::string>> cell_error(structures.size() * n_modes * n_trials);
    parallel_for(cell_error.size(), config.jobs, [&](size_t idx) {
        const size_t s = idx / (n_modes * n_trials);
        const size_t m = (idx / n_trials) % n_modes;
        const size_t t = idx % n_trials;
        auto &sr = report.structures[s];
        auto &trial = sr.cells[m].trials[t];
        trial.trial = static_cast<int>(t);
        if (training_error[s]) {
            cell_error[idx] = training_error[s];
            return;
        }
        try {
            const uint64_t shots = config.shots_override
                                       ? config.shots_override
                                       : ShotPlan::make(modes[m], sr.structure.n_out(), config.K).shots;
            Rng rng(detail::cell_seed(config.seed, s, m, t));
            trial.histogram = sample(sr.structure, *sr.trained_params, modes[m], shots, rng,
                                     {config.max_attempts, 1});
            trial.kl = trial.histogram.kept_shots() > 0
                           ? kl_divergence(*sr.p_prime_target, trial.histogram.empirical())
                           : std::numeric_limits<double>::infinity();
        } catch (const std::exception &e) {
            cell_error[idx] = e.what();
        }
    });

    // Stage 3: merge.
    for (size_t s = 0; s < structures.size(); ++s) {
        auto &sr = report.structures[s];
        for (size_t m = 0; m < n_modes; ++m) {
            auto &cell = sr.cells[m];
            for (size_t t = 0; t < n_trials; ++t) {
                if (const auto &err = cell_error[(s * n_modes + m) * n_trials + t]; err && !cell.error) cell.error = err;
            }
            if (cell.error) {
                cell.trials.clear();
                continue;
            }
            cell.shots = cell.trials.front().histogram.total_shots;
            detail::summarize(cell);
            try {
                if (modes[m] == SampleMode::classical_control) {
                    const auto cc = exact_classical_control(sr.structure, *sr.trained_params, config.max_attempts);
                    double sum = 0.0;
                    for (double e : cc.expected_attempts) sum += e;
                    cell.expected_attempts_per_block = sum / static_cast<double>(cc.expected_attempts.size());
                } else {
                    cell.expected_attempts_per_block = 1.0;
                }
                cell.hqc_estimate = hqc_estimate(sr.resources, cell.shots, cell.expected_attempts_per_block, config.pricing);
            } catch (const std::exception &e) {
                cell.error = e.what();
            }
            if (progress) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s %s: best KL %.6f mean %.6f std %.6f", sr.structure.to_string().c_str(),
                              to_string(modes[m]).c_str(), cell.kl_best, cell.kl_mean, cell.kl_std);
                progress(buf);
            }
        }
    }

    // Trend over structure index using the first requested mode.
    if (!modes.empty()) {
        std::vector<std::pair<double, double>> points;
        for (size_t s = 0; s < structures.size(); ++s) {
            const auto &cell = report.structures[s].cells.front();
            if (!cell.error && std::isfinite(cell.kl_best)) points.emplace_back(static_cast<double>(s), cell.kl_best);
        }
        if (points.size() >= 2) {
            report.trend = fit_trend(points);
            report.trend_mode = modes.front();
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const ResourceEstimate &r) {
    return {{"qubits", r.qubits},
            {"parameterized_2q", r.parameterized_2q},
            {"parameterized_1q", r.parameterized_1q},
            {"fixed_1q", r.fixed_1q},
            {"fixed_2q", r.fixed_2q},
            {"input_hadamards", r.input_hadamards},
            {"mid_circuit_measurements", r.mid_circuit_measurements},
            {"classical_registers", r.classical_registers},
            {"final_measurements", r.final_measurements}};
}

template <class Json>
ResourceEstimate resources_from_json(const Json &j) {
    ResourceEstimate r;
    r.qubits = j.at("qubits").template get<int>();
    r.parameterized_2q = j.at("parameterized_2q").template get<int>();
    r.parameterized_1q = j.at("parameterized_1q").template get<int>();
    r.fixed_1q = j.at("fixed_1q").template get<int>();
    r.fixed_2q = j.at("fixed_2q").template get<int>();
    r.input_hadamards = j.at("input_hadamards").template get<int>();
    r.mid_circuit_measurements = j.at("mid_circuit_measurements").template get<int>();
    r.classical_registers = j.at("classical_registers").template get<int>();
    r.final_measurements = j.at("final_measurements").template get<int>();
    return r;
}

namespace detail {
// JSON has no infinity; a KL of +inf (no kept shots) is written as null.
inline nlohmann::ordered_json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}
template <class Json>
double number_or_inf(const Json &j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.template get<double>();
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const StressReport &r) {
    using json = nlohmann::ordered_json;
    json j;
    j["schema_version"] = r.schema_version;
    if (r.generated_at) j["generated_at"] = *r.generated_at;
    j["seed"] = r.seed;
    j["trials"] = r.trials;
    j["K"] = r.K;
    j["max_attempts"] = r.max_attempts;
    j["bit_order"] = "output neuron 0 is the leftmost character";
    j["trend_x_axis"] = "structure index in sweep order";
    auto modes = json::array();
    for (auto m : r.modes) modes.push_back(to_string(m));
    j["modes"] = std::move(modes);
    auto structures = json::array();
    for (const auto &sr : r.structures) {
        json s;
        s["structure"] = sr.structure.to_string();
        s["resources"] = to_json(sr.resources);
        s["training_final_kl"] = sr.training_final_kl;
        s["trained_params"] = sr.trained_params ? to_json(*sr.trained_params) : json(nullptr);
        s["p_prime_target"] = sr.p_prime_target ? to_json(*sr.p_prime_target) : json(nullptr);
        auto cells = json::array();
        for (const auto &c : sr.cells) {
            json cj;
            cj["mode"] = to_string(c.mode);
            cj["shots"] = c.shots;
            cj["kl_best"] = detail::finite_or_null(c.kl_best);
            cj["kl_mean"] = detail::finite_or_null(c.kl_mean);
            cj["kl_std"] = detail::finite_or_null(c.kl_std);
            cj["discard_rate"] = c.discard_rate;
            cj["expected_attempts_per_block"] = c.expected_attempts_per_block;
            cj["hqc_estimate"] = c.hqc_estimate;
            cj["error"] = c.error ? json(*c.error) : json(nullptr);
            auto trials = json::array();
            for (const auto &t : c.trials) {
                trials.push_back({{"trial", t.trial}, {"kl", detail::finite_or_null(t.kl)}, {"histogram", to_json(t.histogram)}});
            }
            cj["trials"] = std::move(trials);
            cells.push_back(std::move(cj));
        }
        s["cells"] = std::move(cells);
        structures.push_back(std::move(s));
    }
    j["structures"] = std::move(structures);
    if (r.trend) {
        j["trend"] = {{"slope", r.trend->slope}, {"intercept", r.trend->intercept}, {"mode", to_string(*r.trend_mode)}};
    } else {
        j["trend"] = nullptr;
    }
    return j;
}

template <class Json>
StressReport stress_report_from_json(const Json &j) {
    StressReport r;
    r.schema_version = j.at("schema_version").template get<int>();
    if (r.schema_version != kReportSchemaVersion) {
        throw std::invalid_argument("unsupported report schema version " + std::to_string(r.schema_version));
    }
    if (j.contains("generated_at")) r.generated_at = j.at("generated_at").template get<std::string>();
    r.seed = j.at("seed").template get<uint64_t>();
    r.trials = j.at("trials").template get<int>();
    r.K = j.at("K").template get<int>();
    r.max_attempts = j.at("max_attempts").template get<int>();
    for (const auto &m : j.at("modes")) r.modes.push_back(parse_sample_mode(m.template get<std::string>()));
    for (const auto &s : j.at("structures")) {
        StructureReport sr;
        sr.structure = NeuronStructure::parse(s.at("structure").template get<std::string>());
        sr.resources = resources_from_json(s.at("resources"));
        sr.training_final_kl = s.at("training_final_kl").template get<double>();
        if (!s.at("trained_params").is_null()) sr.trained_params = parameters_from_json(s.at("trained_params"));
        if (!s.at("p_prime_target").is_null()) sr.p_prime_target = distribution_from_json(s.at("p_prime_target"));
        for (const auto &cj : s.at("cells")) {
            CellReport c;
            c.mode = parse_sample_mode(cj.at("mode").template get<std::string>());
            c.shots = cj.at("shots").template get<uint64_t>();
            c.kl_best = detail::number_or_inf(cj.at("kl_best"));
            c.kl_mean = detail::number_or_inf(cj.at("kl_mean"));
            c.kl_std = detail::number_or_inf(cj.at("kl_std"));
            c.discard_rate = cj.at("discard_rate").template get<double>();
            c.expected_attempts_per_block = cj.at("expected_attempts_per_block").template get<double>();
            c.hqc_estimate = cj.at("hqc_estimate").template get<double>();
            if (!cj.at("error").is_null()) c.error = cj.at("error").template get<std::string>();
            for (const auto &tj : cj.at("trials")) {
                c.trials.push_back({tj.at("trial").template get<int>(), detail::number_or_inf(tj.at("kl")),
                                    histogram_from_json(tj.at("histogram"))});
            }
            sr.cells.push_back(std::move(c));
        }
        r.structures.push_back(std::move(sr));
    }
    if (!j.at("trend").is_null()) {
        r.trend = Trend{j.at("trend").at("slope").template get<double>(), j.at("trend").at("intercept").template get<double>()};
        r.trend_mode = parse_sample_mode(j.at("trend").at("mode").template get<std::string>());
    }
    return r;
}

/// CSV: one `trial` row per (structure, mode, trial), one `summary` row per
/// (structure, mode) and one `trend` row. Errored cells still emit their
/// trial rows, with the error text and empty numbers.
inline void write_report_csv(std::ostream &os, const StressReport &r) {
    auto num = [](double v) {
        if (!std::isfinite(v)) return std::string(v > 0 ? "inf" : "nan");
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto quote = [](const std::string &s) {
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    os << "row_type,structure,mode,trial,kl,shots,kept,discarded,kl_best,kl_mean,kl_std,discard_rate,"
          "expected_attempts_per_block,hqc_estimate,slope,intercept,error\n";
    for (const auto &sr : r.structures) {
        const std::string st = quote(sr.structure.to_string());
        for (const auto &c : sr.cells) {
            const std::string mode = to_string(c.mode);
            if (c.error) {
                for (int t = 0; t < r.trials; ++t) {
                    os << "trial," << st << ',' << mode << ',' << t << ",,,,,,,,,,,,," << quote(*c.error) << '\n';
                }
                os << "summary," << st << ',' << mode << ",,,,,,,,,,,,,," << quote(*c.error) << '\n';
                continue;
            }
            for (const auto &t : c.trials) {
                os << "trial," << st << ',' << mode << ',' << t.trial << ',' << num(t.kl) << ',' << t.histogram.total_shots
                   << ',' << t.histogram.kept_shots() << ',' << t.histogram.discarded_shots << ",,,,,,,,,\n";
            }
            os << "summary," << st << ',' << mode << ",,," << c.shots << ",,," << num(c.kl_best) << ',' << num(c.kl_mean)
               << ',' << num(c.kl_std) << ',' << num(c.discard_rate) << ',' << num(c.expected_attempts_per_block) << ','
               << num(c.hqc_estimate) << ",,,\n";
        }
    }
    os << "trend,,";
    if (r.trend) os << to_string(*r.trend_mode) << ",,,,,,,,,,,," << num(r.trend->slope) << ',' << num(r.trend->intercept) << ",\n";
    else os << ",,,,,,,,,,,,,,\n";
}

}  // namespace qnbm
