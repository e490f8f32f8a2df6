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

// Command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 usage or validation error.

#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qnbm.hpp"

namespace qnbm::cli {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Default directory for output files when --out is not given.
constexpr const char *kOutputDirEnv = "QNBM_OUTPUT_DIR";

/// Validation failure; `field` names the offending option.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string &field, const std::string &what) : std::runtime_error(field + ": " + what) {}
};

struct RunConfig {
    std::string structure = "1,0,2";
    std::vector<std::string> structures = {"1,0,2", "2,0,3", "3,0,4"};
    std::string mode = "classical_control";
    std::vector<std::string> modes = {"classical_control", "post_selection"};
    int K = kDefaultK;
    int max_attempts = kDefaultMaxAttempts;
    int trials = kDefaultTrials;
    uint64_t seed = 0;
    int iterations = 500;
    double learning_rate = TrainingConfig{}.learning_rate;
    double fd_delta = TrainingConfig{}.fd_delta;
    std::string estimator = "finite_difference";
    int cardinality = 1;
    int64_t shots = 0;
    int jobs = 1;
    std::string params_path;
    std::string pricing_path;
    std::string out;
    std::string format = "json";
    bool reproducible = false;
};

namespace detail {

inline NeuronStructure parse_structure_field(const std::string &field, const std::string &text, bool executable = true) {
    NeuronStructure s;
    try {
        s = NeuronStructure::parse(text);
    } catch (const std::exception &e) {
        throw ConfigError(field, e.what());
    }
    if (executable && s.has_hidden_layers()) throw ConfigError(field, "hidden layers unsupported");
    if (s.total_qubits() > kDefaultMaxQubits) throw ConfigError(field, "structure needs more than 24 qubits");
    return s;
}

inline SampleMode parse_mode_field(const std::string &field, const std::string &text) {
    try {
        return parse_sample_mode(text);
    } catch (const std::exception &e) {
        throw ConfigError(field, e.what());
    }
}

inline void require(bool ok, const std::string &field, const std::string &what) {
    if (!ok) throw ConfigError(field, what);
}

inline nlohmann::ordered_json read_json_file(const std::string &field, const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot open '" + path + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const std::exception &e) {
        throw ConfigError(field, std::string("invalid JSON: ") + e.what());
    }
}

/// Accepts a bare {"weights", "biases"} object or a training trace.
inline ParameterSet load_params(const std::string &path, const NeuronStructure &structure) {
    auto j = read_json_file("--params", path);
    if (j.contains("final_params")) j = j.at("final_params");
    ParameterSet p;
    try {
        p = parameters_from_json(j);
        p.validate(structure);
    } catch (const std::exception &e) {
        throw ConfigError("--params", e.what());
    }
    return p;
}

inline std::filesystem::path output_path(const RunConfig &c, const std::string &default_name) {
    if (!c.out.empty()) return c.out;
    const char *dir = std::getenv(kOutputDirEnv);
    return std::filesystem::path(dir && *dir ? dir : ".") / default_name;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline TrainingConfig training_config(const RunConfig &c) {
    TrainingConfig t;
    t.iterations = c.iterations;
    t.learning_rate = c.learning_rate;
    t.fd_delta = c.fd_delta;
    t.seed = c.seed;
    try {
        t.estimator = parse_estimator(c.estimator);
    } catch (const std::exception &e) {
        throw ConfigError("--estimator", e.what());
    }
    return t;
}

inline void validate_common(const RunConfig &c) {
    require(c.iterations >= 1, "--iterations", "must be >= 1");
    require(c.learning_rate > 0.0, "--lr", "must be > 0");
    require(c.fd_delta > 0.0, "--fd-delta", "must be > 0");
    require(c.K >= 1, "--K", "must be >= 1");
    require(c.max_attempts >= 1, "--max-attempts", "must be >= 1");
    require(c.trials >= 1, "--trials", "must be >= 1");
    require(c.shots >= 0, "--shots", "must be >= 1");
    require(c.jobs >= 1, "--jobs", "must be >= 1");
    require(c.format == "json" || c.format == "csv", "--format", "must be 'json' or 'csv'");
}

inline std::string dump(const nlohmann::ordered_json &j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline int cmd_train(const RunConfig &c, std::ostream &out) {
    detail::validate_common(c);
    const auto structure = detail::parse_structure_field("--structure", c.structure);
    detail::require(c.cardinality >= 0 && c.cardinality <= structure.n_out(), "--cardinality", "must be in [0, N_out]");
    const auto config = detail::training_config(c);
    const auto target = cardinality_distribution({structure.n_out(), c.cardinality});
    const auto trace = train(structure, target, config);

    nlohmann::ordered_json j;
    j["structure"] = structure.to_string();
    if (!c.reproducible) j["generated_at"] = detail::utc_timestamp();
    j["seed"] = c.seed;
    j["iterations"] = config.iterations;
    j["learning_rate"] = config.learning_rate;
    j["estimator"] = to_string(config.estimator);
    j["target"] = to_json(target);
    const auto trace_json = to_json(trace);
    for (const auto &[k, v] : trace_json.items()) j[k] = v;

    const auto path = detail::output_path(c, "trace.json");
    detail::write_file(path, detail::dump(j));
    auto csv_path = path;
    csv_path.replace_extension(".csv");
    std::ostringstream csv;
    write_loss_csv(csv, trace);
    detail::write_file(csv_path, csv.str());

    char buf[128];
    std::snprintf(buf, sizeof buf, "final KL %.6g\n", trace.final_loss());
    out << buf << "trace: " << path.string() << "\nloss curve: " << csv_path.string() << "\n";
    return kExitOk;
}

inline int cmd_sample(const RunConfig &c, std::ostream &out) {
    detail::validate_common(c);
    const auto structure = detail::parse_structure_field("--structure", c.structure);
    const auto mode = detail::parse_mode_field("--mode", c.mode);
    detail::require(!c.params_path.empty(), "--params", "required");
    const auto params = detail::load_params(c.params_path, structure);
    const uint64_t shots = c.shots > 0 ? static_cast<uint64_t>(c.shots) : shot_requirements(structure.n_out(), c.K, mode);

    Rng rng(c.seed);
    const auto h = sample(structure, params, mode, shots, rng, {c.max_attempts, c.jobs});

    nlohmann::ordered_json j = to_json(h);
    j["structure"] = structure.to_string();
    j["mode"] = to_string(mode);
    j["seed"] = c.seed;
    j["max_attempts"] = c.max_attempts;
    j["bit_order"] = "output neuron 0 is the leftmost character";
    if (!c.reproducible) j["generated_at"] = detail::utc_timestamp();
    const auto path = detail::output_path(c, "histogram.json");
    detail::write_file(path, detail::dump(j));
    out << "shots " << h.total_shots << " kept " << h.kept_shots() << " discarded " << h.discarded_shots << "\n"
        << "histogram: " << path.string() << "\n";
    return kExitOk;
}

inline int cmd_stress(const RunConfig &c, std::ostream &out) {
    detail::validate_common(c);
    std::vector<NeuronStructure> structures;
    for (const auto &s : c.structures) structures.push_back(detail::parse_structure_field("--structures", s));
    std::vector<SampleMode> modes;
    for (const auto &m : c.modes) modes.push_back(detail::parse_mode_field("--modes", m));
    detail::require(!modes.empty(), "--modes", "at least one mode required");

    StressConfig config;
    config.training = detail::training_config(c);
    config.K = c.K;
    config.max_attempts = c.max_attempts;
    config.cardinality = c.cardinality;
    config.seed = c.seed;
    config.jobs = c.jobs;
    config.shots_override = static_cast<uint64_t>(c.shots);
    if (!c.pricing_path.empty()) {
        try {
            config.pricing = pricing_from_json(detail::read_json_file("--pricing", c.pricing_path));
        } catch (const ConfigError &) {
            throw;
        } catch (const std::exception &e) {
            throw ConfigError("--pricing", e.what());
        }
    }
    for (const auto &s : structures) {
        detail::require(c.cardinality >= 0 && c.cardinality <= s.n_out(), "--cardinality", "must be in [0, N_out]");
    }

    auto report = run_stress_test(structures, modes, c.trials, config, [&](const std::string &line) { out << line << "\n"; });
    if (!c.reproducible) report.generated_at = detail::utc_timestamp();

    std::string content;
    if (c.format == "json") {
        content = detail::dump(to_json(report));
    } else {
        std::ostringstream csv;
        write_report_csv(csv, report);
        content = csv.str();
    }
    const auto path = detail::output_path(c, "stress_report." + c.format);
    detail::write_file(path, content);
    out << "report: " << path.string() << "\n";
    if (report.trend) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "trend (%s): y = %.6g x + %.6g\n", to_string(*report.trend_mode).c_str(),
                      report.trend->slope, report.trend->intercept);
        out << buf;
    }

    size_t cells = 0, failed = 0;
    for (const auto &sr : report.structures) {
        for (const auto &cell : sr.cells) {
            ++cells;
            failed += cell.error.has_value();
        }
    }
    return cells > 0 && failed == cells ? kExitRuntime : kExitOk;
}

inline int cmd_resources(const RunConfig &c, std::ostream &out) {
    detail::validate_common(c);
    const auto structure = detail::parse_structure_field("structure", c.structure);
    PricingSpec pricing;
    if (!c.pricing_path.empty()) {
        try {
            pricing = pricing_from_json(detail::read_json_file("--pricing", c.pricing_path));
        } catch (const ConfigError &) {
            throw;
        } catch (const std::exception &e) {
            throw ConfigError("--pricing", e.what());
        }
    }
    const auto census = gate_census(structure, c.max_attempts);
    // Without trained parameters, attempts follow the planning rate p = 1/2.
    double attempts = capped_geometric_mean(0.5, c.max_attempts);
    std::string attempts_source = "planning p=1/2";
    if (!c.params_path.empty()) {
        const auto params = detail::load_params(c.params_path, structure);
        const auto cc = exact_classical_control(structure, params, c.max_attempts);
        double sum = 0.0;
        for (double e : cc.expected_attempts) sum += e;
        attempts = sum / static_cast<double>(cc.expected_attempts.size());
        attempts_source = "exact, from --params";
    }
    const uint64_t cc_shots = shot_requirements(structure.n_out(), c.K, SampleMode::classical_control);
    const uint64_t ps_shots = shot_requirements(structure.n_out(), c.K, SampleMode::post_selection);

    char buf[256];
    out << "structure                 " << structure.to_string() << "\n";
    auto row = [&](const char *name, double v) {
        std::snprintf(buf, sizeof buf, "%-26s%g\n", name, v);
        out << buf;
    };
    row("qubits", census.qubits);
    row("parameterized_2q", census.parameterized_2q);
    row("parameterized_1q", census.parameterized_1q);
    row("fixed_1q", census.fixed_1q);
    row("fixed_2q", census.fixed_2q);
    row("input_hadamards", census.input_hadamards);
    row("mid_circuit_measurements", census.mid_circuit_measurements);
    row("classical_registers", census.classical_registers);
    row("final_measurements", census.final_measurements);
    row("cc_shots", static_cast<double>(cc_shots));
    row("ps_shots", static_cast<double>(ps_shots));
    std::snprintf(buf, sizeof buf, "%-26s%.4f (%s)\n", "expected_attempts", attempts, attempts_source.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "%-26s%.2f\n", "cc_hqc", hqc_estimate(census, cc_shots, attempts, pricing));
    out << buf;
    std::snprintf(buf, sizeof buf, "%-26s%.2f\n", "ps_hqc", hqc_estimate(census, ps_shots, 1.0, pricing));
    out << buf;
    return kExitOk;
}

/// Entry point shared by the `qnbm` binary and the tests.
inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Quantum neuron Born machine simulator, trainer and stress-test harness"};
    app.require_subcommand(1);
    RunConfig c;

    auto add_structure = [&](CLI::App *sub) {
        sub->add_option("--structure", c.structure, "Neuron structure Nin,Nhid,Nout (e.g. 1,0,2)");
    };
    auto add_training = [&](CLI::App *sub) {
        sub->add_option("--iterations", c.iterations, "Training iterations");
        sub->add_option("--lr", c.learning_rate, "Learning rate");
        sub->add_option("--fd-delta", c.fd_delta, "Finite-difference step");
        sub->add_option("--estimator", c.estimator, "finite_difference | parameter_shift");
        sub->add_option("--cardinality", c.cardinality, "Target cardinality c");
    };
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--seed", c.seed, "Master seed");
        sub->add_option("--out", c.out, std::string("Output file (default: $") + kOutputDirEnv + " or .)");
        sub->add_flag("--reproducible", c.reproducible, "Omit timestamps so output is byte-identical per seed");
        sub->add_option("--jobs", c.jobs, "Worker threads");
        sub->add_option("--K", c.K, "Shots per bitstring (shot budget constant)");
        sub->add_option("--max-attempts", c.max_attempts, "RUS attempt cap");
    };

    auto *train_cmd = app.add_subcommand("train", "Train a model against a cardinality target");
    add_structure(train_cmd);
    add_training(train_cmd);
    add_common(train_cmd);

    auto *sample_cmd = app.add_subcommand("sample", "Sample a trained model");
    add_structure(sample_cmd);
    add_common(sample_cmd);
    sample_cmd->add_option("--params", c.params_path, "Parameter file (params JSON or training trace)");
    sample_cmd->add_option("--mode", c.mode, "classical_control | post_selection");
    sample_cmd->add_option("--shots", c.shots, "Shot count (default: shot budget for the mode)");

    auto *stress_cmd = app.add_subcommand("stress", "Run the stress-test sweep");
    stress_cmd->add_option("--structures", c.structures, "Structures to sweep")->delimiter(';');
    stress_cmd->add_option("--modes", c.modes, "Sampling modes")->delimiter(',');
    stress_cmd->add_option("--trials", c.trials, "Sampling trials per cell");
    stress_cmd->add_option("--format", c.format, "json | csv");
    stress_cmd->add_option("--shots", c.shots, "Override shot budget");
    stress_cmd->add_option("--pricing", c.pricing_path, "Pricing JSON");
    add_training(stress_cmd);
    add_common(stress_cmd);

    auto *res_cmd = app.add_subcommand("resources", "Print gate census, shot budgets and cost estimates");
    res_cmd->add_option("structure", c.structure, "Neuron structure Nin,Nhid,Nout")->required();
    res_cmd->add_option("--pricing", c.pricing_path, "Pricing JSON");
    res_cmd->add_option("--params", c.params_path, "Trained parameters for exact attempt counts");
    add_common(res_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp &e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(c, out);
        if (*sample_cmd) return cmd_sample(c, out);
        if (*stress_cmd) return cmd_stress(c, out);
        return cmd_resources(c, out);
    } catch (const ConfigError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace qnbm::cli
