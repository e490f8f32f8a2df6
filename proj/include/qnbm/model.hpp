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

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distribution.hpp"
#include "neuron.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "statevector.hpp"

namespace qnbm {

/// Layer sizes (N_in, N_hid..., N_out). A middle entry of 0 means "no hidden
/// layer", so `1,0,2` and `1,2` describe the same network.
struct NeuronStructure {
    std::vector<int> layer_sizes;

    int n_in() const { return layer_sizes.front(); }
    int n_out() const { return layer_sizes.back(); }
    bool has_hidden_layers() const {
        for (size_t i = 1; i + 1 < layer_sizes.size(); ++i) {
            if (layer_sizes[i] > 0) return true;
        }
        return false;
    }
    /// All neurons plus one shared ancilla.
    int total_qubits() const { return std::accumulate(layer_sizes.begin(), layer_sizes.end(), 0) + 1; }

    void validate() const {
        if (layer_sizes.size() < 2) throw std::invalid_argument("structure needs at least input and output layers");
        for (int s : layer_sizes) {
            if (s < 0) throw std::invalid_argument("structure: negative layer size");
        }
        if (n_in() < 1) throw std::invalid_argument("structure: N_in must be >= 1");
        if (n_out() < 1) throw std::invalid_argument("structure: N_out must be >= 1");
    }

    /// Validation for execution: zero hidden layers only.
    void validate_executable() const {
        validate();
        if (has_hidden_layers()) throw std::invalid_argument("hidden layers unsupported");
    }

    int input_qubit(int i) const { return i; }
    int output_qubit(int j) const { return total_qubits() - 1 - n_out() + j; }
    int ancilla() const { return total_qubits() - 1; }
    std::vector<int> output_qubits() const {
        std::vector<int> q(static_cast<size_t>(n_out()));
        for (int j = 0; j < n_out(); ++j) q[static_cast<size_t>(j)] = output_qubit(j);
        return q;
    }

    /// "1,0,2"
    std::string to_string() const {
        std::string s;
        for (size_t i = 0; i < layer_sizes.size(); ++i) s += (i ? "," : "") + std::to_string(layer_sizes[i]);
        return s;
    }

    static NeuronStructure parse(std::string_view text) {
        NeuronStructure out;
        std::string token;
        std::stringstream ss{std::string(text)};
        while (std::getline(ss, token, ',')) {
            size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(token, &used);
            } catch (const std::exception &) {
                throw std::invalid_argument("structure: '" + token + "' is not an integer");
            }
            if (used != token.size()) throw std::invalid_argument("structure: '" + token + "' is not an integer");
            out.layer_sizes.push_back(v);
        }
        out.validate();
        return out;
    }

    friend bool operator==(const NeuronStructure &, const NeuronStructure &) = default;
};

/// Weights (one row per output neuron, one entry per input neuron) and one
/// bias per output neuron, all strictly inside (-1, 1).
struct ParameterSet {
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;

    static ParameterSet zeros(const NeuronStructure &s) {
        return {std::vector<std::vector<double>>(static_cast<size_t>(s.n_out()),
                                                 std::vector<double>(static_cast<size_t>(s.n_in()), 0.0)),
                std::vector<double>(static_cast<size_t>(s.n_out()), 0.0)};
    }

    static ParameterSet random(const NeuronStructure &s, Rng &rng, double lo = -1.0, double hi = 1.0) {
        auto p = zeros(s);
        for (auto &row : p.weights) {
            for (auto &w : row) w = rng.uniform_open(lo, hi);
        }
        for (auto &b : p.biases) b = rng.uniform_open(lo, hi);
        return p;
    }

    size_t size() const { return biases.size() + (weights.empty() ? 0 : weights.size() * weights.front().size()); }

    void validate(const NeuronStructure &s) const {
        if (weights.size() != static_cast<size_t>(s.n_out()) || biases.size() != static_cast<size_t>(s.n_out())) {
            throw std::invalid_argument("parameter dimensions do not match structure " + s.to_string());
        }
        for (const auto &row : weights) {
            if (row.size() != static_cast<size_t>(s.n_in())) {
                throw std::invalid_argument("parameter dimensions do not match structure " + s.to_string());
            }
            for (double w : row) {
                if (!std::isfinite(w) || w <= -1.0 || w >= 1.0) throw std::invalid_argument("weight outside (-1, 1)");
            }
        }
        for (double b : biases) {
            if (!std::isfinite(b) || b <= -1.0 || b >= 1.0) throw std::invalid_argument("bias outside (-1, 1)");
        }
    }

    /// {w_1..w_n (row-major by output neuron), b_1..b_k}
    std::vector<double> flatten() const {
        std::vector<double> v;
        v.reserve(size());
        for (const auto &row : weights) v.insert(v.end(), row.begin(), row.end());
        v.insert(v.end(), biases.begin(), biases.end());
        return v;
    }

    static ParameterSet unflatten(const NeuronStructure &s, std::span<const double> v) {
        auto p = zeros(s);
        if (v.size() != p.size()) throw std::invalid_argument("flat parameter vector has the wrong length");
        size_t k = 0;
        for (auto &row : p.weights) {
            for (auto &w : row) w = v[k++];
        }
        for (auto &b : p.biases) b = v[k++];
        return p;
    }

    friend bool operator==(const ParameterSet &, const ParameterSet &) = default;
};

inline nlohmann::ordered_json to_json(const ParameterSet &p) {
    nlohmann::ordered_json j;
    j["weights"] = p.weights;
    j["biases"] = p.biases;
    return j;
}

template <class Json>
ParameterSet parameters_from_json(const Json &j) {
    ParameterSet p;
    p.weights = j.at("weights").template get<std::vector<std::vector<double>>>();
    p.biases = j.at("biases").template get<std::vector<double>>();
    return p;
}

/// A composed network: input Hadamards followed by one RUS block per output
/// neuron, all sharing the last qubit as ancilla.
struct QnbmCircuit {
    int n_qubits = 0;
    std::vector<GateOp> preparation;
    std::vector<RusBlock> blocks;
    std::vector<int> output_qubits;

    StateVector prepared_state() const {
        StateVector s(n_qubits);
        for (const auto &op : preparation) s.apply(op);
        return s;
    }
};

inline QnbmCircuit build_qnbm(const NeuronStructure &structure, const ParameterSet &params) {
    structure.validate_executable();
    params.validate(structure);
    QnbmCircuit c;
    c.n_qubits = structure.total_qubits();
    for (int i = 0; i < structure.n_in(); ++i) c.preparation.emplace_back(gate::H{structure.input_qubit(i)});
    std::vector<int> inputs(static_cast<size_t>(structure.n_in()));
    std::iota(inputs.begin(), inputs.end(), 0);
    for (int j = 0; j < structure.n_out(); ++j) {
        RusBlock b{inputs, structure.ancilla(), structure.output_qubit(j), params.weights[static_cast<size_t>(j)],
                   params.biases[static_cast<size_t>(j)]};
        b.validate();
        c.blocks.push_back(std::move(b));
    }
    c.output_qubits = structure.output_qubits();
    return c;
}

struct PostselectedResult {
    Distribution distribution;
    /// Probability that every block succeeds on its first attempt.
    double acceptance = 1.0;
};

/// Every block once with the ancilla projected onto 0 after each: the exact
/// limit of post-selected sampling.
inline PostselectedResult postselected_model(const NeuronStructure &structure, const ParameterSet &params) {
    const auto circuit = build_qnbm(structure, params);
    StateVector state = circuit.prepared_state();
    double acceptance = 1.0;
    for (const auto &block : circuit.blocks) {
        auto [p, next] = rus_success_projection(std::move(state), block);
        acceptance *= p;
        state = std::move(next);
    }
    return {state.marginal(circuit.output_qubits), acceptance};
}

inline Distribution exact_distribution_postselected(const NeuronStructure &structure, const ParameterSet &params) {
    return postselected_model(structure, params).distribution;
}

constexpr size_t kDefaultBranchCap = 1'000'000;

struct ClassicalControlResult {
    /// Output marginal conditioned on every block eventually succeeding.
    Distribution distribution;
    /// Total weight of branches where some block exhausted its attempts.
    double discarded_weight = 0.0;
    /// Leaves of the enumeration tree (kept + discarded).
    size_t branches = 0;
    /// Per block, the expected number of attempts per shot (0 for shots that
    /// never reach the block).
    std::vector<double> expected_attempts;
};

/// Exact mixture over every attempt-count sequence (k_1, ..., k_Nout) with
/// k_j <= max_attempts, propagating the recovered failure states.
inline ClassicalControlResult exact_classical_control(const NeuronStructure &structure, const ParameterSet &params,
                                                      int max_attempts, size_t branch_cap = kDefaultBranchCap) {
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    const auto circuit = build_qnbm(structure, params);
    const size_t n_blocks = circuit.blocks.size();
    const size_t out_dim = size_t{1} << circuit.output_qubits.size();

    ClassicalControlResult result;
    result.expected_attempts.assign(n_blocks, 0.0);
    std::vector<double> accumulated(out_dim, 0.0);
    double kept = 0.0;
    size_t kept_leaves = 0;
    std::optional<Distribution> single_leaf;

    auto leaf = [&] {
        if (++result.branches > branch_cap) {
            throw std::length_error("classical-control enumeration exceeded the branch cap of " + std::to_string(branch_cap));
        }
    };

    // Depth-first over (block, attempt); `weight` is the path probability.
    auto visit = [&](auto &&self, StateVector state, size_t block, int attempt, double weight) -> void {
        if (block == n_blocks) {
            leaf();
            auto marginal = state.marginal(circuit.output_qubits);
            for (size_t i = 0; i < out_dim; ++i) accumulated[i] += weight * marginal[i];
            kept += weight;
            if (++kept_leaves == 1) single_leaf = std::move(marginal);
            return;
        }
        auto branches = rus_attempt_branches(std::move(state), circuit.blocks[block]);
        if (branches.success) {
            const double w = weight * branches.success->probability;
            result.expected_attempts[block] += w * attempt;
            self(self, std::move(branches.success->state), block + 1, 1, w);
        }
        if (branches.failure) {
            const double w = weight * branches.failure->probability;
            if (attempt < max_attempts) {
                self(self, std::move(branches.failure->state), block, attempt + 1, w);
            } else {
                leaf();
                result.expected_attempts[block] += w * attempt;
                result.discarded_weight += w;
            }
        }
    };
    visit(visit, circuit.prepared_state(), 0, 1, 1.0);

    if (kept_leaves == 0) throw ZeroProbabilityBranch("every classical-control branch exhausted its attempts");
    const int n_bits = static_cast<int>(circuit.output_qubits.size());
    // A single surviving path needs no reweighting; returning it directly keeps
    // max_attempts == 1 bit-identical to the post-selected distribution.
    result.distribution = kept_leaves == 1 ? *single_leaf : Distribution::from_weights(n_bits, std::move(accumulated));
    return result;
}

inline Distribution exact_distribution_classical_control(const NeuronStructure &structure, const ParameterSet &params,
                                                         int max_attempts = kDefaultMaxAttempts) {
    return exact_classical_control(structure, params, max_attempts).distribution;
}

enum class SampleMode { classical_control, post_selection };

inline std::string to_string(SampleMode m) {
    return m == SampleMode::classical_control ? "classical_control" : "post_selection";
}

inline SampleMode parse_sample_mode(std::string_view s) {
    if (s == "classical_control" || s == "cc") return SampleMode::classical_control;
    if (s == "post_selection" || s == "ps") return SampleMode::post_selection;
    throw std::invalid_argument("unknown sampling mode '" + std::string(s) + "'");
}

struct SampleOptions {
    int max_attempts = kDefaultMaxAttempts;
    int jobs = 1;
};

namespace detail {

constexpr uint64_t kShotChunk = 1024;

/// Born sample of a full basis index, reduced to the output-qubit bits.
inline uint64_t sample_outputs(const StateVector &state, const std::vector<int> &outputs, Rng &rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    size_t index = state.dim() - 1;
    for (size_t i = 0; i < state.dim(); ++i) {
        cumulative += std::norm(state[i]);
        if (u < cumulative) {
            index = i;
            break;
        }
    }
    const int n = state.n_qubits();
    uint64_t key = 0;
    for (int q : outputs) key = (key << 1) | ((index >> (n - 1 - q)) & 1);
    return key;
}

}  // namespace detail

/// Shot sampling. Classical control runs the RUS loop per block and discards
/// only attempt-exhausted shots; post-selection runs every block exactly once
/// and discards any shot with a nonzero ancilla outcome.
///
/// Shots are split into fixed chunks, each with its own stream derived from
/// one draw of `rng`, so the histogram does not depend on `options.jobs`.
inline Histogram sample(const NeuronStructure &structure, const ParameterSet &params, SampleMode mode, uint64_t shots,
                        Rng &rng, const SampleOptions &options = {}) {
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
    if (options.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    const auto circuit = build_qnbm(structure, params);
    const StateVector prepared = circuit.prepared_state();
    const int n_out = static_cast<int>(circuit.output_qubits.size());
    const uint64_t master = rng.next_u64();

    std::vector<std::vector<GateOp>> unitaries;
    for (const auto &b : circuit.blocks) unitaries.push_back(rus_unitary_ops(b));

    const uint64_t n_chunks = (shots + detail::kShotChunk - 1) / detail::kShotChunk;
    std::vector<Histogram> partial(n_chunks, Histogram(n_out));

    parallel_for(n_chunks, options.jobs, [&](size_t chunk) {
        Rng local = Rng::derive(master, chunk);
        Histogram &h = partial[chunk];
        const uint64_t begin = chunk * detail::kShotChunk;
        const uint64_t end = std::min(shots, begin + detail::kShotChunk);
        ClassicalRegisters registers(circuit.blocks.size() * static_cast<size_t>(options.max_attempts));
        for (uint64_t shot = begin; shot < end; ++shot) {
            ++h.total_shots;
            registers.clear();
            StateVector state = prepared;
            bool keep = true;
            if (mode == SampleMode::classical_control) {
                for (const auto &block : circuit.blocks) {
                    auto r = execute_rus_trajectory(std::move(state), block, local, options.max_attempts, registers);
                    state = std::move(r.state);
                    if (!r.succeeded) {
                        keep = false;
                        break;
                    }
                }
            } else {
                for (size_t b = 0; b < circuit.blocks.size(); ++b) {
                    detail::apply_all(state, unitaries[b]);
                    execute(state, gate::MeasureToRegister{circuit.blocks[b].ancilla}, registers, local);
                    if (registers.last() == 1) {
                        keep = false;
                        // Reset so the shared ancilla starts the next block in |0>.
                        state.apply(gate::X{circuit.blocks[b].ancilla});
                    }
                }
            }
            if (!keep) {
                ++h.discarded_shots;
                continue;
            }
            ++h.counts[detail::sample_outputs(state, circuit.output_qubits, local)];
        }
    });

    Histogram total(n_out);
    for (const auto &h : partial) total.merge(h);
    return total;
}

}  // namespace qnbm
