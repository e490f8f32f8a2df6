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

// Repeat-until-success (RUS) neuron: one non-linear activation of an output
// qubit controlled by an input register, heralded by an ancilla measurement.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "random.hpp"
#include "statevector.hpp"

namespace qnbm {

/// Controlled rotations use RY(kRotationScale * w). With this factor a
/// successful attempt rotates the output by RY(2 q(theta)) where
/// q(theta) = arctan(tan^2(2 theta)).
constexpr double kRotationScale = 4.0;

constexpr int kDefaultMaxAttempts = 6;

struct RusBlock {
    std::vector<int> input_qubits;
    int ancilla = -1;
    int output_qubit = -1;
    std::vector<double> weights;
    double bias = 0.0;

    void validate() const {
        if (weights.size() != input_qubits.size()) throw std::invalid_argument("RUS block: weight count != input count");
        std::vector<int> all = input_qubits;
        all.push_back(ancilla);
        all.push_back(output_qubit);
        for (size_t i = 0; i < all.size(); ++i) {
            if (all[i] < 0) throw std::invalid_argument("RUS block: negative qubit index");
            for (size_t j = i + 1; j < all.size(); ++j) {
                if (all[i] == all[j]) throw std::invalid_argument("RUS block: qubit indices must be distinct");
            }
        }
        auto in_range = [](double v) { return std::isfinite(v) && v > -1.0 && v < 1.0; };
        for (double w : weights) {
            if (!in_range(w)) throw std::invalid_argument("RUS block: weight outside (-1, 1)");
        }
        if (!in_range(bias)) throw std::invalid_argument("RUS block: bias outside (-1, 1)");
    }
};

struct RusResult {
    StateVector state;
    int attempts = 0;
    bool succeeded = false;
};

/// arctan(tan^2(2 theta)), evaluated as atan2(sin^2, cos^2) so the pole of
/// tan maps onto its limit pi/2.
inline double activation(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("activation: non-finite angle");
    const double s = std::sin(2 * theta), c = std::cos(2 * theta);
    return std::atan2(s * s, c * c);
}

/// theta = sum_i w_i x_i + b for a bitstring (leftmost char = first input).
inline double preactivation(const RusBlock &block, std::string_view input_bits) {
    if (input_bits.size() != block.weights.size()) throw std::invalid_argument("preactivation: bit count != weight count");
    double theta = block.bias;
    for (size_t i = 0; i < input_bits.size(); ++i) {
        const char c = input_bits[i];
        if (c != '0' && c != '1') throw std::invalid_argument("preactivation: non-binary input");
        if (c == '1') theta += block.weights[i];
    }
    return theta;
}

/// Same, with the input given as an integer whose most significant of
/// `weights.size()` bits is the first input.
inline double preactivation(const RusBlock &block, uint64_t input_index) {
    const size_t n = block.weights.size();
    double theta = block.bias;
    for (size_t i = 0; i < n; ++i) {
        if ((input_index >> (n - 1 - i)) & 1) theta += block.weights[i];
    }
    return theta;
}

/// Single-attempt success probability on a basis input: 1 - sin^2(4 theta)/2.
inline double success_probability(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("success_probability: non-finite angle");
    const double s = std::sin(4 * theta);
    return 1.0 - 0.5 * s * s;
}

/// The unitary part of one attempt (everything before the ancilla measurement).
inline std::vector<GateOp> rus_unitary_ops(const RusBlock &block) {
    block.validate();
    std::vector<GateOp> ops;
    ops.reserve(2 * block.input_qubits.size() + 3);
    for (size_t i = 0; i < block.input_qubits.size(); ++i) {
        ops.emplace_back(gate::ControlledRY{block.input_qubits[i], block.ancilla, kRotationScale * block.weights[i]});
    }
    ops.emplace_back(gate::RY{block.ancilla, kRotationScale * block.bias});
    ops.emplace_back(gate::ControlledY{block.ancilla, block.output_qubit});
    ops.emplace_back(gate::RY{block.ancilla, -kRotationScale * block.bias});
    for (size_t i = block.input_qubits.size(); i-- > 0;) {
        ops.emplace_back(gate::ControlledRY{block.input_qubits[i], block.ancilla, -kRotationScale * block.weights[i]});
    }
    return ops;
}

/// Full gate sequence of one attempt: 2n ControlledRY, 2 RY, 1 ControlledY,
/// then the ancilla measurement (2n + 4 ops for n inputs).
inline std::vector<GateOp> build_rus_block(const RusBlock &block) {
    auto ops = rus_unitary_ops(block);
    ops.emplace_back(gate::MeasureToRegister{block.ancilla});
    return ops;
}

namespace detail {
inline void apply_all(StateVector &state, const std::vector<GateOp> &ops) {
    for (const auto &op : ops) state.apply(op);
}
inline void require_clean_ancilla(const StateVector &state, int ancilla) {
    if (state.probability_of_one(ancilla) > 1e-12) throw std::invalid_argument("RUS block: ancilla is not in |0>");
}
}  // namespace detail

/// Stochastic repeat-until-success loop. Each attempt's outcome is written to
/// `registers`; a failure is followed by the recovery (X on the ancilla,
/// RY(pi/2) on the output) and another attempt, up to `max_attempts`.
/// Exhaustion is reported through `succeeded == false`, never thrown.
inline RusResult execute_rus_trajectory(StateVector state, const RusBlock &block, Rng &rng, int max_attempts,
                                        ClassicalRegisters &registers) {
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    const auto ops = rus_unitary_ops(block);
    const GateOp measure = gate::MeasureToRegister{block.ancilla};
    const GateOp recover = gate::ConditionalRecovery{block.ancilla, block.output_qubit};
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        detail::apply_all(state, ops);
        execute(state, measure, registers, rng);
        if (registers.last() == 0) return {std::move(state), attempt, true};
        execute(state, recover, registers, rng);
    }
    return {std::move(state), max_attempts, false};
}

inline RusResult execute_rus_trajectory(StateVector state, const RusBlock &block, Rng &rng,
                                        int max_attempts = kDefaultMaxAttempts) {
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    ClassicalRegisters registers(static_cast<size_t>(max_attempts));
    return execute_rus_trajectory(std::move(state), block, rng, max_attempts, registers);
}

/// Exact success branch of one attempt: block unitaries, then the ancilla
/// projected onto 0 and renormalized. Returns (probability, state).
inline std::pair<double, StateVector> rus_success_projection(StateVector state, const RusBlock &block) {
    detail::require_clean_ancilla(state, block.ancilla);
    detail::apply_all(state, rus_unitary_ops(block));
    const double p = state.project(block.ancilla, 0);
    return {p, std::move(state)};
}

struct WeightedState {
    double probability;
    StateVector state;
};

/// Both outcomes of a single attempt. `failure` already has the recovery
/// applied, so it is ready for the next attempt. Empty branches are nullopt.
struct AttemptBranches {
    std::optional<WeightedState> success;
    std::optional<WeightedState> failure;
};

inline AttemptBranches rus_attempt_branches(StateVector state, const RusBlock &block) {
    detail::require_clean_ancilla(state, block.ancilla);
    detail::apply_all(state, rus_unitary_ops(block));
    AttemptBranches out;
    const double p1 = state.probability_of_one(block.ancilla);
    if (p1 > StateVector::kZeroProbability) {
        StateVector failed = state;
        const double p = failed.project(block.ancilla, 1);
        failed.apply(gate::X{block.ancilla});
        failed.apply(gate::RY{block.output_qubit, kRecoveryAngle});
        out.failure = WeightedState{p, std::move(failed)};
    }
    if (1.0 - p1 > StateVector::kZeroProbability) {
        const double p = state.project(block.ancilla, 0);
        out.success = WeightedState{p, std::move(state)};
    }
    return out;
}

}  // namespace qnbm
