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
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "distribution.hpp"
#include "random.hpp"

namespace qnbm {

using amplitude = std::complex<double>;

constexpr int kDefaultMaxQubits = 24;

/// Projection onto a branch whose Born probability is (numerically) zero.
struct ZeroProbabilityBranch : std::domain_error {
    using std::domain_error::domain_error;
};

/// Finite classical bit storage for mid-circuit outcomes. Writing past
/// `capacity` throws, mirroring a device that runs out of classical registers.
class ClassicalRegisters {
public:
    explicit ClassicalRegisters(size_t capacity) : capacity_(capacity) { bits_.reserve(capacity); }

    size_t capacity() const { return capacity_; }
    size_t size() const { return bits_.size(); }

    /// Appends `bit`; returns its slot.
    size_t write(int bit) {
        if (bits_.size() >= capacity_) {
            throw std::length_error("classical register capacity exhausted (" + std::to_string(capacity_) + " bits)");
        }
        bits_.push_back(static_cast<uint8_t>(bit != 0));
        return bits_.size() - 1;
    }
    int read(size_t slot) const { return bits_.at(slot); }
    int last() const {
        if (bits_.empty()) throw std::out_of_range("no classical bits written");
        return bits_.back();
    }
    void clear() { bits_.clear(); }

private:
    size_t capacity_;
    std::vector<uint8_t> bits_;
};

// Gate alphabet of the RUS circuits.
namespace gate {
struct H {
    int qubit;
};
struct X {
    int qubit;
};
/// exp(-i * angle * Y / 2).
struct RY {
    int qubit;
    double angle;
};
struct ControlledRY {
    int control;
    int target;
    double angle;
};
/// Controlled (-iY), i.e. controlled RY(pi). This real form makes the success
/// branch of a RUS block a pure Y rotation of the output.
struct ControlledY {
    int control;
    int target;
};
/// Mid-circuit measurement; the outcome is appended to the classical registers.
struct MeasureToRegister {
    int qubit;
};
/// If the most recent classical bit is 1: X on `ancilla`, RY(+pi/2) on `output`.
struct ConditionalRecovery {
    int ancilla;
    int output;
};
}  // namespace gate

using GateOp = std::variant<gate::H, gate::X, gate::RY, gate::ControlledRY, gate::ControlledY, gate::MeasureToRegister,
                            gate::ConditionalRecovery>;

/// Rotation that undoes the output-qubit rotation a failed RUS attempt leaves behind.
constexpr double kRecoveryAngle = std::numbers::pi / 2;

inline std::string gate_name(const GateOp &op) {
    return std::visit(
        [](const auto &g) -> std::string {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, gate::H>) return "H";
            else if constexpr (std::is_same_v<T, gate::X>) return "X";
            else if constexpr (std::is_same_v<T, gate::RY>) return "RY";
            else if constexpr (std::is_same_v<T, gate::ControlledRY>) return "ControlledRY";
            else if constexpr (std::is_same_v<T, gate::ControlledY>) return "ControlledY";
            else if constexpr (std::is_same_v<T, gate::MeasureToRegister>) return "MeasureToRegister";
            else return "ConditionalRecovery";
        },
        op);
}

/// Dense statevector. Qubit 0 is the most significant bit of the amplitude
/// index, so index `i` reads as the bitstring `to_bitstring(i, n_qubits())`.
class StateVector {
public:
    /// |0...0> on `n_qubits` qubits.
    explicit StateVector(int n_qubits, int max_qubits = kDefaultMaxQubits) : n_(n_qubits) {
        if (n_qubits < 1 || n_qubits > max_qubits) {
            throw std::invalid_argument("qubit count " + std::to_string(n_qubits) + " outside [1, " +
                                        std::to_string(max_qubits) + "]");
        }
        amps_.assign(size_t{1} << n_qubits, amplitude{0.0, 0.0});
        amps_[0] = 1.0;
    }

    int n_qubits() const { return n_; }
    size_t dim() const { return amps_.size(); }
    std::span<const amplitude> amplitudes() const { return amps_; }
    amplitude operator[](size_t i) const { return amps_[i]; }

    double norm_squared() const {
        double s = 0.0;
        for (const auto &a : amps_) s += std::norm(a);
        return s;
    }

    /// Born probability that `qubit` reads 1.
    double probability_of_one(int qubit) const {
        const size_t mask = bit_mask(qubit);
        double p = 0.0;
        for (size_t i = 0; i < amps_.size(); ++i) {
            if (i & mask) p += std::norm(amps_[i]);
        }
        return p;
    }

    void apply(const GateOp &op);

    /// Samples `qubit`, collapses and renormalizes. Returns the outcome.
    int measure(int qubit, Rng &rng) {
        const double p1 = probability_of_one(qubit);
        const int outcome = rng.uniform() < p1 ? 1 : 0;
        collapse(qubit, outcome, outcome ? p1 : 1.0 - p1);
        return outcome;
    }

    /// Projects `qubit` onto `value` and renormalizes. Returns the Born
    /// probability of that branch. Throws ZeroProbabilityBranch, leaving the
    /// state untouched, when the branch is empty.
    double project(int qubit, int value) {
        const double p1 = probability_of_one(qubit);
        const double p = value ? p1 : 1.0 - p1;
        if (!(p > kZeroProbability)) {
            throw ZeroProbabilityBranch("projection of qubit " + std::to_string(qubit) + " onto " +
                                        std::to_string(value) + " has zero probability");
        }
        collapse(qubit, value, p);
        return p;
    }

    /// Born marginal over `qubits`; the first listed qubit is the leftmost bit.
    Distribution marginal(std::span<const int> qubits) const {
        if (qubits.empty()) throw std::invalid_argument("marginal over an empty qubit subset");
        std::vector<size_t> masks;
        for (int q : qubits) {
            const size_t m = bit_mask(q);
            for (size_t prev : masks) {
                if (prev == m) throw std::invalid_argument("marginal subset has a repeated qubit");
            }
            masks.push_back(m);
        }
        const int k = static_cast<int>(qubits.size());
        std::vector<double> p(size_t{1} << k, 0.0);
        for (size_t i = 0; i < amps_.size(); ++i) {
            const double w = std::norm(amps_[i]);
            if (w == 0.0) continue;
            size_t key = 0;
            for (size_t m : masks) key = (key << 1) | ((i & m) ? 1 : 0);
            p[key] += w;
        }
        return Distribution(k, std::move(p));
    }

    // Raw kernels. Qubit indices must already be validated.
    void apply_real_2x2(int target, double m00, double m01, double m10, double m11, int control = -1) {
        const size_t tmask = bit_mask(target);
        const size_t cmask = control >= 0 ? bit_mask(control) : 0;
        const size_t d = amps_.size();
        for (size_t hi = 0; hi < d; hi += 2 * tmask) {
            for (size_t i0 = hi; i0 < hi + tmask; ++i0) {
                if ((i0 & cmask) != cmask) continue;
                const size_t i1 = i0 | tmask;
                const amplitude a0 = amps_[i0];
                const amplitude a1 = amps_[i1];
                amps_[i0] = m00 * a0 + m01 * a1;
                amps_[i1] = m10 * a0 + m11 * a1;
            }
        }
    }

    void apply_ry(int target, double angle, int control = -1) {
        const double c = std::cos(angle / 2), s = std::sin(angle / 2);
        apply_real_2x2(target, c, -s, s, c, control);
    }

    friend bool operator==(const StateVector &, const StateVector &) = default;

    static constexpr double kZeroProbability = 1e-14;

private:
    size_t bit_mask(int qubit) const {
        if (qubit < 0 || qubit >= n_) {
            throw std::out_of_range("qubit index " + std::to_string(qubit) + " out of range for " + std::to_string(n_) +
                                    "-qubit state");
        }
        return size_t{1} << (n_ - 1 - qubit);
    }

    void collapse(int qubit, int value, double p) {
        const size_t mask = bit_mask(qubit);
        const double scale = 1.0 / std::sqrt(p);
        for (size_t i = 0; i < amps_.size(); ++i) {
            if (((i & mask) != 0) == (value != 0)) amps_[i] *= scale;
            else amps_[i] = 0.0;
        }
    }

    void require_distinct(int a, int b) const {
        bit_mask(a);
        bit_mask(b);
        if (a == b) throw std::invalid_argument("gate qubit indices must be distinct");
    }

    int n_;
    std::vector<amplitude> amps_;
};

/// Applies a unitary gate. Measurement and classically controlled kinds are
/// rejected here; use `execute` for those.
inline void StateVector::apply(const GateOp &op) {
    std::visit(
        [this](const auto &g) {
            using T = std::decay_t<decltype(g)>;
            const double r = std::numbers::sqrt2 / 2;
            if constexpr (std::is_same_v<T, gate::H>) {
                bit_mask(g.qubit);
                apply_real_2x2(g.qubit, r, r, r, -r);
            } else if constexpr (std::is_same_v<T, gate::X>) {
                bit_mask(g.qubit);
                apply_real_2x2(g.qubit, 0, 1, 1, 0);
            } else if constexpr (std::is_same_v<T, gate::RY>) {
                bit_mask(g.qubit);
                apply_ry(g.qubit, g.angle);
            } else if constexpr (std::is_same_v<T, gate::ControlledRY>) {
                require_distinct(g.control, g.target);
                apply_ry(g.target, g.angle, g.control);
            } else if constexpr (std::is_same_v<T, gate::ControlledY>) {
                require_distinct(g.control, g.target);
                apply_real_2x2(g.target, 0, -1, 1, 0, g.control);
            } else {
                throw std::invalid_argument(gate_name(g) + " is not a unitary gate");
            }
        },
        op);
}

/// Runs any gate kind, including mid-circuit measurement into `registers`
/// and the classically controlled recovery.
inline void execute(StateVector &state, const GateOp &op, ClassicalRegisters &registers, Rng &rng) {
    if (const auto *m = std::get_if<gate::MeasureToRegister>(&op)) {
        registers.write(state.measure(m->qubit, rng));
    } else if (const auto *r = std::get_if<gate::ConditionalRecovery>(&op)) {
        if (r->ancilla == r->output) throw std::invalid_argument("recovery qubits must be distinct");
        if (registers.last() == 1) {
            state.apply(gate::X{r->ancilla});
            state.apply(gate::RY{r->output, kRecoveryAngle});
        }
    } else {
        state.apply(op);
    }
}

}  // namespace qnbm
