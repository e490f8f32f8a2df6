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

// Test-only reference computations. Nothing here touches the statevector
// engine: every quantity is evaluated per input bitstring with scalar
// trigonometry.

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "qnbm/model.hpp"

namespace qnbm::oracle {

struct BranchScalars {
    double p_success;  // single-attempt success probability
    double cos2;       // cos^2 of the activated output half-angle
    double sin2;       // sin^2 of the activated output half-angle
};

/// The ancilla sits at cos(2 theta)|0> + sin(2 theta)|1> before the output
/// kick; success keeps cos^4 on |0> and sin^4 on |1>.
inline BranchScalars branch(double theta) {
    const double c = std::cos(2 * theta), s = std::sin(2 * theta);
    const double c4 = c * c * c * c, s4 = s * s * s * s;
    return {c4 + s4, c4 / (c4 + s4), s4 / (c4 + s4)};
}

inline double theta_for(const ParameterSet &p, int out, unsigned x, int n_in) {
    double t = p.biases[static_cast<size_t>(out)];
    for (int k = 0; k < n_in; ++k) {
        if ((x >> (n_in - 1 - k)) & 1u) t += p.weights[static_cast<size_t>(out)][static_cast<size_t>(k)];
    }
    return t;
}

/// Output distribution under a per-branch, per-block attempt weight
/// `weight(p_success)`; returns unnormalized weights plus their total.
template <class WeightFn>
std::vector<double> output_weights(const NeuronStructure &s, const ParameterSet &p, WeightFn weight) {
    const int n_in = s.n_in(), n_out = s.n_out();
    std::vector<double> w(size_t{1} << n_out, 0.0);
    const double input_amp2 = 1.0 / static_cast<double>(1u << n_in);  // |H^n amplitude|^2
    for (unsigned x = 0; x < (1u << n_in); ++x) {
        std::vector<BranchScalars> b;
        double branch_weight = input_amp2;
        for (int j = 0; j < n_out; ++j) {
            b.push_back(branch(theta_for(p, j, x, n_in)));
            branch_weight *= weight(b.back().p_success);
        }
        for (size_t y = 0; y < w.size(); ++y) {
            double prob = branch_weight;
            for (int j = 0; j < n_out; ++j) {
                const bool one = (y >> (n_out - 1 - j)) & 1u;
                prob *= one ? b[static_cast<size_t>(j)].sin2 : b[static_cast<size_t>(j)].cos2;
            }
            w[y] += prob;
        }
    }
    return w;
}

/// Exact post-selected distribution: each block succeeds on its first try.
inline std::vector<double> postselected(const NeuronStructure &s, const ParameterSet &p) {
    auto w = output_weights(s, p, [](double ps) { return ps; });
    double total = 0.0;
    for (double v : w) total += v;
    for (auto &v : w) v /= total;
    return w;
}

/// Classical control with `cap` attempts. Recovery restores each branch's
/// direction, so a block contributes sum_{k<=cap} (1-p)^(k-1) p = 1 - (1-p)^cap.
inline std::vector<double> classical_control(const NeuronStructure &s, const ParameterSet &p, int cap,
                                             double *discarded = nullptr) {
    auto w = output_weights(s, p, [cap](double ps) { return 1.0 - std::pow(1.0 - ps, cap); });
    double total = 0.0;
    for (double v : w) total += v;
    if (discarded) *discarded = 1.0 - total;
    for (auto &v : w) v /= total;
    return w;
}

}  // namespace qnbm::oracle
