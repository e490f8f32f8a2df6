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

#include <bit>
#include <stdexcept>
#include <vector>

#include "distribution.hpp"
#include "model.hpp"

namespace qnbm {

struct CardinalitySpec {
    int n_bits = 0;
    int cardinality = 1;
};

/// Uniform over the n-bit strings with exactly `cardinality` ones.
inline Distribution cardinality_distribution(const CardinalitySpec &spec) {
    if (spec.n_bits < 1 || spec.n_bits > 30) throw std::invalid_argument("cardinality target: n_bits out of range");
    if (spec.cardinality < 0 || spec.cardinality > spec.n_bits) {
        throw std::invalid_argument("cardinality target: c must be in [0, n_bits]");
    }
    std::vector<double> w(size_t{1} << spec.n_bits, 0.0);
    for (size_t i = 0; i < w.size(); ++i) {
        if (std::popcount(i) == spec.cardinality) w[i] = 1.0;
    }
    return Distribution::from_weights(spec.n_bits, std::move(w));
}

/// The evaluation reference for sampled runs: the exact post-selected model
/// distribution at the trained parameters.
inline Distribution derive_p_prime_target(const ParameterSet &trained, const NeuronStructure &structure) {
    return exact_distribution_postselected(structure, trained);
}

}  // namespace qnbm
