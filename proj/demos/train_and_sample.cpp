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

// Trains a (1,0,2) network on the two-bit cardinality-1 target, then samples
// it with classical control and with post-selection.

#include <cstdio>

#include "qnbm/qnbm.hpp"

int main() {
    using namespace qnbm;
    const auto structure = NeuronStructure::parse("1,0,2");
    const auto target = cardinality_distribution({structure.n_out(), 1});

    TrainingConfig config;
    config.seed = 1;
    const auto trace = train(structure, target, config);
    std::printf("trained %s: KL %.3g -> %.3g\n", structure.to_string().c_str(), trace.loss_history.front(),
                trace.final_loss());

    const auto reference = derive_p_prime_target(trace.final_params, structure);
    for (auto mode : {SampleMode::classical_control, SampleMode::post_selection}) {
        Rng rng(42);
        const auto shots = shot_requirements(structure.n_out(), kDefaultK, mode);
        const auto h = sample(structure, trace.final_params, mode, shots, rng);
        std::printf("\n%s, %llu shots (%llu discarded), KL vs trained model %.4f\n", to_string(mode).c_str(),
                    static_cast<unsigned long long>(h.total_shots), static_cast<unsigned long long>(h.discarded_shots),
                    kl_divergence(reference, h.empirical()));
        for (size_t i = 0; i < h.counts.size(); ++i) {
            std::printf("  %s  target %.3f  model %.3f  counts %llu\n", to_bitstring(i, h.n_bits).c_str(), target[i],
                        reference[i], static_cast<unsigned long long>(h.counts[i]));
        }
    }
}
