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

#include <cstdint>
#include <random>

namespace qnbm {

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seeded random stream. There is no global randomness anywhere in the
/// library; every stochastic routine takes one of these explicitly.
///
/// `uniform()` is built directly from the engine's 64-bit output instead of
/// std::uniform_real_distribution so that sequences are identical across
/// standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(mix64(seed)) {}

    /// Child stream for (master seed, index). Streams for distinct indices
    /// are statistically independent and do not depend on evaluation order.
    static Rng derive(uint64_t master, uint64_t index) {
        return Rng(mix64(master ^ mix64(index + 0x632BE59BD9B4E019ULL)));
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in the open interval (lo, hi).
    double uniform_open(double lo, double hi) {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return lo + (hi - lo) * u;
    }

    uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace qnbm
