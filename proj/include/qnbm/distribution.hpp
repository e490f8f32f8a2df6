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
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace qnbm {

constexpr double kNormTolerance = 1e-9;

/// Bitstring of `n_bits` characters for `index`; the leftmost character is
/// the most significant bit.
inline std::string to_bitstring(uint64_t index, int n_bits) {
    std::string s(static_cast<size_t>(n_bits), '0');
    for (int k = 0; k < n_bits; ++k) {
        if ((index >> (n_bits - 1 - k)) & 1) s[static_cast<size_t>(k)] = '1';
    }
    return s;
}

inline uint64_t from_bitstring(std::string_view bits) {
    if (bits.empty() || bits.size() > 63) throw std::invalid_argument("bitstring length out of range");
    uint64_t v = 0;
    for (char c : bits) {
        if (c != '0' && c != '1') throw std::invalid_argument("bitstring contains a non-binary character");
        v = (v << 1) | static_cast<uint64_t>(c == '1');
    }
    return v;
}

/// Normalized probability table over every `n_bits`-bit string.
///
/// Stored densely by integer value; entry `i` belongs to `to_bitstring(i, n_bits)`.
/// Zero-probability strings are always present.
class Distribution {
public:
    Distribution() = default;

    Distribution(int n_bits, std::vector<double> probabilities) : n_bits_(n_bits), p_(std::move(probabilities)) {
        if (n_bits < 1 || n_bits > 30) throw std::invalid_argument("distribution n_bits out of range");
        if (p_.size() != (size_t{1} << n_bits)) throw std::invalid_argument("distribution size is not 2^n_bits");
        double total = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("distribution has a negative or non-finite entry");
            total += v;
        }
        if (std::abs(total - 1.0) > kNormTolerance) {
            throw std::invalid_argument("distribution is not normalized (sum = " + std::to_string(total) + ")");
        }
    }

    /// Normalizes non-negative weights. Throws if they sum to zero.
    static Distribution from_weights(int n_bits, std::vector<double> weights) {
        double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(total > 0.0)) throw std::invalid_argument("cannot normalize an all-zero weight vector");
        for (auto &w : weights) w /= total;
        return Distribution(n_bits, std::move(weights));
    }

    int n_bits() const { return n_bits_; }
    size_t size() const { return p_.size(); }
    const std::vector<double> &probabilities() const { return p_; }
    double operator[](uint64_t index) const { return p_.at(index); }
    double at(std::string_view bits) const {
        if (static_cast<int>(bits.size()) != n_bits_) throw std::invalid_argument("bitstring length does not match distribution");
        return p_.at(from_bitstring(bits));
    }

    size_t support_size(double threshold = 0.0) const {
        size_t n = 0;
        for (double v : p_) n += v > threshold;
        return n;
    }

    friend bool operator==(const Distribution &, const Distribution &) = default;

private:
    int n_bits_ = 0;
    std::vector<double> p_;
};

/// Total-variation distance, (1/2) * sum |p - q|.
inline double total_variation(const Distribution &p, const Distribution &q) {
    if (p.n_bits() != q.n_bits()) throw std::invalid_argument("total_variation: n_bits mismatch");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

/// Shot counts over output bitstrings. `discarded_shots` covers shots rejected
/// by post-selection or by attempt exhaustion; they are not in `counts`.
struct Histogram {
    int n_bits = 0;
    std::vector<uint64_t> counts;
    uint64_t total_shots = 0;
    uint64_t discarded_shots = 0;

    Histogram() = default;
    explicit Histogram(int bits) : n_bits(bits), counts(size_t{1} << bits, 0) {}

    uint64_t kept_shots() const { return total_shots - discarded_shots; }

    void merge(const Histogram &other) {
        if (other.n_bits != n_bits) throw std::invalid_argument("histogram merge: n_bits mismatch");
        for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
        total_shots += other.total_shots;
        discarded_shots += other.discarded_shots;
    }

    /// Empirical distribution over kept shots. Throws when nothing was kept.
    Distribution empirical() const {
        if (kept_shots() == 0) throw std::domain_error("histogram has no kept shots");
        std::vector<double> w(counts.size());
        for (size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]);
        return Distribution::from_weights(n_bits, std::move(w));
    }

    friend bool operator==(const Histogram &, const Histogram &) = default;
};

// JSON shape shared by distributions and histograms:
//   {"n_bits": int, "entries": [{"bitstring": str, "value": number}, ...], "discarded": int}

inline nlohmann::ordered_json to_json(const Distribution &d) {
    nlohmann::ordered_json j;
    j["n_bits"] = d.n_bits();
    auto entries = nlohmann::ordered_json::array();
    for (size_t i = 0; i < d.size(); ++i) {
        entries.push_back({{"bitstring", to_bitstring(i, d.n_bits())}, {"value", d[i]}});
    }
    j["entries"] = std::move(entries);
    j["discarded"] = 0;
    return j;
}

inline nlohmann::ordered_json to_json(const Histogram &h) {
    nlohmann::ordered_json j;
    j["n_bits"] = h.n_bits;
    auto entries = nlohmann::ordered_json::array();
    for (size_t i = 0; i < h.counts.size(); ++i) {
        entries.push_back({{"bitstring", to_bitstring(i, h.n_bits)}, {"value", h.counts[i]}});
    }
    j["entries"] = std::move(entries);
    j["discarded"] = h.discarded_shots;
    j["total_shots"] = h.total_shots;
    return j;
}

namespace detail {
template <class Json, class Fn>
void read_entries(const Json &j, int n_bits, Fn &&put) {
    for (const auto &e : j.at("entries")) {
        const auto bits = e.at("bitstring").template get<std::string>();
        if (static_cast<int>(bits.size()) != n_bits) throw std::invalid_argument("entry bitstring length mismatch");
        put(from_bitstring(bits), e.at("value"));
    }
}
}  // namespace detail

template <class Json>
Distribution distribution_from_json(const Json &j) {
    const int n = j.at("n_bits").template get<int>();
    if (n < 1 || n > 30) throw std::invalid_argument("distribution n_bits out of range");
    std::vector<double> p(size_t{1} << n, 0.0);
    detail::read_entries(j, n, [&](uint64_t i, const auto &v) { p[i] = v.template get<double>(); });
    return Distribution(n, std::move(p));
}

template <class Json>
Histogram histogram_from_json(const Json &j) {
    const int n = j.at("n_bits").template get<int>();
    if (n < 1 || n > 30) throw std::invalid_argument("histogram n_bits out of range");
    Histogram h(n);
    detail::read_entries(j, n, [&](uint64_t i, const auto &v) { h.counts[i] = v.template get<uint64_t>(); });
    h.discarded_shots = j.at("discarded").template get<uint64_t>();
    uint64_t kept = std::accumulate(h.counts.begin(), h.counts.end(), uint64_t{0});
    h.total_shots = j.contains("total_shots") ? j.at("total_shots").template get<uint64_t>() : kept + h.discarded_shots;
    if (kept != h.total_shots - h.discarded_shots) throw std::invalid_argument("histogram counts do not match total - discarded");
    return h;
}

}  // namespace qnbm
