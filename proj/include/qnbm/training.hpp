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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "distribution.hpp"
#include "model.hpp"
#include "neuron.hpp"
#include "random.hpp"

namespace qnbm {

constexpr double kKlEpsilon = 1e-16;

/// sum_x P_target(x) * ln(P_target(x) / max(P_model(x), eps)). Terms with
/// P_target(x) == 0 contribute nothing.
inline double kl_divergence(const Distribution &target, const Distribution &model, double eps = kKlEpsilon) {
    if (target.n_bits() != model.n_bits()) throw std::invalid_argument("kl_divergence: n_bits mismatch");
    double kl = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        const double p = target[i];
        if (p > 0.0) kl += p * std::log(p / std::max(model[i], eps));
    }
    return kl;
}

using FlatLoss = std::function<double(std::span<const double>)>;

/// Central differences (L(p + d e_i) - L(p - d e_i)) / 2d.
inline std::vector<double> finite_diff_gradient(const FlatLoss &loss, std::span<const double> params, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("finite-difference delta must be > 0");
    std::vector<double> grad(params.size());
    std::vector<double> p(params.begin(), params.end());
    for (size_t i = 0; i < p.size(); ++i) {
        const double x = p[i];
        p[i] = x + delta;
        const double up = loss(p);
        p[i] = x - delta;
        const double down = loss(p);
        p[i] = x;
        grad[i] = (up - down) / (2 * delta);
    }
    return grad;
}

/// Default raw-parameter shift: pi/2 on the effective rotation angle.
constexpr double kDefaultShift = std::numbers::pi / 2 / kRotationScale;

/// Shift-rule estimator for parameters that enter as RY(kRotationScale * p):
///   dL/dp = kRotationScale * (L(p + s) - L(p - s)) / (2 sin(kRotationScale * s)).
/// Exact when L is a single-rotation expectation; under RUS post-selection it
/// is only a heuristic.
inline std::vector<double> parameter_shift_gradient(const FlatLoss &loss, std::span<const double> params,
                                                    double shift = kDefaultShift) {
    if (!(shift > 0.0)) throw std::invalid_argument("parameter shift must be > 0");
    const double denom = 2 * std::sin(kRotationScale * shift);
    if (std::abs(denom) < 1e-12) throw std::invalid_argument("parameter shift hits a zero of sin");
    std::vector<double> grad(params.size());
    std::vector<double> p(params.begin(), params.end());
    for (size_t i = 0; i < p.size(); ++i) {
        const double x = p[i];
        p[i] = x + shift;
        const double up = loss(p);
        p[i] = x - shift;
        const double down = loss(p);
        p[i] = x;
        grad[i] = kRotationScale * (up - down) / denom;
    }
    return grad;
}

enum class GradientEstimator { finite_difference, parameter_shift };

inline std::string to_string(GradientEstimator e) {
    return e == GradientEstimator::finite_difference ? "finite_difference" : "parameter_shift";
}

inline GradientEstimator parse_estimator(std::string_view s) {
    if (s == "finite_difference" || s == "fd") return GradientEstimator::finite_difference;
    if (s == "parameter_shift" || s == "ps") return GradientEstimator::parameter_shift;
    throw std::invalid_argument("unknown gradient estimator '" + std::string(s) + "'");
}

struct TrainingConfig {
    int iterations = 500;
    double learning_rate = 0.02;
    double fd_delta = 1e-3;
    double shift = kDefaultShift;
    GradientEstimator estimator = GradientEstimator::finite_difference;
    uint64_t seed = 0;
    double init_lo = -1.0;
    double init_hi = 1.0;
    /// 0 = exact post-selected loss. Otherwise the loss is evaluated on a
    /// post-selection histogram of this many shots (common random numbers
    /// within one iteration).
    uint64_t loss_shots = 0;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
        if (!(fd_delta > 0.0)) throw std::invalid_argument("fd_delta must be > 0");
        if (!(shift > 0.0)) throw std::invalid_argument("shift must be > 0");
        if (!(init_lo >= -1.0 && init_hi <= 1.0 && init_lo < init_hi)) {
            throw std::invalid_argument("init range must be a sub-interval of (-1, 1)");
        }
    }
};

struct TrainingTrace {
    std::vector<double> loss_history;
    ParameterSet initial_params;
    ParameterSet final_params;
    Distribution final_distribution;

    double final_loss() const { return loss_history.back(); }
};

constexpr double kParamClip = 1.0 - 1e-9;

/// Gradient descent on KL(target || model) with post-step clipping into
/// [-1 + 1e-9, 1 - 1e-9]. Non-convergence shows up in the trace; it is not
/// an error.
inline TrainingTrace train(const NeuronStructure &structure, const Distribution &target, const TrainingConfig &config) {
    config.validate();
    structure.validate_executable();
    if (target.n_bits() != structure.n_out()) throw std::invalid_argument("target n_bits must equal N_out");

    Rng rng(config.seed);
    const ParameterSet init = ParameterSet::random(structure, rng, config.init_lo, config.init_hi);
    std::vector<double> params = init.flatten();

    uint64_t loss_seed = 0;
    FlatLoss loss = [&](std::span<const double> flat) {
        std::vector<double> clipped(flat.begin(), flat.end());
        for (auto &v : clipped) v = std::clamp(v, -kParamClip, kParamClip);
        const auto p = ParameterSet::unflatten(structure, clipped);
        if (config.loss_shots == 0) return kl_divergence(target, exact_distribution_postselected(structure, p));
        Rng shot_rng(loss_seed);
        const auto h = sample(structure, p, SampleMode::post_selection, config.loss_shots, shot_rng);
        if (h.kept_shots() > 0) return kl_divergence(target, h.empirical());
        double floor_loss = 0.0;  // every model probability at the eps floor
        for (double t : target.probabilities()) {
            if (t > 0.0) floor_loss += t * std::log(t / kKlEpsilon);
        }
        return floor_loss;
    };

    TrainingTrace trace;
    trace.initial_params = init;
    trace.loss_history.reserve(static_cast<size_t>(config.iterations) + 1);
    trace.loss_history.push_back(loss(params));
    for (int it = 0; it < config.iterations; ++it) {
        loss_seed = mix64(config.seed ^ static_cast<uint64_t>(it + 1));
        const auto grad = config.estimator == GradientEstimator::finite_difference
                              ? finite_diff_gradient(loss, params, config.fd_delta)
                              : parameter_shift_gradient(loss, params, config.shift);
        for (size_t i = 0; i < params.size(); ++i) {
            params[i] = std::clamp(params[i] - config.learning_rate * grad[i], -kParamClip, kParamClip);
        }
        trace.loss_history.push_back(loss(params));
    }
    trace.final_params = ParameterSet::unflatten(structure, params);
    trace.final_distribution = exact_distribution_postselected(structure, trace.final_params);
    return trace;
}

inline nlohmann::ordered_json to_json(const TrainingTrace &t) {
    nlohmann::ordered_json j;
    j["loss_history"] = t.loss_history;
    j["final_params"] = to_json(t.final_params);
    j["final_params_flat"] = t.final_params.flatten();
    j["final_distribution"] = to_json(t.final_distribution);
    return j;
}

/// "iteration,kl" rows for plotting.
inline void write_loss_csv(std::ostream &os, const TrainingTrace &t) {
    os << "iteration,kl\n";
    char buf[64];
    for (size_t i = 0; i < t.loss_history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, t.loss_history[i]);
        os << buf;
    }
}

}  // namespace qnbm
