/*
 * Copyright 2026 The gpmeta Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gpmeta/gp.hpp"

// Self-checks run by `gpmeta verify` and the acceptance binary.
namespace gpmeta::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    /// Worst observed error.
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool passed() const;
};

/// Gradient sources under test. Defaults are the library implementations;
/// tests substitute corrupted versions to exercise the detectors.
using LmlGradientFn = std::function<LmlEvaluation(const GpPrior&, const MatrixXd&, const VectorXd&)>;
using NnGradientFn =
    std::function<VectorXd(const nn::MlpSpec&, const nn::ParamVector&, const MatrixXd&, const MatrixXd&)>;

LmlGradientFn default_lml_gradient();
NnGradientFn default_nn_gradient();

inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kEquivalenceTolerance = 1e-8;
inline constexpr double kZeroMeanTolerance = 1e-10;
inline constexpr double kTrueMeanTolerance = 1e-8;
inline constexpr double kPushThroughTolerance = 1e-9;

/// Relative error ||a - b|| / max(||a||, ||b||, 1e-8) of two gradient vectors.
double gradient_relative_error(const VectorXd& analytic, const VectorXd& numeric);

/// Central differences of f at x with step h.
VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h = 1e-5);

/// Random networks with at most 50 parameters.
CheckResult check_nn_gradients(std::uint64_t seed, int instances = 20, const NnGradientFn& grad = default_nn_gradient());

/// Random small instances (n <= 8, <= 200 parameters) of one model preset:
/// vanilla, learned_kernel, learned_mean or learned_both. All groups are checked.
CheckResult check_lml_gradients(const std::string& preset, std::uint64_t seed, int instances = 20,
                                const LmlGradientFn& grad = default_lml_gradient());

/// Random instances of the prior used by check_lml_gradients.
GpPrior random_preset_prior(const std::string& preset, Index input_dim, std::uint64_t seed);

/// Cubic basis, q = 8, sigma2 = 0.1: GP and FPCA posteriors over random instances.
std::vector<CheckResult> check_fpca_equivalence(std::uint64_t seed, int trials = 50);

/// Noise-free data with all-zero targets drawn from a sin(pi x) mean: the
/// zero-mean posterior mean stays at zero (RBF and deep kernels) while the
/// true-mean prior recovers sin(pi x) at the test inputs.
std::vector<CheckResult> check_counter_example(std::uint64_t seed);

/// Cholesky reconstruction, solves, log-determinant and the push-through identity.
std::vector<CheckResult> check_linalg(std::uint64_t seed, int trials = 20);

VerifyReport verify_suite(std::uint64_t seed = 0);

void write_report(std::ostream& os, const VerifyReport& report);

} // namespace gpmeta::verify
