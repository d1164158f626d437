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
#include <iosfwd>
#include <span>
#include <vector>

#include "gpmeta/gp.hpp"
#include "gpmeta/metatrain.hpp"

// B-spline functional PCA and its reading as a GP with a spline-linear mean
// and the spline inner-product kernel.
namespace gpmeta::fpca {

struct SplineBasis {
    int degree = 3;
    std::vector<double> knots;

    /// Number of basis functions: knots - degree - 1.
    Index size() const { return static_cast<Index>(knots.size()) - degree - 1; }
    double span_min() const { return knots[static_cast<std::size_t>(degree)]; }
    double span_max() const { return knots[static_cast<std::size_t>(size())]; }

    void validate() const;
};

/// Clamped knot vector with uniform interior knots giving q basis functions on [lo, hi].
SplineBasis clamped_uniform(int degree, Index q, double lo, double hi);

/// (B_x)_ij = b_j(x_i) via Cox-de Boor. Throws OutOfSpan for x outside the span.
MatrixXd bspline_design(const SplineBasis& basis, const VectorXd& x);

struct FpcaModel {
    SplineBasis basis;
    VectorXd theta_m;
    double sigma2 = 0.1;

    void validate() const;
};

/// Closed-form FPCA posterior: mean B_* (theta_m + theta_c), covariance
/// sigma2 I + B_* Gamma B_*^T, with theta_c and Gamma from q x q solves.
struct FpcaPosterior {
    VectorXd beta_hat;
    MatrixXd gamma_hat;
    GaussianPosterior predictive;
};

FpcaPosterior fpca_posterior_terms(const FpcaModel& model, const VectorXd& x, const VectorXd& y,
                                   const VectorXd& x_star);

/// Predictive over observations at x_star (observation noise included).
GaussianPosterior fpca_posterior(const FpcaModel& model, const VectorXd& x, const VectorXd& y, const VectorXd& x_star);

/// GP prior with LinearMean(theta_m) and LinearKernel on basis features.
GpPrior equivalent_gp_prior(const FpcaModel& model);

/// The same predictive computed through gp::posterior_predict on basis
/// features, with sigma2 I added to the latent covariance.
GaussianPosterior gp_path_posterior(const FpcaModel& model, const VectorXd& x, const VectorXd& y,
                                    const VectorXd& x_star);

struct EquivalenceTrial {
    int trial = 0;
    double mean_discrepancy = 0.0;
    double cov_discrepancy = 0.0;
};

struct EquivalenceReport {
    std::vector<EquivalenceTrial> trials;
    double max_mean_discrepancy = 0.0;
    double max_cov_discrepancy = 0.0;
};

struct EquivalenceOptions {
    Index max_train = 20;
    Index max_test = 10;
};

/// Random in-span (x, y, x_star) per trial, both posterior paths compared.
EquivalenceReport check_gp_fpca_equivalence(const FpcaModel& model, int trials, std::uint64_t seed,
                                            const EquivalenceOptions& opts = {});

void write_equivalence_csv(std::ostream& os, const EquivalenceReport& report);

/// Fits theta_m by maximizing the summed marginal likelihood over tasks
/// (scalar inputs) with the meta-training loop; only the mean is trained.
FpcaModel fit_mean_coefficients(const FpcaModel& init, std::span<const RegressionTask> tasks, TrainConfig cfg);

} // namespace gpmeta::fpca
