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

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <variant>

#include "gpmeta/linalg.hpp"
#include "gpmeta/nn.hpp"

namespace gpmeta {

// ---------------------------------------------------------------------------
// Mean functions. The learnable parameters of each variant are exposed as a
// flat vector through mean_params / set_mean_params.
// ---------------------------------------------------------------------------

struct ZeroMean {
    bool operator==(const ZeroMean&) const = default;
};

/// amplitude * sin(frequency * x) on scalar inputs. Only the amplitude is learnable.
struct SinusoidMean {
    double amplitude = 1.0;
    double frequency = 1.0;
    bool operator==(const SinusoidMean&) const = default;
};

/// x^T coeffs. With x = b(x) basis features this is the spline-linear mean.
struct LinearMean {
    VectorXd coeffs;
    bool operator==(const LinearMean& o) const { return coeffs == o.coeffs; }
};

/// Network with a single output.
struct DeepMean {
    nn::MlpSpec spec;
    nn::ParamVector params;
    bool operator==(const DeepMean& o) const { return spec == o.spec && params == o.params; }
};

using MeanFunction = std::variant<ZeroMean, SinusoidMean, LinearMean, DeepMean>;

// ---------------------------------------------------------------------------
// Kernels.
// ---------------------------------------------------------------------------

/// sf2 * exp(-|a - b|^2 / (2 l^2)) with log-parameterized l and sf2.
struct RbfKernel {
    double log_lengthscale = 0.0;
    double log_signal_var = 0.0;

    double lengthscale() const { return std::exp(log_lengthscale); }
    double signal_var() const { return std::exp(log_signal_var); }
    bool operator==(const RbfKernel&) const = default;
};

/// RBF evaluated on a 2-dim network embedding of the inputs.
/// Learnable layout: [log_lengthscale, log_signal_var, network params...].
struct DeepKernel {
    nn::MlpSpec spec;
    nn::ParamVector params;
    RbfKernel base;
    bool operator==(const DeepKernel& o) const {
        return spec == o.spec && params == o.params && base == o.base;
    }
};

/// a^T b. Paired with basis-feature inputs it gives k(x, x') = b(x)^T b(x').
struct LinearKernel {
    bool operator==(const LinearKernel&) const = default;
};

using Kernel = std::variant<RbfKernel, DeepKernel, LinearKernel>;

inline constexpr Index kDeepKernelEmbeddingDim = 2;

struct GpPrior {
    MeanFunction mean = ZeroMean{};
    Kernel kernel = RbfKernel{};
    double log_noise_var = std::log(0.01);

    double noise_var() const { return std::exp(log_noise_var); }
    bool operator==(const GpPrior&) const = default;
};

/// Selects parameter groups (for training and for gradient evaluation).
struct ParamGroups {
    bool mean = true;
    bool kernel = true;
    bool noise = true;

    bool any() const { return mean || kernel || noise; }
    static ParamGroups none() { return {false, false, false}; }
    bool operator==(const ParamGroups&) const = default;
};

VectorXd mean_params(const MeanFunction& m);
void set_mean_params(MeanFunction& m, const VectorXd& values);
VectorXd kernel_params(const Kernel& k);
void set_kernel_params(Kernel& k, const VectorXd& values);

/// Throws InvalidArgument when a deep variant has the wrong output size or
/// its parameter vector does not match its spec.
void validate(const GpPrior& p);

MatrixXd kernel_matrix(const Kernel& k, const MatrixXd& a, const MatrixXd& b);
VectorXd kernel_diagonal(const Kernel& k, const MatrixXd& a);
VectorXd mean_eval(const MeanFunction& m, const MatrixXd& x);

/// log N(y; m(X), K(X, X) + noise * I), factorized by Cholesky.
double log_marginal_likelihood(const GpPrior& p, const MatrixXd& x, const VectorXd& y,
                               double base_jitter = kDefaultJitter);

/// Gradient of the log marginal likelihood (not its negation) per group.
/// Groups not requested are left empty / zero.
struct PriorGradient {
    VectorXd mean;
    VectorXd kernel;
    double log_noise_var = 0.0;

    double squared_norm() const { return mean.squaredNorm() + kernel.squaredNorm() + log_noise_var * log_noise_var; }
};

struct LmlEvaluation {
    double value = 0.0;
    PriorGradient gradient;
};

LmlEvaluation lml_value_and_gradient(const GpPrior& p, const MatrixXd& x, const VectorXd& y,
                                     ParamGroups groups = {}, double base_jitter = kDefaultJitter);

PriorGradient lml_gradient(const GpPrior& p, const MatrixXd& x, const VectorXd& y, ParamGroups groups = {},
                           double base_jitter = kDefaultJitter);

struct GaussianPosterior {
    VectorXd mean;
    MatrixXd cov;
};

/// Predictive distribution of the latent function at xs given (x, y).
/// An empty conditioning set returns the prior at xs.
GaussianPosterior posterior_predict(const GpPrior& p, const MatrixXd& x, const VectorXd& y, const MatrixXd& xs,
                                    double base_jitter = kDefaultJitter);

struct PredictiveMetrics {
    double mse = 0.0;
    /// Mean over test points of log N(y_i; m*_i, K*_ii + noise).
    double avg_log_density = 0.0;
};

PredictiveMetrics predictive_metrics(const GaussianPosterior& post, const GpPrior& p, const VectorXd& y_true);

// Checkpoint: "GPPR", u32 version, mean tag + payload, kernel tag + payload,
// f64 log noise variance. Deep payloads embed the nn checkpoint record.
inline constexpr std::uint32_t kPriorCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const GpPrior& p);
GpPrior read_checkpoint(std::istream& is);
void save_prior(const std::filesystem::path& path, const GpPrior& p);
GpPrior load_prior(const std::filesystem::path& path);

} // namespace gpmeta
