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

#include "gpmeta/verify.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "gpmeta/fpca.hpp"
#include "gpmeta/tasks.hpp"

namespace gpmeta::verify {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
Index uniform_int(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

MatrixXd random_matrix(Rng& rng, Index rows, Index cols) {
    std::normal_distribution<double> normal;
    MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

CheckResult make_check(std::string name, double value, double threshold, std::string detail = {}) {
    return {std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

// Flat view over every learnable parameter of a prior: [mean, kernel, log noise].
VectorXd flatten(const GpPrior& p) {
    const VectorXd m = mean_params(p.mean);
    const VectorXd k = kernel_params(p.kernel);
    VectorXd out(m.size() + k.size() + 1);
    out << m, k, p.log_noise_var;
    return out;
}

GpPrior unflatten(GpPrior p, const VectorXd& v) {
    const Index nm = mean_params(p.mean).size();
    const Index nk = kernel_params(p.kernel).size();
    set_mean_params(p.mean, v.head(nm));
    set_kernel_params(p.kernel, v.segment(nm, nk));
    p.log_noise_var = v(nm + nk);
    return p;
}

VectorXd flatten(const PriorGradient& g, const GpPrior& p) {
    const Index nm = mean_params(p.mean).size();
    const Index nk = kernel_params(p.kernel).size();
    VectorXd out = VectorXd::Zero(nm + nk + 1);
    if (g.mean.size() == nm) out.head(nm) = g.mean;
    if (g.kernel.size() == nk) out.segment(nm, nk) = g.kernel;
    out(nm + nk) = g.log_noise_var;
    return out;
}

std::vector<Index> random_hidden(Rng& rng, Index max_width) {
    std::vector<Index> hidden(static_cast<std::size_t>(uniform_int(rng, 1, 2)));
    for (auto& h : hidden) h = uniform_int(rng, 1, max_width);
    return hidden;
}

} // namespace

bool VerifyReport::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

LmlGradientFn default_lml_gradient() {
    return [](const GpPrior& p, const MatrixXd& x, const VectorXd& y) { return lml_value_and_gradient(p, x, y); };
}

NnGradientFn default_nn_gradient() {
    return [](const nn::MlpSpec& spec, const nn::ParamVector& params, const MatrixXd& x, const MatrixXd& upstream) {
        return VectorXd(nn::vjp(spec, params, x, upstream).param_grad);
    };
}

double gradient_relative_error(const VectorXd& analytic, const VectorXd& numeric) {
    require_dims(analytic.size() == numeric.size(), "gradient_relative_error: size mismatch");
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
    return (analytic - numeric).norm() / scale;
}

VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
    VectorXd g(x.size());
    VectorXd probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = f(probe);
        probe(i) = x(i) - h;
        const double down = f(probe);
        probe(i) = x(i);
        g(i) = (up - down) / (2.0 * h);
    }
    return g;
}

CheckResult check_nn_gradients(std::uint64_t seed, int instances, const NnGradientFn& grad) {
    Rng rng(seed);
    double worst = 0.0;
    int done = 0;
    while (done < instances) {
        const Index in = uniform_int(rng, 1, 3);
        const Index out = uniform_int(rng, 1, 3);
        const auto act = uniform_int(rng, 0, 1) ? nn::Activation::Relu : nn::Activation::Sigmoid;
        const auto spec = nn::make_mlp(in, random_hidden(rng, 5), out, act);
        if (spec.param_count() > 50) continue;
        nn::ParamVector params = nn::init_params(spec, rng());
        params += 0.1 * random_matrix(rng, params.size(), 1);
        const MatrixXd x = random_matrix(rng, uniform_int(rng, 1, 6), in);
        const MatrixXd upstream = random_matrix(rng, x.rows(), out);
        const auto loss = [&](const VectorXd& theta) {
            return (nn::forward(spec, theta, x).array() * upstream.array()).sum();
        };
        worst = std::max(worst, gradient_relative_error(grad(spec, params, x, upstream),
                                                        central_difference(loss, params)));
        ++done;
    }
    return make_check("nn: vjp vs central differences (" + std::to_string(instances) + " networks)", worst,
                      kGradientTolerance);
}

GpPrior random_preset_prior(const std::string& preset, Index input_dim, std::uint64_t seed) {
    Rng rng(seed);
    GpPrior p;
    const RbfKernel rbf{uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
    p.log_noise_var = uniform(rng, std::log(0.05), std::log(0.5));
    const bool deep_mean = preset == "learned_mean" || preset == "learned_both";
    const bool deep_kernel = preset == "learned_kernel" || preset == "learned_both";
    if (!deep_mean && !deep_kernel && preset != "vanilla")
        fail(ErrorCode::InvalidArgument, "unknown gradient-check preset '" + preset + "'");
    if (deep_mean) {
        auto spec = nn::make_mlp(input_dim, random_hidden(rng, 8), 1, nn::Activation::Sigmoid);
        auto params = nn::init_params(spec, rng());
        p.mean = DeepMean{std::move(spec), std::move(params)};
    }
    if (deep_kernel) {
        auto spec = nn::make_mlp(input_dim, random_hidden(rng, 8), kDeepKernelEmbeddingDim, nn::Activation::Sigmoid);
        auto params = nn::init_params(spec, rng());
        p.kernel = DeepKernel{std::move(spec), std::move(params), rbf};
    } else {
        p.kernel = rbf;
    }
    return p;
}

CheckResult check_lml_gradients(const std::string& preset, std::uint64_t seed, int instances,
                                const LmlGradientFn& grad) {
    Rng rng(seed);
    double worst = 0.0;
    Index max_params = 0;
    for (int t = 0; t < instances; ++t) {
        const Index d = uniform_int(rng, 1, 2);
        const Index n = uniform_int(rng, 1, 8);
        const GpPrior p = random_preset_prior(preset, d, rng());
        const MatrixXd x = random_matrix(rng, n, d);
        const VectorXd y = random_matrix(rng, n, 1);
        const VectorXd theta = flatten(p);
        max_params = std::max(max_params, theta.size());
        const auto lml = [&](const VectorXd& v) { return log_marginal_likelihood(unflatten(p, v), x, y); };
        worst = std::max(worst,
                         gradient_relative_error(flatten(grad(p, x, y).gradient, p), central_difference(lml, theta)));
    }
    return make_check("lml: " + preset + " gradient vs central differences (" + std::to_string(instances) +
                          " instances)",
                      worst, kGradientTolerance, "largest instance " + std::to_string(max_params) + " parameters");
}

std::vector<CheckResult> check_fpca_equivalence(std::uint64_t seed, int trials) {
    Rng rng(seed);
    fpca::FpcaModel model;
    model.basis = fpca::clamped_uniform(3, 8, -1.0, 1.0);
    model.theta_m = random_matrix(rng, 8, 1);
    model.sigma2 = 0.1;
    const auto report = fpca::check_gp_fpca_equivalence(model, trials, rng());
    const std::string suffix = " (" + std::to_string(trials) + " trials, cubic q=8, sigma2=0.1)";
    return {make_check("fpca: GP vs FPCA posterior mean" + suffix, report.max_mean_discrepancy,
                       kEquivalenceTolerance),
            make_check("fpca: GP vs FPCA posterior covariance" + suffix, report.max_cov_discrepancy,
                       kEquivalenceTolerance)};
}

std::vector<CheckResult> check_counter_example(std::uint64_t seed) {
    MatrixXd x(5, 1), xs(5, 1);
    x << -2, -1, 0, 1, 2;
    xs << -1.5, -0.5, 0.5, 1.5, 2.5;
    const VectorXd y = VectorXd::Zero(5);
    const double noiseless = -std::numeric_limits<double>::infinity();

    GpPrior rbf;
    rbf.kernel = RbfKernel{};
    rbf.log_noise_var = noiseless;

    GpPrior deep = rbf;
    const auto spec = nn::make_mlp(1, {8}, kDeepKernelEmbeddingDim, nn::Activation::Sigmoid);
    deep.kernel = DeepKernel{spec, nn::init_params(spec, seed), RbfKernel{}};

    GpPrior truth = rbf;
    truth.mean = SinusoidMean{1.0, std::numbers::pi};

    const double rbf_err = posterior_predict(rbf, x, y, xs).mean.cwiseAbs().maxCoeff();
    const double deep_err = posterior_predict(deep, x, y, xs).mean.cwiseAbs().maxCoeff();
    const VectorXd m_true = (std::numbers::pi * xs.col(0).array()).sin().matrix();
    const double true_err = (posterior_predict(truth, x, y, xs).mean - m_true).cwiseAbs().maxCoeff();
    return {make_check("counter-example: zero-mean RBF posterior mean at test points", rbf_err, kZeroMeanTolerance),
            make_check("counter-example: zero-mean deep-kernel posterior mean at test points", deep_err,
                       kZeroMeanTolerance),
            make_check("counter-example: true-mean prior error at test points", true_err, kTrueMeanTolerance)};
}

std::vector<CheckResult> check_linalg(std::uint64_t seed, int trials) {
    Rng rng(seed);
    double recon = 0.0, solve = 0.0, logdet = 0.0, inverse = 0.0, push = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Index n = uniform_int(rng, 1, 10);
        const MatrixXd g = random_matrix(rng, n, n);
        const MatrixXd a = g * g.transpose() + static_cast<double>(n) * MatrixXd::Identity(n, n);
        const auto f = cholesky(a, 0.0);
        recon = std::max(recon, (reconstruct(f) - a).norm() / a.norm());
        const MatrixXd b = random_matrix(rng, n, 3);
        const MatrixXd xsol = solve_cholesky(f, b);
        solve = std::max(solve, (a * xsol - b).norm() / b.norm());
        const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
        logdet = std::max(logdet, std::abs(logdet_from_cholesky(f) - eig.eigenvalues().array().log().sum()));
        inverse = std::max(inverse, (inverse_from_cholesky(f) * a - MatrixXd::Identity(n, n)).norm());

        // B^T (B B^T + s I)^-1 = (B^T B + s I)^-1 B^T
        const Index m = uniform_int(rng, 1, 12), q = uniform_int(rng, 1, 10);
        const MatrixXd bx = random_matrix(rng, m, q);
        const double s = uniform(rng, 0.05, 2.0);
        const MatrixXd lhs = bx.transpose() * (bx * bx.transpose() + s * MatrixXd::Identity(m, m)).inverse();
        const MatrixXd rhs = (bx.transpose() * bx + s * MatrixXd::Identity(q, q)).inverse() * bx.transpose();
        push = std::max(push, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return {make_check("linalg: L L^T reconstructs A (relative)", recon, 1e-12),
            make_check("linalg: Cholesky solve residual (relative)", solve, 1e-10),
            make_check("linalg: log-determinant vs eigenvalues", logdet, 1e-10),
            make_check("linalg: inverse times A vs identity", inverse, 1e-10),
            make_check("linalg: push-through identity", push, kPushThroughTolerance)};
}

VerifyReport verify_suite(std::uint64_t seed) {
    VerifyReport report;
    auto add = [&](std::vector<CheckResult> cs) {
        report.checks.insert(report.checks.end(), cs.begin(), cs.end());
    };
    report.checks.push_back(check_nn_gradients(derive_seed(seed, 1)));
    std::uint64_t stream = 2;
    for (const char* preset : {"vanilla", "learned_kernel", "learned_mean", "learned_both"})
        report.checks.push_back(check_lml_gradients(preset, derive_seed(seed, stream++)));
    add(check_fpca_equivalence(derive_seed(seed, 10)));
    add(check_counter_example(derive_seed(seed, 11)));
    add(check_linalg(derive_seed(seed, 12)));
    return report;
}

void write_report(std::ostream& os, const VerifyReport& report) {
    for (const auto& c : report.checks) {
        os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << fmt(c.value) << " (threshold " << fmt(c.threshold)
           << ")";
        if (!c.detail.empty()) os << " [" << c.detail << "]";
        os << '\n';
    }
    os << (report.passed() ? "all checks passed" : "verification FAILED") << '\n';
}

} // namespace gpmeta::verify
