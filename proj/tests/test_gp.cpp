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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "gpmeta/gp.hpp"
#include "gpmeta/verify.hpp"

using namespace gpmeta;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNoiseless = -std::numeric_limits<double>::infinity();

MatrixXd column(std::initializer_list<double> v) {
    MatrixXd m(static_cast<Index>(v.size()), 1);
    Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

GpPrior deep_prior(Index d, std::uint64_t seed) {
    GpPrior p;
    const auto ms = nn::make_mlp(d, {6}, 1);
    const auto ks = nn::make_mlp(d, {5}, kDeepKernelEmbeddingDim);
    p.mean = DeepMean{ms, nn::init_params(ms, seed)};
    p.kernel = DeepKernel{ks, nn::init_params(ks, seed + 1), RbfKernel{0.2, -0.3}};
    p.log_noise_var = std::log(0.05);
    return p;
}

} // namespace

TEST_CASE("RBF at squared distance 2 with unit scales is exp(-1)") {
    MatrixXd a(1, 2), b(1, 2);
    a << 0, 0;
    b << 1, 1;
    const MatrixXd k = kernel_matrix(RbfKernel{}, a, b);
    CHECK(k(0, 0) == doctest::Approx(std::exp(-1.0)));
    CHECK(kernel_matrix(RbfKernel{}, a, a)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("RBF scales with lengthscale and signal variance") {
    const RbfKernel r{std::log(2.0), std::log(3.0)};
    const MatrixXd k = kernel_matrix(r, column({0.0}), column({2.0}));
    CHECK(k(0, 0) == doctest::Approx(3.0 * std::exp(-0.5)));
    CHECK(kernel_diagonal(r, column({1, 2, 3})).isApproxToConstant(3.0));
}

TEST_CASE("linear kernel is the inner product") {
    MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    CHECK((kernel_matrix(LinearKernel{}, a, a) - a * a.transpose()).isZero(0.0));
    CHECK((kernel_diagonal(LinearKernel{}, a) - (a * a.transpose()).diagonal()).isZero(0.0));
}

TEST_CASE("deep kernel is RBF on the network embedding") {
    const auto p = deep_prior(2, 4);
    const auto& dk = std::get<DeepKernel>(p.kernel);
    const MatrixXd x = MatrixXd::Random(4, 2);
    const MatrixXd z = nn::forward(dk.spec, dk.params, x);
    CHECK((kernel_matrix(p.kernel, x, x) - kernel_matrix(dk.base, z, z)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(kernel_diagonal(p.kernel, x).isApproxToConstant(dk.base.signal_var()));
}

TEST_CASE("single-point LML with unit variance") {
    GpPrior p;
    p.log_noise_var = kNoiseless;
    CHECK(log_marginal_likelihood(p, column({0.3}), VectorXd::Zero(1), 0.0) == doctest::Approx(-0.5 * kLog2Pi));
    CHECK(log_marginal_likelihood(p, column({0.3}), VectorXd::Ones(1), 0.0) ==
          doctest::Approx(-0.5 - 0.5 * kLog2Pi));
    CHECK(-0.5 * kLog2Pi == doctest::Approx(-0.9189).epsilon(1e-4));
}

TEST_CASE("two-point LML matches the closed form") {
    GpPrior p;
    p.kernel = RbfKernel{std::log(0.7), std::log(1.3)};
    p.log_noise_var = std::log(0.2);
    const MatrixXd x = column({0.1, 0.9});
    VectorXd y(2);
    y << 0.4, -1.1;

    const double sf2 = 1.3, l = 0.7, s2 = 0.2;
    const double k12 = sf2 * std::exp(-0.64 / (2 * l * l));
    const double a = sf2 + s2, b = k12, det = a * a - b * b;
    const double quad = (a * y(0) * y(0) - 2 * b * y(0) * y(1) + a * y(1) * y(1)) / det;
    const double expected = -0.5 * quad - 0.5 * std::log(det) - kLog2Pi;
    CHECK(log_marginal_likelihood(p, x, y, 0.0) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("signal-variance gradient on one point") {
    // LML = -y^2/(2 sf2) - log(sf2)/2 - log(2 pi)/2, so dLML/dlog sf2 = (y^2/sf2 - 1)/2.
    GpPrior p;
    p.kernel = RbfKernel{0.0, std::log(0.8)};
    p.log_noise_var = kNoiseless;
    const VectorXd y = VectorXd::Constant(1, 1.5);
    const auto g = lml_gradient(p, column({0.0}), y, {}, 0.0);
    CHECK(g.kernel(1) == doctest::Approx(0.5 * (2.25 / 0.8 - 1.0)));
    CHECK(g.kernel(0) == doctest::Approx(0.0));
}

TEST_CASE("mean gradient is alpha") {
    GpPrior p;
    p.mean = LinearMean{VectorXd::Constant(1, 0.5)};
    p.log_noise_var = std::log(0.1);
    const MatrixXd x = column({-1, 0.5, 2});
    VectorXd y(3);
    y << 0.2, 1.0, -0.3;
    MatrixXd a = kernel_matrix(p.kernel, x, x);
    a.diagonal().array() += 0.1;
    const VectorXd alpha = a.ldlt().solve(y - 0.5 * x.col(0));
    const auto g = lml_gradient(p, x, y, {true, false, false}, 0.0);
    CHECK(g.mean(0) == doctest::Approx(x.col(0).dot(alpha)).epsilon(1e-12));
    CHECK(g.kernel.size() == 0);
    CHECK(g.log_noise_var == 0.0);
}

TEST_CASE("value and gradient agree with central differences for deep priors") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 5; ++t) {
        const auto p = deep_prior(2, rng());
        const MatrixXd x = MatrixXd::Random(6, 2);
        const VectorXd y = VectorXd::Random(6);
        const auto eval = lml_value_and_gradient(p, x, y);
        CHECK(eval.value == doctest::Approx(log_marginal_likelihood(p, x, y)));

        const auto sg = [&](auto set, VectorXd base, const VectorXd& grad) {
            const auto f = [&](const VectorXd& v) {
                GpPrior q = p;
                set(q, v);
                return log_marginal_likelihood(q, x, y);
            };
            CHECK(verify::gradient_relative_error(grad, verify::central_difference(f, base)) < 1e-6);
        };
        sg([](GpPrior& q, const VectorXd& v) { set_mean_params(q.mean, v); }, mean_params(p.mean),
           eval.gradient.mean);
        sg([](GpPrior& q, const VectorXd& v) { set_kernel_params(q.kernel, v); }, kernel_params(p.kernel),
           eval.gradient.kernel);
        sg([](GpPrior& q, const VectorXd& v) { q.log_noise_var = v(0); }, VectorXd::Constant(1, p.log_noise_var),
           VectorXd::Constant(1, eval.gradient.log_noise_var));
    }
}

TEST_CASE("LML needs at least one observation and matching shapes") {
    GpPrior p;
    CHECK_THROWS_AS(log_marginal_likelihood(p, MatrixXd(0, 1), VectorXd(0)), Error);
    CHECK_THROWS_AS(log_marginal_likelihood(p, column({1, 2}), VectorXd::Zero(3)), Error);
}

TEST_CASE("prior validation") {
    GpPrior p;
    const auto wide = nn::make_mlp(1, {3}, 2);
    p.mean = DeepMean{wide, nn::init_params(wide, 1)};
    CHECK_THROWS_AS(validate(p), Error);

    GpPrior q;
    const auto narrow = nn::make_mlp(1, {3}, 1);
    q.kernel = DeepKernel{narrow, nn::init_params(narrow, 1), RbfKernel{}};
    CHECK_THROWS_AS(validate(q), Error);

    GpPrior r;
    r.log_noise_var = std::nan("");
    CHECK_THROWS_AS(validate(r), Error);
    r.log_noise_var = kNoiseless;
    CHECK_NOTHROW(validate(r));
}

TEST_CASE("posterior far from the data reverts to the prior") {
    GpPrior p;
    p.mean = SinusoidMean{2.0, 1.0};
    p.log_noise_var = std::log(0.01);
    const MatrixXd x = column({-1, 0, 1});
    const VectorXd y = VectorXd::Constant(3, 5.0);
    const auto post = posterior_predict(p, x, y, column({100.0}));
    CHECK(post.mean(0) == doctest::Approx(2.0 * std::sin(100.0)).epsilon(1e-12));
    CHECK(post.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior mean is the prior mean plus the zero-mean posterior of the residuals") {
    const auto p = deep_prior(1, 8);
    GpPrior zero = p;
    zero.mean = ZeroMean{};
    const MatrixXd x = column({-1, -0.2, 0.4, 1.3});
    const VectorXd y = VectorXd::Random(4);
    const MatrixXd xs = column({-0.7, 0.0, 2.0});
    const auto post = posterior_predict(p, x, y, xs);
    const auto shifted = posterior_predict(zero, x, y - mean_eval(p.mean, x), xs);
    CHECK((post.mean - (shifted.mean + mean_eval(p.mean, xs))).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((post.cov - shifted.cov).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("conditioning never increases marginal variance") {
    std::mt19937_64 rng(2);
    GpPrior p;
    p.kernel = RbfKernel{std::log(0.5), 0.3};
    const MatrixXd xs = MatrixXd::Random(8, 1) * 3;
    const VectorXd prior_var = kernel_diagonal(p.kernel, xs);
    for (int n = 1; n <= 6; ++n) {
        const MatrixXd x = MatrixXd::Random(n, 1) * 3;
        const auto post = posterior_predict(p, x, VectorXd::Random(n), xs);
        CHECK(((post.cov.diagonal() - prior_var).array() <= 1e-12).all());
        CHECK((post.cov.diagonal().array() >= 0).all());
        CHECK((post.cov - post.cov.transpose()).isZero(0.0));
    }
}

TEST_CASE("empty conditioning set returns the prior") {
    GpPrior p;
    p.mean = SinusoidMean{1.0, 2.0};
    const MatrixXd xs = column({0.1, 0.2});
    const auto post = posterior_predict(p, MatrixXd(0, 1), VectorXd(0), xs);
    CHECK((post.mean - mean_eval(p.mean, xs)).isZero(0.0));
    CHECK((post.cov - kernel_matrix(p.kernel, xs, xs)).isZero(0.0));
}

TEST_CASE("noiseless interpolation reproduces the training targets") {
    GpPrior p;
    p.log_noise_var = kNoiseless;
    const MatrixXd x = column({-2, 0, 1.5});
    VectorXd y(3);
    y << 0.3, -0.8, 1.1;
    const auto post = posterior_predict(p, x, y, x);
    CHECK((post.mean - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predictive metrics include the observation noise") {
    GpPrior p;
    p.log_noise_var = kNoiseless;
    GaussianPosterior post{VectorXd::Zero(1), MatrixXd::Ones(1, 1)};
    const auto m = predictive_metrics(post, p, VectorXd::Constant(1, 2.0));
    CHECK(m.mse == doctest::Approx(4.0));
    CHECK(m.avg_log_density == doctest::Approx(-2.0 - 0.5 * kLog2Pi));

    p.log_noise_var = std::log(1.0);
    const auto m2 = predictive_metrics(post, p, VectorXd::Constant(1, 2.0));
    CHECK(m2.avg_log_density == doctest::Approx(-1.0 - 0.5 * std::log(2.0) - 0.5 * kLog2Pi));

    CHECK_THROWS_AS(predictive_metrics({VectorXd(0), MatrixXd(0, 0)}, p, VectorXd(0)), Error);
}

TEST_CASE("flat parameter accessors") {
    auto p = deep_prior(1, 3);
    const VectorXd k = kernel_params(p.kernel);
    CHECK(k(0) == 0.2);
    CHECK(k(1) == -0.3);
    VectorXd k2 = k;
    k2(0) = 1.0;
    set_kernel_params(p.kernel, k2);
    CHECK(std::get<DeepKernel>(p.kernel).base.log_lengthscale == 1.0);
    CHECK_THROWS_AS(set_kernel_params(p.kernel, VectorXd::Zero(3)), Error);
    CHECK(mean_params(SinusoidMean{3.0, 1.0}).size() == 1);
    CHECK(mean_params(ZeroMean{}).size() == 0);
}

TEST_CASE("prior checkpoints round trip every variant") {
    std::vector<GpPrior> priors(4);
    priors[0].log_noise_var = -3.0;
    priors[1].mean = SinusoidMean{1.5, std::numbers::pi};
    priors[1].kernel = LinearKernel{};
    priors[2].mean = LinearMean{VectorXd::LinSpaced(4, -1, 1)};
    priors[2].log_noise_var = kNoiseless;
    priors[3] = deep_prior(2, 13);
    for (const auto& p : priors) {
        std::stringstream ss;
        write_checkpoint(ss, p);
        CHECK(ss.str().substr(0, 4) == "GPPR");
        CHECK(read_checkpoint(ss) == p);
    }
    std::stringstream bad("GPXX");
    CHECK_THROWS_AS(read_checkpoint(bad), Error);
}
