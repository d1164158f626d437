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

#include "gpmeta/metatrain.hpp"
#include "test_util.hpp"

using namespace gpmeta;
using gpmeta::test::expect_error;

namespace {

GpPrior deep_prior(std::uint64_t seed) {
    GpPrior p;
    const auto ms = nn::make_mlp(1, {6}, 1);
    const auto ks = nn::make_mlp(1, {4}, kDeepKernelEmbeddingDim);
    p.mean = DeepMean{ms, nn::init_params(ms, seed)};
    p.kernel = DeepKernel{ks, nn::init_params(ks, seed + 1), RbfKernel{0.0, 0.0}};
    p.log_noise_var = std::log(0.05);
    return p;
}

TaskSet random_tasks(std::size_t count, Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    TaskSet tasks(count);
    for (auto& t : tasks) {
        t.x.resize(n, 1);
        t.y.resize(n);
        for (Index i = 0; i < n; ++i) {
            t.x(i, 0) = u(rng);
            t.y[i] = std::sin(t.x(i, 0)) + 0.3 * u(rng);
        }
        t.x_star.resize(0, 1);
    }
    return tasks;
}

// log N(y; 0, K + s I) for two points, RBF with unit scales, by explicit 2x2 inverse.
double brute_lml_2x2(const RegressionTask& t, double noise) {
    const double k12 = std::exp(-0.5 * std::pow(t.x(0, 0) - t.x(1, 0), 2));
    const double a = 1.0 + noise, b = k12, d = 1.0 + noise;
    const double det = a * d - b * b;
    const double y0 = t.y[0], y1 = t.y[1];
    const double quad = (d * y0 * y0 - 2.0 * b * y0 * y1 + a * y1 * y1) / det;
    return -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
}

TrainConfig config(double lr, int epochs, ParamGroups groups = {}) {
    TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.trainable = groups;
    cfg.seed = 17;
    return cfg;
}

} // namespace

TEST_CASE("meta_loss of one task is the negative LML") {
    const TaskSet tasks = random_tasks(1, 6, 1);
    const GpPrior p = deep_prior(3);
    CHECK(meta_loss(p, tasks) == -log_marginal_likelihood(p, tasks[0].x, tasks[0].y));
}

TEST_CASE("meta_loss is additive over tasks") {
    const TaskSet one = random_tasks(1, 5, 2);
    const TaskSet twice{one[0], one[0]};
    const GpPrior p = deep_prior(4);
    CHECK(meta_loss(p, twice) == 2.0 * meta_loss(p, one));
}

TEST_CASE("meta_loss over tiny tasks matches brute-force 2x2 evaluations") {
    const TaskSet tasks = random_tasks(3, 2, 5);
    GpPrior p;
    p.log_noise_var = std::log(0.2);
    double expected = 0.0;
    for (const auto& t : tasks) expected -= brute_lml_2x2(t, 0.2);
    CHECK(meta_loss(p, tasks) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("meta_loss attaches the task index and rejects empty input") {
    TaskSet tasks = random_tasks(2, 3, 6);
    tasks[1].x(1, 0) = std::numeric_limits<double>::quiet_NaN();
    const GpPrior p;
    try {
        meta_loss(p, tasks);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotPositiveDefinite);
        CHECK(std::string(e.what()).find("task 1") != std::string::npos);
    }
    expect_error(ErrorCode::InvalidArgument, [] { meta_loss(GpPrior{}, TaskSet{}); });
}

TEST_CASE("zero learning rate leaves the prior untouched with a flat trace") {
    const TaskSet tasks = random_tasks(4, 5, 7);
    const GpPrior p0 = deep_prior(8);
    const TrainResult r = meta_train(p0, tasks, config(0.0, 3));
    CHECK(r.prior == p0);
    REQUIRE(r.trace.size() == 3);
    CHECK(r.trace[0] == meta_loss(p0, tasks));
    CHECK(r.trace[1] == r.trace[0]);
    CHECK(r.trace[2] == r.trace[0]);
}

TEST_CASE("training is bitwise deterministic for a seed") {
    const TaskSet tasks = random_tasks(6, 5, 9);
    const GpPrior p0 = deep_prior(10);
    const TrainResult a = meta_train(p0, tasks, config(1e-2, 4));
    const TrainResult b = meta_train(p0, tasks, config(1e-2, 4));
    CHECK(a.prior == b.prior);
    CHECK(a.trace == b.trace);
    CHECK(a.prior != p0);
}

TEST_CASE("sinusoid amplitude is recovered from tasks generated with a = 2") {
    SinusoidConfig gen;
    gen.amplitude = 2.0;
    gen.signal_var = 0.05;
    const TaskSet tasks = gen_sinusoid_tasks(50, gen, 21);
    GpPrior p0;
    p0.mean = SinusoidMean{0.5, 1.0};
    p0.kernel = RbfKernel{std::log(gen.lengthscale), std::log(gen.signal_var)};
    p0.log_noise_var = std::log(gen.noise_var);
    const TrainResult r = meta_train(p0, tasks, config(1e-4, 200, {true, false, false}));
    const double a = std::get<SinusoidMean>(r.prior.mean).amplitude;
    CHECK(std::abs(a - 2.0) < 0.05);

    // The LML is quadratic in a: the maximizer is sum s'C^-1 y / sum s'C^-1 s.
    double num = 0.0, den = 0.0;
    for (const auto& t : tasks) {
        MatrixXd c = kernel_matrix(p0.kernel, t.x, t.x);
        c.diagonal().array() += gen.noise_var;
        const Eigen::LLT<MatrixXd> llt(c);
        const VectorXd s = t.x.col(0).array().sin();
        num += s.dot(llt.solve(t.y));
        den += s.dot(llt.solve(s));
    }
    CHECK(a == doctest::Approx(num / den).epsilon(0.01));
    CHECK(r.trace.back() < r.trace.front());
}

TEST_CASE("a tiny SGD step does not increase the task loss") {
    const TaskSet tasks = random_tasks(10, 6, 13);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const GpPrior p0 = deep_prior(100 + i);
        const TaskSet one{tasks[i]};
        TrainConfig cfg = config(1e-6, 1);
        cfg.shuffle_each_epoch = false;
        const TrainResult r = meta_train(p0, one, cfg);
        CHECK(r.trace[0] <= meta_loss(p0, one));
    }
}

TEST_CASE("groups outside the trainable set are bitwise unchanged") {
    const TaskSet tasks = random_tasks(5, 6, 15);
    const GpPrior p0 = deep_prior(16);
    {
        const TrainResult r = meta_train(p0, tasks, config(1e-2, 2, {true, false, false}));
        CHECK(kernel_params(r.prior.kernel) == kernel_params(p0.kernel));
        CHECK(r.prior.log_noise_var == p0.log_noise_var);
        CHECK(mean_params(r.prior.mean) != mean_params(p0.mean));
    }
    {
        const TrainResult r = meta_train(p0, tasks, config(1e-2, 2, {false, true, false}));
        CHECK(mean_params(r.prior.mean) == mean_params(p0.mean));
        CHECK(r.prior.log_noise_var == p0.log_noise_var);
        CHECK(kernel_params(r.prior.kernel) != kernel_params(p0.kernel));
    }
    {
        const TrainResult r = meta_train(p0, tasks, config(1e-2, 2, {false, false, true}));
        CHECK(mean_params(r.prior.mean) == mean_params(p0.mean));
        CHECK(kernel_params(r.prior.kernel) == kernel_params(p0.kernel));
        CHECK(r.prior.log_noise_var != p0.log_noise_var);
    }
}

TEST_CASE("gradient clipping caps the per-task step") {
    const TaskSet tasks = random_tasks(1, 6, 19);
    const GpPrior p0 = deep_prior(20);
    TrainConfig cfg = config(1.0, 1);
    cfg.grad_clip = 1e-3;
    const TrainResult r = meta_train(p0, tasks, cfg);
    const double moved = std::sqrt((mean_params(r.prior.mean) - mean_params(p0.mean)).squaredNorm() +
                                   (kernel_params(r.prior.kernel) - kernel_params(p0.kernel)).squaredNorm() +
                                   std::pow(r.prior.log_noise_var - p0.log_noise_var, 2));
    CHECK(moved <= 1e-3 * (1.0 + 1e-12));
    CHECK(moved > 0.0);
}

TEST_CASE("an oversized step is reported as divergence") {
    const TaskSet tasks = random_tasks(4, 6, 23);
    GpPrior p0;
    p0.log_noise_var = std::log(1e-4);
    expect_error(ErrorCode::Diverged, [&] { meta_train(p0, tasks, config(1e6, 5, {false, false, true})); });
}

TEST_CASE("training configuration is validated") {
    const TaskSet tasks = random_tasks(1, 3, 1);
    expect_error(ErrorCode::InvalidArgument, [&] { meta_train(GpPrior{}, tasks, config(-1.0, 1)); });
    expect_error(ErrorCode::InvalidArgument, [&] { meta_train(GpPrior{}, tasks, config(1e-3, 0)); });
    expect_error(ErrorCode::InvalidArgument, [&] { meta_train(GpPrior{}, tasks, config(1e-3, 1, ParamGroups::none())); });
    TrainConfig clip = config(1e-3, 1);
    clip.grad_clip = 0.0;
    expect_error(ErrorCode::InvalidArgument, [&] { meta_train(GpPrior{}, tasks, clip); });
    expect_error(ErrorCode::InvalidArgument, [] { meta_train(GpPrior{}, TaskSet{}, config(1e-3, 1)); });
}

TEST_CASE("observer sees every epoch and the trace CSV lists them") {
    const TaskSet tasks = random_tasks(3, 4, 25);
    std::vector<int> epochs;
    const TrainResult r = meta_train(GpPrior{}, tasks, config(1e-3, 3),
                                     [&](int e, const GpPrior&, double) { epochs.push_back(e); });
    CHECK(epochs == std::vector<int>{0, 1, 2});
    std::ostringstream os;
    write_loss_trace_csv(os, {1.5, -2.25});
    CHECK(os.str() == "epoch,meta_loss\n1,1.5\n2,-2.25\n");
    CHECK(r.trace.size() == 3);
}
