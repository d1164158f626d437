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
#include <sstream>

#include "gpmeta/config.hpp"
#include "gpmeta/experiment.hpp"
#include "test_util.hpp"

using namespace gpmeta;
using namespace gpmeta::experiment;
using gpmeta::test::expect_error;

namespace {

ExperimentConfig tiny_step(ModelPreset model) {
    ExperimentConfig cfg = preset_config("step");
    cfg.model = model;
    cfg.seed = 5;
    cfg.meta_tasks = 200;
    cfg.eval_tasks = 100;
    cfg.hidden = {8};
    cfg.train.epochs = 2;
    return cfg;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_results_csv(os, rows);
    return os.str();
}

RegressionTask single_point_task() {
    RegressionTask t;
    t.x.resize(1, 1);
    t.x(0, 0) = 0.3;
    t.y = VectorXd::Constant(1, 0.8);
    t.x_star.resize(3, 1);
    t.x_star << -0.5, 0.3, 1.0;
    t.y_star = VectorXd::Constant(3, 0.8);
    return t;
}

} // namespace

TEST_CASE("step vanilla smoke run gives finite rows for each n_tilde") {
    const auto rows = run_experiment(tiny_step(ModelPreset::Vanilla));
    REQUIRE(rows.size() == 3);
    const int expected[] = {1, 5, 20};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].method == "vanilla");
        CHECK(rows[i].n_tilde == expected[i]);
        CHECK(rows[i].tasks == 100);
        CHECK(std::isfinite(rows[i].mse.mean));
        CHECK(std::isfinite(rows[i].mse.std_error));
        REQUIRE(rows[i].log_density.has_value());
        CHECK(std::isfinite(rows[i].log_density->mean));
    }
    CHECK(rows[2].mse.mean < rows[0].mse.mean);
}

TEST_CASE("identical config and seed give byte-identical CSV") {
    const ExperimentConfig cfg = tiny_step(ModelPreset::LearnedMean);
    const std::string a = csv_of(run_experiment(cfg));
    const std::string b = csv_of(run_experiment(cfg));
    CHECK(a == b);
    CHECK(a.rfind("method,n_tilde,mse_mean,mse_se,loglik_mean,loglik_se,tasks\n", 0) == 0);
    ExperimentConfig other = cfg;
    other.seed = 6;
    CHECK(csv_of(run_experiment(other)) != a);
}

TEST_CASE("meta-training lowers the step meta-loss") {
    const ExperimentConfig cfg = tiny_step(ModelPreset::LearnedBoth);
    const TaskData data = load_tasks(cfg);
    const GpPrior p0 = initial_prior(cfg, 1);
    const TrainResult r = train_prior(cfg, data.meta);
    CHECK(r.trace.size() == 2);
    CHECK(meta_loss(r.prior, data.meta) <= meta_loss(p0, data.meta));
}

TEST_CASE("best-epoch selection returns the lowest-loss epoch") {
    ExperimentConfig cfg = tiny_step(ModelPreset::LearnedMean);
    cfg.train.epochs = 4;
    const TaskData data = load_tasks(cfg);
    const TrainResult r = train_prior(cfg, data.meta);
    const double best = *std::min_element(r.trace.begin(), r.trace.end());
    CHECK(meta_loss(r.prior, data.meta) == best);
    cfg.keep_best_epoch = false;
    const TrainResult last = train_prior(cfg, data.meta);
    CHECK(meta_loss(last.prior, data.meta) == last.trace.back());
}

TEST_CASE("untrainable presets skip training") {
    ExperimentConfig cfg = preset_config("sinusoid");
    cfg.model = ModelPreset::TrueMean;
    cfg.meta_tasks = 5;
    cfg.eval_tasks = 5;
    cfg.kernel_from_generator = true;
    const TaskData data = load_tasks(cfg);
    const TrainResult r = train_prior(cfg, data.meta);
    CHECK(r.prior == initial_prior(cfg, 1));
    CHECK(std::holds_alternative<SinusoidMean>(r.prior.mean));
    cfg.family = TaskFamily::Step;
    expect_error(ErrorCode::InvalidArgument, [&] { initial_prior(cfg, 1); });
}

TEST_CASE("nn_direct of an all-zero network on an all-zero image is 0") {
    const auto spec = nn::make_mlp(2, {4}, 1);
    const DeepMean zero{spec, nn::ParamVector::Zero(spec.param_count())};
    const TaskSet tasks = mnist_completion_tasks(std::vector<MnistImage>{MnistImage(784, 0)}, {10, -1, true}, 1);
    CHECK(eval_nn_direct(zero, tasks[0]) == 0.0);
}

TEST_CASE("nn_direct equals a GP whose posterior mean is forced to the network") {
    const auto spec = nn::make_mlp(1, {5}, 1);
    const DeepMean mean{spec, nn::init_params(spec, 3)};
    const RegressionTask t = single_point_task();
    GpPrior p;
    p.mean = mean;
    p.kernel = RbfKernel{0.0, -60.0};
    p.log_noise_var = std::log(0.1);
    const auto metrics = predictive_metrics(posterior_predict(p, t.x, t.y, t.x_star), p, t.y_star);
    CHECK(eval_nn_direct(mean, t) == doctest::Approx(metrics.mse).epsilon(1e-12));
}

TEST_CASE("mean on target with zero steps is the untrained-mean GP") {
    const auto spec = nn::make_mlp(1, {6}, 1);
    GpPrior base;
    base.kernel = RbfKernel{std::log(0.5), 0.0};
    base.log_noise_var = std::log(0.01);
    MeanOnTargetConfig cfg;
    cfg.steps = 0;
    const RegressionTask t = single_point_task();
    const auto r = eval_mean_on_target(t, base, spec, cfg, 9);
    GpPrior untrained = base;
    untrained.mean = DeepMean{spec, nn::init_params(spec, 9)};
    const auto expected = predictive_metrics(posterior_predict(untrained, t.x, t.y, t.x_star), untrained, t.y_star);
    CHECK(r.metrics.mse == expected.mse);
    CHECK(r.metrics.avg_log_density == expected.avg_log_density);
}

TEST_CASE("mean on target drives the mean through a single context point") {
    const auto spec = nn::make_mlp(1, {6}, 1);
    GpPrior base;
    base.kernel = RbfKernel{std::log(0.5), 0.0};
    base.log_noise_var = std::log(1e-4);
    MeanOnTargetConfig cfg;
    cfg.steps = 3000;
    cfg.learning_rate = 1e-3;
    const RegressionTask t = single_point_task();
    const auto r = eval_mean_on_target(t, base, spec, cfg, 9);
    const double before = std::abs(nn::forward(spec, nn::init_params(spec, 9), t.x)(0, 0) - t.y[0]);
    const double after = std::abs(nn::forward(r.mean.spec, r.mean.params, t.x)(0, 0) - t.y[0]);
    CHECK(before > 0.1);
    CHECK(after < 1e-3);

    RegressionTask empty = t;
    empty.x.resize(0, 1);
    empty.y.resize(0);
    expect_error(ErrorCode::InvalidArgument, [&] { eval_mean_on_target(empty, base, spec, cfg, 1); });
}

TEST_CASE("summarize gives the mean and sd / sqrt(n)") {
    const Stat s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
    CHECK(summarize({7.0}).std_error == 0.0);
}

TEST_CASE("standard errors shrink as 1 / sqrt(task count)") {
    ExperimentConfig cfg = tiny_step(ModelPreset::Vanilla);
    cfg.n_tilde = {5};
    const GpPrior prior = initial_prior(cfg, 1);
    cfg.eval_tasks = 500;
    const auto small = evaluate_prior(cfg, "vanilla", prior, load_tasks(cfg).eval);
    cfg.eval_tasks = 2000;
    const auto large = evaluate_prior(cfg, "vanilla", prior, load_tasks(cfg).eval);
    const double ratio = small[0].mse.std_error / large[0].mse.std_error;
    // sqrt(2000 / 500) = 2; the sample sd itself varies by about 5% at these sizes.
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
}

TEST_CASE("target tasks are shared across methods and use every non-context point") {
    const ExperimentConfig cfg = tiny_step(ModelPreset::Vanilla);
    const TaskSet eval = gen_step_tasks(3, 1);
    const RegressionTask a = target_task(cfg, eval[1], 1, 5);
    CHECK(a == target_task(cfg, eval[1], 1, 5));
    CHECK(a.context_size() == 5);
    CHECK(a.test_size() == 45);
    CHECK(target_task(cfg, eval[1], 1, kAllContext) == eval[1]);
}

TEST_CASE("table S2 without MNIST files reports MissingData") {
    ReproduceOptions opts;
    opts.mnist_dir = "/nonexistent/mnist";
    try {
        reproduce_table(Table::TableS2, opts);
        FAIL("expected MissingData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingData);
        CHECK(std::string(e.what()).find("train-images-idx3-ubyte") != std::string::npos);
    }
}

TEST_CASE("table method configs") {
    const ReproduceOptions opts;
    const auto s1 = table_method_config(Table::TableS1, ModelPreset::LearnedMean, opts);
    CHECK(s1.family == TaskFamily::Sinusoid);
    CHECK(s1.meta_tasks == 1000);
    CHECK(s1.eval_tasks == 200);
    CHECK(s1.kernel_from_generator);
    CHECK(s1.trainable() == ParamGroups{true, false, false});
    const auto t1 = table_method_config(Table::Table1, ModelPreset::LearnedBoth, opts);
    CHECK(t1.meta_tasks == 2000);
    CHECK(t1.eval_tasks == 200);
    CHECK(t1.seed == 42);
    const auto s2 = table_method_config(Table::TableS2, ModelPreset::Vanilla, opts);
    CHECK(s2.meta_tasks == 2000);
    CHECK(s2.eval_tasks == 500);
    CHECK(s2.n_tilde == std::vector<int>{3, 50, 300});
}

TEST_CASE("result CSV and markdown formatting") {
    ResultRow a{"vanilla", 1, {0.5, 0.01}, Stat{-1.25, 0.02}, 200};
    ResultRow b{"nn_direct", kAllContext, {0.25, 0.0}, std::nullopt, 3};
    const std::string csv = csv_of({a, b});
    CHECK(csv == "method,n_tilde,mse_mean,mse_se,loglik_mean,loglik_se,tasks\n"
                 "vanilla,1,0.5,0.01,-1.25,0.02,200\n"
                 "nn_direct,all,0.25,0,,,3\n");
    const std::string md = results_markdown({a, b}, "T");
    CHECK(md.find("### T") != std::string::npos);
    CHECK(md.find("vanilla") != std::string::npos);
    CHECK(find_row({a, b}, "vanilla", 1).tasks == 200);
    expect_error(ErrorCode::InvalidArgument, [&] { find_row({a, b}, "vanilla", 5); });
}

TEST_CASE("names round-trip and unknown names are rejected") {
    for (auto m : {ModelPreset::Vanilla, ModelPreset::LearnedKernel, ModelPreset::LearnedMean, ModelPreset::LearnedBoth,
                   ModelPreset::MeanOnTarget, ModelPreset::NnDirect, ModelPreset::TrueMean})
        CHECK(model_from_string(to_string(m)) == m);
    for (auto t : {Table::Table1, Table::TableS1, Table::TableS2}) CHECK(table_from_string(to_string(t)) == t);
    expect_error(ErrorCode::InvalidArgument, [] { model_from_string("best"); });
    expect_error(ErrorCode::InvalidArgument, [] { preset_config("cifar"); });
    expect_error(ErrorCode::InvalidArgument, [] { scale_from_string("huge"); });
}

TEST_CASE("config files: sections, comments and overrides") {
    std::istringstream file("\xEF\xBB\xBF# comment\n"
                            "[experiment]\n"
                            "preset = sinusoid\n"
                            "seed = 9 ; trailing\n"
                            "n_tilde = 1, 5, all\n"
                            "[model]\n"
                            "hidden = 16,8\n"
                            "trainable = mean,noise\n"
                            "[train]\n"
                            "grad_clip = none\n"
                            "epochs = 3\n");
    const auto entries = parse_config(file, "x.cfg");
    CHECK(config_preset(entries) == std::optional<std::string>("sinusoid"));
    ExperimentConfig cfg = preset_config(*config_preset(entries));
    apply_config(cfg, entries, "x.cfg");
    CHECK(cfg.seed == 9);
    CHECK(cfg.n_tilde == std::vector<int>{1, 5, kAllContext});
    CHECK(cfg.hidden == std::vector<Index>{16, 8});
    CHECK(cfg.trainable() == ParamGroups{true, false, true});
    CHECK_FALSE(cfg.train.grad_clip.has_value());
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.family == TaskFamily::Sinusoid);
}

TEST_CASE("config errors carry the file and line") {
    auto apply = [](const std::string& text) {
        std::istringstream is(text);
        ExperimentConfig cfg;
        apply_config(cfg, parse_config(is, "bad.cfg"), "bad.cfg");
    };
    for (const std::string text : {"experiment.seed = 1\n[train]\nlearnin_rate = 1\n", "experiment.seed = 1\n\n[train\n",
                                   "# x\n\nexperiment.seed = -4\n", "x=1\ny=2\nno equals sign\n"}) {
        try {
            apply(text);
            FAIL("expected a parse error for: ", text);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ParseError);
            CHECK_MESSAGE(std::string(e.what()).find("bad.cfg:3") != std::string::npos, std::string(e.what()));
        }
    }
    expect_error(ErrorCode::IoError, [] { read_config_file("/nonexistent/gpmeta.cfg"); });
    CHECK(config_help().find("[train]") != std::string::npos);
    CHECK(config_help().find("learning_rate") != std::string::npos);
}
