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

#include "gpmeta/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace gpmeta::experiment {

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

std::string to_string(TaskFamily f) {
    switch (f) {
    case TaskFamily::Step: return "step";
    case TaskFamily::Sinusoid: return "sinusoid";
    case TaskFamily::Mnist: return "mnist";
    case TaskFamily::Csv: return "csv";
    }
    return "?";
}

std::string to_string(ModelPreset m) {
    switch (m) {
    case ModelPreset::Vanilla: return "vanilla";
    case ModelPreset::LearnedKernel: return "learned_kernel";
    case ModelPreset::LearnedMean: return "learned_mean";
    case ModelPreset::LearnedBoth: return "learned_both";
    case ModelPreset::MeanOnTarget: return "mean_on_target";
    case ModelPreset::NnDirect: return "nn_direct";
    case ModelPreset::TrueMean: return "true_mean";
    }
    return "?";
}

std::string to_string(Scale s) { return s == Scale::Desk ? "desk" : "paper"; }

TaskFamily family_from_string(const std::string& s) {
    for (auto f : {TaskFamily::Step, TaskFamily::Sinusoid, TaskFamily::Mnist, TaskFamily::Csv})
        if (to_string(f) == s) return f;
    fail(ErrorCode::InvalidArgument, "unknown task family '" + s + "'");
}

ModelPreset model_from_string(const std::string& s) {
    for (auto m : {ModelPreset::Vanilla, ModelPreset::LearnedKernel, ModelPreset::LearnedMean,
                   ModelPreset::LearnedBoth, ModelPreset::MeanOnTarget, ModelPreset::NnDirect,
                   ModelPreset::TrueMean})
        if (to_string(m) == s) return m;
    fail(ErrorCode::InvalidArgument, "unknown model preset '" + s + "'");
}

Scale scale_from_string(const std::string& s) {
    if (s == "desk") return Scale::Desk;
    if (s == "paper") return Scale::Paper;
    fail(ErrorCode::InvalidArgument, "unknown scale '" + s + "' (expected desk or paper)");
}

std::string to_string(Table t) {
    switch (t) {
    case Table::Table1: return "table1";
    case Table::TableS1: return "tableS1";
    case Table::TableS2: return "tableS2";
    }
    return "?";
}

Table table_from_string(const std::string& s) {
    for (auto t : {Table::Table1, Table::TableS1, Table::TableS2})
        if (to_string(t) == s) return t;
    fail(ErrorCode::InvalidArgument, "unknown table '" + s + "' (expected table1, tableS1 or tableS2)");
}

ParamGroups preset_trainable(ModelPreset m) {
    switch (m) {
    case ModelPreset::Vanilla:
    case ModelPreset::LearnedKernel:
    case ModelPreset::MeanOnTarget: return {false, true, true};
    case ModelPreset::LearnedMean:
    case ModelPreset::LearnedBoth:
    case ModelPreset::NnDirect: return {true, true, true};
    case ModelPreset::TrueMean: return ParamGroups::none();
    }
    return ParamGroups::none();
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (meta_tasks < 1 || eval_tasks < 1) fail(ErrorCode::InvalidArgument, "task counts must be >= 1");
    for (int n : n_tilde)
        if (n < 1 && n != kAllContext) fail(ErrorCode::InvalidArgument, "n_tilde values must be positive");
    if (hidden.empty()) fail(ErrorCode::InvalidArgument, "at least one hidden layer is required");
    if (!(init_lengthscale > 0) || !(init_embedding_lengthscale > 0) || !(init_signal_var > 0) ||
        !(init_noise_var > 0))
        fail(ErrorCode::InvalidArgument, "initial kernel and noise scales must be positive");
    if (trainable().any()) {
        TrainConfig t = train;
        t.trainable = trainable();
        t.validate();
    }
    if (family == TaskFamily::Csv && csv_path.empty())
        fail(ErrorCode::InvalidArgument, "csv family needs csv.path");
    if (!(time_scale > 0)) fail(ErrorCode::InvalidArgument, "time_scale must be positive");
}

ExperimentConfig preset_config(const std::string& preset, Scale scale) {
    ExperimentConfig cfg;
    cfg.name = preset;
    const bool paper = scale == Scale::Paper;
    if (preset == "step") {
        cfg.family = TaskFamily::Step;
        cfg.meta_tasks = paper ? 10000 : 2000;
        cfg.eval_tasks = paper ? 1000 : 200;
        cfg.hidden = {128, 64};
        cfg.n_tilde = {1, 5, 20};
        cfg.init_lengthscale = 1.0;
        cfg.init_signal_var = 0.25;
        cfg.init_noise_var = 0.01;
        cfg.train.learning_rate = 5e-4;
        cfg.train.epochs = 40;
        cfg.train.grad_clip = 1.0;
    } else if (preset == "sinusoid") {
        cfg.family = TaskFamily::Sinusoid;
        cfg.meta_tasks = 1000;
        cfg.eval_tasks = 200;
        cfg.hidden = {64, 64};
        cfg.n_tilde = {1, 5, 20};
        cfg.train.learning_rate = 1e-3;
        cfg.train.epochs = 100;
        cfg.train.grad_clip = 10.0;
    } else if (preset == "mnist") {
        cfg.family = TaskFamily::Mnist;
        cfg.meta_tasks = paper ? 60000 : 2000;
        cfg.eval_tasks = paper ? 10000 : 500;
        cfg.hidden = {128, 64};
        cfg.n_tilde = {3, 50, 300};
        cfg.init_lengthscale = 0.1;
        cfg.init_embedding_lengthscale = 0.03;
        cfg.init_signal_var = 0.1;
        cfg.init_noise_var = 0.01;
        cfg.train.learning_rate = 1e-3;
        cfg.train.epochs = 10;
        cfg.train.grad_clip = 10.0;
    } else if (preset == "icu") {
        cfg.family = TaskFamily::Csv;
        cfg.hidden = {128, 64};
        cfg.n_tilde = {kAllContext};
        cfg.time_scale = 48.0;
        cfg.init_lengthscale = 0.2;
        cfg.train.learning_rate = 1e-3;
        cfg.train.epochs = 50;
        cfg.train.grad_clip = 10.0;
    } else {
        fail(ErrorCode::InvalidArgument, "unknown preset '" + preset + "' (expected step, sinusoid, mnist or icu)");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Tasks and priors
// ---------------------------------------------------------------------------

namespace {

std::vector<MnistImage> load_mnist_images(const std::filesystem::path& dir, const char* file, std::size_t limit) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) fail(ErrorCode::MissingData, "MNIST file not found: " + path.string());
    auto images = images_from_idx(read_idx_file(path), limit);
    if (images.size() < limit && limit != SIZE_MAX)
        std::clog << "warning: " << path.string() << " holds " << images.size() << " images, " << limit
                  << " requested\n";
    return images;
}

void scale_inputs(TaskSet& tasks, double factor) {
    for (auto& t : tasks) {
        t.x *= factor;
        t.x_star *= factor;
    }
}

} // namespace

TaskData load_tasks(const ExperimentConfig& cfg) {
    TaskData data;
    const std::uint64_t meta_seed = derive_seed(cfg.seed, 1);
    const std::uint64_t eval_seed = derive_seed(cfg.seed, 2);
    switch (cfg.family) {
    case TaskFamily::Step:
        data.meta = gen_step_tasks(cfg.meta_tasks, meta_seed);
        data.eval = gen_step_tasks(cfg.eval_tasks, eval_seed);
        break;
    case TaskFamily::Sinusoid:
        data.meta = gen_sinusoid_tasks(cfg.meta_tasks, cfg.sinusoid, meta_seed);
        data.eval = gen_sinusoid_tasks(cfg.eval_tasks, cfg.sinusoid, eval_seed);
        break;
    case TaskFamily::Mnist: {
        const auto train = load_mnist_images(cfg.mnist_dir, "train-images-idx3-ubyte", cfg.meta_tasks);
        const auto test = load_mnist_images(cfg.mnist_dir, "t10k-images-idx3-ubyte", cfg.eval_tasks);
        data.meta = mnist_completion_tasks(train, {cfg.mnist_meta_points, 0, cfg.mnist_normalize}, meta_seed);
        data.eval = mnist_completion_tasks(test, {cfg.mnist_eval_context, -1, cfg.mnist_normalize}, eval_seed);
        break;
    }
    case TaskFamily::Csv: {
        auto loaded = load_csv_timeseries(cfg.csv_path, cfg.csv);
        if (loaded.skipped_entities > 0 || loaded.dropped_rows > 0)
            std::clog << "csv: dropped " << loaded.dropped_rows << " rows, skipped " << loaded.skipped_entities
                      << " empty entities\n";
        scale_inputs(loaded.tasks, 1.0 / cfg.time_scale);
        const auto n = loaded.tasks.size();
        const auto n_eval = static_cast<std::size_t>(std::lround(cfg.csv_eval_fraction * static_cast<double>(n)));
        if (n_eval < 1 || n_eval >= n)
            fail(ErrorCode::InvalidArgument, "csv: need at least one meta-training and one evaluation entity");
        for (std::size_t i = 0; i < n - n_eval; ++i) data.meta.push_back(merge_context_and_test(loaded.tasks[i]));
        data.eval.assign(loaded.tasks.begin() + static_cast<std::ptrdiff_t>(n - n_eval), loaded.tasks.end());
        break;
    }
    }
    return data;
}

GpPrior initial_prior(const ExperimentConfig& cfg, Index input_dim) {
    GpPrior p;
    RbfKernel rbf{std::log(cfg.init_lengthscale), std::log(cfg.init_signal_var)};
    p.log_noise_var = std::log(cfg.init_noise_var);
    if (cfg.kernel_from_generator && cfg.family == TaskFamily::Sinusoid) {
        rbf = {std::log(cfg.sinusoid.lengthscale), std::log(cfg.sinusoid.signal_var)};
        p.log_noise_var = std::log(cfg.sinusoid.noise_var);
    }

    switch (cfg.model) {
    case ModelPreset::LearnedMean:
    case ModelPreset::LearnedBoth:
    case ModelPreset::NnDirect: {
        auto spec = nn::make_mlp(input_dim, cfg.hidden, 1, cfg.activation);
        auto params = nn::init_params(spec, derive_seed(cfg.seed, 11));
        p.mean = DeepMean{std::move(spec), std::move(params)};
        break;
    }
    case ModelPreset::TrueMean:
        if (cfg.family != TaskFamily::Sinusoid)
            fail(ErrorCode::InvalidArgument, "true_mean is only defined for the sinusoid family");
        p.mean = SinusoidMean{cfg.sinusoid.amplitude, cfg.sinusoid.frequency};
        break;
    default: p.mean = ZeroMean{}; break;
    }

    if (cfg.model == ModelPreset::LearnedKernel || cfg.model == ModelPreset::LearnedBoth) {
        auto spec = nn::make_mlp(input_dim, cfg.hidden, kDeepKernelEmbeddingDim, cfg.activation);
        auto params = nn::init_params(spec, derive_seed(cfg.seed, 12));
        rbf.log_lengthscale = std::log(cfg.init_embedding_lengthscale);
        p.kernel = DeepKernel{std::move(spec), std::move(params), rbf};
    } else {
        p.kernel = rbf;
    }
    return p;
}

TrainResult train_prior(const ExperimentConfig& cfg, const TaskSet& meta_tasks, const EpochObserver& observer) {
    if (meta_tasks.empty()) fail(ErrorCode::InvalidArgument, "train_prior: no meta-training tasks");
    const GpPrior p0 = initial_prior(cfg, meta_tasks.front().input_dim());
    const ParamGroups groups = cfg.trainable();
    if (!groups.any()) return {p0, {}};
    TrainConfig train = cfg.train;
    train.trainable = groups;
    train.seed = derive_seed(cfg.seed, 13);
    const auto started = std::chrono::steady_clock::now();
    std::optional<GpPrior> best;
    double best_loss = 0.0;
    EpochObserver hook = [&](int epoch, const GpPrior& p, double loss) {
        if (cfg.verbose) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::clog << "[" << cfg.name << "/" << to_string(cfg.model) << "] epoch " << epoch + 1 << "/"
                      << train.epochs << " meta_loss=" << loss << " (" << secs << " s)\n";
        }
        if (cfg.keep_best_epoch && (!best || loss < best_loss)) {
            best = p;
            best_loss = loss;
        }
        if (observer) observer(epoch, p, loss);
    };
    TrainResult result = meta_train(p0, meta_tasks, train, hook);
    if (best) result.prior = std::move(*best);
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Stat summarize(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return s;
}

RegressionTask target_task(const ExperimentConfig& cfg, const RegressionTask& eval_task, std::size_t index,
                           int n_tilde) {
    if (n_tilde == kAllContext) return eval_task;
    const Unchosen policy = cfg.family == TaskFamily::Csv ? Unchosen::Discard : Unchosen::MoveToTest;
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(n_tilde)), index);
    return subsample_context(eval_task, n_tilde, seed, policy);
}

namespace {

template <class PerTask>
std::vector<ResultRow> evaluate_with(const ExperimentConfig& cfg, const std::string& method, const TaskSet& eval_tasks,
                                     bool has_density, PerTask&& per_task) {
    std::vector<ResultRow> rows;
    for (int n_tilde : cfg.n_tilde) {
        std::vector<double> mse, dens;
        for (std::size_t i = 0; i < eval_tasks.size(); ++i) {
            const RegressionTask target = target_task(cfg, eval_tasks[i], i, n_tilde);
            if (target.test_size() == 0) continue;
            const PredictiveMetrics m = per_task(target, i, n_tilde);
            mse.push_back(m.mse);
            dens.push_back(m.avg_log_density);
        }
        ResultRow row;
        row.method = method;
        row.n_tilde = n_tilde;
        row.tasks = mse.size();
        row.mse = summarize(mse);
        if (has_density) row.log_density = summarize(dens);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::vector<ResultRow> evaluate_prior(const ExperimentConfig& cfg, const std::string& method, const GpPrior& prior,
                                      const TaskSet& eval_tasks) {
    return evaluate_with(cfg, method, eval_tasks, true, [&](const RegressionTask& t, std::size_t, int) {
        return predictive_metrics(posterior_predict(prior, t.x, t.y, t.x_star), prior, t.y_star);
    });
}

MeanOnTargetResult eval_mean_on_target(const RegressionTask& target, const GpPrior& base, const nn::MlpSpec& spec,
                                       const MeanOnTargetConfig& cfg, std::uint64_t seed) {
    target.validate();
    if (target.context_size() < 1) fail(ErrorCode::InvalidArgument, "eval_mean_on_target: needs n_tilde >= 1");
    if (cfg.steps < 0) fail(ErrorCode::InvalidArgument, "eval_mean_on_target: negative step count");
    GpPrior prior = base;
    DeepMean mean{spec, nn::init_params(spec, seed)};

    // Kernel and noise are frozen, so the factor of K + noise I is reused.
    MatrixXd a = kernel_matrix(prior.kernel, target.x, target.x);
    a.diagonal().array() += prior.noise_var();
    const auto factor = cholesky(a);
    for (int step = 0; step < cfg.steps; ++step) {
        const VectorXd residual = target.y - nn::forward(mean.spec, mean.params, target.x).col(0);
        const VectorXd alpha = solve_cholesky(factor, residual);
        VectorXd grad = nn::vjp(mean.spec, mean.params, target.x, alpha).param_grad;
        double scale = cfg.learning_rate;
        if (cfg.grad_clip) {
            const double norm = grad.norm();
            if (norm > *cfg.grad_clip) scale *= *cfg.grad_clip / norm;
        }
        mean.params += scale * grad;
        if (!mean.params.allFinite())
            fail(ErrorCode::Diverged, "eval_mean_on_target: parameters became non-finite at step " +
                                          std::to_string(step));
    }
    prior.mean = mean;
    MeanOnTargetResult out;
    out.metrics = predictive_metrics(posterior_predict(prior, target.x, target.y, target.x_star), prior, target.y_star);
    out.mean = std::move(mean);
    out.target = target;
    return out;
}

double eval_nn_direct(const DeepMean& mean, const RegressionTask& target) {
    require_dims(target.x_star.rows() == target.y_star.size(), "eval_nn_direct: test set shape");
    if (target.test_size() == 0) fail(ErrorCode::InvalidArgument, "eval_nn_direct: empty test set");
    const VectorXd pred = nn::forward(mean.spec, mean.params, target.x_star).col(0);
    return (pred - target.y_star).squaredNorm() / static_cast<double>(target.test_size());
}

std::vector<ResultRow> evaluate_mean_on_target(const ExperimentConfig& cfg, const GpPrior& base,
                                               const TaskSet& eval_tasks) {
    if (eval_tasks.empty()) return {};
    const auto spec = nn::make_mlp(eval_tasks.front().input_dim(), cfg.hidden, 1, cfg.activation);
    GpPrior zero_mean = base;
    zero_mean.mean = ZeroMean{};
    return evaluate_with(cfg, to_string(ModelPreset::MeanOnTarget), eval_tasks, true,
                         [&](const RegressionTask& t, std::size_t index, int n_tilde) {
                             const std::uint64_t seed =
                                 derive_seed(derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(n_tilde)), index);
                             return eval_mean_on_target(t, zero_mean, spec, cfg.mean_on_target, seed).metrics;
                         });
}

std::vector<ResultRow> evaluate_nn_direct(const ExperimentConfig& cfg, const GpPrior& learned_mean_prior,
                                          const TaskSet& eval_tasks) {
    const auto* mean = std::get_if<DeepMean>(&learned_mean_prior.mean);
    if (!mean) fail(ErrorCode::InvalidArgument, "nn_direct needs a prior with a deep mean");
    return evaluate_with(cfg, to_string(ModelPreset::NnDirect), eval_tasks, false,
                         [&](const RegressionTask& t, std::size_t, int) {
                             return PredictiveMetrics{eval_nn_direct(*mean, t), 0.0};
                         });
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const TaskData data = load_tasks(cfg);
    const GpPrior prior = train_prior(cfg, data.meta).prior;
    switch (cfg.model) {
    case ModelPreset::MeanOnTarget: return evaluate_mean_on_target(cfg, prior, data.eval);
    case ModelPreset::NnDirect: return evaluate_nn_direct(cfg, prior, data.eval);
    default: return evaluate_prior(cfg, to_string(cfg.model), prior, data.eval);
    }
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string n_tilde_label(int n) { return n == kAllContext ? "all" : std::to_string(n); }

} // namespace

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "method,n_tilde,mse_mean,mse_se,loglik_mean,loglik_se,tasks\n";
    for (const auto& r : rows) {
        os << r.method << ',' << n_tilde_label(r.n_tilde) << ',' << fmt(r.mse.mean) << ',' << fmt(r.mse.std_error)
           << ',';
        if (r.log_density) os << fmt(r.log_density->mean) << ',' << fmt(r.log_density->std_error);
        else os << ',';
        os << ',' << r.tasks << '\n';
    }
}

std::string results_markdown(const std::vector<ResultRow>& rows, const std::string& title) {
    std::vector<std::string> methods;
    std::vector<int> ns;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        if (std::find(ns.begin(), ns.end(), r.n_tilde) == ns.end()) ns.push_back(r.n_tilde);
    }
    std::ostringstream md;
    md << "### " << title << "\n\n| Method |";
    for (int n : ns) md << " ñ=" << n_tilde_label(n) << " likelihood | ñ=" << n_tilde_label(n) << " MSE |";
    md << "\n|---|";
    for (std::size_t i = 0; i < ns.size(); ++i) md << "---:|---:|";
    md << '\n';
    for (const auto& m : methods) {
        md << "| " << m << " |";
        for (int n : ns) {
            const auto it = std::find_if(rows.begin(), rows.end(),
                                         [&](const ResultRow& r) { return r.method == m && r.n_tilde == n; });
            if (it == rows.end()) {
                md << " | |";
                continue;
            }
            if (it->log_density)
                md << ' ' << fmt(it->log_density->mean, "%.2f") << " ± " << fmt(it->log_density->std_error, "%.2f")
                   << " |";
            else md << " - |";
            md << ' ' << fmt(it->mse.mean, "%.3f") << " ± " << fmt(it->mse.std_error, "%.3f") << " |";
        }
        md << '\n';
    }
    return md.str();
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

const ResultRow& find_row(const std::vector<ResultRow>& rows, const std::string& method, int n_tilde) {
    const auto it = std::find_if(rows.begin(), rows.end(),
                                 [&](const ResultRow& r) { return r.method == method && r.n_tilde == n_tilde; });
    if (it == rows.end())
        fail(ErrorCode::InvalidArgument, "no result row for " + method + " at n_tilde " + std::to_string(n_tilde));
    return *it;
}

ExperimentConfig table_method_config(Table table, ModelPreset model, const ReproduceOptions& opts) {
    const char* preset = table == Table::Table1 ? "step" : table == Table::TableS1 ? "sinusoid" : "mnist";
    ExperimentConfig cfg = preset_config(preset, opts.scale);
    cfg.model = model;
    cfg.seed = opts.seed;
    cfg.verbose = opts.verbose;
    if (opts.mnist_dir) cfg.mnist_dir = *opts.mnist_dir;
    if (table == Table::TableS1) {
        // Zero, true and learned means share the generating kernel and noise.
        cfg.kernel_from_generator = true;
        if (model == ModelPreset::Vanilla) cfg.trainable_override = ParamGroups::none();
        if (model == ModelPreset::LearnedMean) cfg.trainable_override = ParamGroups{true, false, false};
    }
    return cfg;
}

namespace {

struct MethodSpec {
    std::string label;
    ModelPreset model;
};

std::vector<MethodSpec> table_methods(Table table) {
    switch (table) {
    case Table::Table1:
        return {{"vanilla", ModelPreset::Vanilla},
                {"learned_kernel", ModelPreset::LearnedKernel},
                {"learned_mean", ModelPreset::LearnedMean},
                {"learned_both", ModelPreset::LearnedBoth}};
    case Table::TableS1:
        return {{"zero_mean", ModelPreset::Vanilla},
                {"true_mean", ModelPreset::TrueMean},
                {"learned_mean", ModelPreset::LearnedMean}};
    case Table::TableS2:
        return {{"nn_direct", ModelPreset::NnDirect},
                {"mean_on_target", ModelPreset::MeanOnTarget},
                {"vanilla", ModelPreset::Vanilla},
                {"learned_kernel", ModelPreset::LearnedKernel},
                {"learned_mean", ModelPreset::LearnedMean},
                {"learned_both", ModelPreset::LearnedBoth}};
    }
    return {};
}

std::vector<Verdict> table_verdicts(Table table, const std::vector<ResultRow>& rows) {
    auto mse = [&](const char* m, int n) { return find_row(rows, m, n).mse.mean; };
    auto lik = [&](const char* m, int n) { return find_row(rows, m, n).log_density.value().mean; };
    std::vector<Verdict> v;
    switch (table) {
    case Table::Table1: {
        v.push_back({"n=1: learned_both MSE < learned_mean MSE", mse("learned_both", 1) < mse("learned_mean", 1)});
        v.push_back({"n=1: learned_mean MSE < learned_kernel MSE", mse("learned_mean", 1) < mse("learned_kernel", 1)});
        v.push_back({"n=1: learned_both likelihood >= learned_kernel likelihood - 0.02",
                     lik("learned_both", 1) >= lik("learned_kernel", 1) - 0.02});
        bool in_band = true;
        for (const char* m : {"vanilla", "learned_kernel", "learned_mean", "learned_both"})
            in_band = in_band && mse(m, 20) >= 0.01 && mse(m, 20) <= 0.05;
        v.push_back({"n=20: every method's MSE within [0.01, 0.05]", in_band});
        break;
    }
    case Table::TableS1: {
        const double learned = mse("learned_mean", 1);
        v.push_back({"n=1: learned_mean MSE within [0.6, 1.0]", learned >= 0.6 && learned <= 1.0});
        v.push_back({"n=1: learned_mean MSE < zero_mean MSE", learned < mse("zero_mean", 1)});
        v.push_back({"n=1: learned_mean MSE within 15% of true_mean MSE",
                     std::abs(learned - mse("true_mean", 1)) <= 0.15 * mse("true_mean", 1)});
        break;
    }
    case Table::TableS2:
        v.push_back({"n=50: learned_mean MSE < vanilla MSE", mse("learned_mean", 50) < mse("vanilla", 50)});
        v.push_back({"n=3: mean_on_target MSE >= 1.5 x learned_mean MSE",
                     mse("mean_on_target", 3) >= 1.5 * mse("learned_mean", 3)});
        v.push_back({"n=50: learned_mean MSE <= nn_direct MSE", mse("learned_mean", 50) <= mse("nn_direct", 50)});
        break;
    }
    return v;
}

std::string table_title(Table t) {
    switch (t) {
    case Table::Table1: return "Step function regression";
    case Table::TableS1: return "Sinusoid regression";
    case Table::TableS2: return "MNIST image completion";
    }
    return "";
}

} // namespace

TableReport reproduce_table(Table table, const ReproduceOptions& opts) {
    TableReport report;
    report.table = table;
    const auto methods = table_methods(table);
    const TaskData data = load_tasks(table_method_config(table, ModelPreset::Vanilla, opts));

    std::optional<GpPrior> vanilla, learned_mean;
    auto trained = [&](ModelPreset model) {
        const ExperimentConfig cfg = table_method_config(table, model, opts);
        return train_prior(cfg, data.meta).prior;
    };
    for (const auto& m : methods) {
        const ExperimentConfig cfg = table_method_config(table, m.model, opts);
        std::vector<ResultRow> rows;
        if (m.model == ModelPreset::MeanOnTarget) {
            if (!vanilla) vanilla = trained(ModelPreset::Vanilla);
            rows = evaluate_mean_on_target(cfg, *vanilla, data.eval);
        } else if (m.model == ModelPreset::NnDirect) {
            if (!learned_mean) learned_mean = trained(ModelPreset::LearnedMean);
            rows = evaluate_nn_direct(cfg, *learned_mean, data.eval);
        } else {
            GpPrior prior;
            if (m.model == ModelPreset::Vanilla && vanilla) prior = *vanilla;
            else if (m.model == ModelPreset::LearnedMean && learned_mean) prior = *learned_mean;
            else prior = trained(m.model);
            if (m.model == ModelPreset::Vanilla) vanilla = prior;
            if (m.model == ModelPreset::LearnedMean) learned_mean = prior;
            rows = evaluate_prior(cfg, m.label, prior, data.eval);
        }
        for (auto& r : rows) r.method = m.label;
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }

    report.verdicts = table_verdicts(table, report.rows);
    std::ostringstream csv;
    write_results_csv(csv, report.rows);
    report.csv = csv.str();
    std::ostringstream md;
    md << results_markdown(report.rows, table_title(table) + " (" + to_string(opts.scale) + " scale, seed " +
                                            std::to_string(opts.seed) + ")");
    md << '\n';
    for (const auto& v : report.verdicts) md << "- " << (v.holds ? "[reproduced] " : "[NOT reproduced] ") << v.claim << '\n';
    report.markdown = md.str();
    return report;
}

} // namespace gpmeta::experiment
