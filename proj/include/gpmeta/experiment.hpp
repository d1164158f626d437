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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpmeta/gp.hpp"
#include "gpmeta/metatrain.hpp"
#include "gpmeta/tasks.hpp"

// Experiment orchestration: task generation, meta-training of the prior for
// a model preset, evaluation on held-out target tasks and aggregation.
namespace gpmeta::experiment {

enum class TaskFamily { Step, Sinusoid, Mnist, Csv };

enum class ModelPreset {
    Vanilla,       // zero mean, RBF
    LearnedKernel, // zero mean, deep kernel
    LearnedMean,   // deep mean, RBF
    LearnedBoth,   // deep mean, deep kernel
    MeanOnTarget,  // deep mean fit on the target context only, RBF from vanilla
    NnDirect,      // learned-mean network used without the GP
    TrueMean,      // generating sinusoid mean, no training
};

enum class Scale { Desk, Paper };

std::string to_string(TaskFamily f);
std::string to_string(ModelPreset m);
std::string to_string(Scale s);
TaskFamily family_from_string(const std::string& s);
ModelPreset model_from_string(const std::string& s);
Scale scale_from_string(const std::string& s);

/// Trainable groups of each preset (TrueMean trains nothing).
ParamGroups preset_trainable(ModelPreset m);

struct MeanOnTargetConfig {
    int steps = 500;
    double learning_rate = 1e-2;
    std::optional<double> grad_clip = 10.0;
};

/// n_tilde value meaning "condition on every context point".
inline constexpr int kAllContext = -1;

struct ExperimentConfig {
    std::string name = "step";
    TaskFamily family = TaskFamily::Step;
    ModelPreset model = ModelPreset::Vanilla;
    std::uint64_t seed = 0;
    std::size_t meta_tasks = 2000;
    std::size_t eval_tasks = 200;

    SinusoidConfig sinusoid;

    std::filesystem::path mnist_dir = "data/mnist";
    /// Pixels per meta-training image.
    Index mnist_meta_points = 100;
    /// Context pool per evaluation image (the largest n_tilde).
    Index mnist_eval_context = 300;
    bool mnist_normalize = true;

    std::filesystem::path csv_path;
    CsvSeriesConfig csv;
    double csv_eval_fraction = 0.5;
    /// Times are divided by this before entering the model.
    double time_scale = 1.0;

    std::vector<Index> hidden = {128, 64};
    nn::Activation activation = nn::Activation::Sigmoid;
    double init_lengthscale = 1.0;
    /// Deep kernels: initial RBF lengthscale in embedding space.
    double init_embedding_lengthscale = 1.0;
    double init_signal_var = 1.0;
    double init_noise_var = 0.01;
    /// Sinusoid family: start (and, if untrained, keep) the RBF and noise at
    /// the generating values.
    bool kernel_from_generator = false;

    TrainConfig train;
    /// Return the end-of-epoch prior with the lowest meta-loss instead of the last one.
    bool keep_best_epoch = true;
    std::optional<ParamGroups> trainable_override;
    int checkpoint_every = 0;
    MeanOnTargetConfig mean_on_target;

    std::vector<int> n_tilde = {1, 5, 20};
    bool verbose = false;

    ParamGroups trainable() const { return trainable_override.value_or(preset_trainable(model)); }
    void validate() const;
};

/// Preset names: step, sinusoid, mnist, icu.
ExperimentConfig preset_config(const std::string& preset, Scale scale = Scale::Desk);

struct TaskData {
    TaskSet meta;
    TaskSet eval;
};

/// Generates or loads the meta-training and evaluation task sets.
TaskData load_tasks(const ExperimentConfig& cfg);

/// Starting prior for the config's model preset.
GpPrior initial_prior(const ExperimentConfig& cfg, Index input_dim);

/// Meta-trains the initial prior (or returns it unchanged when nothing is trainable).
/// The trace always covers every epoch.
TrainResult train_prior(const ExperimentConfig& cfg, const TaskSet& meta_tasks, const EpochObserver& observer = {});

struct Stat {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Mean and sample standard deviation / sqrt(count), reduced in index order.
Stat summarize(const std::vector<double>& values);

struct ResultRow {
    std::string method;
    int n_tilde = 0;
    Stat mse;
    std::optional<Stat> log_density;
    std::size_t tasks = 0;
};

/// The target-task view of an evaluation task for a given n_tilde; the seed
/// depends only on (experiment seed, task index, n_tilde) so every method sees
/// the same context points.
RegressionTask target_task(const ExperimentConfig& cfg, const RegressionTask& eval_task, std::size_t index,
                           int n_tilde);

/// Conditions the prior on each target task and aggregates the metrics.
std::vector<ResultRow> evaluate_prior(const ExperimentConfig& cfg, const std::string& method, const GpPrior& prior,
                                      const TaskSet& eval_tasks);

struct MeanOnTargetResult {
    PredictiveMetrics metrics;
    DeepMean mean;
    RegressionTask target;
};

/// Fits a freshly initialized mean network by LML gradient ascent on the
/// target's own context points (kernel and noise from `base` stay fixed),
/// then evaluates on the target's test points.
MeanOnTargetResult eval_mean_on_target(const RegressionTask& target, const GpPrior& base, const nn::MlpSpec& spec,
                                       const MeanOnTargetConfig& cfg, std::uint64_t seed);

/// Test MSE of the mean network alone.
double eval_nn_direct(const DeepMean& mean, const RegressionTask& target);

std::vector<ResultRow> evaluate_mean_on_target(const ExperimentConfig& cfg, const GpPrior& base,
                                               const TaskSet& eval_tasks);
std::vector<ResultRow> evaluate_nn_direct(const ExperimentConfig& cfg, const GpPrior& learned_mean_prior,
                                          const TaskSet& eval_tasks);

/// generate -> meta-train -> evaluate for cfg.model.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::string results_markdown(const std::vector<ResultRow>& rows, const std::string& title);

// ---------------------------------------------------------------------------
// Table reproduction
// ---------------------------------------------------------------------------

enum class Table { Table1, TableS1, TableS2 };
std::string to_string(Table t);
Table table_from_string(const std::string& s);

struct Verdict {
    std::string claim;
    bool holds = false;
};

struct TableReport {
    Table table = Table::Table1;
    std::vector<ResultRow> rows;
    std::vector<Verdict> verdicts;
    std::string markdown;
    std::string csv;
};

struct ReproduceOptions {
    Scale scale = Scale::Desk;
    std::uint64_t seed = 42;
    std::optional<std::filesystem::path> mnist_dir;
    bool verbose = false;
};

/// Experiment config used for one method of a table.
ExperimentConfig table_method_config(Table table, ModelPreset model, const ReproduceOptions& opts);

TableReport reproduce_table(Table table, const ReproduceOptions& opts);

/// Looks up a row; throws InvalidArgument if absent.
const ResultRow& find_row(const std::vector<ResultRow>& rows, const std::string& method, int n_tilde);

} // namespace gpmeta::experiment
