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
#include <span>
#include <string>
#include <vector>

#include "gpmeta/linalg.hpp"

namespace gpmeta {

struct TaskMeta {
    std::string generator;
    std::uint64_t seed = 0;
    std::uint64_t task_id = 0;
    bool operator==(const TaskMeta&) const = default;
};

/// Context observations (x, y) and held-out test points (x_star, y_star).
/// Meta-training tasks may leave the test part empty.
struct RegressionTask {
    MatrixXd x;
    VectorXd y;
    MatrixXd x_star;
    VectorXd y_star;
    TaskMeta meta;

    Index context_size() const { return x.rows(); }
    Index test_size() const { return x_star.rows(); }
    Index input_dim() const { return x.cols() > 0 ? x.cols() : x_star.cols(); }

    /// Throws DimensionMismatch if any of the shapes disagree.
    void validate() const;
    bool operator==(const RegressionTask&) const = default;
};

using TaskSet = std::vector<RegressionTask>;

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

inline constexpr Index kSyntheticGridSize = 50;

struct SinusoidConfig {
    double amplitude = 1.0;
    double frequency = 1.0;
    double lengthscale = 1.0;
    double signal_var = 1.0;
    /// Observation noise variance.
    double noise_var = 0.01;
    double x_min = -5.0;
    double x_max = 5.0;
};

/// f ~ GP(a sin(b x), RBF) on a fixed 50-point grid, plus Gaussian noise.
TaskSet gen_sinusoid_tasks(std::size_t count, const SinusoidConfig& cfg, std::uint64_t seed);

enum class StepOrientation : std::uint8_t { Up = 0, Down = 1 };

struct StepFnParams {
    double x_step = 0.0;
    StepOrientation orientation = StepOrientation::Up;
};

inline constexpr double kStepDomainMin = -2.0;
inline constexpr double kStepDomainMax = 2.0;

/// y1 for x < x_step, y2 otherwise; Up is (0, 1), Down is (1, 0).
VectorXd step_values(const StepFnParams& params, const VectorXd& x);

/// Step functions on 50 evenly spaced points of [-2, 2]; orientation is a fair
/// coin, x_step ~ U[-1, 1].
TaskSet gen_step_tasks(std::size_t count, std::uint64_t seed);

VectorXd linspace_grid(double lo, double hi, Index n);

// ---------------------------------------------------------------------------
// IDX / MNIST
// ---------------------------------------------------------------------------

/// Unsigned-byte IDX tensor: magic 0x0000 08 <ndims>, big-endian u32 dims, raw bytes.
struct IdxTensor {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;
    bool operator==(const IdxTensor&) const = default;
};

IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor);
IdxTensor read_idx_file(const std::filesystem::path& path);
void write_idx_file(const std::filesystem::path& path, const IdxTensor& tensor);

inline constexpr Index kMnistSide = 28;
inline constexpr Index kMnistPixels = kMnistSide * kMnistSide;

/// One 28x28 image, row-major bytes.
using MnistImage = std::vector<std::uint8_t>;

/// Splits an images tensor (n, 28, 28) into at most `limit` images.
std::vector<MnistImage> images_from_idx(const IdxTensor& tensor, std::size_t limit = SIZE_MAX);

struct MnistCompletionConfig {
    Index n_context = 300;
    /// Negative means every pixel not in the context.
    Index n_test = -1;
    /// Coordinates scaled to [0, 1]^2 when set, raw {0..27}^2 otherwise.
    bool normalize_coords = true;
};

/// Inputs are pixel coordinates, targets intensity / 255. Context pixels are
/// drawn uniformly without replacement; the remainder (capped at n_test) forms
/// the test set.
TaskSet mnist_completion_tasks(std::span<const MnistImage> images, const MnistCompletionConfig& cfg,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV time series
// ---------------------------------------------------------------------------

struct CsvSeriesConfig {
    std::string entity_column = "entity";
    std::string time_column = "time";
    std::string value_column = "value";
    /// Observations strictly before split_time become context.
    double split_time = 24.0;
};

struct CsvLoadResult {
    TaskSet tasks;
    std::size_t dropped_rows = 0;
    std::size_t skipped_entities = 0;
};

/// One task per entity, in order of first appearance. Rows with a missing
/// time or value are dropped; entities left without rows are skipped.
CsvLoadResult load_csv_timeseries(const std::filesystem::path& path, const CsvSeriesConfig& cfg);
CsvLoadResult parse_csv_timeseries(std::istream& is, const CsvSeriesConfig& cfg, const std::string& source = "csv");

// ---------------------------------------------------------------------------
// Subsampling and caching
// ---------------------------------------------------------------------------

enum class Unchosen { Discard, MoveToTest };

/// Keeps n_tilde uniformly chosen context points. Unchosen context points are
/// either dropped or appended to the test set.
RegressionTask subsample_context(const RegressionTask& task, Index n_tilde, std::uint64_t seed,
                                 Unchosen policy = Unchosen::Discard);

/// Combined context + test observations (the full series of a task).
RegressionTask merge_context_and_test(const RegressionTask& task);

// Cache: "GPTK", u32 version, u64 task count, then per task the meta tag
// strings/ids and the four arrays as u64 shape + f64 values.
inline constexpr std::uint32_t kTaskCacheVersion = 1;

void write_task_cache(std::ostream& os, const TaskSet& tasks);
TaskSet read_task_cache(std::istream& is);
void save_task_cache(const std::filesystem::path& path, const TaskSet& tasks);
TaskSet load_task_cache(const std::filesystem::path& path);

/// SplitMix64 finalizer; derives independent sub-seeds from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace gpmeta
