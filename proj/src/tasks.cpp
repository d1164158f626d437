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

#include "gpmeta/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "gpmeta/binary_io.hpp"

namespace gpmeta {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void RegressionTask::validate() const {
    require_dims(x.rows() == y.size(), "task: context inputs and targets differ in length");
    require_dims(x_star.rows() == y_star.size(), "task: test inputs and targets differ in length");
    if (x.rows() > 0 && x_star.rows() > 0)
        require_dims(x.cols() == x_star.cols(), "task: context and test inputs differ in dimension");
}

VectorXd linspace_grid(double lo, double hi, Index n) { return VectorXd::LinSpaced(n, lo, hi); }

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

TaskSet gen_sinusoid_tasks(std::size_t count, const SinusoidConfig& cfg, std::uint64_t seed) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "gen_sinusoid_tasks: count must be >= 1");
    if (!(cfg.lengthscale > 0) || !(cfg.signal_var >= 0) || !(cfg.noise_var >= 0))
        fail(ErrorCode::InvalidArgument, "gen_sinusoid_tasks: scale parameters must be positive");

    const VectorXd grid = linspace_grid(cfg.x_min, cfg.x_max, kSyntheticGridSize);
    const VectorXd mean = cfg.amplitude * (cfg.frequency * grid.array()).sin();

    MatrixXd chol_lower;
    if (cfg.signal_var > 0) {
        MatrixXd k(grid.size(), grid.size());
        const double inv = 0.5 / (cfg.lengthscale * cfg.lengthscale);
        for (Index i = 0; i < grid.size(); ++i)
            for (Index j = 0; j < grid.size(); ++j)
                k(i, j) = cfg.signal_var * std::exp(-inv * (grid[i] - grid[j]) * (grid[i] - grid[j]));
        chol_lower = cholesky(k).lower;
    }

    TaskSet tasks;
    tasks.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        std::mt19937_64 rng(derive_seed(seed, t));
        std::normal_distribution<double> normal;
        VectorXd f = mean;
        if (cfg.signal_var > 0) {
            VectorXd z(grid.size());
            for (Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
            f += chol_lower * z;
        }
        if (cfg.noise_var > 0) {
            const double sd = std::sqrt(cfg.noise_var);
            for (Index i = 0; i < f.size(); ++i) f[i] += sd * normal(rng);
        }
        RegressionTask task;
        task.x = grid;
        task.y = std::move(f);
        task.x_star.resize(0, 1);
        task.meta = {"sinusoid", seed, t};
        tasks.push_back(std::move(task));
    }
    return tasks;
}

VectorXd step_values(const StepFnParams& params, const VectorXd& x) {
    const double before = params.orientation == StepOrientation::Up ? 0.0 : 1.0;
    const double after = 1.0 - before;
    return x.unaryExpr([&](double v) { return v < params.x_step ? before : after; });
}

TaskSet gen_step_tasks(std::size_t count, std::uint64_t seed) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "gen_step_tasks: count must be >= 1");
    const VectorXd grid = linspace_grid(kStepDomainMin, kStepDomainMax, kSyntheticGridSize);
    TaskSet tasks;
    tasks.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        std::mt19937_64 rng(derive_seed(seed, t));
        StepFnParams params;
        params.orientation = std::bernoulli_distribution(0.5)(rng) ? StepOrientation::Up : StepOrientation::Down;
        params.x_step = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        RegressionTask task;
        task.x = grid;
        task.y = step_values(params, grid);
        task.x_star.resize(0, 1);
        task.meta = {"step", seed, t};
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// MNIST completion
// ---------------------------------------------------------------------------

std::vector<MnistImage> images_from_idx(const IdxTensor& tensor, std::size_t limit) {
    if (tensor.dims.size() != 3 || tensor.dims[1] != kMnistSide || tensor.dims[2] != kMnistSide)
        fail(ErrorCode::BadFormat, "expected an (n, 28, 28) image tensor");
    const std::size_t n = std::min<std::size_t>(tensor.dims[0], limit);
    std::vector<MnistImage> images(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto first = tensor.data.begin() + static_cast<std::ptrdiff_t>(i * kMnistPixels);
        images[i].assign(first, first + kMnistPixels);
    }
    return images;
}

TaskSet mnist_completion_tasks(std::span<const MnistImage> images, const MnistCompletionConfig& cfg,
                               std::uint64_t seed) {
    const Index remainder = kMnistPixels - cfg.n_context;
    if (cfg.n_context < 0 || remainder < 0)
        fail(ErrorCode::InvalidArgument, "mnist_completion_tasks: n_context must be within [0, 784]");
    if (cfg.n_test > remainder)
        fail(ErrorCode::InvalidArgument, "mnist_completion_tasks: n_context + n_test exceeds 784 pixels");
    const Index n_test = cfg.n_test < 0 ? remainder : cfg.n_test;
    const double scale = cfg.normalize_coords ? 1.0 / static_cast<double>(kMnistSide - 1) : 1.0;

    auto fill = [&](const MnistImage& img, std::span<const Index> pixels, MatrixXd& x, VectorXd& y) {
        x.resize(static_cast<Index>(pixels.size()), 2);
        y.resize(static_cast<Index>(pixels.size()));
        for (std::size_t k = 0; k < pixels.size(); ++k) {
            const Index p = pixels[k];
            x(k, 0) = static_cast<double>(p / kMnistSide) * scale;
            x(k, 1) = static_cast<double>(p % kMnistSide) * scale;
            y[k] = static_cast<double>(img[static_cast<std::size_t>(p)]) / 255.0;
        }
    };

    TaskSet tasks;
    tasks.reserve(images.size());
    std::vector<Index> order(kMnistPixels);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].size() != static_cast<std::size_t>(kMnistPixels))
            fail(ErrorCode::DimensionMismatch, "mnist_completion_tasks: image is not 28x28");
        std::iota(order.begin(), order.end(), Index{0});
        std::mt19937_64 rng(derive_seed(seed, i));
        std::shuffle(order.begin(), order.end(), rng);
        const std::span<const Index> all(order);
        RegressionTask task;
        fill(images[i], all.subspan(0, cfg.n_context), task.x, task.y);
        fill(images[i], all.subspan(cfg.n_context, n_test), task.x_star, task.y_star);
        task.meta = {"mnist", seed, i};
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// CSV time series
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        else if (c == ',' && !quoted) {
            fields.push_back(trim(cur));
            cur.clear();
        } else cur.push_back(c);
    }
    fields.push_back(trim(cur));
    return fields;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "nan" || s == "NaN" || s == "?"; }

double parse_number(const std::string& s, const std::string& source, std::size_t line, const std::string& column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        fail(ErrorCode::ParseError,
             source + ":" + std::to_string(line) + ": column '" + column + "' is not a number: '" + s + "'");
    return v;
}

} // namespace

CsvLoadResult parse_csv_timeseries(std::istream& is, const CsvSeriesConfig& cfg, const std::string& source) {
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::ParseError, source + ":1: missing header row");
    const auto header = split_fields(line);
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) fail(ErrorCode::ParseError, source + ":1: no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_entity = column(cfg.entity_column);
    const std::size_t c_time = column(cfg.time_column);
    const std::size_t c_value = column(cfg.value_column);

    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> points;
        std::size_t rows = 0;
    };
    std::vector<Series> series;
    std::unordered_map<std::string, std::size_t> index;
    CsvLoadResult result;

    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": expected " +
                                            std::to_string(header.size()) + " fields, found " +
                                            std::to_string(fields.size()));
        const std::string& entity = fields[c_entity];
        if (entity.empty()) fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": empty entity");
        auto [it, inserted] = index.try_emplace(entity, series.size());
        if (inserted) series.push_back({entity, {}, 0});
        Series& s = series[it->second];
        ++s.rows;
        if (is_missing(fields[c_time]) || is_missing(fields[c_value])) {
            ++result.dropped_rows;
            continue;
        }
        s.points.emplace_back(parse_number(fields[c_time], source, line_no, cfg.time_column),
                              parse_number(fields[c_value], source, line_no, cfg.value_column));
    }

    for (std::size_t e = 0; e < series.size(); ++e) {
        auto& pts = series[e].points;
        if (pts.empty()) {
            ++result.skipped_entities;
            continue;
        }
        std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        const auto split = std::partition_point(pts.begin(), pts.end(),
                                                [&](const auto& p) { return p.first < cfg.split_time; });
        const Index n_ctx = split - pts.begin();
        const Index n_test = static_cast<Index>(pts.size()) - n_ctx;
        RegressionTask task;
        task.x.resize(n_ctx, 1);
        task.y.resize(n_ctx);
        task.x_star.resize(n_test, 1);
        task.y_star.resize(n_test);
        for (Index i = 0; i < n_ctx; ++i) {
            task.x(i, 0) = pts[i].first;
            task.y[i] = pts[i].second;
        }
        for (Index i = 0; i < n_test; ++i) {
            task.x_star(i, 0) = pts[n_ctx + i].first;
            task.y_star[i] = pts[n_ctx + i].second;
        }
        task.meta = {"csv:" + series[e].name, 0, e};
        result.tasks.push_back(std::move(task));
    }
    return result;
}

CsvLoadResult load_csv_timeseries(const std::filesystem::path& path, const CsvSeriesConfig& cfg) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::MissingData, "cannot open CSV file " + path.string());
    return parse_csv_timeseries(is, cfg, path.string());
}

// ---------------------------------------------------------------------------
// Subsampling
// ---------------------------------------------------------------------------

namespace {

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& rows) {
    MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

VectorXd take(const VectorXd& v, const std::vector<Index>& rows) {
    VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
    return out;
}

MatrixXd stack_rows(const MatrixXd& a, const MatrixXd& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    MatrixXd out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

VectorXd stack(const VectorXd& a, const VectorXd& b) {
    VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

} // namespace

RegressionTask subsample_context(const RegressionTask& task, Index n_tilde, std::uint64_t seed, Unchosen policy) {
    task.validate();
    if (n_tilde < 0 || n_tilde > task.context_size())
        fail(ErrorCode::InvalidArgument, "subsample_context: n_tilde " + std::to_string(n_tilde) +
                                             " exceeds the context size " + std::to_string(task.context_size()));
    std::vector<Index> order(static_cast<std::size_t>(task.context_size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n_tilde entries are a uniform subset.
    for (Index i = 0; i < n_tilde; ++i) {
        std::uniform_int_distribution<Index> pick(i, task.context_size() - 1);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> chosen(order.begin(), order.begin() + n_tilde);
    std::vector<Index> rest(order.begin() + n_tilde, order.end());
    std::sort(chosen.begin(), chosen.end());
    std::sort(rest.begin(), rest.end());

    RegressionTask out;
    out.meta = task.meta;
    out.x = take_rows(task.x, chosen);
    out.y = take(task.y, chosen);
    if (policy == Unchosen::MoveToTest) {
        out.x_star = stack_rows(take_rows(task.x, rest), task.x_star);
        out.y_star = stack(take(task.y, rest), task.y_star);
    } else {
        out.x_star = task.x_star;
        out.y_star = task.y_star;
    }
    if (out.x_star.cols() != task.x.cols() && out.x_star.rows() == 0) out.x_star.resize(0, task.x.cols());
    return out;
}

RegressionTask merge_context_and_test(const RegressionTask& task) {
    task.validate();
    RegressionTask out;
    out.meta = task.meta;
    out.x = stack_rows(task.x, task.x_star);
    out.y = stack(task.y, task.y_star);
    out.x_star.resize(0, out.x.cols());
    return out;
}

// ---------------------------------------------------------------------------
// Task cache
// ---------------------------------------------------------------------------

namespace {

void write_matrix(std::ostream& os, const MatrixXd& m) {
    binio::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    binio::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) binio::write_pod(os, m(i, j));
}

MatrixXd read_matrix(std::istream& is) {
    const auto rows = binio::read_pod<std::uint64_t>(is, "task cache");
    const auto cols = binio::read_pod<std::uint64_t>(is, "task cache");
    if (rows > (1u << 24) || cols > (1u << 16)) fail(ErrorCode::BadFormat, "task cache: implausible shape");
    MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = binio::read_pod<double>(is, "task cache");
    return m;
}

} // namespace

void write_task_cache(std::ostream& os, const TaskSet& tasks) {
    binio::write_magic(os, "GPTK");
    binio::write_pod<std::uint32_t>(os, kTaskCacheVersion);
    binio::write_pod<std::uint64_t>(os, tasks.size());
    for (const auto& t : tasks) {
        t.validate();
        binio::write_string(os, t.meta.generator);
        binio::write_pod(os, t.meta.seed);
        binio::write_pod(os, t.meta.task_id);
        write_matrix(os, t.x);
        write_matrix(os, t.y);
        write_matrix(os, t.x_star);
        write_matrix(os, t.y_star);
    }
}

TaskSet read_task_cache(std::istream& is) {
    binio::expect_magic(is, "GPTK", "task cache");
    const auto version = binio::read_pod<std::uint32_t>(is, "task cache");
    if (version != kTaskCacheVersion)
        fail(ErrorCode::BadFormat, "task cache: unsupported version " + std::to_string(version));
    const auto count = binio::read_pod<std::uint64_t>(is, "task cache");
    TaskSet tasks;
    for (std::uint64_t i = 0; i < count; ++i) {
        RegressionTask t;
        t.meta.generator = binio::read_string(is, "task cache");
        t.meta.seed = binio::read_pod<std::uint64_t>(is, "task cache");
        t.meta.task_id = binio::read_pod<std::uint64_t>(is, "task cache");
        t.x = read_matrix(is);
        t.y = read_matrix(is);
        t.x_star = read_matrix(is);
        t.y_star = read_matrix(is);
        t.validate();
        tasks.push_back(std::move(t));
    }
    return tasks;
}

void save_task_cache(const std::filesystem::path& path, const TaskSet& tasks) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot write " + path.string());
    write_task_cache(os, tasks);
}

TaskSet load_task_cache(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::MissingData, "cannot open " + path.string());
    return read_task_cache(is);
}

} // namespace gpmeta
