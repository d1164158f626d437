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

#include "gpmeta/metatrain.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

namespace gpmeta {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
        fail(ErrorCode::InvalidArgument, "learning rate must be finite and non-negative");
    if (epochs < 1) fail(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (!trainable.any()) fail(ErrorCode::InvalidArgument, "at least one parameter group must be trainable");
    if (grad_clip && !(*grad_clip > 0)) fail(ErrorCode::InvalidArgument, "grad_clip must be positive");
}

double meta_loss(const GpPrior& p, std::span<const RegressionTask> tasks) {
    if (tasks.empty()) fail(ErrorCode::InvalidArgument, "meta_loss: no tasks");
    double total = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        try {
            total -= log_marginal_likelihood(p, tasks[i].x, tasks[i].y);
        } catch (const Error& e) {
            throw Error(e.code(), "task " + std::to_string(i) + ": " + e.what());
        }
    }
    return total;
}

void apply_update(GpPrior& p, const PriorGradient& g, double step, ParamGroups groups) {
    if (groups.mean && g.mean.size() > 0) set_mean_params(p.mean, mean_params(p.mean) + step * g.mean);
    if (groups.kernel && g.kernel.size() > 0) set_kernel_params(p.kernel, kernel_params(p.kernel) + step * g.kernel);
    if (groups.noise) p.log_noise_var += step * g.log_noise_var;
}

namespace {

bool finite(const GpPrior& p) {
    return mean_params(p.mean).allFinite() && kernel_params(p.kernel).allFinite() && std::isfinite(p.log_noise_var);
}

} // namespace

TrainResult meta_train(const GpPrior& p0, std::span<const RegressionTask> tasks, const TrainConfig& cfg,
                       const EpochObserver& observer) {
    cfg.validate();
    validate(p0);
    if (tasks.empty()) fail(ErrorCode::InvalidArgument, "meta_train: no tasks");

    TrainResult result{p0, {}};
    GpPrior& p = result.prior;
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed);
    bool updated = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
            const RegressionTask& task = tasks[idx];
            LmlEvaluation eval;
            try {
                eval = lml_value_and_gradient(p, task.x, task.y, cfg.trainable);
            } catch (const Error& e) {
                // A Gram that was fine at p0 and broke after an update is a step-size failure.
                const bool diverged = updated && e.code() == ErrorCode::NotPositiveDefinite;
                throw Error(diverged ? ErrorCode::Diverged : e.code(), "meta_train epoch " + std::to_string(epoch) + ", task " +
                                          std::to_string(idx) + ": " + e.what());
            }
            if (!std::isfinite(eval.value))
                fail(ErrorCode::Diverged, "meta_train: loss became non-finite at epoch " + std::to_string(epoch) +
                                              ", task " + std::to_string(idx));
            double scale = cfg.learning_rate;
            if (cfg.grad_clip) {
                const double norm = std::sqrt(eval.gradient.squared_norm());
                if (norm > *cfg.grad_clip) scale *= *cfg.grad_clip / norm;
            }
            // The gradient is of the LML; descending the negative LML adds it.
            if (scale != 0.0) {
                apply_update(p, eval.gradient, scale, cfg.trainable);
                updated = true;
            }
            if (!finite(p))
                fail(ErrorCode::Diverged, "meta_train: parameters became non-finite at epoch " +
                                              std::to_string(epoch) + "; the learning rate is likely too large");
        }
        double loss = 0.0;
        try {
            loss = meta_loss(p, tasks);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NotPositiveDefinite)
                fail(ErrorCode::Diverged, std::string("meta_train: ") + e.what());
            throw;
        }
        if (!std::isfinite(loss))
            fail(ErrorCode::Diverged, "meta_train: meta-loss became non-finite at epoch " + std::to_string(epoch));
        result.trace.push_back(loss);
        if (observer) observer(epoch, p, loss);
    }
    return result;
}

void write_loss_trace_csv(std::ostream& os, const LossTrace& trace) {
    os << "epoch,meta_loss\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) os << i + 1 << ',' << trace[i] << '\n';
}

} // namespace gpmeta
