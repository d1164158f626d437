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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gpmeta/gp.hpp"
#include "gpmeta/tasks.hpp"

namespace gpmeta {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    ParamGroups trainable;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    /// Global L2 norm cap on each per-task gradient.
    std::optional<double> grad_clip;

    void validate() const;
};

/// Meta-loss at the end of each epoch.
using LossTrace = std::vector<double>;

struct TrainResult {
    GpPrior prior;
    LossTrace trace;
};

/// Sum over tasks of the negative log marginal likelihood of each task's
/// context observations.
double meta_loss(const GpPrior& p, std::span<const RegressionTask> tasks);

using EpochObserver = std::function<void(int epoch, const GpPrior& prior, double loss)>;

/// Plain SGD with one update per task, visiting tasks in a seeded shuffled
/// order each epoch. Gradient entries outside cfg.trainable are zeroed, so
/// those groups are returned bitwise unchanged. Throws Diverged when a loss or
/// parameter turns non-finite.
TrainResult meta_train(const GpPrior& p0, std::span<const RegressionTask> tasks, const TrainConfig& cfg,
                       const EpochObserver& observer = {});

/// Applies psi <- psi + step * g to the groups selected by `groups`.
void apply_update(GpPrior& p, const PriorGradient& g, double step, ParamGroups groups);

void write_loss_trace_csv(std::ostream& os, const LossTrace& trace);

} // namespace gpmeta
