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
#include <iosfwd>
#include <string>
#include <vector>

#include "gpmeta/linalg.hpp"

// Small fully connected networks used as deep mean functions and as
// deep-kernel feature maps. Hidden layers share one activation; the output
// layer is linear.
namespace gpmeta::nn {

enum class Activation : std::uint8_t { Sigmoid = 0, Relu = 1 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpSpec {
    /// Input dimension first, output dimension last.
    std::vector<Index> layer_sizes;
    Activation activation = Activation::Sigmoid;

    Index input_dim() const { return layer_sizes.front(); }
    Index output_dim() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return layer_sizes.size() - 1; }
    Index param_count() const;

    /// Throws InvalidArgument unless there are >= 2 sizes, all >= 1.
    void validate() const;

    bool operator==(const MlpSpec&) const = default;
};

/// Builds [d, hidden..., out].
MlpSpec make_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                 Activation activation = Activation::Sigmoid);

/// Flat parameters laid out as [W1 row-major (out x in), b1, W2, b2, ...].
using ParamVector = VectorXd;

/// Glorot-uniform weights, zero biases. Deterministic in the seed.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

/// Offsets of layer l's weight block and bias block inside a ParamVector.
struct LayerOffsets {
    Index weights;
    Index bias;
    Index fan_in;
    Index fan_out;
};
LayerOffsets layer_offsets(const MlpSpec& spec, std::size_t layer);

/// Batched evaluation: X is n x d, result is n x out.
MatrixXd forward(const MlpSpec& spec, const ParamVector& params, const MatrixXd& x);

struct VjpResult {
    MatrixXd outputs;
    ParamVector param_grad;
};

/// Reverse-mode pass: param_grad[k] = sum_ij upstream(i,j) d outputs(i,j) / d params[k].
VjpResult vjp(const MlpSpec& spec, const ParamVector& params, const MatrixXd& x, const MatrixXd& upstream);

// Checkpoint record: "GPMN", u32 version, u32 layer count, u32 sizes...,
// u8 activation, u64 parameter count, f64 values. All little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const MlpSpec& spec, const ParamVector& params);

struct Checkpoint {
    MlpSpec spec;
    ParamVector params;
};
Checkpoint read_checkpoint(std::istream& is);

} // namespace gpmeta::nn
