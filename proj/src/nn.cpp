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

#include "gpmeta/nn.hpp"

#include <random>

#include "gpmeta/binary_io.hpp"

namespace gpmeta::nn {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using Weights = Eigen::Map<RowMajorMatrix>;

void check_params(const MlpSpec& spec, const ParamVector& params) {
    spec.validate();
    require_dims(params.size() == spec.param_count(),
                 "nn: parameter vector has " + std::to_string(params.size()) + " entries, spec needs " +
                     std::to_string(spec.param_count()));
}

void activate(Activation a, MatrixXd& z) {
    switch (a) {
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    }
}

// Multiplies `grad` in place by the activation derivative, expressed in terms
// of the post-activation values.
void scale_by_derivative(Activation a, const MatrixXd& post, MatrixXd& grad) {
    switch (a) {
    case Activation::Sigmoid: grad.array() *= post.array() * (1.0 - post.array()); break;
    case Activation::Relu: grad.array() *= (post.array() > 0.0).cast<double>(); break;
    }
}

MatrixXd affine(const MatrixXd& h, const ParamVector& params, const LayerOffsets& off) {
    ConstWeights w(params.data() + off.weights, off.fan_out, off.fan_in);
    MatrixXd z = h * w.transpose();
    z.rowwise() += params.segment(off.bias, off.fan_out).transpose();
    return z;
}

} // namespace

std::string to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "relu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "relu") return Activation::Relu;
    fail(ErrorCode::InvalidArgument, "unknown activation '" + s + "'");
}

Index MlpSpec::param_count() const {
    Index n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    return n;
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) fail(ErrorCode::InvalidArgument, "MlpSpec needs at least two layer sizes");
    for (Index s : layer_sizes)
        if (s < 1) fail(ErrorCode::InvalidArgument, "MlpSpec layer sizes must be >= 1");
}

MlpSpec make_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Activation activation) {
    MlpSpec spec;
    spec.layer_sizes.push_back(input_dim);
    spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
    spec.layer_sizes.push_back(output_dim);
    spec.activation = activation;
    spec.validate();
    return spec;
}

LayerOffsets layer_offsets(const MlpSpec& spec, std::size_t layer) {
    Index offset = 0;
    for (std::size_t l = 0; l < layer; ++l)
        offset += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
    const Index fan_in = spec.layer_sizes[layer];
    const Index fan_out = spec.layer_sizes[layer + 1];
    return {offset, offset + fan_in * fan_out, fan_in, fan_out};
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    ParamVector params = ParamVector::Zero(spec.param_count());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto off = layer_offsets(spec, l);
        const double limit = std::sqrt(6.0 / static_cast<double>(off.fan_in + off.fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Index k = 0; k < off.fan_in * off.fan_out; ++k) params[off.weights + k] = dist(rng);
    }
    return params;
}

MatrixXd forward(const MlpSpec& spec, const ParamVector& params, const MatrixXd& x) {
    check_params(spec, params);
    require_dims(x.cols() == spec.input_dim(), "nn::forward: input has " + std::to_string(x.cols()) +
                                                   " columns, network expects " + std::to_string(spec.input_dim()));
    MatrixXd h = x;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        h = affine(h, params, layer_offsets(spec, l));
        if (l + 1 < spec.layer_count()) activate(spec.activation, h);
    }
    return h;
}

VjpResult vjp(const MlpSpec& spec, const ParamVector& params, const MatrixXd& x, const MatrixXd& upstream) {
    check_params(spec, params);
    require_dims(x.cols() == spec.input_dim(), "nn::vjp: input dimension mismatch");
    require_dims(upstream.rows() == x.rows() && upstream.cols() == spec.output_dim(),
                 "nn::vjp: upstream must be " + std::to_string(x.rows()) + "x" +
                     std::to_string(spec.output_dim()));

    const std::size_t layers = spec.layer_count();
    // tape[l] is the input to layer l; tape[layers] is the output.
    std::vector<MatrixXd> tape;
    tape.reserve(layers + 1);
    tape.push_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        MatrixXd z = affine(tape.back(), params, layer_offsets(spec, l));
        if (l + 1 < layers) activate(spec.activation, z);
        tape.push_back(std::move(z));
    }

    VjpResult result{tape.back(), ParamVector::Zero(params.size())};
    MatrixXd grad = upstream;
    for (std::size_t l = layers; l-- > 0;) {
        const auto off = layer_offsets(spec, l);
        Weights dw(result.param_grad.data() + off.weights, off.fan_out, off.fan_in);
        dw.noalias() = grad.transpose() * tape[l];
        result.param_grad.segment(off.bias, off.fan_out) = grad.colwise().sum().transpose();
        if (l == 0) break;
        ConstWeights w(params.data() + off.weights, off.fan_out, off.fan_in);
        MatrixXd below = grad * w;
        scale_by_derivative(spec.activation, tape[l], below);
        grad = std::move(below);
    }
    return result;
}

void write_checkpoint(std::ostream& os, const MlpSpec& spec, const ParamVector& params) {
    check_params(spec, params);
    binio::write_magic(os, "GPMN");
    binio::write_pod<std::uint32_t>(os, kCheckpointVersion);
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.layer_sizes.size()));
    for (Index s : spec.layer_sizes) binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s));
    binio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(spec.activation));
    binio::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(params.size()));
    os.write(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double));
}

Checkpoint read_checkpoint(std::istream& is) {
    constexpr std::string_view what = "nn checkpoint";
    binio::expect_magic(is, "GPMN", what);
    const auto version = binio::read_pod<std::uint32_t>(is, what);
    if (version != kCheckpointVersion)
        fail(ErrorCode::BadFormat, "nn checkpoint: unsupported version " + std::to_string(version));
    const auto count = binio::read_pod<std::uint32_t>(is, what);
    if (count < 2 || count > 64) fail(ErrorCode::BadFormat, "nn checkpoint: implausible layer count");
    Checkpoint cp;
    for (std::uint32_t i = 0; i < count; ++i) cp.spec.layer_sizes.push_back(binio::read_pod<std::uint32_t>(is, what));
    const auto act = binio::read_pod<std::uint8_t>(is, what);
    if (act > 1) fail(ErrorCode::BadFormat, "nn checkpoint: unknown activation tag");
    cp.spec.activation = static_cast<Activation>(act);
    cp.spec.validate();
    const auto n = binio::read_pod<std::uint64_t>(is, what);
    if (static_cast<Index>(n) != cp.spec.param_count())
        fail(ErrorCode::BadFormat, "nn checkpoint: parameter count does not match the layer sizes");
    cp.params.resize(static_cast<Index>(n));
    is.read(reinterpret_cast<char*>(cp.params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        fail(ErrorCode::TruncatedStream, "nn checkpoint: parameter block truncated");
    return cp;
}

} // namespace gpmeta::nn
