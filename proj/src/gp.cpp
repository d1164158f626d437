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

#include "gpmeta/gp.hpp"

#include <fstream>
#include <limits>
#include <optional>

#include "gpmeta/binary_io.hpp"

namespace gpmeta {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

constexpr double kLog2Pi = 1.8378770664093454836; // log(2 pi)

MatrixXd squared_distances(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd d(a.rows(), b.rows());
    const Index dim = a.cols();
    for (Index j = 0; j < b.rows(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (Index k = 0; k < dim; ++k) {
                const double diff = a(i, k) - b(j, k);
                s += diff * diff;
            }
            d(i, j) = s;
        }
    }
    return d;
}

MatrixXd rbf_from_sqdist(const RbfKernel& k, const MatrixXd& sqdist) {
    const double inv = 0.5 / (k.lengthscale() * k.lengthscale());
    return (k.signal_var() * (-inv * sqdist.array()).exp()).matrix();
}

MatrixXd embed(const DeepKernel& k, const MatrixXd& x) { return nn::forward(k.spec, k.params, x); }

void check_input(const MatrixXd& a, const MatrixXd& b, const char* who) {
    require_dims(a.cols() == b.cols(), std::string(who) + ": input sets have " + std::to_string(a.cols()) +
                                           " and " + std::to_string(b.cols()) + " columns");
}

} // namespace

// ---------------------------------------------------------------------------
// Parameter access
// ---------------------------------------------------------------------------

VectorXd mean_params(const MeanFunction& m) {
    return std::visit(overloaded{
                          [](const ZeroMean&) { return VectorXd(); },
                          [](const SinusoidMean& s) { return VectorXd(VectorXd::Constant(1, s.amplitude)); },
                          [](const LinearMean& l) { return VectorXd(l.coeffs); },
                          [](const DeepMean& d) { return VectorXd(d.params); },
                      },
                      m);
}

void set_mean_params(MeanFunction& m, const VectorXd& values) {
    const VectorXd current = mean_params(m);
    require_dims(values.size() == current.size(), "set_mean_params: wrong parameter count");
    std::visit(overloaded{
                   [](ZeroMean&) {},
                   [&](SinusoidMean& s) { s.amplitude = values[0]; },
                   [&](LinearMean& l) { l.coeffs = values; },
                   [&](DeepMean& d) { d.params = values; },
               },
               m);
}

VectorXd kernel_params(const Kernel& k) {
    return std::visit(overloaded{
                          [](const RbfKernel& r) {
                              VectorXd v(2);
                              v << r.log_lengthscale, r.log_signal_var;
                              return v;
                          },
                          [](const DeepKernel& d) {
                              VectorXd v(2 + d.params.size());
                              v << d.base.log_lengthscale, d.base.log_signal_var, d.params;
                              return v;
                          },
                          [](const LinearKernel&) { return VectorXd(); },
                      },
                      k);
}

void set_kernel_params(Kernel& k, const VectorXd& values) {
    const VectorXd current = kernel_params(k);
    require_dims(values.size() == current.size(), "set_kernel_params: wrong parameter count");
    std::visit(overloaded{
                   [&](RbfKernel& r) {
                       r.log_lengthscale = values[0];
                       r.log_signal_var = values[1];
                   },
                   [&](DeepKernel& d) {
                       d.base.log_lengthscale = values[0];
                       d.base.log_signal_var = values[1];
                       d.params = values.tail(values.size() - 2);
                   },
                   [](LinearKernel&) {},
               },
               k);
}

void validate(const GpPrior& p) {
    if (const auto* d = std::get_if<DeepMean>(&p.mean)) {
        d->spec.validate();
        if (d->spec.output_dim() != 1) fail(ErrorCode::InvalidArgument, "deep mean network must have one output");
        if (d->params.size() != d->spec.param_count())
            fail(ErrorCode::InvalidArgument, "deep mean parameter count does not match its spec");
    }
    if (const auto* d = std::get_if<DeepKernel>(&p.kernel)) {
        d->spec.validate();
        if (d->spec.output_dim() != kDeepKernelEmbeddingDim)
            fail(ErrorCode::InvalidArgument, "deep kernel network must have a 2-dim embedding");
        if (d->params.size() != d->spec.param_count())
            fail(ErrorCode::InvalidArgument, "deep kernel parameter count does not match its spec");
    }
    // -inf is allowed and means exactly noiseless observations.
    if (std::isnan(p.log_noise_var) || p.log_noise_var == std::numeric_limits<double>::infinity())
        fail(ErrorCode::InvalidArgument, "log noise variance must be a number below +inf");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

MatrixXd kernel_matrix(const Kernel& k, const MatrixXd& a, const MatrixXd& b) {
    check_input(a, b, "kernel_matrix");
    return std::visit(overloaded{
                          [&](const RbfKernel& r) { return rbf_from_sqdist(r, squared_distances(a, b)); },
                          [&](const DeepKernel& d) {
                              const MatrixXd za = embed(d, a);
                              if (&a == &b) return rbf_from_sqdist(d.base, squared_distances(za, za));
                              return rbf_from_sqdist(d.base, squared_distances(za, embed(d, b)));
                          },
                          [&](const LinearKernel&) { return MatrixXd(a * b.transpose()); },
                      },
                      k);
}

VectorXd kernel_diagonal(const Kernel& k, const MatrixXd& a) {
    return std::visit(overloaded{
                          [&](const RbfKernel& r) { return VectorXd(VectorXd::Constant(a.rows(), r.signal_var())); },
                          [&](const DeepKernel& d) {
                              require_dims(a.cols() == d.spec.input_dim(), "kernel_diagonal: input dimension");
                              return VectorXd(VectorXd::Constant(a.rows(), d.base.signal_var()));
                          },
                          [&](const LinearKernel&) { return VectorXd(a.rowwise().squaredNorm()); },
                      },
                      k);
}

VectorXd mean_eval(const MeanFunction& m, const MatrixXd& x) {
    return std::visit(overloaded{
                          [&](const ZeroMean&) { return VectorXd(VectorXd::Zero(x.rows())); },
                          [&](const SinusoidMean& s) {
                              require_dims(x.cols() == 1, "sinusoid mean takes scalar inputs");
                              return VectorXd(s.amplitude * (s.frequency * x.col(0).array()).sin());
                          },
                          [&](const LinearMean& l) {
                              require_dims(x.cols() == l.coeffs.size(), "linear mean: feature dimension");
                              return VectorXd(x * l.coeffs);
                          },
                          [&](const DeepMean& d) { return VectorXd(nn::forward(d.spec, d.params, x).col(0)); },
                      },
                      m);
}

namespace {

struct Conditioned {
    CholeskyFactor<double> factor;
    VectorXd residual;
    VectorXd alpha;
};

Conditioned condition(const GpPrior& p, const MatrixXd& k_xx, const MatrixXd& x, const VectorXd& y,
                      double base_jitter) {
    MatrixXd a = k_xx;
    a.diagonal().array() += p.noise_var();
    Conditioned c{cholesky(a, base_jitter), y - mean_eval(p.mean, x), {}};
    c.alpha = solve_cholesky(c.factor, c.residual);
    return c;
}

void check_data(const MatrixXd& x, const VectorXd& y, const char* who) {
    require_dims(x.rows() == y.size(), std::string(who) + ": " + std::to_string(x.rows()) + " inputs but " +
                                           std::to_string(y.size()) + " targets");
    if (x.rows() < 1) fail(ErrorCode::InvalidArgument, std::string(who) + ": needs at least one observation");
    if (!y.allFinite()) fail(ErrorCode::InvalidArgument, std::string(who) + ": targets are not finite");
}

double lml_from(const Conditioned& c) {
    const double n = static_cast<double>(c.residual.size());
    return -0.5 * c.residual.dot(c.alpha) - 0.5 * logdet_from_cholesky(c.factor) - 0.5 * n * kLog2Pi;
}

// Adjoint of the LML with respect to the mean outputs is alpha; chain it into
// the mean parameters.
VectorXd mean_gradient(const MeanFunction& m, const MatrixXd& x, const VectorXd& alpha) {
    return std::visit(overloaded{
                          [](const ZeroMean&) { return VectorXd(); },
                          [&](const SinusoidMean& s) {
                              const VectorXd basis = (s.frequency * x.col(0).array()).sin().matrix();
                              return VectorXd(VectorXd::Constant(1, basis.dot(alpha)));
                          },
                          [&](const LinearMean&) { return VectorXd(x.transpose() * alpha); },
                          [&](const DeepMean& d) { return VectorXd(nn::vjp(d.spec, d.params, x, alpha).param_grad); },
                      },
                      m);
}

// q is the LML adjoint with respect to the Gram matrix: 0.5 (alpha alpha^T - A^{-1}).
VectorXd kernel_gradient(const Kernel& k, const MatrixXd& x, const MatrixXd& q, const MatrixXd* embedding) {
    return std::visit(
        overloaded{
            [&](const RbfKernel& r) {
                const MatrixXd d2 = squared_distances(x, x);
                const MatrixXd kk = rbf_from_sqdist(r, d2);
                const MatrixXd w = q.cwiseProduct(kk);
                VectorXd g(2);
                g[0] = (w.array() * d2.array()).sum() / (r.lengthscale() * r.lengthscale());
                g[1] = w.sum();
                return g;
            },
            [&](const DeepKernel& d) {
                const MatrixXd z = embedding ? *embedding : embed(d, x);
                const MatrixXd d2 = squared_distances(z, z);
                const MatrixXd kk = rbf_from_sqdist(d.base, d2);
                const MatrixXd w = q.cwiseProduct(kk);
                const double ell2 = d.base.lengthscale() * d.base.lengthscale();
                // dLML/dz_i = -(2 / l^2) sum_j w_ij (z_i - z_j)
                MatrixXd upstream = z;
                upstream.array().colwise() *= w.rowwise().sum().array();
                upstream -= w * z;
                upstream *= -2.0 / ell2;
                VectorXd g(2 + d.params.size());
                g[0] = (w.array() * d2.array()).sum() / ell2;
                g[1] = w.sum();
                g.tail(d.params.size()) = nn::vjp(d.spec, d.params, x, upstream).param_grad;
                return g;
            },
            [](const LinearKernel&) { return VectorXd(); },
        },
        k);
}

} // namespace

double log_marginal_likelihood(const GpPrior& p, const MatrixXd& x, const VectorXd& y, double base_jitter) {
    check_data(x, y, "log_marginal_likelihood");
    return lml_from(condition(p, kernel_matrix(p.kernel, x, x), x, y, base_jitter));
}

LmlEvaluation lml_value_and_gradient(const GpPrior& p, const MatrixXd& x, const VectorXd& y, ParamGroups groups,
                                     double base_jitter) {
    check_data(x, y, "lml_gradient");
    // The deep-kernel embedding feeds both the Gram matrix and its gradient.
    std::optional<MatrixXd> z;
    MatrixXd k_xx;
    if (const auto* d = std::get_if<DeepKernel>(&p.kernel)) {
        check_input(x, x, "lml_gradient");
        z = embed(*d, x);
        k_xx = rbf_from_sqdist(d->base, squared_distances(*z, *z));
    } else {
        k_xx = kernel_matrix(p.kernel, x, x);
    }
    const Conditioned c = condition(p, k_xx, x, y, base_jitter);
    LmlEvaluation out;
    out.value = lml_from(c);
    if (groups.mean) out.gradient.mean = mean_gradient(p.mean, x, c.alpha);
    if (groups.kernel || groups.noise) {
        MatrixXd q = c.alpha * c.alpha.transpose();
        q -= inverse_from_cholesky(c.factor);
        q *= 0.5;
        if (groups.kernel) out.gradient.kernel = kernel_gradient(p.kernel, x, q, z ? &*z : nullptr);
        if (groups.noise) out.gradient.log_noise_var = p.noise_var() * q.trace();
    }
    return out;
}

PriorGradient lml_gradient(const GpPrior& p, const MatrixXd& x, const VectorXd& y, ParamGroups groups,
                           double base_jitter) {
    return lml_value_and_gradient(p, x, y, groups, base_jitter).gradient;
}

GaussianPosterior posterior_predict(const GpPrior& p, const MatrixXd& x, const VectorXd& y, const MatrixXd& xs,
                                    double base_jitter) {
    require_dims(x.rows() == y.size(), "posterior_predict: inputs and targets differ in length");
    GaussianPosterior post;
    post.mean = mean_eval(p.mean, xs);
    post.cov = kernel_matrix(p.kernel, xs, xs);
    if (x.rows() > 0) {
        check_input(x, xs, "posterior_predict");
        const Conditioned c = condition(p, kernel_matrix(p.kernel, x, x), x, y, base_jitter);
        const MatrixXd k_xs = kernel_matrix(p.kernel, x, xs);
        post.mean.noalias() += k_xs.transpose() * c.alpha;
        const MatrixXd v = solve_lower(c.factor, k_xs);
        post.cov.noalias() -= v.transpose() * v;
    }
    post.cov = (0.5 * (post.cov + post.cov.transpose())).eval();
    post.cov.diagonal() = post.cov.diagonal().cwiseMax(0.0);
    return post;
}

PredictiveMetrics predictive_metrics(const GaussianPosterior& post, const GpPrior& p, const VectorXd& y_true) {
    require_dims(post.mean.size() == y_true.size() && post.cov.rows() == y_true.size(),
                 "predictive_metrics: posterior has " + std::to_string(post.mean.size()) + " points, targets " +
                     std::to_string(y_true.size()));
    if (y_true.size() == 0) fail(ErrorCode::InvalidArgument, "predictive_metrics: empty test set");
    const double m = static_cast<double>(y_true.size());
    const VectorXd err = y_true - post.mean;
    const VectorXd var = post.cov.diagonal().array() + p.noise_var();
    PredictiveMetrics out;
    out.mse = err.squaredNorm() / m;
    out.avg_log_density =
        (-0.5 * (kLog2Pi + var.array().log() + err.array().square() / var.array())).sum() / m;
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

namespace {

enum class MeanTag : std::uint8_t { Zero = 0, Sinusoid = 1, Linear = 2, Deep = 3 };
enum class KernelTag : std::uint8_t { Rbf = 0, Deep = 1, Linear = 2 };

void write_vector(std::ostream& os, const VectorXd& v) {
    binio::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

VectorXd read_vector(std::istream& is) {
    const auto n = binio::read_pod<std::uint64_t>(is, "prior checkpoint");
    if (n > (1u << 26)) fail(ErrorCode::BadFormat, "prior checkpoint: implausible vector length");
    VectorXd v(static_cast<Index>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        fail(ErrorCode::TruncatedStream, "prior checkpoint: vector truncated");
    return v;
}

void write_rbf(std::ostream& os, const RbfKernel& r) {
    binio::write_pod(os, r.log_lengthscale);
    binio::write_pod(os, r.log_signal_var);
}

RbfKernel read_rbf(std::istream& is) {
    RbfKernel r;
    r.log_lengthscale = binio::read_pod<double>(is, "prior checkpoint");
    r.log_signal_var = binio::read_pod<double>(is, "prior checkpoint");
    return r;
}

} // namespace

void write_checkpoint(std::ostream& os, const GpPrior& p) {
    validate(p);
    binio::write_magic(os, "GPPR");
    binio::write_pod<std::uint32_t>(os, kPriorCheckpointVersion);
    std::visit(overloaded{
                   [&](const ZeroMean&) { binio::write_pod(os, MeanTag::Zero); },
                   [&](const SinusoidMean& s) {
                       binio::write_pod(os, MeanTag::Sinusoid);
                       binio::write_pod(os, s.amplitude);
                       binio::write_pod(os, s.frequency);
                   },
                   [&](const LinearMean& l) {
                       binio::write_pod(os, MeanTag::Linear);
                       write_vector(os, l.coeffs);
                   },
                   [&](const DeepMean& d) {
                       binio::write_pod(os, MeanTag::Deep);
                       nn::write_checkpoint(os, d.spec, d.params);
                   },
               },
               p.mean);
    std::visit(overloaded{
                   [&](const RbfKernel& r) {
                       binio::write_pod(os, KernelTag::Rbf);
                       write_rbf(os, r);
                   },
                   [&](const DeepKernel& d) {
                       binio::write_pod(os, KernelTag::Deep);
                       write_rbf(os, d.base);
                       nn::write_checkpoint(os, d.spec, d.params);
                   },
                   [&](const LinearKernel&) { binio::write_pod(os, KernelTag::Linear); },
               },
               p.kernel);
    binio::write_pod(os, p.log_noise_var);
}

GpPrior read_checkpoint(std::istream& is) {
    constexpr std::string_view what = "prior checkpoint";
    binio::expect_magic(is, "GPPR", what);
    const auto version = binio::read_pod<std::uint32_t>(is, what);
    if (version != kPriorCheckpointVersion)
        fail(ErrorCode::BadFormat, "prior checkpoint: unsupported version " + std::to_string(version));
    GpPrior p;
    switch (binio::read_pod<MeanTag>(is, what)) {
    case MeanTag::Zero: p.mean = ZeroMean{}; break;
    case MeanTag::Sinusoid: {
        SinusoidMean s;
        s.amplitude = binio::read_pod<double>(is, what);
        s.frequency = binio::read_pod<double>(is, what);
        p.mean = s;
        break;
    }
    case MeanTag::Linear: p.mean = LinearMean{read_vector(is)}; break;
    case MeanTag::Deep: {
        auto cp = nn::read_checkpoint(is);
        p.mean = DeepMean{std::move(cp.spec), std::move(cp.params)};
        break;
    }
    default: fail(ErrorCode::BadFormat, "prior checkpoint: unknown mean tag");
    }
    switch (binio::read_pod<KernelTag>(is, what)) {
    case KernelTag::Rbf: p.kernel = read_rbf(is); break;
    case KernelTag::Deep: {
        const RbfKernel base = read_rbf(is);
        auto cp = nn::read_checkpoint(is);
        p.kernel = DeepKernel{std::move(cp.spec), std::move(cp.params), base};
        break;
    }
    case KernelTag::Linear: p.kernel = LinearKernel{}; break;
    default: fail(ErrorCode::BadFormat, "prior checkpoint: unknown kernel tag");
    }
    p.log_noise_var = binio::read_pod<double>(is, what);
    validate(p);
    return p;
}

void save_prior(const std::filesystem::path& path, const GpPrior& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot write " + path.string());
    write_checkpoint(os, p);
}

GpPrior load_prior(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::MissingData, "cannot open " + path.string());
    return read_checkpoint(is);
}

} // namespace gpmeta
