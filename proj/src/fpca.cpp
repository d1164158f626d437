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

#include "gpmeta/fpca.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <random>

namespace gpmeta::fpca {

void SplineBasis::validate() const {
    if (degree < 0) fail(ErrorCode::InvalidArgument, "spline degree must be >= 0");
    if (static_cast<Index>(knots.size()) < degree + 2)
        fail(ErrorCode::InvalidArgument, "spline basis needs at least degree + 2 knots");
    if (!std::is_sorted(knots.begin(), knots.end()))
        fail(ErrorCode::InvalidArgument, "spline knots must be non-decreasing");
    if (!(span_max() > span_min())) fail(ErrorCode::InvalidArgument, "spline basis has an empty span");
}

SplineBasis clamped_uniform(int degree, Index q, double lo, double hi) {
    if (q < degree + 1) fail(ErrorCode::InvalidArgument, "clamped_uniform: need q >= degree + 1");
    if (!(hi > lo)) fail(ErrorCode::InvalidArgument, "clamped_uniform: empty interval");
    SplineBasis basis;
    basis.degree = degree;
    const Index interior = q - degree - 1;
    for (int i = 0; i <= degree; ++i) basis.knots.push_back(lo);
    for (Index i = 1; i <= interior; ++i)
        basis.knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(interior + 1));
    for (int i = 0; i <= degree; ++i) basis.knots.push_back(hi);
    return basis;
}

namespace {

// Index i with knots[i] <= x < knots[i+1]; the right end of the span maps to
// the last non-empty interval.
Index find_span(const SplineBasis& b, double x) {
    const Index p = b.degree;
    const Index q = b.size();
    const auto& t = b.knots;
    if (x >= t[static_cast<std::size_t>(q)]) {
        Index i = q - 1;
        while (i > p && !(t[static_cast<std::size_t>(i)] < t[static_cast<std::size_t>(i + 1)])) --i;
        return i;
    }
    const auto it = std::upper_bound(t.begin() + p, t.begin() + q + 1, x);
    return static_cast<Index>(it - t.begin()) - 1;
}

} // namespace

MatrixXd bspline_design(const SplineBasis& basis, const VectorXd& x) {
    basis.validate();
    const Index p = basis.degree;
    const auto& t = basis.knots;
    MatrixXd design = MatrixXd::Zero(x.size(), basis.size());
    std::vector<double> n(static_cast<std::size_t>(p + 1)), left(n.size()), right(n.size());
    for (Index r = 0; r < x.size(); ++r) {
        const double u = x[r];
        if (!(u >= basis.span_min() && u <= basis.span_max()))
            fail(ErrorCode::OutOfSpan, "bspline_design: x = " + std::to_string(u) + " outside [" +
                                           std::to_string(basis.span_min()) + ", " +
                                           std::to_string(basis.span_max()) + "]");
        const Index span = find_span(basis, u);
        // Cox-de Boor triangle for the p + 1 non-zero functions on this span.
        n[0] = 1.0;
        for (Index j = 1; j <= p; ++j) {
            left[j] = u - t[static_cast<std::size_t>(span + 1 - j)];
            right[j] = t[static_cast<std::size_t>(span + j)] - u;
            double saved = 0.0;
            for (Index k = 0; k < j; ++k) {
                const double denom = right[k + 1] + left[j - k];
                const double temp = denom > 0.0 ? n[k] / denom : 0.0;
                n[k] = saved + right[k + 1] * temp;
                saved = left[j - k] * temp;
            }
            n[j] = saved;
        }
        for (Index k = 0; k <= p; ++k) design(r, span - p + k) = n[k];
    }
    return design;
}

void FpcaModel::validate() const {
    basis.validate();
    require_dims(theta_m.size() == basis.size(), "FpcaModel: theta_m must have one entry per basis function");
    if (!(sigma2 > 0)) fail(ErrorCode::InvalidArgument, "FpcaModel: sigma2 must be positive");
}

FpcaPosterior fpca_posterior_terms(const FpcaModel& model, const VectorXd& x, const VectorXd& y,
                                   const VectorXd& x_star) {
    model.validate();
    require_dims(x.size() == y.size(), "fpca_posterior: x and y differ in length");
    if (x.size() < 1) fail(ErrorCode::InvalidArgument, "fpca_posterior: needs at least one observation");
    const MatrixXd bx = bspline_design(model.basis, x);
    const MatrixXd bs = bspline_design(model.basis, x_star);
    const MatrixXd gram = bx.transpose() * bx;

    // theta_c = (B^T B + sigma2 I)^{-1} B^T (y - B theta_m)
    MatrixXd system = gram;
    system.diagonal().array() += model.sigma2;
    const auto system_factor = cholesky(system, 0.0);
    const VectorXd theta_c = solve_cholesky(system_factor, bx.transpose() * (y - bx * model.theta_m));

    // Gamma = (I + B^T B / sigma2)^{-1}
    MatrixXd precision = gram / model.sigma2;
    precision.diagonal().array() += 1.0;
    const auto precision_factor = cholesky(precision, 0.0);

    FpcaPosterior out;
    out.beta_hat = model.theta_m + theta_c;
    out.gamma_hat = inverse_from_cholesky(precision_factor);
    out.gamma_hat = (0.5 * (out.gamma_hat + out.gamma_hat.transpose())).eval();
    out.predictive.mean = bs * out.beta_hat;
    out.predictive.cov = bs * out.gamma_hat * bs.transpose();
    out.predictive.cov.diagonal().array() += model.sigma2;
    return out;
}

GaussianPosterior fpca_posterior(const FpcaModel& model, const VectorXd& x, const VectorXd& y, const VectorXd& x_star) {
    return fpca_posterior_terms(model, x, y, x_star).predictive;
}

GpPrior equivalent_gp_prior(const FpcaModel& model) {
    model.validate();
    GpPrior p;
    p.mean = LinearMean{model.theta_m};
    p.kernel = LinearKernel{};
    p.log_noise_var = std::log(model.sigma2);
    return p;
}

GaussianPosterior gp_path_posterior(const FpcaModel& model, const VectorXd& x, const VectorXd& y,
                                    const VectorXd& x_star) {
    const GpPrior p = equivalent_gp_prior(model);
    GaussianPosterior post =
        posterior_predict(p, bspline_design(model.basis, x), y, bspline_design(model.basis, x_star), 0.0);
    post.cov.diagonal().array() += model.sigma2;
    return post;
}

EquivalenceReport check_gp_fpca_equivalence(const FpcaModel& model, int trials, std::uint64_t seed,
                                            const EquivalenceOptions& opts) {
    if (trials < 1) fail(ErrorCode::InvalidArgument, "check_gp_fpca_equivalence: trials must be >= 1");
    model.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> in_span(model.basis.span_min(), model.basis.span_max());
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<Index> n_train(1, opts.max_train);
    std::uniform_int_distribution<Index> n_test(1, opts.max_test);

    EquivalenceReport report;
    for (int t = 0; t < trials; ++t) {
        VectorXd x(n_train(rng)), y, xs(n_test(rng));
        for (Index i = 0; i < x.size(); ++i) x[i] = in_span(rng);
        y.resize(x.size());
        for (Index i = 0; i < y.size(); ++i) y[i] = normal(rng);
        for (Index i = 0; i < xs.size(); ++i) xs[i] = in_span(rng);

        const GaussianPosterior a = fpca_posterior(model, x, y, xs);
        const GaussianPosterior b = gp_path_posterior(model, x, y, xs);
        EquivalenceTrial row{t, (a.mean - b.mean).cwiseAbs().maxCoeff(), (a.cov - b.cov).cwiseAbs().maxCoeff()};
        report.max_mean_discrepancy = std::max(report.max_mean_discrepancy, row.mean_discrepancy);
        report.max_cov_discrepancy = std::max(report.max_cov_discrepancy, row.cov_discrepancy);
        report.trials.push_back(row);
    }
    return report;
}

void write_equivalence_csv(std::ostream& os, const EquivalenceReport& report) {
    os << "trial,mean_disc,cov_disc\n" << std::setprecision(17);
    for (const auto& r : report.trials) os << r.trial << ',' << r.mean_discrepancy << ',' << r.cov_discrepancy << '\n';
}

FpcaModel fit_mean_coefficients(const FpcaModel& init, std::span<const RegressionTask> tasks, TrainConfig cfg) {
    init.validate();
    TaskSet featurized;
    featurized.reserve(tasks.size());
    for (const auto& t : tasks) {
        require_dims(t.x.cols() == 1, "fit_mean_coefficients: tasks must have scalar inputs");
        RegressionTask f;
        f.x = bspline_design(init.basis, t.x.col(0));
        f.y = t.y;
        f.meta = t.meta;
        featurized.push_back(std::move(f));
    }
    cfg.trainable = {true, false, false};
    const TrainResult trained = meta_train(equivalent_gp_prior(init), featurized, cfg);
    FpcaModel out = init;
    out.theta_m = std::get<LinearMean>(trained.prior.mean).coeffs;
    return out;
}

} // namespace gpmeta::fpca
