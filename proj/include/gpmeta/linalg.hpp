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

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gpmeta/error.hpp"

namespace gpmeta {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kDefaultJitter = 1e-10;
inline constexpr int kMaxJitterEscalations = 6;

/// Lower Cholesky factor of A + jitter_used * I.
/// Invariant: square, strictly positive diagonal, zero upper triangle.
template <typename Scalar>
struct CholeskyFactor {
    Matrix<Scalar> lower;
    Scalar jitter_used = 0;

    Index size() const { return lower.rows(); }
};

namespace detail {

template <typename Scalar>
Scalar jitter_for_attempt(Scalar base, int attempt) {
    if (attempt == 0) return base;
    if (base > 0) return base * std::pow(Scalar(10), Scalar(attempt));
    return Scalar(kDefaultJitter) * std::pow(Scalar(10), Scalar(attempt - 1));
}

} // namespace detail

/// Factorizes a symmetric matrix, adding diagonal jitter when needed.
/// The first attempt uses base_jitter; each failure multiplies the jitter by
/// ten (a zero base escalates from kDefaultJitter), at most
/// kMaxJitterEscalations times.
template <typename Derived>
CholeskyFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& a,
                                                  typename Derived::Scalar base_jitter = kDefaultJitter) {
    using Scalar = typename Derived::Scalar;
    require_dims(a.rows() == a.cols(), "cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                                           std::to_string(a.cols()) + ", expected square");
    if (!(base_jitter >= 0)) fail(ErrorCode::InvalidArgument, "cholesky: negative base jitter");
    if (!a.allFinite()) fail(ErrorCode::NotPositiveDefinite, "cholesky: matrix has non-finite entries");
    const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (a.size() > 0 && asym > Scalar(1e-10))
        fail(ErrorCode::InvalidArgument, "cholesky: matrix is not symmetric");

    const Index n = a.rows();
    Matrix<Scalar> work(n, n);
    for (int attempt = 0; attempt <= kMaxJitterEscalations; ++attempt) {
        const Scalar jitter = detail::jitter_for_attempt(base_jitter, attempt);
        work = a;
        work.diagonal().array() += jitter;
        Eigen::LLT<Eigen::Ref<Matrix<Scalar>>> llt(work);
        if (llt.info() != Eigen::Success) continue;
        const auto diag = work.diagonal();
        if (!(diag.array() > Scalar(0)).all() || !diag.allFinite()) continue;
        work.template triangularView<Eigen::StrictlyUpper>().setZero();
        return {std::move(work), jitter};
    }
    fail(ErrorCode::NotPositiveDefinite,
         "cholesky: factorization failed after " + std::to_string(kMaxJitterEscalations) +
             " jitter escalations");
}

/// Solves (L L^T) X = B by forward then back substitution.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve_cholesky(const CholeskyFactor<Scalar>& f, const Eigen::MatrixBase<Derived>& b) {
    require_dims(b.rows() == f.size(), "solve_cholesky: factor has side " + std::to_string(f.size()) +
                                           " but right-hand side has " + std::to_string(b.rows()) + " rows");
    Matrix<Scalar> x = f.lower.template triangularView<Eigen::Lower>().solve(b);
    f.lower.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
}

/// L^{-1} B, the "half solve" used for posterior covariances.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve_lower(const CholeskyFactor<Scalar>& f, const Eigen::MatrixBase<Derived>& b) {
    require_dims(b.rows() == f.size(), "solve_lower: dimension mismatch");
    return f.lower.template triangularView<Eigen::Lower>().solve(b);
}

template <typename Scalar>
Scalar logdet_from_cholesky(const CholeskyFactor<Scalar>& f) {
    return Scalar(2) * f.lower.diagonal().array().log().sum();
}

template <typename Scalar>
Matrix<Scalar> inverse_from_cholesky(const CholeskyFactor<Scalar>& f) {
    return solve_cholesky(f, Matrix<Scalar>::Identity(f.size(), f.size()));
}

/// L L^T, mostly for tests and diagnostics.
template <typename Scalar>
Matrix<Scalar> reconstruct(const CholeskyFactor<Scalar>& f) {
    return f.lower * f.lower.transpose();
}

} // namespace gpmeta
