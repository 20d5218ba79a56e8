// Copyright 2026 The fqsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Dense complex linear algebra shared by every module.
 */

#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "fqsim/errors.hpp"
#include "fqsim/rng.hpp"

namespace fqsim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

/// max_ij |(A^dagger A - I)_ij|
inline double unitarity_defect(const Matrix &u) {
    if (u.rows() != u.cols()) {
        return INFINITY;
    }
    return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()))
        .cwiseAbs()
        .maxCoeff();
}

inline double hermiticity_defect(const Matrix &h) {
    if (h.rows() != h.cols()) {
        return INFINITY;
    }
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
inline double hermitian_norm(const Matrix &h) {
    if (h.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Spectral norm of an arbitrary matrix.
inline double operator_norm(const Matrix &a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

/// exp(-i h t) for Hermitian h, through the eigendecomposition.
inline Matrix expm_hermitian(const Matrix &h, double t) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const RealVector &w = es.eigenvalues();
    Vector phases(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        phases(i) = std::exp(-kI * w(i) * t);
    }
    return es.eigenvectors() * phases.asDiagonal() *
           es.eigenvectors().adjoint();
}

/// Matrix with i.i.d. standard complex normal entries.
inline Matrix random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                     CounterRng &rng) {
    Matrix a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            a(i, j) = cplx(re, im) / std::sqrt(2.0);
        }
    }
    return a;
}

/// Haar-ish random unitary: QR of a Gaussian matrix with phase-fixed R.
inline Matrix random_unitary(Eigen::Index dim, CounterRng &rng) {
    const Matrix a = random_gaussian_matrix(dim, dim, rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double mag = std::abs(r(i, i));
        if (mag > 0.0) {
            q.col(i) *= r(i, i) / mag;
        }
    }
    return q;
}

/// Random Hermitian matrix rescaled to spectral norm `norm`.
inline Matrix random_hermitian(Eigen::Index dim, double norm,
                               CounterRng &rng) {
    const Matrix a = random_gaussian_matrix(dim, dim, rng);
    Matrix h = (a + a.adjoint()) / 2.0;
    const double n = hermitian_norm(h);
    if (n > 0.0) {
        h *= norm / n;
    }
    return h;
}

/// Normalized random state vector.
inline Vector random_state(Eigen::Index dim, CounterRng &rng) {
    Vector v = random_gaussian_matrix(dim, 1, rng).col(0);
    return v / v.norm();
}

/// Unitary W with ||W - I|| = eps exactly: exp(-i a K), K Hermitian with
/// spectral norm 1 and 2 sin(a/2) = eps.
inline Matrix random_perturbation(Eigen::Index dim, double eps,
                                  CounterRng &rng) {
    if (eps <= 0.0) {
        return Matrix::Identity(dim, dim);
    }
    if (eps > 2.0) {
        throw ContractViolation("perturbation norm must be <= 2");
    }
    const Matrix k = random_hermitian(dim, 1.0, rng);
    const double angle = 2.0 * std::asin(eps / 2.0);
    return expm_hermitian(k, angle);
}

} // namespace fqsim
