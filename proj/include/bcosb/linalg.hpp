/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>

#include "bcosb/errors.hpp"

namespace bcosb {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

namespace linalg {

/// (M + M^H)/2. Cheap way to keep accumulated covariances exactly Hermitian.
inline CMat hermitianize(const CMat& m) { return 0.5 * (m + m.adjoint()); }

inline bool is_hermitian(const CMat& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// log2 det of a Hermitian positive definite matrix via Cholesky, accumulated
/// in the log domain. Throws NumericalFailure if the factorization fails.
inline double log2_det_hpd(const CMat& m) {
    Eigen::LLT<CMat> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalFailure("log2_det_hpd: matrix is not positive definite");
    double acc = 0.0;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index k = 0; k < m.rows(); ++k) acc += std::log2(std::real(L(k, k)));
    return 2.0 * acc;
}

/// Nearest-PSD projection: eigenvalues clamped to >= 0.
inline CMat project_psd(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitianize(m));
    RVec ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

struct SqrtPair {
    CMat sqrt;
    CMat inv_sqrt;
};

/// Hermitian square root and inverse square root via eigendecomposition.
/// Eigenvalues are floored at 1e-14 * (largest eigenvalue) before inversion;
/// matrices whose spectrum is not usable at that floor raise NumericalFailure.
inline SqrtPair herm_sqrt_pair(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitianize(m));
    if (es.info() != Eigen::Success)
        throw NumericalFailure("herm_sqrt_pair: eigendecomposition failed");
    RVec ev = es.eigenvalues();
    double ev_max = ev.maxCoeff();
    if (!(ev_max > 0.0) || !std::isfinite(ev_max))
        throw NumericalFailure("herm_sqrt_pair: matrix has no positive spectrum");
    if (ev.minCoeff() < -1e-8 * ev_max)
        throw NumericalFailure("herm_sqrt_pair: matrix is significantly indefinite");
    const double floor = 1e-14 * ev_max;
    RVec evf = ev.cwiseMax(floor);
    RVec rs = evf.cwiseSqrt();
    SqrtPair out;
    out.sqrt = es.eigenvectors() * rs.asDiagonal() * es.eigenvectors().adjoint();
    out.inv_sqrt =
        es.eigenvectors() * rs.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
    return out;
}

}  // namespace linalg
}  // namespace bcosb
