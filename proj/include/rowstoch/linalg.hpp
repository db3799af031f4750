#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "rowstoch/errors.hpp"

namespace rowstoch {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Spectral (2-) norm of a dense matrix, computed by power iteration on
/// B^T B with Rayleigh-quotient estimates. No SVD involved.
///
/// Stops when successive eigenvalue estimates agree to `tol` (relative),
/// or at `cap` iterations, in which case the current estimate is returned.
inline double matrix_2norm(const MatrixXd& B, double tol = 1e-12,
                           long cap = 100000) {
  if (B.rows() == 0 || B.cols() == 0) return 0.0;
  const MatrixXd M = B.transpose() * B;  // symmetric PSD
  const long n = M.rows();
  const double scale = M.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;

  VectorXd v(n);
  for (long i = 0; i < n; ++i) {
    // Deterministic start with generic (incommensurate) components.
    v[i] = 1.0 + 0.5 * std::cos(1.0 + static_cast<double>(i));
  }
  v.normalize();

  double lambda = 0.0;
  for (long it = 0; it < cap; ++it) {
    VectorXd w = M * v;
    const double rq = v.dot(w);  // Rayleigh quotient, v is unit
    const double nw = w.norm();
    if (nw <= scale * 1e-18) {
      // v fell into the numerical kernel; the dominant eigenvalue along
      // this start is indistinguishable from zero.
      return std::sqrt(std::max(rq, 0.0));
    }
    v = w / nw;
    if (std::abs(rq - lambda) <= tol * std::max(1.0, std::abs(rq)) && it > 0) {
      lambda = rq;
      break;
    }
    lambda = rq;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// Spectral radius (largest eigenvalue magnitude) of a general square matrix.
inline double spectral_radius(const MatrixXd& A) {
  if (A.rows() != A.cols()) {
    throw ShapeMismatch("spectral_radius: matrix must be square");
  }
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NoConvergence("spectral_radius: eigensolver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double machine_epsilon() {
  return std::numeric_limits<double>::epsilon();
}

}  // namespace rowstoch
