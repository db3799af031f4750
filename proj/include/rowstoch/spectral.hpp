#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "rowstoch/digraph.hpp"
#include "rowstoch/errors.hpp"
#include "rowstoch/linalg.hpp"

namespace rowstoch {

/// Left Perron vector of a row-stochastic matrix: pi^T A = pi^T, pi > 0,
/// sum(pi) = 1. Computed by left power iteration from the uniform vector,
/// iterating until the residual ||A^T pi - pi||_inf drops below tol.
/// For an irreducible row-stochastic matrix with positive diagonal the
/// iteration converges; NoConvergence is thrown at the cap otherwise.
inline VectorXd perron_left_vector(const WeightMatrix& A, double tol = 1e-14,
                                   long cap = 1000000) {
  const long n = A.size();
  if (n < 1 || A.entries.cols() != n) {
    throw ShapeMismatch("perron_left_vector: matrix must be square and nonempty");
  }
  VectorXd pi = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const MatrixXd At = A.entries.transpose();
  for (long it = 0; it < cap; ++it) {
    VectorXd next = At * pi;
    const double residual = (next - pi).lpNorm<Eigen::Infinity>();
    if (residual < tol) {
      if (pi.minCoeff() <= 0.0) {
        throw NoConvergence("perron_left_vector: nonpositive entry in fixed point");
      }
      return pi;
    }
    next /= next.sum();
    pi = std::move(next);
  }
  throw NoConvergence("perron_left_vector: residual did not reach tolerance");
}

/// Rank-one limit of the weight-matrix powers: ones * pi^T.
inline MatrixXd limit_matrix(const VectorXd& pi) {
  if (pi.size() < 1) throw ShapeMismatch("limit_matrix: empty vector");
  return VectorXd::Ones(pi.size()) * pi.transpose();
}

/// A norm on R^n built from the deviation matrix B = A - Yinf:
///
///   ||x|| = sum_{j=0}^{N-1} theta^{-j} ||B^j x||_2
///
/// with N the smallest power at which ||B^N||_2 < 1. The construction
/// guarantees ||B x|| <= theta ||x|| for every x, because
/// ||B^N||_2 <= theta^N. Matrix arguments are measured with the Frobenius
/// norm per term, which preserves the contraction property columnwise.
class NormOperator {
 public:
  NormOperator() = default;

  NormOperator(MatrixXd base, int depth, double theta, double d)
      : base_(std::move(base)), depth_(depth), theta_(theta), d_(d) {}

  template <class Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    return eval(x.eval());
  }

  const MatrixXd& base() const { return base_; }
  int depth() const { return depth_; }
  double theta() const { return theta_; }
  /// Guaranteed contraction factor of the base matrix under this norm.
  double sigma() const { return theta_; }
  /// c in ||x||_2 <= c ||x||; the j = 0 term makes this exactly 1.
  double equivalence_c() const { return 1.0; }
  /// d in ||x|| <= d ||x||_2.
  double equivalence_d() const { return d_; }

 private:
  template <class Mat>
  double eval(const Mat& v) const {
    if (depth_ < 1) throw ShapeMismatch("NormOperator: empty operator");
    if (v.rows() != base_.rows()) {
      throw ShapeMismatch("NormOperator: argument has wrong row count");
    }
    Mat w = v;
    double acc = w.norm();  // Frobenius; equals the 2-norm for vectors
    double scale = 1.0;
    for (int j = 1; j < depth_; ++j) {
      w = base_ * w;
      scale /= theta_;
      acc += scale * w.norm();
    }
    return acc;
  }

  MatrixXd base_;
  int depth_ = 0;
  double theta_ = 0.0;
  double d_ = 0.0;
};

/// Builds the contraction norm for B = A - Yinf.
///
/// Searches for the smallest N with ||B^N||_2 < 1 (operator norms by power
/// iteration), then sets
///
///   theta = max(||B^N||_2^{1/N}, rho_hat(B)) + theta_margin * (1 - max(...))
///
/// clamped below 1, where rho_hat is the tightest Gelfand estimate
/// min_j ||B^j||_2^{1/j} observed during the search. Throws
/// SpectralRadiusNotLessThanOne if no power up to depth_cap contracts.
inline NormOperator contraction_norm(const WeightMatrix& A, const MatrixXd& Yinf,
                                     double theta_margin = 0.1,
                                     int depth_cap = 5000) {
  const long n = A.size();
  if (Yinf.rows() != n || Yinf.cols() != n) {
    throw ShapeMismatch("contraction_norm: limit matrix has wrong shape");
  }
  if (!(theta_margin > 0.0 && theta_margin < 1.0)) {
    throw StepSizeOutOfRange("contraction_norm: theta_margin must lie in (0, 1)");
  }
  const MatrixXd B = A.entries - Yinf;

  std::vector<double> power_norms;  // power_norms[j] = ||B^{j+1}||_2
  MatrixXd P = B;
  int N = -1;
  double rho_hat = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= depth_cap; ++j) {
    const double nj = matrix_2norm(P);
    power_norms.push_back(nj);
    rho_hat = std::min(rho_hat, std::pow(nj, 1.0 / static_cast<double>(j)));
    if (nj < 1.0) {
      N = j;
      break;
    }
    P = P * B;
  }
  if (N < 0) {
    throw SpectralRadiusNotLessThanOne(
        "contraction_norm: no matrix power contracted within the depth cap");
  }

  const double base =
      std::pow(power_norms[static_cast<std::size_t>(N - 1)], 1.0 / static_cast<double>(N));
  const double anchor = std::max(base, rho_hat);
  double theta = anchor + theta_margin * (1.0 - anchor);
  theta = std::min(theta, 1.0 - 1e-12);

  // Norm-equivalence constant d: ||x|| <= d ||x||_2 termwise.
  double d = 1.0;  // j = 0 term, ||B^0||_2 = 1
  double scale = 1.0;
  for (int j = 1; j < N; ++j) {
    scale /= theta;
    d += scale * power_norms[static_cast<std::size_t>(j - 1)];
  }

  // The guarantee the whole construction rests on.
  const double certified = std::pow(theta, N);
  if (power_norms[static_cast<std::size_t>(N - 1)] > certified * (1.0 + 1e-12)) {
    throw CertificationFailed("contraction_norm: ||B^N|| exceeds theta^N");
  }
  return NormOperator(B, N, theta, d);
}

/// All constants that drive the convergence analysis, fitted or certified
/// from the weight matrix alone.
struct BoundConstants {
  double tau = 0.0;      // ||A - I||_2
  double epsilon = 0.0;  // ||I - Yinf||_2
  double sigma = 0.0;    // contraction factor of A - Yinf under `norm`
  double y = 0.0;        // sup_k ||Y_k||_2 over the observed horizon
  double y_tilde = 0.0;  // sup_k ||diag(Y_k)^{-1}||_2, with the limit folded in
  double c = 0.0;        // ||.||_2 <= c ||.||
  double d = 0.0;        // ||.|| <= d ||.||_2
  double gamma1 = 0.0;   // fitted geometric decay rate of ||Y_k - Yinf||_2
  double T = 0.0;        // fitted envelope: ||Y_k - Yinf||_2 <= T gamma1^k
  double T_tilde = 0.0;  // envelope used for the diagonal-inverse bounds (= T)
  NormOperator norm;
  VectorXd pi;
  std::vector<std::pair<long, double>> decay;  // recorded (k, ||Y_k - Yinf||_2)

  MatrixXd yinf() const { return limit_matrix(pi); }
};

/// Measures every analysis constant for a weight matrix: exact operator
/// norms (tau, epsilon), the certified contraction triple (sigma, c, d),
/// and the fitted decay envelope (gamma1, T) of Y_k = A^k toward Yinf.
/// Iteration of the powers stops once ||Y_k - Yinf||_2 < tol or at
/// horizon_cap.
inline BoundConstants network_constants(const WeightMatrix& A, double tol = 1e-12,
                                        long horizon_cap = 100000,
                                        double theta_margin = 0.1,
                                        double perron_tol = 1e-14) {
  const long n = A.size();
  if (n < 1) throw ShapeMismatch("network_constants: empty matrix");

  BoundConstants bc;
  bc.pi = perron_left_vector(A, perron_tol);
  const MatrixXd Yinf = limit_matrix(bc.pi);
  const MatrixXd I = MatrixXd::Identity(n, n);

  bc.tau = matrix_2norm(A.entries - I);
  bc.epsilon = matrix_2norm(I - Yinf);
  bc.norm = contraction_norm(A, Yinf, theta_margin);
  bc.sigma = bc.norm.sigma();
  bc.c = bc.norm.equivalence_c();
  bc.d = bc.norm.equivalence_d();

  // Walk Y_k = A^k, recording the deviation from the limit and the extremes
  // that bound the iteration (largest operator norm, smallest diagonal).
  MatrixXd Y = I;
  double y_max = 0.0;
  double min_diag = std::numeric_limits<double>::infinity();
  long k = 0;
  while (true) {
    y_max = std::max(y_max, matrix_2norm(Y));
    min_diag = std::min(min_diag, Y.diagonal().minCoeff());
    const double dev = matrix_2norm(Y - Yinf);
    bc.decay.emplace_back(k, dev);
    if (dev < tol || k >= horizon_cap) break;
    Y = A.entries * Y;
    ++k;
  }
  if (min_diag <= 0.0) {
    throw SingularDiagonal("network_constants: nonpositive diagonal in a power");
  }
  bc.y = y_max;
  bc.y_tilde = std::max(1.0 / min_diag, 1.0 / bc.pi.minCoeff());

  // Geometric fit of the recorded decay between k = 1 and the stopping
  // index, bumped by a 5% safety factor and capped below 1. Degenerate
  // sequences (already rank-one, or a single step) fall back to 1/2; the
  // envelope T then covers every recorded deviation by construction.
  double gamma1 = 0.5;
  long first = -1, last = -1;
  for (const auto& [kk, dev] : bc.decay) {
    if (kk >= 1 && dev > 0.0) {
      if (first < 0) first = kk;
      last = kk;
    }
  }
  if (first >= 0 && last > first) {
    const double dev_first = bc.decay[static_cast<std::size_t>(first)].second;
    const double dev_last = bc.decay[static_cast<std::size_t>(last)].second;
    const double raw =
        std::pow(dev_last / dev_first, 1.0 / static_cast<double>(last - first));
    gamma1 = std::min(1.05 * raw, 1.0 - 1e-9);
  }
  bc.gamma1 = gamma1;

  double T = 0.0;
  for (const auto& [kk, dev] : bc.decay) {
    T = std::max(T, dev / std::pow(gamma1, static_cast<double>(kk)));
  }
  bc.T = T;
  bc.T_tilde = T;
  return bc;
}

/// Deviations of the weight-matrix powers from their limit:
/// (k, ||A^k - Yinf||_2) for k = 1..K.
inline std::vector<std::pair<long, double>> powers_decay_check(const WeightMatrix& A,
                                                               long K) {
  if (K < 2) throw InsufficientData("powers_decay_check: K must be at least 2");
  const VectorXd pi = perron_left_vector(A);
  const MatrixXd Yinf = limit_matrix(pi);
  std::vector<std::pair<long, double>> out;
  MatrixXd Y = A.entries;
  for (long k = 1; k <= K; ++k) {
    out.emplace_back(k, matrix_2norm(Y - Yinf));
    if (k < K) Y = A.entries * Y;
  }
  return out;
}

}  // namespace rowstoch
