#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>

#include "rowstoch/analysis.hpp"
#include "rowstoch/digraph.hpp"
#include "rowstoch/errors.hpp"
#include "rowstoch/objectives.hpp"
#include "rowstoch/spectral.hpp"

namespace rowstoch {

namespace detail {

constexpr double kDiagFloor = 1e-14;

/// Row i of M divided by v[i].
inline MatrixXd scale_rows_inv(const MatrixXd& M, const VectorXd& v) {
  return (M.array().colwise() / v.array()).matrix();
}

}  // namespace detail

/// Joint state of all agents. X, Z and the cached gradients are n x p
/// (row i belongs to agent i); Y is the n x n eigenvector-learning matrix
/// whose diagonal rescales the gradients.
struct NetworkState {
  long k = 0;
  MatrixXd X;
  MatrixXd Y;
  MatrixXd Z;
  MatrixXd grad;  // row i = grad f_i at row i of X
};

/// Initial state: Y_0 = I, Z_0 = grad F(X_0).
inline NetworkState init_state(const ObjectiveSuite& suite, const MatrixXd& x0) {
  if (x0.rows() != suite.n || x0.cols() != suite.p) {
    throw ShapeMismatch("init_state: x0 must be n x p");
  }
  NetworkState st;
  st.k = 0;
  st.X = x0;
  st.Y = MatrixXd::Identity(suite.n, suite.n);
  st.grad = suite.gradient_matrix(x0);
  st.Z = st.grad;
  return st;
}

/// One synchronous iteration:
///
///   X+ = A X - alpha Z
///   Y+ = A Y
///   Z+ = A Z + diag(Y+)^{-1} grad F(X+) - diag(Y)^{-1} grad F(X)
///
/// Each agent's row of the update depends only on rows of in-neighbors
/// (the weight matrix has zeros elsewhere). Throws SingularDiagonal if a
/// diagonal entry of Y falls below the invertibility floor.
inline void step(NetworkState& st, const WeightMatrix& A, double alpha,
                 const ObjectiveSuite& suite) {
  const int n = suite.n;
  if (A.size() != n || st.X.rows() != n || st.X.cols() != suite.p ||
      st.Y.rows() != n || st.Y.cols() != n || st.Z.rows() != n ||
      st.Z.cols() != suite.p) {
    throw ShapeMismatch("step: state does not match instance shapes");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw StepSizeOutOfRange("step: alpha must be finite and nonnegative");
  }
  const VectorXd diag_old = st.Y.diagonal();
  if (diag_old.minCoeff() <= detail::kDiagFloor) {
    throw SingularDiagonal("step: diagonal of Y is numerically singular");
  }

  MatrixXd X_new = A.entries * st.X - alpha * st.Z;
  MatrixXd Y_new = A.entries * st.Y;
  const VectorXd diag_new = Y_new.diagonal();
  if (diag_new.minCoeff() <= detail::kDiagFloor) {
    throw SingularDiagonal("step: diagonal of updated Y is numerically singular");
  }
  MatrixXd grad_new = suite.gradient_matrix(X_new);
  MatrixXd Z_new = A.entries * st.Z +
                   detail::scale_rows_inv(grad_new, diag_new) -
                   detail::scale_rows_inv(st.grad, diag_old);

  st.X = std::move(X_new);
  st.Y = std::move(Y_new);
  st.Z = std::move(Z_new);
  st.grad = std::move(grad_new);
  ++st.k;
}

/// Driver configuration shared by all run loops.
struct RunConfig {
  double alpha = 0.0;
  long max_iters = 0;
  long record_every = 1;
  std::uint64_t seed = 42;
  MatrixXd x0;  // empty means all zeros
  /// When positive: stop early once residual2 <= target * initial residual2.
  double target_rel_residual = 0.0;
};

namespace detail {

inline void check_run_config(const RunConfig& cfg) {
  if (cfg.max_iters < 1) throw BadIndex("run: max_iters must be at least 1");
  if (cfg.record_every < 1) throw BadIndex("run: record_every must be at least 1");
}

}  // namespace detail

/// Runs the row-stochastic gradient-tracking iteration and samples a trace.
///
/// Records are taken at k = 0, every record_every iterations, and at the
/// final iterate. Error measures use the constants' limit matrix and
/// constructed norm; residual2 is measured against the supplied optimum.
/// The worst per-iteration relative errors of the two averaged-system
/// identities (Zhat_k = Yinf diag(Y_k)^{-1} grad F_k, and
/// Xhat_{k+1} = Xhat_k - alpha Zhat_k) are tracked on the side.
inline ConvergenceTrace run(const RunConfig& cfg, const WeightMatrix& A,
                            const ObjectiveSuite& suite, const VectorXd& x_star,
                            const BoundConstants& constants) {
  detail::check_run_config(cfg);
  if (x_star.size() != suite.p) {
    throw ShapeMismatch("run: x_star must have dimension p");
  }
  const int n = suite.n;
  const MatrixXd x0 = cfg.x0.size() == 0 ? MatrixXd::Zero(n, suite.p) : cfg.x0;
  const MatrixXd Yinf = constants.yinf();
  const MatrixXd Xstar = VectorXd::Ones(n) * x_star.transpose();
  const NormOperator& nrm = constants.norm;

  ConvergenceTrace trace;
  trace.algorithm = "proposed";
  trace.alpha = cfg.alpha;
  trace.max_iters = cfg.max_iters;
  trace.record_every = cfg.record_every;
  trace.seed = cfg.seed;
  trace.n = n;
  trace.p = suite.p;
  trace.constants_echo = constants;

  NetworkState st = init_state(suite, x0);

  auto residual2 = [&]() { return (st.X - Xstar).norm(); };
  auto make_record = [&]() {
    TraceRecord r;
    r.k = st.k;
    const MatrixXd Xhat = Yinf * st.X;
    r.residual2 = residual2();
    r.consensus_err = nrm(st.X - Xhat);
    r.opt_err = (Xhat - Xstar).norm();
    r.grad_track_err = nrm(st.Z - Yinf * st.Z);
    r.grad_norm = st.grad.norm();
    return r;
  };
  auto track_identity_err = [&]() {
    const MatrixXd scaled = detail::scale_rows_inv(st.grad, st.Y.diagonal());
    const double err = (Yinf * st.Z - Yinf * scaled).norm();
    trace.max_track_identity_err =
        std::max(trace.max_track_identity_err, err / (1.0 + scaled.norm()));
  };

  const double r0 = residual2();
  trace.records.push_back(make_record());
  track_identity_err();
  long last_recorded = 0;

  for (long it = 1; it <= cfg.max_iters; ++it) {
    const MatrixXd Xhat_prev = Yinf * st.X;
    const MatrixXd Zhat_prev = Yinf * st.Z;
    step(st, A, cfg.alpha, suite);
    track_identity_err();
    const double step_err =
        (Yinf * st.X - (Xhat_prev - cfg.alpha * Zhat_prev)).norm() /
        (1.0 + Xhat_prev.norm());
    trace.max_average_step_err = std::max(trace.max_average_step_err, step_err);

    const bool hit_target = cfg.target_rel_residual > 0.0 &&
                            residual2() <= cfg.target_rel_residual * r0;
    if (st.k % cfg.record_every == 0 || it == cfg.max_iters || hit_target) {
      trace.records.push_back(make_record());
      last_recorded = st.k;
    }
    if (hit_target) break;
  }
  if (last_recorded != st.k) trace.records.push_back(make_record());
  trace.final_iter = st.k;
  trace.final_residual2 = trace.records.back().residual2;
  return trace;
}

/// One centralized gradient step on the summed objective.
/// Requires 0 < alpha < 2/(n l).
inline VectorXd centralized_gd_step(const VectorXd& x, double alpha,
                                    const ObjectiveSuite& suite) {
  const GlobalConstants gc = global_constants(suite);
  if (!(alpha > 0.0) || !(alpha < 2.0 / gc.nl)) {
    throw StepSizeOutOfRange("centralized_gd_step: need 0 < alpha < 2/(n l)");
  }
  suite.check_point(x);
  return x - alpha * suite.sum_gradient(x);
}

/// Centralized gradient descent, traced with the same record layout.
/// The consensus and tracking columns are identically zero.
inline ConvergenceTrace run_centralized_gd(const RunConfig& cfg,
                                           const ObjectiveSuite& suite,
                                           const VectorXd& x_star) {
  detail::check_run_config(cfg);
  if (x_star.size() != suite.p) {
    throw ShapeMismatch("run_centralized_gd: x_star must have dimension p");
  }
  VectorXd x = cfg.x0.size() == 0 ? VectorXd::Zero(suite.p)
                                  : VectorXd(cfg.x0.row(0).transpose());

  ConvergenceTrace trace;
  trace.algorithm = "centralized_gd";
  trace.alpha = cfg.alpha;
  trace.max_iters = cfg.max_iters;
  trace.record_every = cfg.record_every;
  trace.seed = cfg.seed;
  trace.n = 1;
  trace.p = suite.p;

  auto make_record = [&](long k) {
    TraceRecord r;
    r.k = k;
    r.residual2 = (x - x_star).norm();
    r.opt_err = r.residual2;
    r.grad_norm = suite.sum_gradient(x).norm();
    return r;
  };
  trace.records.push_back(make_record(0));
  long last_recorded = 0;
  for (long it = 1; it <= cfg.max_iters; ++it) {
    x = centralized_gd_step(x, cfg.alpha, suite);
    if (it % cfg.record_every == 0 || it == cfg.max_iters) {
      trace.records.push_back(make_record(it));
      last_recorded = it;
    }
  }
  if (last_recorded != cfg.max_iters) trace.records.push_back(make_record(cfg.max_iters));
  trace.final_iter = cfg.max_iters;
  trace.final_residual2 = trace.records.back().residual2;
  return trace;
}

/// State of the push-sum baseline: value rows X and push-sum weights w.
struct PushSumState {
  long k = 0;
  MatrixXd X;
  VectorXd w;
};

/// One subgradient-push iteration with a column-stochastic matrix B:
///
///   M = B X,  w+ = B w,  ratio rows = rows of M / w+,
///   X+ = M - alpha_k grad F(ratio)
inline void subgradient_push_step(PushSumState& st, const WeightMatrix& B,
                                  double alpha_k, const ObjectiveSuite& suite) {
  const int n = suite.n;
  if (B.size() != n || st.X.rows() != n || st.X.cols() != suite.p ||
      st.w.size() != n) {
    throw ShapeMismatch("subgradient_push_step: state does not match shapes");
  }
  if (!(alpha_k >= 0.0) || !std::isfinite(alpha_k)) {
    throw StepSizeOutOfRange("subgradient_push_step: bad step size");
  }
  MatrixXd M = B.entries * st.X;
  VectorXd w_new = B.entries * st.w;
  if (w_new.minCoeff() <= detail::kDiagFloor) {
    throw SingularDiagonal("subgradient_push_step: push-sum weight vanished");
  }
  const MatrixXd ratio = detail::scale_rows_inv(M, w_new);
  st.X = M - alpha_k * suite.gradient_matrix(ratio);
  st.w = std::move(w_new);
  ++st.k;
}

/// Subgradient-push with diminishing steps alpha_k = a / sqrt(k). The trace
/// measures the ratio iterates against the same optimum and constants as
/// the proposed algorithm so the residual columns are directly comparable.
inline ConvergenceTrace run_subgradient_push(const RunConfig& cfg,
                                             const WeightMatrix& B,
                                             const ObjectiveSuite& suite,
                                             const VectorXd& x_star,
                                             const BoundConstants& constants,
                                             double step_constant = 1.0) {
  detail::check_run_config(cfg);
  if (x_star.size() != suite.p) {
    throw ShapeMismatch("run_subgradient_push: x_star must have dimension p");
  }
  const int n = suite.n;
  const MatrixXd Yinf = constants.yinf();
  const MatrixXd Xstar = VectorXd::Ones(n) * x_star.transpose();
  const NormOperator& nrm = constants.norm;

  PushSumState st;
  st.k = 0;
  st.X = cfg.x0.size() == 0 ? MatrixXd::Zero(n, suite.p) : cfg.x0;
  st.w = VectorXd::Ones(n);

  ConvergenceTrace trace;
  trace.algorithm = "subgradient_push";
  trace.alpha = step_constant;
  trace.max_iters = cfg.max_iters;
  trace.record_every = cfg.record_every;
  trace.seed = cfg.seed;
  trace.n = n;
  trace.p = suite.p;
  trace.constants_echo = constants;

  auto make_record = [&]() {
    const MatrixXd ratio = detail::scale_rows_inv(st.X, st.w);
    TraceRecord r;
    r.k = st.k;
    const MatrixXd Rhat = Yinf * ratio;
    r.residual2 = (ratio - Xstar).norm();
    r.consensus_err = nrm(ratio - Rhat);
    r.opt_err = (Rhat - Xstar).norm();
    r.grad_track_err = 0.0;
    r.grad_norm = suite.gradient_matrix(ratio).norm();
    return r;
  };
  trace.records.push_back(make_record());
  long last_recorded = 0;
  for (long it = 1; it <= cfg.max_iters; ++it) {
    const double alpha_k = step_constant / std::sqrt(static_cast<double>(it));
    subgradient_push_step(st, B, alpha_k, suite);
    if (st.k % cfg.record_every == 0 || it == cfg.max_iters) {
      trace.records.push_back(make_record());
      last_recorded = st.k;
    }
  }
  if (last_recorded != st.k) trace.records.push_back(make_record());
  trace.final_iter = st.k;
  trace.final_residual2 = trace.records.back().residual2;
  return trace;
}

}  // namespace rowstoch
