#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rowstoch/errors.hpp"
#include "rowstoch/linalg.hpp"
#include "rowstoch/spectral.hpp"

namespace rowstoch {

/// One sampled iteration of a run. All entries are nonnegative and finite.
struct TraceRecord {
  long k = 0;
  double residual2 = 0.0;       // ||X_k - 1 x*^T||_F
  double consensus_err = 0.0;   // ||X_k - Xhat_k|| in the constructed norm
  double opt_err = 0.0;         // ||Xhat_k - 1 x*^T||_F
  double grad_track_err = 0.0;  // ||Z_k - Zhat_k|| in the constructed norm
  double grad_norm = 0.0;       // ||grad F_k||_F

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// A full run: sampled records plus an echo of how they were produced.
struct ConvergenceTrace {
  std::vector<TraceRecord> records;

  std::string algorithm;  // "proposed", "centralized_gd", "subgradient_push"
  double alpha = 0.0;
  long max_iters = 0;
  long record_every = 1;
  std::uint64_t seed = 0;
  int n = 0;
  int p = 0;
  long final_iter = 0;
  double final_residual2 = 0.0;

  // Worst per-iteration relative error of the gradient-tracking identities,
  // measured during the run (zero when not applicable to the algorithm).
  double max_track_identity_err = 0.0;
  double max_average_step_err = 0.0;

  std::optional<BoundConstants> constants_echo;
};

/// Contraction factor of a centralized gradient step on the summed
/// objective: eta = max(|1 - alpha n l|, |1 - alpha n s|).
inline double eta(double alpha, int n, double l, double s) {
  const double nn = static_cast<double>(n);
  return std::max(std::abs(1.0 - alpha * nn * l), std::abs(1.0 - alpha * nn * s));
}

/// The 3x3 iteration matrix G of the coupled error recursion
/// t_{k+1} <= G t_k + H_k s_k, where
/// t_k = (consensus error, optimality gap, tracking error).
inline Eigen::Matrix3d build_G(const BoundConstants& bc, double alpha, int n,
                               double l, double s) {
  const double nn = static_cast<double>(n);
  const double e = eta(alpha, n, l, s);
  Eigen::Matrix3d G;
  G(0, 0) = bc.sigma;
  G(0, 1) = 0.0;
  G(0, 2) = alpha;
  G(1, 0) = alpha * bc.c * nn * l;
  G(1, 1) = e;
  G(1, 2) = 0.0;
  G(2, 0) = bc.c * bc.d * bc.epsilon * bc.y_tilde * l * (bc.tau + alpha * nn * l);
  G(2, 1) = alpha * bc.d * bc.epsilon * l * l * bc.y_tilde * nn;
  G(2, 2) = bc.sigma + alpha * bc.c * bc.d * bc.epsilon * l * bc.y_tilde;
  return G;
}

/// The decaying input matrix H_k of the same recursion. Only the first
/// column is nonzero; the whole matrix carries the factor gamma1^k.
inline Eigen::Matrix3d build_Hk(const BoundConstants& bc, double alpha, long k,
                                double l) {
  const double gk = std::pow(bc.gamma1, static_cast<double>(k));
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  H(1, 0) = alpha * bc.y * bc.y_tilde * bc.y_tilde * bc.T_tilde * gk;
  H(2, 0) = (alpha * bc.epsilon * bc.y_tilde * l * bc.y + 2.0 * bc.epsilon) *
            bc.d * bc.y_tilde * bc.y_tilde * bc.T_tilde * gk;
  return H;
}

/// Spectral radius of a 3x3 matrix.
inline double spectral_radius_3x3(const Eigen::Matrix3d& G) {
  return spectral_radius(G);
}

namespace detail {

template <class Scalar>
Scalar char_poly_eval_impl(Scalar q, double alpha, const BoundConstants& bc,
                           int n, double l, double s) {
  const double nn = static_cast<double>(n);
  const double cde = bc.c * bc.d * bc.epsilon;
  const Scalar qs = q - bc.sigma;
  const Scalar gd = q - 1.0 + nn * alpha * s;
  const Scalar term1 = (qs * qs - alpha * cde * l * bc.y_tilde * qs) * gd;
  const Scalar term2 = alpha * bc.c * bc.d * gd *
                       (bc.epsilon * l * bc.tau * bc.y_tilde +
                        alpha * (bc.epsilon * l * l * bc.y_tilde * nn));
  const Scalar term3 = alpha * alpha * alpha * bc.c * bc.d * nn * nn * l * l * l *
                       bc.epsilon * bc.y_tilde;
  return term1 - term2 - term3;
}

}  // namespace detail

/// Characteristic polynomial of G evaluated at q, in the factored form the
/// step-size bound is derived from. Valid as det(qI - G) whenever
/// alpha < 1/(n l), where eta = 1 - alpha n s.
inline double char_poly_eval(double q, double alpha, const BoundConstants& bc,
                             int n, double l, double s) {
  return detail::char_poly_eval_impl<double>(q, alpha, bc, n, l, s);
}

inline std::complex<double> char_poly_eval(std::complex<double> q, double alpha,
                                           const BoundConstants& bc, int n,
                                           double l, double s) {
  return detail::char_poly_eval_impl<std::complex<double>>(q, alpha, bc, n, l, s);
}

/// Magnitude scale of the polynomial's three top-level terms at (q, alpha),
/// for relative near-zero assertions.
inline double char_poly_scale(double q, double alpha, const BoundConstants& bc,
                              int n, double l, double s) {
  const double nn = static_cast<double>(n);
  const double cde = bc.c * bc.d * bc.epsilon;
  const double qs = q - bc.sigma;
  const double gd = q - 1.0 + nn * alpha * s;
  const double t1 = std::abs((qs * qs - alpha * cde * l * bc.y_tilde * qs) * gd);
  const double t2 = std::abs(alpha * bc.c * bc.d * gd) *
                    (bc.epsilon * l * bc.tau * bc.y_tilde +
                     alpha * bc.epsilon * l * l * bc.y_tilde * nn);
  const double t3 = std::abs(alpha * alpha * alpha * bc.c * bc.d * nn * nn * l *
                             l * l * bc.epsilon * bc.y_tilde);
  return t1 + t2 + t3;
}

/// Largest step size with a convergence certificate:
///
///   alpha_bar = min( (sqrt(D^2 + 4 c d eps yt n^3 l^2 (l+s) s (1-sigma)^2) - D)
///                      / (2 c d eps yt n^2 l^2 (l+s)),
///                    1/(n l) )
///
/// with D = c d eps yt l n s (tau + 1 - sigma). The first argument is the
/// positive root in alpha of the characteristic polynomial at q = 1; when
/// its denominator degenerates (eps = 0, fully mixed in one step) only the
/// centralized bound 1/(n l) remains.
///
/// The returned bound is certified by checking rho(G_alpha) < 1 at
/// alpha_bar/10, alpha_bar/2 and 0.99 alpha_bar; CertificationFailed is
/// thrown if any check fails, which signals inconsistent constants.
/// The positive root in alpha of the characteristic polynomial at q = 1
/// (the first argument of the step-size bound's min). Infinity when the
/// quadratic degenerates (eps = 0, fully mixed in one step).
inline double alpha_root(const BoundConstants& bc, int n, double l, double s) {
  if (!(l > 0.0) || !(s > 0.0) || l < s) {
    throw NotPositiveDefinite("alpha_root: need 0 < s <= l");
  }
  const double nn = static_cast<double>(n);
  const double cde = bc.c * bc.d * bc.epsilon * bc.y_tilde;
  const double D = cde * l * nn * s * (bc.tau + 1.0 - bc.sigma);
  const double den = 2.0 * cde * nn * nn * l * l * (l + s);
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  const double rad = D * D + 4.0 * cde * nn * nn * nn * l * l * (l + s) * s *
                                 (1.0 - bc.sigma) * (1.0 - bc.sigma);
  return (std::sqrt(rad) - D) / den;
}

inline double alpha_upper_bound(const BoundConstants& bc, int n, double l,
                                double s) {
  const double nn = static_cast<double>(n);
  const double bound = std::min(alpha_root(bc, n, l, s), 1.0 / (nn * l));
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw CertificationFailed("alpha_upper_bound: bound is not positive");
  }
  for (double f : {0.1, 0.5, 0.99}) {
    const double rho = spectral_radius_3x3(build_G(bc, f * bound, n, l, s));
    if (!(rho < 1.0)) {
      throw CertificationFailed(
          "alpha_upper_bound: rho(G) >= 1 inside the certified range");
    }
  }
  return bound;
}

/// Componentwise check of t_{k+1} <= G t_k + H_k s_k with a relative slack
/// tolerance: every slack component must be >= -tol * (1 + ||t_k||_2).
struct Theorem1Result {
  bool pass = false;
  double worst_normalized_slack = 0.0;  // min over k, components
  long worst_k = -1;
  int worst_component = -1;
  long transitions_checked = 0;
};

inline Theorem1Result theorem1_check(
    const std::vector<Eigen::Vector3d>& t, const std::vector<Eigen::Vector3d>& s,
    const Eigen::Matrix3d& G,
    const std::function<Eigen::Matrix3d(long)>& Hk, double tol = 1e-9) {
  if (t.size() < 2 || s.size() + 1 < t.size()) {
    throw InsufficientData("theorem1_check: need consecutive t_k and s_k");
  }
  Theorem1Result res;
  res.worst_normalized_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const Eigen::Vector3d bound = G * t[k] + Hk(static_cast<long>(k)) * s[k];
    const Eigen::Vector3d slack = bound - t[k + 1];
    const double denom = 1.0 + t[k].norm();
    for (int c = 0; c < 3; ++c) {
      const double normalized = slack[c] / denom;
      if (normalized < res.worst_normalized_slack) {
        res.worst_normalized_slack = normalized;
        res.worst_k = static_cast<long>(k);
        res.worst_component = c;
      }
    }
    ++res.transitions_checked;
  }
  res.pass = res.worst_normalized_slack >= -tol;
  return res;
}

/// Builds the (t_k, s_k) sequences from a per-iteration trace and runs the
/// componentwise check against G and H_k derived from the constants.
inline Theorem1Result theorem1_check(const ConvergenceTrace& trace,
                                     const BoundConstants& bc, double alpha,
                                     double l, double s, double tol = 1e-9) {
  if (trace.records.size() < 2) {
    throw InsufficientData("theorem1_check: trace has fewer than two records");
  }
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    if (trace.records[i + 1].k != trace.records[i].k + 1) {
      throw InsufficientData("theorem1_check: trace must record every iteration");
    }
  }
  std::vector<Eigen::Vector3d> t, sv;
  t.reserve(trace.records.size());
  sv.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    t.emplace_back(r.consensus_err, r.opt_err, r.grad_track_err);
    sv.emplace_back(r.grad_norm, 0.0, 0.0);
  }
  const long k0 = trace.records.front().k;
  const Eigen::Matrix3d G = build_G(bc, alpha, trace.n, l, s);
  auto H = [&](long k) { return build_Hk(bc, alpha, k0 + k, l); };
  return theorem1_check(t, sv, G, H, tol);
}

/// Least-squares geometric rate of a residual sequence.
struct RateEstimate {
  double mu_hat = 0.0;    // per-iteration contraction factor
  double M_hat = 0.0;     // extrapolated residual at k = 0
  double r_squared = 0.0;
  long window_first_k = 0;
  long window_last_k = 0;
  long window_size = 0;
};

/// Fits ln(residual2) = ln(M) + k ln(mu) by least squares.
///
/// The window drops records at or below the floating-point floor
/// (1e3 * machine epsilon * initial residual), then drops the first 10% of
/// what remains as transient. Fewer than 20 usable records throws
/// InsufficientData.
inline RateEstimate fit_linear_rate(const ConvergenceTrace& trace) {
  if (trace.records.empty()) {
    throw InsufficientData("fit_linear_rate: empty trace");
  }
  const double r0 = trace.records.front().residual2;
  const double floor = 1e3 * machine_epsilon() * r0;
  std::vector<std::pair<long, double>> pts;
  for (const auto& r : trace.records) {
    if (r.residual2 > floor && r.residual2 > 0.0) {
      pts.emplace_back(r.k, std::log(r.residual2));
    }
  }
  const std::size_t drop = pts.size() / 10;
  if (pts.size() < drop + 20) {
    throw InsufficientData("fit_linear_rate: fewer than 20 usable records");
  }
  pts.erase(pts.begin(), pts.begin() + static_cast<long>(drop));

  const double m = static_cast<double>(pts.size());
  double sk = 0.0, sy = 0.0;
  for (const auto& [k, y] : pts) {
    sk += static_cast<double>(k);
    sy += y;
  }
  const double mk = sk / m, my = sy / m;
  double skk = 0.0, sky = 0.0;
  for (const auto& [k, y] : pts) {
    const double dk = static_cast<double>(k) - mk;
    skk += dk * dk;
    sky += dk * (y - my);
  }
  if (skk == 0.0) {
    throw InsufficientData("fit_linear_rate: degenerate window (single k)");
  }
  const double slope = sky / skk;
  const double intercept = my - slope * mk;

  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [k, y] : pts) {
    const double fit = intercept + slope * static_cast<double>(k);
    ss_res += (y - fit) * (y - fit);
    ss_tot += (y - my) * (y - my);
  }
  RateEstimate est;
  est.mu_hat = std::exp(slope);
  est.M_hat = std::exp(intercept);
  est.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res <= 1e-30 ? 1.0 : 0.0);
  est.window_first_k = pts.front().first;
  est.window_last_k = pts.back().first;
  est.window_size = static_cast<long>(pts.size());
  return est;
}

}  // namespace rowstoch
