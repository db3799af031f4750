#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rowstoch/algorithms.hpp"
#include "rowstoch/analysis.hpp"
#include "rowstoch/digraph.hpp"
#include "rowstoch/errors.hpp"
#include "rowstoch/objectives.hpp"
#include "rowstoch/rng.hpp"
#include "rowstoch/spectral.hpp"

namespace rowstoch {

enum class CheckStatus { pass, fail, inapplicable };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::inapplicable: return "inapplicable";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::fail;
  double worst_slack = 0.0;  // most negative margin seen; >= 0 means clean
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  double alpha = 0.0;
  std::optional<BoundConstants> constants;

  bool all_passed() const {
    for (const auto& c : checks) {
      if (c.status == CheckStatus::fail) return false;
    }
    return true;
  }
  int exit_code() const { return all_passed() ? 0 : 1; }
};

struct VerifyOptions {
  long run_iters = 300;
  std::uint64_t seed = 20240817;
  int random_vectors = 200;
  int curvature_pairs = 50;
};

namespace detail {

inline VectorXd random_vector(Rng& rng, long n) {
  VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace detail

/// Runs every analytical invariant against a concrete instance and collects
/// one named result per check. Checks that depend on a guarantee whose
/// precondition the supplied alpha does not meet are reported inapplicable
/// rather than failed.
inline VerificationReport run_verification(const DirectedGraph* graph,
                                           const WeightMatrix& A,
                                           const ObjectiveSuite& suite,
                                           double alpha,
                                           const VerifyOptions& opts = {}) {
  VerificationReport report;
  report.alpha = alpha;
  const long n = A.size();

  // -- weight matrix ----------------------------------------------------------
  {
    CheckResult c{"weight_matrix", CheckStatus::pass, 0.0, ""};
    double worst = 0.0;
    for (long i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(A.entries.row(i).sum() - 1.0));
      if (A.entries(i, i) <= 0.0) {
        c.status = CheckStatus::fail;
        c.detail = "diagonal entry is not positive";
      }
      for (long j = 0; j < n; ++j) {
        if (A.entries(i, j) < 0.0) {
          c.status = CheckStatus::fail;
          c.detail = "negative weight";
        }
      }
    }
    if (worst > 1e-12) {
      c.status = CheckStatus::fail;
      c.detail = "row sums deviate from 1 by " + std::to_string(worst);
    }
    if (graph != nullptr && c.status == CheckStatus::pass) {
      for (int i = 0; i < graph->n; ++i) {
        for (int j = 0; j < graph->n; ++j) {
          const bool nbr =
              std::binary_search(graph->in_neighbors[static_cast<std::size_t>(i)].begin(),
                                 graph->in_neighbors[static_cast<std::size_t>(i)].end(), j);
          const bool nz = A.entries(i, j) != 0.0;
          if (nbr != nz) {
            c.status = CheckStatus::fail;
            c.detail = "support does not match the graph adjacency";
          }
        }
      }
    }
    c.worst_slack = 1e-12 - worst;
    report.checks.push_back(c);
  }

  const bool weights_ok = report.checks.back().status == CheckStatus::pass;
  if (!weights_ok) {
    for (const char* name :
         {"perron_fixed_point", "limit_diagonal_identity", "powers_decay",
          "norm_contraction", "norm_equivalence", "diag_inverse_decay",
          "curvature", "tracking_identity", "centralized_contraction",
          "spectral_certificates", "config_step_size", "theorem1", "linear_rate"}) {
      report.checks.push_back({name, CheckStatus::inapplicable, 0.0,
                               "preconditions not established: weight matrix invalid"});
    }
    return report;
  }

  const BoundConstants bc = network_constants(A);
  report.constants = bc;
  const MatrixXd Yinf = bc.yinf();
  const GlobalConstants gc = global_constants(suite);
  Rng rng(opts.seed);

  // -- Perron fixed point and limit-matrix identities -------------------------
  {
    CheckResult c{"perron_fixed_point", CheckStatus::pass, 0.0, ""};
    const double res_pi =
        (A.entries.transpose() * bc.pi - bc.pi).lpNorm<Eigen::Infinity>();
    const double res_ay = (A.entries * Yinf - Yinf).cwiseAbs().maxCoeff();
    const double res_yy = (Yinf * Yinf - Yinf).cwiseAbs().maxCoeff();
    const double worst = std::max({res_pi, res_ay, res_yy});
    c.worst_slack = 1e-11 - worst;
    if (worst > 1e-11) {
      c.status = CheckStatus::fail;
      c.detail = "fixed-point residual " + std::to_string(worst);
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c{"limit_diagonal_identity", CheckStatus::pass, 0.0, ""};
    const MatrixXd ones = MatrixXd::Ones(n, n);
    const MatrixXd lhs =
        Yinf * bc.pi.cwiseInverse().asDiagonal();  // Yinf diag(pi)^{-1}
    const double worst = (lhs - ones).cwiseAbs().maxCoeff();
    c.worst_slack = 1e-10 - worst;
    if (worst > 1e-10) {
      c.status = CheckStatus::fail;
      c.detail = "deviation from the all-ones matrix: " + std::to_string(worst);
    }
    report.checks.push_back(c);
  }

  // -- geometric decay of the powers -------------------------------------------
  {
    CheckResult c{"powers_decay", CheckStatus::pass, 0.0, ""};
    double worst = std::numeric_limits<double>::infinity();
    if (!(bc.gamma1 < 1.0)) {
      c.status = CheckStatus::fail;
      c.detail = "fitted gamma1 is not below 1";
    }
    for (const auto& [k, dev] : bc.decay) {
      const double bound = bc.T * std::pow(bc.gamma1, static_cast<double>(k));
      worst = std::min(worst, (bound - dev) / (1.0 + bound));
    }
    c.worst_slack = worst;
    if (worst < -1e-12) {
      c.status = CheckStatus::fail;
      c.detail = "a recorded deviation exceeds the fitted envelope";
    }
    report.checks.push_back(c);
  }

  // -- contraction of A - Yinf under the constructed norm ----------------------
  {
    CheckResult c{"norm_contraction", CheckStatus::pass, 0.0, ""};
    const double rho = spectral_radius(A.entries - Yinf);
    if (!(rho < 1.0)) {
      c.status = CheckStatus::fail;
      c.detail = "spectral radius of A - Yinf is not below 1";
    }
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < opts.random_vectors; ++t) {
      const VectorXd a = detail::random_vector(rng, n);
      const double lhs = bc.norm(VectorXd(A.entries * a - Yinf * a));
      const double rhs = bc.sigma * bc.norm(VectorXd(a - Yinf * a));
      worst = std::min(worst, (rhs - lhs) / (1.0 + rhs));
    }
    c.worst_slack = worst;
    if (worst < -1e-10) {
      c.status = CheckStatus::fail;
      c.detail = "contraction inequality violated on a random vector";
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c{"norm_equivalence", CheckStatus::pass, 0.0, ""};
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < opts.random_vectors; ++t) {
      const VectorXd x = detail::random_vector(rng, n);
      const double nx = bc.norm(x);
      const double n2 = x.norm();
      worst = std::min(worst, (bc.c * nx - n2) / (1.0 + n2));
      worst = std::min(worst, (bc.d * n2 - nx) / (1.0 + nx));
    }
    c.worst_slack = worst;
    if (worst < -1e-12) {
      c.status = CheckStatus::fail;
      c.detail = "norm equivalence violated on a random vector";
    }
    report.checks.push_back(c);
  }

  // -- decay of the inverse diagonals ------------------------------------------
  {
    CheckResult c{"diag_inverse_decay", CheckStatus::pass, 0.0, ""};
    double worst = std::numeric_limits<double>::infinity();
    const VectorXd inv_pi = bc.pi.cwiseInverse();
    MatrixXd Y = MatrixXd::Identity(n, n);
    VectorXd inv_prev = Y.diagonal().cwiseInverse();
    const double coeff = bc.y_tilde * bc.y_tilde * bc.T_tilde;
    for (std::size_t i = 1; i < bc.decay.size(); ++i) {
      Y = A.entries * Y;
      const VectorXd inv_now = Y.diagonal().cwiseInverse();
      const long k = bc.decay[i].first;
      const double gk = std::pow(bc.gamma1, static_cast<double>(k));
      const double lhs_a = (inv_now - inv_pi).cwiseAbs().maxCoeff();
      const double bound_a = coeff * gk;
      worst = std::min(worst, (bound_a - lhs_a) / (1.0 + bound_a));
      // step difference, bounded with the exponent of the earlier index
      const double gk_prev = std::pow(bc.gamma1, static_cast<double>(k - 1));
      const double lhs_b = (inv_now - inv_prev).cwiseAbs().maxCoeff();
      const double bound_b = 2.0 * coeff * gk_prev;
      worst = std::min(worst, (bound_b - lhs_b) / (1.0 + bound_b));
      inv_prev = inv_now;
    }
    if (bc.decay.size() < 2) worst = 0.0;
    c.worst_slack = worst;
    if (worst < -1e-9) {
      c.status = CheckStatus::fail;
      c.detail = "inverse-diagonal deviation exceeds its envelope";
    }
    report.checks.push_back(c);
  }

  // -- curvature of the objectives ---------------------------------------------
  {
    CheckResult c{"curvature", CheckStatus::pass, 0.0, ""};
    double worst = std::numeric_limits<double>::infinity();
    double worst_fd = 0.0;
    for (int i = 0; i < suite.n; ++i) {
      const auto& f = suite.locals[static_cast<std::size_t>(i)];
      for (int t = 0; t < opts.curvature_pairs; ++t) {
        const VectorXd x1 = 5.0 * detail::random_vector(rng, suite.p);
        const VectorXd x2 = 5.0 * detail::random_vector(rng, suite.p);
        const VectorXd g1 = f.gradient(x1);
        const VectorXd g2 = f.gradient(x2);
        const double v1 = f.value(x1);
        const double v2 = f.value(x2);
        const double dn2 = (x1 - x2).squaredNorm();
        const double scale = 1.0 + std::abs(v1) + std::abs(v2);
        // strong convexity of f_i with modulus s_i
        const double sc_slack =
            (g1.dot(x1 - x2) - 0.5 * f.strong_convexity * dn2 - (v1 - v2)) / scale;
        worst = std::min(worst, sc_slack);
        // gradient Lipschitz constant l_i
        const double lip_slack =
            (f.lipschitz * std::sqrt(dn2) - (g1 - g2).norm()) /
            (1.0 + f.lipschitz * std::sqrt(dn2));
        worst = std::min(worst, lip_slack);
        if (t < 20) {
          const VectorXd fd = finite_difference_gradient(f.value, x1);
          worst_fd = std::max(worst_fd, (g1 - fd).norm() / (1.0 + fd.norm()));
        }
      }
    }
    c.worst_slack = std::min(worst, 1e-6 - worst_fd);
    if (worst < -1e-9) {
      c.status = CheckStatus::fail;
      c.detail = "a curvature inequality failed";
    } else if (worst_fd > 1e-6) {
      c.status = CheckStatus::fail;
      c.detail = "analytic gradient deviates from finite differences by " +
                 std::to_string(worst_fd);
    }
    report.checks.push_back(c);
  }

  // -- a short instrumented run for the iteration-level identities -------------
  VectorXd x_star;
  std::optional<ConvergenceTrace> trace;
  try {
    x_star = global_optimum(suite);
    RunConfig rc;
    rc.alpha = alpha;
    rc.max_iters = opts.run_iters;
    rc.record_every = 1;
    trace = run(rc, A, suite, x_star, bc);
  } catch (const Error&) {
    trace.reset();
  }
  {
    CheckResult c{"tracking_identity", CheckStatus::pass, 0.0, ""};
    if (!trace.has_value()) {
      c.status = CheckStatus::fail;
      c.detail = "instrumented run failed";
    } else {
      const double a = trace->max_track_identity_err;
      const double b = trace->max_average_step_err;
      c.worst_slack = std::min(1e-9 - a, 1e-11 - b);
      if (a > 1e-9 || b > 1e-11) {
        c.status = CheckStatus::fail;
        c.detail = "identity errors: tracking " + std::to_string(a) +
                   ", averaged step " + std::to_string(b);
      }
    }
    report.checks.push_back(c);
  }

  // -- centralized contraction --------------------------------------------------
  {
    CheckResult c{"centralized_contraction", CheckStatus::pass, 0.0, ""};
    if (!(alpha > 0.0) || !(alpha < 2.0 / gc.nl)) {
      c.status = CheckStatus::inapplicable;
      c.detail = "alpha outside (0, 2/(n l))";
    } else {
      const double e = eta(alpha, suite.n, gc.l, gc.s);
      double worst = std::numeric_limits<double>::infinity();
      for (int t = 0; t < opts.curvature_pairs; ++t) {
        const VectorXd x = x_star + 5.0 * detail::random_vector(rng, suite.p);
        const double before = (x - x_star).norm();
        const double after = (centralized_gd_step(x, alpha, suite) - x_star).norm();
        worst = std::min(worst, (e * before - after) / (1.0 + e * before));
      }
      c.worst_slack = worst;
      if (worst < -1e-9) {
        c.status = CheckStatus::fail;
        c.detail = "a gradient step contracted worse than eta";
      }
    }
    report.checks.push_back(c);
  }

  // -- spectral certificates of the error recursion ------------------------------
  double alpha_bar = 0.0;
  bool have_alpha_bar = false;
  {
    CheckResult c{"spectral_certificates", CheckStatus::pass, 0.0, ""};
    double worst = std::numeric_limits<double>::infinity();
    try {
      const Eigen::Matrix3d G0 = build_G(bc, 0.0, suite.n, gc.l, gc.s);
      const double rho0 = spectral_radius_3x3(G0);
      worst = std::min(worst, 1e-10 - std::abs(rho0 - 1.0));
      Eigen::EigenSolver<MatrixXd> es(G0);
      std::vector<double> mags;
      for (int i = 0; i < 3; ++i) mags.push_back(std::abs(es.eigenvalues()[i]));
      std::sort(mags.begin(), mags.end());
      std::vector<double> expected{bc.sigma, bc.sigma, 1.0};
      std::sort(expected.begin(), expected.end());
      for (int i = 0; i < 3; ++i) {
        worst = std::min(worst, 1e-8 - std::abs(mags[static_cast<std::size_t>(i)] -
                                                expected[static_cast<std::size_t>(i)]));
      }
      // exact root of the polynomial at alpha = 0
      worst = std::min(worst,
                       -std::abs(char_poly_eval(1.0, 0.0, bc, suite.n, gc.l, gc.s)));

      alpha_bar = alpha_upper_bound(bc, suite.n, gc.l, gc.s);
      have_alpha_bar = true;
      for (int j = 1; j <= 20; ++j) {
        const double a = alpha_bar * static_cast<double>(j) / 21.0;
        const double rho = spectral_radius_3x3(build_G(bc, a, suite.n, gc.l, gc.s));
        worst = std::min(worst, 1.0 - rho);
        if (!(rho < 1.0)) {
          c.status = CheckStatus::fail;
          c.detail = "rho(G) >= 1 below the certified bound";
        }
      }
      // the quadratic root in alpha is a root of the polynomial at q = 1
      const double a3 = alpha_root(bc, suite.n, gc.l, gc.s);
      if (std::isfinite(a3)) {
        const double v = char_poly_eval(1.0, a3, bc, suite.n, gc.l, gc.s);
        const double scale = char_poly_scale(1.0, a3, bc, suite.n, gc.l, gc.s);
        worst = std::min(worst, 1e-8 - std::abs(v) / std::max(scale, 1e-300));
      }
      // derivative of the dominant eigenvalue at alpha = 0
      const double h = 1e-8;
      const double rho_h = spectral_radius_3x3(build_G(bc, h, suite.n, gc.l, gc.s));
      const double deriv = (rho_h - rho0) / h;
      const double rel = std::abs(deriv + gc.ns) / gc.ns;
      worst = std::min(worst, 0.1 - rel);
      // polynomial evaluated at the eigenvalues of G for sampled alpha
      for (int t = 0; t < 10; ++t) {
        const double a = rng.uniform(0.0, 1.0 / (static_cast<double>(suite.n) * gc.l));
        const Eigen::Matrix3d G = build_G(bc, a, suite.n, gc.l, gc.s);
        Eigen::EigenSolver<MatrixXd> ev(G);
        for (int i = 0; i < 3; ++i) {
          const std::complex<double> q = ev.eigenvalues()[i];
          const double v = std::abs(char_poly_eval(q, a, bc, suite.n, gc.l, gc.s));
          const double scale =
              char_poly_scale(std::abs(q), a, bc, suite.n, gc.l, gc.s);
          worst = std::min(worst, 1e-8 - v / std::max(scale, 1e-300));
        }
      }
    } catch (const Error& e) {
      c.status = CheckStatus::fail;
      c.detail = e.what();
    }
    if (c.status == CheckStatus::pass && worst < 0.0) {
      c.status = CheckStatus::fail;
      if (c.detail.empty()) c.detail = "a spectral certificate missed its tolerance";
    }
    c.worst_slack = worst;
    report.checks.push_back(c);
  }

  // -- the configured step size against the certified range ----------------------
  {
    CheckResult c{"config_step_size", CheckStatus::pass, 0.0, ""};
    if (!have_alpha_bar) {
      c.status = CheckStatus::inapplicable;
      c.detail = "certified bound unavailable";
    } else if (!(alpha > 0.0) || alpha >= alpha_bar) {
      c.status = CheckStatus::inapplicable;
      c.detail = "alpha " + std::to_string(alpha) +
                 " is outside the certified range (0, " + std::to_string(alpha_bar) +
                 "); convergence is not guaranteed at this step size";
    } else {
      const double rho = spectral_radius_3x3(build_G(bc, alpha, suite.n, gc.l, gc.s));
      c.worst_slack = 1.0 - rho;
      if (!(rho < 1.0)) {
        c.status = CheckStatus::fail;
        c.detail = "rho(G) >= 1 at the configured alpha";
      }
    }
    report.checks.push_back(c);
  }

  // -- the coupled error recursion on the instrumented run -----------------------
  {
    CheckResult c{"theorem1", CheckStatus::pass, 0.0, ""};
    if (!trace.has_value()) {
      c.status = CheckStatus::fail;
      c.detail = "instrumented run failed";
    } else if (!(alpha > 0.0) || !(alpha < 2.0 / gc.nl)) {
      c.status = CheckStatus::inapplicable;
      c.detail = "alpha outside (0, 2/(n l))";
    } else {
      const Theorem1Result t1 = theorem1_check(*trace, bc, alpha, gc.l, gc.s);
      c.worst_slack = t1.worst_normalized_slack;
      if (!t1.pass) {
        c.status = CheckStatus::fail;
        c.detail = "componentwise bound violated at k = " + std::to_string(t1.worst_k);
      }
    }
    report.checks.push_back(c);
  }

  // -- fitted linear rate ----------------------------------------------------------
  {
    CheckResult c{"linear_rate", CheckStatus::pass, 0.0, ""};
    if (!trace.has_value()) {
      c.status = CheckStatus::fail;
      c.detail = "instrumented run failed";
    } else if (!have_alpha_bar || !(alpha > 0.0) || alpha >= alpha_bar) {
      c.status = CheckStatus::inapplicable;
      c.detail = "alpha outside the certified range; no rate guarantee";
    } else {
      try {
        const RateEstimate est = fit_linear_rate(*trace);
        c.worst_slack = std::min(1.0 - est.mu_hat, est.r_squared - 0.99);
        if (!(est.mu_hat < 1.0) || !(est.r_squared > 0.99)) {
          c.status = CheckStatus::fail;
          c.detail = "mu_hat " + std::to_string(est.mu_hat) + ", r^2 " +
                     std::to_string(est.r_squared);
        }
      } catch (const Error& e) {
        c.status = CheckStatus::fail;
        c.detail = e.what();
      }
    }
    report.checks.push_back(c);
  }

  return report;
}

inline nlohmann::json report_to_json(const VerificationReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"status", to_string(c.status)},
                      {"worst_slack", c.worst_slack},
                      {"detail", c.detail}});
  }
  nlohmann::json j;
  j["alpha"] = report.alpha;
  j["all_passed"] = report.all_passed();
  j["checks"] = checks;
  return j;
}

}  // namespace rowstoch
