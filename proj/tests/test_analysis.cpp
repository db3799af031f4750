#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "rowstoch/algorithms.hpp"
#include "rowstoch/analysis.hpp"
#include "rowstoch/digraph.hpp"
#include "rowstoch/objectives.hpp"
#include "rowstoch/rng.hpp"

namespace rs = rowstoch;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

// Hand-picked constants exercising every coefficient path. The expected
// values below were computed independently with exact decimal arithmetic
// and frozen as literals.
rs::BoundConstants crafted() {
  rs::BoundConstants bc;
  bc.sigma = 0.5;
  bc.c = 1.0;
  bc.d = 2.0;
  bc.epsilon = 0.3;
  bc.y_tilde = 4.0;
  bc.tau = 1.1;
  bc.gamma1 = 0.8;
  bc.T = 2.5;
  bc.T_tilde = 2.5;
  bc.y = 1.7;
  return bc;
}

constexpr int kN = 3;
constexpr double kL = 2.0;
constexpr double kS = 1.0;
constexpr double kAlpha = 0.01;

}  // namespace

TEST(Eta, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(rs::eta(kAlpha, kN, kL, kS), 0.97);
  EXPECT_DOUBLE_EQ(rs::eta(0.0, kN, kL, kS), 1.0);
  // at alpha = 1/(n l) the Lipschitz side vanishes and the s side dominates
  EXPECT_DOUBLE_EQ(rs::eta(1.0 / 6.0, kN, kL, kS), 0.5);
  // both absolute values balance at alpha = 2/(n(l+s))
  EXPECT_NEAR(rs::eta(2.0 / (kN * (kL + kS)), kN, kL, kS),
              (kL - kS) / (kL + kS), 1e-15);
  // beyond 2/(n l) the factor exceeds one
  EXPECT_GT(rs::eta(0.4, kN, kL, kS), 1.0);
}

TEST(GMatrix, FrozenEntries) {
  const Matrix3d G = rs::build_G(crafted(), kAlpha, kN, kL, kS);
  EXPECT_DOUBLE_EQ(G(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(G(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(G(0, 2), 0.01);
  EXPECT_NEAR(G(1, 0), 0.06, 1e-16);
  EXPECT_DOUBLE_EQ(G(1, 1), 0.97);
  EXPECT_DOUBLE_EQ(G(1, 2), 0.0);
  EXPECT_NEAR(G(2, 0), 5.5680000000000005, 1e-14);
  EXPECT_NEAR(G(2, 1), 0.28800000000000003, 1e-15);
  EXPECT_NEAR(G(2, 2), 0.548, 1e-15);
}

TEST(CharPoly, AgreesWithDeterminantRoute) {
  const rs::BoundConstants bc = crafted();
  rs::Rng rng(31);
  for (double alpha : {0.001, 0.01, 0.05}) {
    const Matrix3d G = rs::build_G(bc, alpha, kN, kL, kS);
    for (int trial = 0; trial < 40; ++trial) {
      const double q = rng.uniform(0.0, 2.0);
      const double via_det =
          (q * Matrix3d::Identity() - G).determinant();
      const double via_poly = rs::char_poly_eval(q, alpha, bc, kN, kL, kS);
      const double scale =
          1.0 + rs::char_poly_scale(q, alpha, bc, kN, kL, kS);
      EXPECT_NEAR(via_poly, via_det, 1e-12 * scale)
          << "alpha=" << alpha << " q=" << q;
    }
  }
}

TEST(CharPoly, FrozenPointAndComplexConsistency) {
  const rs::BoundConstants bc = crafted();
  EXPECT_NEAR(rs::char_poly_eval(0.9, kAlpha, bc, kN, kL, kS),
              -0.006131200000000001, 1e-15);
  const std::complex<double> at_real =
      rs::char_poly_eval(std::complex<double>(0.9, 0.0), kAlpha, bc, kN, kL, kS);
  EXPECT_NEAR(at_real.real(), rs::char_poly_eval(0.9, kAlpha, bc, kN, kL, kS),
              1e-16);
  EXPECT_DOUBLE_EQ(at_real.imag(), 0.0);
  // conjugate symmetry of a real-coefficient polynomial
  const std::complex<double> q(0.7, 0.4);
  const auto plus = rs::char_poly_eval(q, kAlpha, bc, kN, kL, kS);
  const auto minus = rs::char_poly_eval(std::conj(q), kAlpha, bc, kN, kL, kS);
  EXPECT_NEAR(plus.real(), minus.real(), 1e-14);
  EXPECT_NEAR(plus.imag(), -minus.imag(), 1e-14);
}

TEST(StepSizeBound, FrozenRootSatisfiesPolynomial) {
  const rs::BoundConstants bc = crafted();
  const double root = rs::alpha_root(bc, kN, kL, kS);
  EXPECT_NEAR(root, 0.025332537150447053, 1e-14);
  const double scale = rs::char_poly_scale(1.0, root, bc, kN, kL, kS);
  EXPECT_LE(std::abs(rs::char_poly_eval(1.0, root, bc, kN, kL, kS)),
            1e-8 * scale);
  // the root is below the centralized ceiling here, so it is the bound
  const double bound = rs::alpha_upper_bound(bc, kN, kL, kS);
  EXPECT_DOUBLE_EQ(bound, root);
  EXPECT_LT(bound, 1.0 / (kN * kL));
  // inside the certified range the recursion matrix is a contraction
  for (double f : {0.2, 0.6, 0.95}) {
    EXPECT_LT(rs::spectral_radius_3x3(rs::build_G(bc, f * bound, kN, kL, kS)),
              1.0);
  }
}

TEST(StepSizeBound, FullyMixedNetworkFallsBackToCentralizedCeiling) {
  rs::BoundConstants bc = crafted();
  bc.epsilon = 0.0;  // one-step mixing: the quadratic degenerates
  EXPECT_TRUE(std::isinf(rs::alpha_root(bc, kN, kL, kS)));
  EXPECT_DOUBLE_EQ(rs::alpha_upper_bound(bc, kN, kL, kS), 1.0 / 6.0);
}

TEST(StepSizeBound, Validation) {
  const rs::BoundConstants bc = crafted();
  EXPECT_THROW(rs::alpha_root(bc, kN, 1.0, 2.0), rs::NotPositiveDefinite);
  EXPECT_THROW(rs::alpha_root(bc, kN, 0.0, 0.0), rs::NotPositiveDefinite);
  rs::BoundConstants expanding = crafted();
  expanding.sigma = 1.5;  // no contraction: certification must refuse
  EXPECT_THROW(rs::alpha_upper_bound(expanding, kN, kL, kS),
               rs::CertificationFailed);
}

TEST(HkMatrix, FrozenEntriesAndGeometricDecay) {
  const rs::BoundConstants bc = crafted();
  const Matrix3d H2 = rs::build_Hk(bc, kAlpha, 2, kL);
  // only the first column couples to the gradient magnitude
  EXPECT_DOUBLE_EQ(H2(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(H2(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(H2(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(H2(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(H2(1, 2), 0.0);
  EXPECT_DOUBLE_EQ(H2(2, 1), 0.0);
  EXPECT_DOUBLE_EQ(H2(2, 2), 0.0);
  EXPECT_NEAR(H2(1, 0), 0.43520000000000014, 1e-14);
  EXPECT_NEAR(H2(2, 0), 32.808960000000006, 1e-12);
  EXPECT_NEAR(rs::matrix_2norm(H2), 32.81184626505495, 1e-11);

  for (long k = 1; k <= 5; ++k) {
    const double now = rs::matrix_2norm(rs::build_Hk(bc, kAlpha, k, kL));
    const double prev = rs::matrix_2norm(rs::build_Hk(bc, kAlpha, k - 1, kL));
    EXPECT_NEAR(now / prev, bc.gamma1, 1e-12);
  }

  // a single populated column makes the 2-norm the column length, giving
  // sqrt((a*y*yt^2*Tt)^2 + (eps*d*yt^2*Tt)^2*(2 + a*y*yt*l)^2) * gamma1^k
  const double direct = kAlpha * bc.y * bc.y_tilde * bc.y_tilde * bc.T_tilde;
  const double mixing = bc.epsilon * bc.d * bc.y_tilde * bc.y_tilde *
                        bc.T_tilde * (2.0 + kAlpha * bc.y * bc.y_tilde * kL);
  const double column_len = std::hypot(direct, mixing);
  for (long k = 0; k <= 5; ++k) {
    EXPECT_NEAR(rs::matrix_2norm(rs::build_Hk(bc, kAlpha, k, kL)),
                column_len * std::pow(bc.gamma1, k), 1e-10 * column_len);
  }

  // without a step the direct coupling vanishes but the mixing term stays
  const Matrix3d H0 = rs::build_Hk(bc, 0.0, 3, kL);
  EXPECT_DOUBLE_EQ(H0(1, 0), 0.0);
  EXPECT_GT(H0(2, 0), 0.0);
}

TEST(SpectralRadius3x3, TriangularAndEigenAgreement) {
  Matrix3d T;
  T << 0.3, 1.0, 1.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.2;
  EXPECT_NEAR(rs::spectral_radius_3x3(T), 0.9, 1e-12);
  const Matrix3d G = rs::build_G(crafted(), kAlpha, kN, kL, kS);
  const double via_eigen =
      Eigen::EigenSolver<MatrixXd>(G).eigenvalues().cwiseAbs().maxCoeff();
  EXPECT_NEAR(rs::spectral_radius_3x3(G), via_eigen, 1e-12 * (1.0 + via_eigen));
}

TEST(RecursionCheck, EqualitySequencePassesWithZeroSlack) {
  const rs::BoundConstants bc = crafted();
  const Matrix3d G = rs::build_G(bc, kAlpha, kN, kL, kS);
  auto H = [&](long k) { return rs::build_Hk(bc, kAlpha, k, kL); };
  std::vector<Vector3d> t{Vector3d(1.0, 2.0, 3.0)};
  std::vector<Vector3d> s;
  for (long k = 0; k < 10; ++k) {
    s.emplace_back(0.7, 0.0, 0.0);
    t.push_back(G * t.back() + H(k) * s.back());
  }
  const rs::Theorem1Result res = rs::theorem1_check(t, s, G, H);
  EXPECT_TRUE(res.pass);
  EXPECT_EQ(res.transitions_checked, 10);
  EXPECT_GE(res.worst_normalized_slack, -1e-13);
  EXPECT_LE(std::abs(res.worst_normalized_slack), 1e-12);
}

TEST(RecursionCheck, LocatesInjectedViolation) {
  const rs::BoundConstants bc = crafted();
  const Matrix3d G = rs::build_G(bc, kAlpha, kN, kL, kS);
  auto H = [&](long k) { return rs::build_Hk(bc, kAlpha, k, kL); };
  std::vector<Vector3d> t{Vector3d(1.0, 2.0, 3.0)};
  std::vector<Vector3d> s;
  for (long k = 0; k < 10; ++k) {
    s.emplace_back(0.7, 0.0, 0.0);
    t.push_back(G * t.back() + H(k) * s.back());
  }
  t[5](1) += 0.5;  // claim more progress than the recursion permits
  const rs::Theorem1Result res = rs::theorem1_check(t, s, G, H);
  EXPECT_FALSE(res.pass);
  EXPECT_EQ(res.worst_k, 4);
  EXPECT_EQ(res.worst_component, 1);
  EXPECT_NEAR(res.worst_normalized_slack, -0.5 / (1.0 + t[4].norm()), 1e-9);
}

TEST(RecursionCheck, ToleranceBoundaryAndDegenerateInput) {
  const rs::BoundConstants bc = crafted();
  const Matrix3d G = rs::build_G(bc, kAlpha, kN, kL, kS);
  auto H = [&](long k) { return rs::build_Hk(bc, kAlpha, k, kL); };
  std::vector<Vector3d> t{Vector3d(1.0, 1.0, 1.0)};
  std::vector<Vector3d> s{Vector3d(0.3, 0.0, 0.0)};
  t.push_back(G * t[0] + H(0) * s[0]);
  t[1](0) += 0.5e-9 * (1.0 + t[0].norm());
  EXPECT_TRUE(rs::theorem1_check(t, s, G, H, 1e-9).pass);
  EXPECT_FALSE(rs::theorem1_check(t, s, G, H, 1e-10).pass);

  // all-zero fixed point sits exactly on the boundary
  std::vector<Vector3d> z(3, Vector3d::Zero());
  std::vector<Vector3d> zs(2, Vector3d::Zero());
  EXPECT_TRUE(rs::theorem1_check(z, zs, G, H).pass);

  EXPECT_THROW(rs::theorem1_check({Vector3d::Zero()}, {}, G, H),
               rs::InsufficientData);
  EXPECT_THROW(rs::theorem1_check(z, {Vector3d::Zero()}, G, H),
               rs::InsufficientData);
}

TEST(RecursionCheck, HoldsOnRealRunAndRequiresDenseTrace) {
  const rs::DirectedGraph g = rs::random_strongly_connected(5, 0.3, 2);
  const rs::WeightMatrix A = rs::row_stochastic_weights(g);
  rs::Rng rng(55);
  std::vector<MatrixXd> Qs;
  std::vector<VectorXd> rvecs;
  for (int i = 0; i < 5; ++i) {
    Qs.push_back(MatrixXd(VectorXd::Constant(1, rng.uniform(1.0, 4.0)).asDiagonal()));
    rvecs.push_back(VectorXd::Constant(1, rng.uniform(-2.0, 2.0)));
  }
  const rs::ObjectiveSuite suite = rs::quadratic_suite(Qs, rvecs);
  const rs::BoundConstants bc = rs::network_constants(A);
  const rs::GlobalConstants gc = rs::global_constants(suite);
  const double alpha = 0.5 * rs::alpha_upper_bound(bc, 5, gc.l, gc.s);

  rs::RunConfig cfg;
  cfg.alpha = alpha;
  cfg.max_iters = 60;
  cfg.record_every = 1;
  const rs::ConvergenceTrace trace =
      rs::run(cfg, A, suite, *suite.closed_form_optimum, bc);
  const rs::Theorem1Result res = rs::theorem1_check(trace, bc, alpha, gc.l, gc.s);
  EXPECT_TRUE(res.pass) << "worst slack " << res.worst_normalized_slack;
  EXPECT_EQ(res.transitions_checked, 60);

  // a trace whose records start past zero uses the matching decay offset
  rs::ConvergenceTrace shifted = trace;
  shifted.records.assign(trace.records.begin() + 5, trace.records.begin() + 25);
  EXPECT_TRUE(rs::theorem1_check(shifted, bc, alpha, gc.l, gc.s).pass);

  // sparse sampling cannot validate a per-iteration recursion
  rs::ConvergenceTrace sparse = trace;
  sparse.records.clear();
  for (std::size_t i = 0; i < trace.records.size(); i += 2) {
    sparse.records.push_back(trace.records[i]);
  }
  EXPECT_THROW(rs::theorem1_check(sparse, bc, alpha, gc.l, gc.s),
               rs::InsufficientData);
  rs::ConvergenceTrace tiny = trace;
  tiny.records.resize(1);
  EXPECT_THROW(rs::theorem1_check(tiny, bc, alpha, gc.l, gc.s),
               rs::InsufficientData);
}

TEST(RecursionCheck, HoldsWhenMixingWeightsBalanceExactly) {
  // a directed ring with self-loops has uniform in-degrees, so the weight
  // matrix is doubly stochastic and the limit distribution is flat
  const rs::DirectedGraph ring =
      rs::build_graph(4, {{1, 0}, {2, 1}, {3, 2}, {0, 3}});
  const rs::WeightMatrix A = rs::row_stochastic_weights(ring);
  const rs::BoundConstants bc = rs::network_constants(A);
  ASSERT_TRUE(bc.pi.isApproxToConstant(0.25, 1e-12));

  rs::Rng rng(77);
  std::vector<MatrixXd> Qs;
  std::vector<VectorXd> rvecs;
  for (int i = 0; i < 4; ++i) {
    Qs.push_back(MatrixXd(VectorXd::Constant(1, rng.uniform(1.0, 4.0)).asDiagonal()));
    rvecs.push_back(VectorXd::Constant(1, rng.uniform(-2.0, 2.0)));
  }
  const rs::ObjectiveSuite suite = rs::quadratic_suite(Qs, rvecs);
  const rs::GlobalConstants gc = rs::global_constants(suite);
  const double alpha = 0.5 * rs::alpha_upper_bound(bc, 4, gc.l, gc.s);

  rs::RunConfig cfg;
  cfg.alpha = alpha;
  cfg.max_iters = 60;
  cfg.record_every = 1;
  const rs::ConvergenceTrace trace =
      rs::run(cfg, A, suite, *suite.closed_form_optimum, bc);
  const rs::Theorem1Result res = rs::theorem1_check(trace, bc, alpha, gc.l, gc.s);
  EXPECT_TRUE(res.pass) << "worst slack " << res.worst_normalized_slack;
  EXPECT_EQ(res.transitions_checked, 60);
}

namespace {

rs::ConvergenceTrace trace_from_residuals(const std::vector<double>& r) {
  rs::ConvergenceTrace t;
  for (std::size_t k = 0; k < r.size(); ++k) {
    rs::TraceRecord rec;
    rec.k = static_cast<long>(k);
    rec.residual2 = r[k];
    t.records.push_back(rec);
  }
  return t;
}

}  // namespace

TEST(RateFit, RecoversExactGeometricSequence) {
  std::vector<double> r;
  for (int k = 0; k < 100; ++k) r.push_back(5.0 * std::pow(0.9, k));
  const rs::RateEstimate est = rs::fit_linear_rate(trace_from_residuals(r));
  EXPECT_NEAR(est.mu_hat, 0.9, 1e-9);
  EXPECT_NEAR(est.M_hat, 5.0, 1e-6);
  EXPECT_GT(est.r_squared, 0.999999);
  EXPECT_EQ(est.window_first_k, 10);  // first 10% dropped as transient
  EXPECT_EQ(est.window_last_k, 99);
  EXPECT_EQ(est.window_size, 90);
}

TEST(RateFit, TransientHeadIsDropped) {
  std::vector<double> r;
  for (int k = 0; k < 100; ++k) {
    r.push_back(k < 8 ? 40.0 : 5.0 * std::pow(0.9, k));
  }
  const rs::RateEstimate est = rs::fit_linear_rate(trace_from_residuals(r));
  EXPECT_NEAR(est.mu_hat, 0.9, 1e-9);
  EXPECT_GT(est.r_squared, 0.999999);
}

TEST(RateFit, NumericalFloorIsExcluded) {
  std::vector<double> r;
  for (int k = 0; k <= 100; ++k) r.push_back(5.0 * std::pow(0.9, k));
  for (int k = 101; k < 200; ++k) r.push_back(1e-16);  // stagnated tail
  const rs::RateEstimate est = rs::fit_linear_rate(trace_from_residuals(r));
  EXPECT_EQ(est.window_last_k, 100);
  EXPECT_NEAR(est.mu_hat, 0.9, 1e-9);
}

TEST(RateFit, SublinearSequenceIsNotMistakenForGeometric) {
  std::vector<double> slow;
  for (int k = 0; k < 500; ++k) slow.push_back(1.0 / std::sqrt(k + 1.0));
  const rs::RateEstimate est = rs::fit_linear_rate(trace_from_residuals(slow));
  EXPECT_GT(est.mu_hat, 0.99);  // nearly flat per-step factor
  EXPECT_LT(est.r_squared, 0.999);
}

TEST(RateFit, RejectsShortOrEmptyTraces) {
  std::vector<double> r;
  for (int k = 0; k < 15; ++k) r.push_back(std::pow(0.5, k));
  EXPECT_THROW(rs::fit_linear_rate(trace_from_residuals(r)),
               rs::InsufficientData);
  EXPECT_THROW(rs::fit_linear_rate(trace_from_residuals({})),
               rs::InsufficientData);
  // zero residuals are unusable; with too few positives the fit refuses
  std::vector<double> zeros(50, 0.0);
  EXPECT_THROW(rs::fit_linear_rate(trace_from_residuals(zeros)),
               rs::InsufficientData);
}
