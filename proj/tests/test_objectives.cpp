#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "rowstoch/objectives.hpp"
#include "rowstoch/rng.hpp"

namespace rs = rowstoch;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

rs::ObjectiveSuite two_quadratics() {
  MatrixXd Q1 = Vector2d(1.0, 4.0).asDiagonal();
  MatrixXd Q2 = Vector2d(2.0, 3.0).asDiagonal();
  return rs::quadratic_suite({Q1, Q2}, {Vector2d(1.0, 0.0), Vector2d(0.0, -2.0)});
}

}  // namespace

TEST(Quadratic, ClosedFormOptimumAndConstants) {
  const rs::ObjectiveSuite suite = two_quadratics();
  ASSERT_EQ(suite.n, 2);
  ASSERT_EQ(suite.p, 2);
  // sum Q = diag(3, 7), sum r = (1, -2): minimizer (-1/3, 2/7)
  ASSERT_TRUE(suite.closed_form_optimum.has_value());
  EXPECT_NEAR((*suite.closed_form_optimum)(0), -1.0 / 3.0, 1e-14);
  EXPECT_NEAR((*suite.closed_form_optimum)(1), 2.0 / 7.0, 1e-14);

  const rs::GlobalConstants gc = rs::global_constants(suite);
  EXPECT_DOUBLE_EQ(gc.s, 1.0);
  EXPECT_DOUBLE_EQ(gc.l, 4.0);
  EXPECT_DOUBLE_EQ(gc.ns, 2.0);
  EXPECT_DOUBLE_EQ(gc.nl, 8.0);

  const Vector2d x(1.0, 1.0);
  EXPECT_NEAR(suite.local_value(0, x), 0.5 * (1.0 + 4.0) + 1.0, 1e-14);
  const VectorXd g0 = suite.local_gradient(0, x);
  EXPECT_NEAR(g0(0), 2.0, 1e-14);
  EXPECT_NEAR(g0(1), 4.0, 1e-14);
  EXPECT_NEAR(suite.sum_gradient(*suite.closed_form_optimum).norm(), 0.0, 1e-13);
}

TEST(Quadratic, RejectsBadInputs) {
  MatrixXd asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  EXPECT_THROW(rs::quadratic_suite({asym}, {Vector2d::Zero()}),
               rs::NotPositiveDefinite);
  MatrixXd indef = Vector2d(1.0, -1.0).asDiagonal();
  EXPECT_THROW(rs::quadratic_suite({indef}, {Vector2d::Zero()}),
               rs::NotPositiveDefinite);
  EXPECT_THROW(rs::quadratic_suite({}, {}), rs::ShapeMismatch);
  MatrixXd ok = MatrixXd::Identity(2, 2);
  EXPECT_THROW(rs::quadratic_suite({ok}, {VectorXd::Zero(3)}),
               rs::ShapeMismatch);
  EXPECT_THROW(rs::quadratic_suite({ok, ok}, {Vector2d::Zero()}),
               rs::ShapeMismatch);
}

TEST(Quadratic, GradientMatrixIsRowwise) {
  const rs::ObjectiveSuite suite = two_quadratics();
  MatrixXd X(2, 2);
  X << 1.0, -1.0, 0.5, 2.0;
  const MatrixXd G = suite.gradient_matrix(X);
  for (int i = 0; i < 2; ++i) {
    const VectorXd gi = suite.local_gradient(i, X.row(i).transpose());
    EXPECT_NEAR((G.row(i).transpose() - gi).norm(), 0.0, 1e-15);
  }
  EXPECT_THROW(suite.gradient_matrix(MatrixXd::Zero(3, 2)), rs::ShapeMismatch);
}

TEST(Quadratic, IndexAndShapeGuards) {
  const rs::ObjectiveSuite suite = two_quadratics();
  EXPECT_THROW(suite.local_value(2, Vector2d::Zero()), rs::BadIndex);
  EXPECT_THROW(suite.local_gradient(-1, Vector2d::Zero()), rs::BadIndex);
  EXPECT_THROW(suite.local_value(0, VectorXd::Zero(3)), rs::ShapeMismatch);
  EXPECT_THROW(suite.sum_gradient(VectorXd::Zero(1)), rs::ShapeMismatch);
}

TEST(GlobalConstants, RejectsDegenerateCurvature) {
  rs::ObjectiveSuite suite;
  suite.n = 1;
  suite.p = 1;
  rs::LocalObjective f;
  f.value = [](const VectorXd&) { return 0.0; };
  f.gradient = [](const VectorXd& x) -> VectorXd { return x; };
  f.strong_convexity = 0.0;
  f.lipschitz = 1.0;
  suite.locals.push_back(f);
  EXPECT_THROW(rs::global_constants(suite), rs::NotPositiveDefinite);
  suite.locals[0].strong_convexity = 2.0;  // now s > l
  EXPECT_THROW(rs::global_constants(suite), rs::NotPositiveDefinite);
  suite.locals[0].lipschitz = 2.0;
  EXPECT_NO_THROW(rs::global_constants(suite));
}

TEST(GlobalOptimum, DescentAgreesWithClosedForm) {
  const rs::ObjectiveSuite suite = two_quadratics();
  const VectorXd x = rs::global_optimum(suite, 1e-11);
  EXPECT_LT((x - *suite.closed_form_optimum).norm(), 1e-10);
  // a cap too small to converge raises
  EXPECT_THROW(rs::global_optimum(suite, 1e-11, 2), rs::NoConvergence);
}

TEST(Logistic, ValueAndGradientAtZero) {
  const rs::LogisticData data = rs::make_logistic_data(3, 5, 2, 0.6, 21);
  const rs::ObjectiveSuite suite = rs::logistic_suite(data);
  const VectorXd zero = VectorXd::Zero(2);
  for (int i = 0; i < 3; ++i) {
    // every sample contributes ln 2 at z = 0; the ridge term contributes 0
    EXPECT_NEAR(suite.local_value(i, zero), 5.0 * std::log(2.0), 1e-13);
    VectorXd expected = VectorXd::Zero(2);
    const MatrixXd& C = data.features[static_cast<std::size_t>(i)];
    const VectorXd& b = data.labels[static_cast<std::size_t>(i)];
    for (long j = 0; j < b.size(); ++j) {
      expected -= 0.5 * b[j] * C.row(j).transpose();
    }
    EXPECT_LT((suite.local_gradient(i, zero) - expected).norm(), 1e-13);
  }
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  const rs::LogisticData data = rs::make_logistic_data(2, 6, 3, 1.0, 5);
  const rs::ObjectiveSuite suite = rs::logistic_suite(data);
  rs::Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd z(3);
    for (int d = 0; d < 3; ++d) z(d) = rng.normal();
    for (int i = 0; i < 2; ++i) {
      const VectorXd g = suite.local_gradient(i, z);
      const VectorXd fd = rs::finite_difference_gradient(
          [&](const VectorXd& v) { return suite.local_value(i, v); }, z);
      EXPECT_LT((g - fd).norm(), 1e-6 * (1.0 + fd.norm()));
    }
  }
}

TEST(Logistic, CurvatureConstantsFollowGramSpectrum) {
  const int n = 4;
  const double beta = 2.0;
  const rs::LogisticData data = rs::make_logistic_data(n, 7, 3, beta, 12);
  const rs::ObjectiveSuite suite = rs::logistic_suite(data);
  const double reg = beta / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const MatrixXd& C = data.features[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C.transpose() * C);
    const double top = es.eigenvalues().maxCoeff();
    EXPECT_DOUBLE_EQ(suite.locals[static_cast<std::size_t>(i)].strong_convexity,
                     reg);
    EXPECT_NEAR(suite.locals[static_cast<std::size_t>(i)].lipschitz,
                reg + 0.25 * top, 1e-12 * (1.0 + top));
  }
  const rs::GlobalConstants gc = rs::global_constants(suite);
  EXPECT_DOUBLE_EQ(gc.s, reg);
  EXPECT_GT(gc.l, gc.s);
}

TEST(Logistic, DataGenerationDeterministicPerSeed) {
  const rs::LogisticData a = rs::make_logistic_data(3, 4, 2, 1.0, 42);
  const rs::LogisticData b = rs::make_logistic_data(3, 4, 2, 1.0, 42);
  const rs::LogisticData c = rs::make_logistic_data(3, 4, 2, 1.0, 43);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.features[static_cast<std::size_t>(i)],
              b.features[static_cast<std::size_t>(i)]);
    EXPECT_EQ(a.labels[static_cast<std::size_t>(i)],
              b.labels[static_cast<std::size_t>(i)]);
    for (long j = 0; j < a.labels[static_cast<std::size_t>(i)].size(); ++j) {
      const double lab = a.labels[static_cast<std::size_t>(i)][j];
      EXPECT_TRUE(lab == 1.0 || lab == -1.0);
    }
  }
  EXPECT_NE(a.features[0], c.features[0]);
}

TEST(Logistic, ExtremeArgumentsStayFinite) {
  EXPECT_DOUBLE_EQ(rs::detail::log1pexp(800.0), 800.0);
  EXPECT_NEAR(rs::detail::log1pexp(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(rs::detail::log1pexp(0.0), std::log(2.0), 1e-16);
  EXPECT_NEAR(rs::detail::inv_1p_exp(0.0), 0.5, 1e-16);
  EXPECT_NEAR(rs::detail::inv_1p_exp(800.0), 0.0, 1e-300);
  EXPECT_NEAR(rs::detail::inv_1p_exp(-800.0), 1.0, 1e-15);

  const rs::LogisticData data = rs::make_logistic_data(1, 3, 2, 1.0, 2);
  const rs::ObjectiveSuite suite = rs::logistic_suite(data);
  const VectorXd big = VectorXd::Constant(2, 1e6);
  EXPECT_TRUE(std::isfinite(suite.local_value(0, big)));
  EXPECT_TRUE(std::isfinite(suite.local_value(0, -big)));
  EXPECT_TRUE(suite.local_gradient(0, big).allFinite());
}

TEST(Logistic, SuiteValidation) {
  rs::LogisticData data = rs::make_logistic_data(2, 3, 2, 1.0, 7);
  rs::LogisticData bad_label = data;
  bad_label.labels[0][1] = 0.5;
  EXPECT_THROW(rs::logistic_suite(bad_label), rs::ShapeMismatch);
  rs::LogisticData bad_beta = data;
  bad_beta.beta = 0.0;
  EXPECT_THROW(rs::logistic_suite(bad_beta), rs::NotPositiveDefinite);
  rs::LogisticData bad_shape = data;
  bad_shape.features[1] = MatrixXd::Zero(3, 5);
  EXPECT_THROW(rs::logistic_suite(bad_shape), rs::ShapeMismatch);
  EXPECT_THROW(rs::make_logistic_data(0, 3, 2, 1.0, 7), rs::ShapeMismatch);
}

TEST(Logistic, EmptySampleAgentsReduceToRidge) {
  const rs::LogisticData data = rs::make_logistic_data(2, 0, 2, 3.0, 4);
  const rs::ObjectiveSuite suite = rs::logistic_suite(data);
  const Vector2d z(1.0, 2.0);
  EXPECT_NEAR(suite.local_value(0, z), 0.5 * 1.5 * 5.0, 1e-14);
  EXPECT_DOUBLE_EQ(suite.locals[0].lipschitz, suite.locals[0].strong_convexity);
}

TEST(Logistic, DatasetFilesRoundTripExactly) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rowstoch_objectives_test";
  fs::remove_all(dir);
  const rs::LogisticData data = rs::make_logistic_data(3, 4, 2, 1.5, 77);
  rs::save_logistic_data(data, dir.string());
  const rs::LogisticData loaded =
      rs::load_logistic_data((dir / "manifest.json").string());
  EXPECT_EQ(loaded.n, data.n);
  EXPECT_EQ(loaded.p, data.p);
  EXPECT_DOUBLE_EQ(loaded.beta, data.beta);
  for (int i = 0; i < 3; ++i) {
    // %.17g serialization reproduces every double bit for bit
    EXPECT_EQ(loaded.features[static_cast<std::size_t>(i)],
              data.features[static_cast<std::size_t>(i)]);
    EXPECT_EQ(loaded.labels[static_cast<std::size_t>(i)],
              data.labels[static_cast<std::size_t>(i)]);
  }
  EXPECT_THROW(rs::load_logistic_data((dir / "nope.json").string()),
               rs::MalformedTrace);
  // corrupt one row: column count mismatch must be rejected
  {
    std::ofstream bad(dir / "agent_1.csv");
    bad << "1.0,2.0,3.0,1\n";
  }
  EXPECT_THROW(rs::load_logistic_data((dir / "manifest.json").string()),
               rs::MalformedTrace);
  fs::remove_all(dir);
}

TEST(FiniteDifference, MatchesPolynomialDerivative) {
  const auto f = [](const VectorXd& x) {
    return x(0) * x(0) * x(1) + 3.0 * x(1);
  };
  const Vector2d at(2.0, 5.0);
  const VectorXd g = rs::finite_difference_gradient(f, at);
  EXPECT_NEAR(g(0), 20.0, 1e-6);
  EXPECT_NEAR(g(1), 7.0, 1e-6);
}
