#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rowstoch/errors.hpp"
#include "rowstoch/linalg.hpp"
#include "rowstoch/rng.hpp"

namespace rowstoch {

/// One agent's private objective with its curvature constants.
struct LocalObjective {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  double strong_convexity = 0.0;  // s_i
  double lipschitz = 0.0;         // l_i, gradient Lipschitz constant
};

/// The collection of local objectives f_i over R^p whose sum the network
/// minimizes.
struct ObjectiveSuite {
  int n = 0;
  int p = 0;
  std::vector<LocalObjective> locals;
  std::optional<VectorXd> closed_form_optimum;

  void check_point(const VectorXd& x) const {
    if (x.size() != p) throw ShapeMismatch("ObjectiveSuite: point has wrong dimension");
  }

  double local_value(int i, const VectorXd& x) const {
    if (i < 0 || i >= n) throw BadIndex("ObjectiveSuite: agent index out of range");
    check_point(x);
    return locals[static_cast<std::size_t>(i)].value(x);
  }

  VectorXd local_gradient(int i, const VectorXd& x) const {
    if (i < 0 || i >= n) throw BadIndex("ObjectiveSuite: agent index out of range");
    check_point(x);
    return locals[static_cast<std::size_t>(i)].gradient(x);
  }

  /// Row i of the result is grad f_i at row i of X.
  MatrixXd gradient_matrix(const MatrixXd& X) const {
    if (X.rows() != n || X.cols() != p) {
      throw ShapeMismatch("ObjectiveSuite: iterate matrix has wrong shape");
    }
    MatrixXd G(n, p);
    for (int i = 0; i < n; ++i) {
      G.row(i) = locals[static_cast<std::size_t>(i)].gradient(X.row(i).transpose()).transpose();
    }
    return G;
  }

  VectorXd sum_gradient(const VectorXd& x) const {
    check_point(x);
    VectorXd g = VectorXd::Zero(p);
    for (const auto& f : locals) g += f.gradient(x);
    return g;
  }

  double sum_value(const VectorXd& x) const {
    check_point(x);
    double v = 0.0;
    for (const auto& f : locals) v += f.value(x);
    return v;
  }
};

/// Curvature constants of the suite and of the summed objective.
struct GlobalConstants {
  double s = 0.0;   // min_i s_i
  double l = 0.0;   // max_i l_i
  double ns = 0.0;  // n * s, strong convexity of the sum
  double nl = 0.0;  // n * l, gradient Lipschitz constant of the sum
};

inline GlobalConstants global_constants(const ObjectiveSuite& suite) {
  if (suite.n < 1) throw ShapeMismatch("global_constants: empty suite");
  GlobalConstants gc;
  gc.s = std::numeric_limits<double>::infinity();
  gc.l = 0.0;
  for (const auto& f : suite.locals) {
    gc.s = std::min(gc.s, f.strong_convexity);
    gc.l = std::max(gc.l, f.lipschitz);
  }
  if (!(gc.s > 0.0) || !(gc.l >= gc.s)) {
    throw NotPositiveDefinite("global_constants: constants must satisfy 0 < s <= l");
  }
  gc.ns = static_cast<double>(suite.n) * gc.s;
  gc.nl = static_cast<double>(suite.n) * gc.l;
  return gc;
}

// --- quadratic suite ---------------------------------------------------------

/// f_i(x) = x^T Q_i x / 2 + r_i^T x with Q_i symmetric positive definite.
/// s_i and l_i are the extreme eigenvalues of Q_i; the exact minimizer of
/// the sum, -(sum Q_i)^{-1} (sum r_i), is stored on the suite.
inline ObjectiveSuite quadratic_suite(const std::vector<MatrixXd>& Qs,
                                      const std::vector<VectorXd>& rs) {
  if (Qs.empty() || Qs.size() != rs.size()) {
    throw ShapeMismatch("quadratic_suite: need matching, nonempty Q and r lists");
  }
  const int n = static_cast<int>(Qs.size());
  const int p = static_cast<int>(Qs[0].rows());

  ObjectiveSuite suite;
  suite.n = n;
  suite.p = p;
  MatrixXd Qsum = MatrixXd::Zero(p, p);
  VectorXd rsum = VectorXd::Zero(p);
  for (int i = 0; i < n; ++i) {
    const MatrixXd& Q = Qs[static_cast<std::size_t>(i)];
    const VectorXd& r = rs[static_cast<std::size_t>(i)];
    if (Q.rows() != p || Q.cols() != p || r.size() != p) {
      throw ShapeMismatch("quadratic_suite: inconsistent dimensions");
    }
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw NotPositiveDefinite("quadratic_suite: Q_i is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0.0) {
      throw NotPositiveDefinite("quadratic_suite: Q_i is not positive definite");
    }
    auto Qp = std::make_shared<MatrixXd>(Q);
    auto rp = std::make_shared<VectorXd>(r);
    LocalObjective f;
    f.value = [Qp, rp](const VectorXd& x) {
      return 0.5 * x.dot(*Qp * x) + rp->dot(x);
    };
    f.gradient = [Qp, rp](const VectorXd& x) -> VectorXd { return *Qp * x + *rp; };
    f.strong_convexity = lmin;
    f.lipschitz = lmax;
    suite.locals.push_back(std::move(f));
    Qsum += Q;
    rsum += r;
  }
  suite.closed_form_optimum = Qsum.ldlt().solve(-rsum);
  return suite;
}

// --- logistic suite ----------------------------------------------------------

/// Per-agent binary classification data: feature rows and +/-1 labels.
struct LogisticData {
  int n = 0;
  int p = 0;
  double beta = 1.0;
  std::vector<MatrixXd> features;  // features[i] is m_i x p
  std::vector<VectorXd> labels;    // entries +/- 1
};

/// Synthetic classification data: standard normal features, labels from a
/// random ground-truth hyperplane with a fraction of the labels flipped.
/// Deterministic for a fixed seed.
inline LogisticData make_logistic_data(int n, int m_per_agent, int p, double beta,
                                       std::uint64_t seed, double flip_prob = 0.1) {
  if (n < 1 || m_per_agent < 0 || p < 1) {
    throw ShapeMismatch("make_logistic_data: need n >= 1, m >= 0, p >= 1");
  }
  Rng rng(seed);
  VectorXd truth(p);
  for (int d = 0; d < p; ++d) truth[d] = rng.normal();

  LogisticData data;
  data.n = n;
  data.p = p;
  data.beta = beta;
  for (int i = 0; i < n; ++i) {
    MatrixXd C(m_per_agent, p);
    VectorXd b(m_per_agent);
    for (int j = 0; j < m_per_agent; ++j) {
      for (int d = 0; d < p; ++d) C(j, d) = rng.normal();
      double label = C.row(j).dot(truth) >= 0.0 ? 1.0 : -1.0;
      if (rng.bernoulli(flip_prob)) label = -label;
      b[j] = label;
    }
    data.features.push_back(std::move(C));
    data.labels.push_back(std::move(b));
  }
  return data;
}

namespace detail {

/// ln(1 + e^t) without overflow.
inline double log1pexp(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// 1 / (1 + e^t) without overflow.
inline double inv_1p_exp(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace detail

/// Regularized logistic regression objectives:
///
///   f_i(z) = beta/(2n) ||z||^2 + sum_j ln(1 + exp(-(c_ij^T z) b_ij))
///
/// s_i = beta/n; l_i = beta/n + lambda_max(C_i^T C_i)/4.
inline ObjectiveSuite logistic_suite(const LogisticData& data) {
  const int n = data.n;
  const int p = data.p;
  if (n < 1 || p < 1 || data.features.size() != static_cast<std::size_t>(n) ||
      data.labels.size() != static_cast<std::size_t>(n)) {
    throw ShapeMismatch("logistic_suite: inconsistent data");
  }
  if (!(data.beta > 0.0)) {
    throw NotPositiveDefinite("logistic_suite: beta must be positive");
  }
  auto shared = std::make_shared<const LogisticData>(data);
  const double reg = data.beta / static_cast<double>(n);

  ObjectiveSuite suite;
  suite.n = n;
  suite.p = p;
  for (int i = 0; i < n; ++i) {
    const MatrixXd& C = shared->features[static_cast<std::size_t>(i)];
    const VectorXd& b = shared->labels[static_cast<std::size_t>(i)];
    if (C.cols() != p || b.size() != C.rows()) {
      throw ShapeMismatch("logistic_suite: agent data has wrong shape");
    }
    for (long j = 0; j < b.size(); ++j) {
      if (b[j] != 1.0 && b[j] != -1.0) {
        throw ShapeMismatch("logistic_suite: labels must be +1 or -1");
      }
    }
    double gram_top = 0.0;
    if (C.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(C.transpose() * C);
      gram_top = es.eigenvalues().maxCoeff();
    }
    LocalObjective f;
    f.value = [shared, i, reg](const VectorXd& z) {
      const MatrixXd& Ci = shared->features[static_cast<std::size_t>(i)];
      const VectorXd& bi = shared->labels[static_cast<std::size_t>(i)];
      double v = 0.5 * reg * z.squaredNorm();
      for (long j = 0; j < bi.size(); ++j) {
        v += detail::log1pexp(-bi[j] * Ci.row(j).dot(z));
      }
      return v;
    };
    f.gradient = [shared, i, reg, p](const VectorXd& z) -> VectorXd {
      const MatrixXd& Ci = shared->features[static_cast<std::size_t>(i)];
      const VectorXd& bi = shared->labels[static_cast<std::size_t>(i)];
      VectorXd g = reg * z;
      for (long j = 0; j < bi.size(); ++j) {
        const double t = bi[j] * Ci.row(j).dot(z);
        g -= bi[j] * detail::inv_1p_exp(t) * Ci.row(j).transpose();
      }
      return g;
    };
    f.strong_convexity = reg;
    f.lipschitz = reg + 0.25 * gram_top;
    suite.locals.push_back(std::move(f));
  }
  return suite;
}

// --- optimum -----------------------------------------------------------------

/// Minimizer of the summed objective by centralized gradient descent with
/// step 1/(n l), iterated from zero until the gradient norm of the sum
/// drops below tol.
inline VectorXd global_optimum(const ObjectiveSuite& suite, double tol = 1e-10,
                               long cap = 1000000) {
  const GlobalConstants gc = global_constants(suite);
  const double alpha = 1.0 / gc.nl;
  VectorXd x = VectorXd::Zero(suite.p);
  for (long it = 0; it < cap; ++it) {
    const VectorXd g = suite.sum_gradient(x);
    if (g.norm() < tol) return x;
    x -= alpha * g;
  }
  throw NoConvergence("global_optimum: gradient norm did not reach tolerance");
}

/// Central finite-difference gradient, used by the verification checks.
inline VectorXd finite_difference_gradient(
    const std::function<double(const VectorXd&)>& f, const VectorXd& x,
    double h = 1e-6) {
  VectorXd g(x.size());
  VectorXd e = x;
  for (long d = 0; d < x.size(); ++d) {
    const double x0 = x[d];
    e[d] = x0 + h;
    const double fp = f(e);
    e[d] = x0 - h;
    const double fm = f(e);
    e[d] = x0;
    g[d] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// --- dataset files -----------------------------------------------------------
//
// One CSV per agent, each row "p feature values, label" with the label +/-1,
// plus a manifest: {"n": ..., "p": ..., "beta": ..., "files": [...]}.
// File paths in the manifest are relative to the manifest's directory.

inline void save_logistic_data(const LogisticData& data, const std::string& dir,
                               const std::string& stem = "agent") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  for (int i = 0; i < data.n; ++i) {
    const std::string name = stem + "_" + std::to_string(i) + ".csv";
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw MalformedTrace("save_logistic_data: cannot open " + name);
    const MatrixXd& C = data.features[static_cast<std::size_t>(i)];
    const VectorXd& b = data.labels[static_cast<std::size_t>(i)];
    char buf[32];
    for (long j = 0; j < C.rows(); ++j) {
      for (long d = 0; d < C.cols(); ++d) {
        std::snprintf(buf, sizeof buf, "%.17g", C(j, d));
        out << buf << ',';
      }
      out << (b[j] > 0 ? "1" : "-1") << '\n';
    }
    files.push_back(name);
  }
  nlohmann::json manifest{
      {"n", data.n}, {"p", data.p}, {"beta", data.beta}, {"files", files}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw MalformedTrace("save_logistic_data: cannot open manifest");
  out << manifest.dump(2) << '\n';
}

inline LogisticData load_logistic_data(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw MalformedTrace("load_logistic_data: cannot open " + manifest_path);
  nlohmann::json manifest;
  in >> manifest;
  LogisticData data;
  data.n = manifest.at("n").get<int>();
  data.p = manifest.at("p").get<int>();
  data.beta = manifest.at("beta").get<double>();
  const auto& files = manifest.at("files");
  if (data.n < 1 || static_cast<std::size_t>(data.n) != files.size()) {
    throw MalformedTrace("load_logistic_data: manifest n does not match files");
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& f : files) {
    std::ifstream csv(base / f.get<std::string>());
    if (!csv) {
      throw MalformedTrace("load_logistic_data: cannot open " + f.get<std::string>());
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (static_cast<int>(row.size()) != data.p + 1) {
        throw MalformedTrace("load_logistic_data: row has wrong column count");
      }
      rows.push_back(std::move(row));
    }
    MatrixXd C(static_cast<long>(rows.size()), data.p);
    VectorXd b(static_cast<long>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (int d = 0; d < data.p; ++d) C(static_cast<long>(j), d) = rows[j][static_cast<std::size_t>(d)];
      b[static_cast<long>(j)] = rows[j][static_cast<std::size_t>(data.p)];
    }
    data.features.push_back(std::move(C));
    data.labels.push_back(std::move(b));
  }
  return data;
}

}  // namespace rowstoch
