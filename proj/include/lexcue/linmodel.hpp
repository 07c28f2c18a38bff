#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/label.hpp"
#include "lexcue/textpipe.hpp"

namespace lexcue {

enum class NewtonSolver { automatic, primal, dual };

struct TrainOptions {
  double lambda = 1.0;
  double tol = 1e-8;  // on the max-norm of the penalized gradient
  int max_iter = 100;
  // automatic: dual (n x n) system when lambda > 0 and p + 1 > n
  NewtonSolver solver = NewtonSolver::automatic;
};

/// Binary logistic regression, deceptive = 1. The intercept is unpenalized.
struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd se;  // empty when the information matrix was singular
  double intercept_se = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int n_iter = 0;
  double objective = 0.0;
  double grad_max = 0.0;
  std::string solver;

  std::size_t n_features() const { return static_cast<std::size_t>(weights.size()); }
  bool has_se() const { return se.size() == weights.size() && se.size() > 0; }
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double dot(const SparseVector& x, const Eigen::VectorXd& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.nnz(); ++k)
    if (x.index[k] < w.size()) s += x.value[k] * w[x.index[k]];
  return s;
}

inline double predict_proba(const LogisticModel& m, const SparseVector& x) {
  return sigmoid(m.intercept + dot(x, m.weights));
}

inline Label predict_label(const LogisticModel& m, const SparseVector& x) {
  return predict_proba(m, x) >= 0.5 ? Label::deceptive : Label::genuine;
}

namespace detail {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

inline RowMatrix to_sparse(std::span<const SparseVector> rows, std::size_t p) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      if (r.index[k] >= p)
        throw Error("feature index " + std::to_string(r.index[k]) +
                    " out of range for " + std::to_string(p) + " features");
      if (!std::isfinite(r.value[k]))
        throw Error("non-finite feature value in row " + std::to_string(i));
      trip.emplace_back(static_cast<int>(i), static_cast<int>(r.index[k]),
                        r.value[k]);
    }
  }
  RowMatrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  X.setFromTriplets(trip.begin(), trip.end());
  return X;
}

/// Objective pieces shared by the solvers.
struct Problem {
  const RowMatrix& X;
  const Eigen::VectorXd& y;
  double lambda;

  double objective(double b, const Eigen::VectorXd& w) const {
    Eigen::VectorXd eta = X * w;
    double f = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double z = eta[i] + b;
      f += softplus(z) - y[i] * z;
    }
    return f + 0.5 * lambda * w.squaredNorm();
  }

  /// Probabilities at (b, w).
  Eigen::VectorXd probs(double b, const Eigen::VectorXd& w) const {
    Eigen::VectorXd eta = X * w;
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = sigmoid(eta[i] + b);
    return eta;
  }
};

/// Newton-system solver. Given curvature weights s2 = p(1-p) it factors the
/// penalized Hessian and answers H^{-1} g and diag(H^{-1}).
class HessianSolver {
 public:
  virtual ~HessianSolver() = default;
  virtual bool factor(const Eigen::VectorXd& s2) = 0;
  /// Solves H [d0; d] = [g0; g].
  virtual void solve(double g0, const Eigen::VectorXd& g, double& d0,
                     Eigen::VectorXd& d) const = 0;
  virtual void inverse_diag(double& d0, Eigen::VectorXd& d) const = 0;
};

/// Dense (p+1)x(p+1) Hessian; used when p is small or lambda == 0.
class PrimalSolver final : public HessianSolver {
 public:
  PrimalSolver(const RowMatrix& X, double lambda) : X_(X), lambda_(lambda) {}

  bool factor(const Eigen::VectorXd& s2) override {
    const Eigen::Index p = X_.cols();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p + 1, p + 1);
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
      const double wi = s2[i];
      H(0, 0) += wi;
      for (RowMatrix::InnerIterator a(X_, i); a; ++a) {
        H(0, a.col() + 1) += wi * a.value();
        for (RowMatrix::InnerIterator b(X_, i); b; ++b)
          H(a.col() + 1, b.col() + 1) += wi * a.value() * b.value();
      }
    }
    for (Eigen::Index j = 1; j <= p; ++j) {
      H(j, 0) = H(0, j);
      H(j, j) += lambda_;
    }
    llt_.compute(H);
    if (llt_.info() != Eigen::Success) return false;
    // Reject numerically singular factors (e.g. lambda = 0 with a dead column).
    const auto& L = llt_.matrixLLT();
    const double dmax = L.diagonal().cwiseAbs().maxCoeff();
    const double dmin = L.diagonal().cwiseAbs().minCoeff();
    return dmin > 1e-10 * std::max(1.0, dmax);
  }

  void solve(double g0, const Eigen::VectorXd& g, double& d0,
             Eigen::VectorXd& d) const override {
    Eigen::VectorXd rhs(g.size() + 1);
    rhs[0] = g0;
    rhs.tail(g.size()) = g;
    Eigen::VectorXd sol = llt_.solve(rhs);
    d0 = sol[0];
    d = sol.tail(g.size());
  }

  void inverse_diag(double& d0, Eigen::VectorXd& d) const override {
    const Eigen::Index n = llt_.matrixLLT().rows();
    Eigen::MatrixXd inv = llt_.solve(Eigen::MatrixXd::Identity(n, n));
    d0 = inv(0, 0);
    d = inv.diagonal().tail(n - 1);
  }

 private:
  const RowMatrix& X_;
  double lambda_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Solves in the n x n dual when p + 1 > n and lambda > 0.
///
/// With H = [[a, c^T], [c, B]], B = X^T S^2 X + lambda I, c = X^T s2,
/// a = sum s2, Woodbury gives
///   B^{-1} v = (v - X^T S K^{-1} S X v) / lambda,  K = lambda I + S X X^T S,
/// and the intercept is eliminated through the Schur complement a - c^T B^{-1} c.
class DualSolver final : public HessianSolver {
 public:
  DualSolver(const RowMatrix& X, double lambda)
      : X_(X), Xc_(X), lambda_(lambda) {
    gram_ = Eigen::MatrixXd(X_ * RowMatrix(X_.transpose()));
  }

  bool factor(const Eigen::VectorXd& s2) override {
    s_ = s2.cwiseSqrt();
    Eigen::MatrixXd K = s_.asDiagonal() * gram_ * s_.asDiagonal();
    K.diagonal().array() += lambda_;
    llt_.compute(K);
    if (llt_.info() != Eigen::Success) return false;
    a_ = s2.sum();
    c_ = X_.transpose() * s2;
    Bc_ = binv(c_);
    schur_ = a_ - c_.dot(Bc_);
    return schur_ > 1e-14 * std::max(1.0, a_);
  }

  void solve(double g0, const Eigen::VectorXd& g, double& d0,
             Eigen::VectorXd& d) const override {
    Eigen::VectorXd Bg = binv(g);
    d0 = (g0 - c_.dot(Bg)) / schur_;
    d = Bg - Bc_ * d0;
  }

  void inverse_diag(double& d0, Eigen::VectorXd& d) const override {
    const Eigen::Index n = X_.rows();
    Eigen::MatrixXd Kinv = llt_.solve(Eigen::MatrixXd::Identity(n, n));
    d.resize(X_.cols());
    for (Eigen::Index j = 0; j < Xc_.outerSize(); ++j) {
      double quad = 0.0;
      for (ColMatrix::InnerIterator a(Xc_, j); a; ++a) {
        const double ua = s_[a.row()] * a.value();
        for (ColMatrix::InnerIterator b(Xc_, j); b; ++b)
          quad += ua * Kinv(a.row(), b.row()) * s_[b.row()] * b.value();
      }
      d[j] = (1.0 - quad) / lambda_ + Bc_[j] * Bc_[j] / schur_;
    }
    d0 = 1.0 / schur_;
  }

 private:
  Eigen::VectorXd binv(const Eigen::VectorXd& v) const {
    Eigen::VectorXd t = s_.cwiseProduct(X_ * v);
    Eigen::VectorXd z = llt_.solve(t);
    Eigen::VectorXd r = X_.transpose() * s_.cwiseProduct(z);
    return (v - r) / lambda_;
  }

  const RowMatrix& X_;
  ColMatrix Xc_;
  double lambda_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd s_, c_, Bc_;
  double a_ = 0.0, schur_ = 0.0;
};

}  // namespace detail

/// Penalized objective: sum of log-losses + lambda/2 ||w||^2.
inline double logistic_objective(std::span<const SparseVector> X,
                                 std::span<const Label> y, std::size_t p,
                                 double intercept, const Eigen::VectorXd& w,
                                 double lambda) {
  auto Xs = detail::to_sparse(X, p);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv[i] = label_value(y[i]);
  return detail::Problem{Xs, yv, lambda}.objective(intercept, w);
}

/// Gradient of logistic_objective; element 0 is the intercept.
inline Eigen::VectorXd logistic_gradient(std::span<const SparseVector> X,
                                         std::span<const Label> y, std::size_t p,
                                         double intercept,
                                         const Eigen::VectorXd& w, double lambda) {
  auto Xs = detail::to_sparse(X, p);
  Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    r[i] = sigmoid(intercept + dot(X[i], w)) - label_value(y[i]);
  Eigen::VectorXd g(w.size() + 1);
  g[0] = r.sum();
  g.tail(w.size()) = Xs.transpose() * r + lambda * w;
  return g;
}

/// Fits by Newton's method with step halving. If the Newton system cannot be
/// factored, that iteration falls back to a backtracking gradient step.
/// Standard errors come from the inverse penalized Hessian at the optimum.
inline LogisticModel train(std::span<const SparseVector> X, std::span<const Label> y,
                           std::size_t n_features, const TrainOptions& opt = {}) {
  if (X.size() != y.size()) throw Error("train: |X| != |y|");
  if (X.size() < 2) throw Error("train: need at least two examples");
  if (!(opt.lambda >= 0.0)) throw Error("train: lambda must be >= 0");
  bool has0 = false, has1 = false;
  for (Label l : y) (l == Label::deceptive ? has1 : has0) = true;
  if (!(has0 && has1)) throw Error("train: both labels must be present");

  const auto Xs = detail::to_sparse(X, n_features);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv[i] = label_value(y[i]);
  const detail::Problem prob{Xs, yv, opt.lambda};

  if (opt.solver == NewtonSolver::dual && !(opt.lambda > 0.0))
    throw Error("train: the dual solver needs lambda > 0");
  const bool dual = opt.solver == NewtonSolver::dual ||
                    (opt.solver == NewtonSolver::automatic && opt.lambda > 0.0 &&
                     n_features + 1 > X.size());
  std::unique_ptr<detail::HessianSolver> solver;
  if (dual)
    solver = std::make_unique<detail::DualSolver>(Xs, opt.lambda);
  else
    solver = std::make_unique<detail::PrimalSolver>(Xs, opt.lambda);

  LogisticModel m;
  m.lambda = opt.lambda;
  m.solver = dual ? "newton-dual" : "newton-primal";
  m.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features));
  const double ybar = yv.mean();
  m.intercept = std::log(ybar / (1.0 - ybar));

  double f = prob.objective(m.intercept, m.weights);
  Eigen::VectorXd pr, g;
  double g0 = 0.0;
  auto gradient = [&] {
    pr = prob.probs(m.intercept, m.weights);
    Eigen::VectorXd r = pr - yv;
    g0 = r.sum();
    g = Xs.transpose() * r + opt.lambda * m.weights;
    return std::max(std::abs(g0), g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
  };

  double gmax = gradient();
  for (m.n_iter = 0; m.n_iter < opt.max_iter && gmax > opt.tol; ++m.n_iter) {
    Eigen::VectorXd s2 = pr.cwiseProduct((1.0 - pr.array()).matrix());
    double d0;
    Eigen::VectorXd d;
    if (solver->factor(s2)) {
      solver->solve(g0, g, d0, d);
    } else {
      d0 = g0;
      d = g;
    }
    const double slope = g0 * d0 + g.dot(d);
    double t = 1.0;
    bool moved = false;
    const bool below_noise =
        slope <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    for (int halvings = 0; !below_noise && halvings < 60; ++halvings, t *= 0.5) {
      const double b1 = m.intercept - t * d0;
      Eigen::VectorXd w1 = m.weights - t * d;
      const double f1 = prob.objective(b1, w1);
      if (std::isfinite(f1) && f1 <= f - 1e-4 * t * slope) {
        m.intercept = b1;
        m.weights = std::move(w1);
        f = f1;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Near the optimum the objective change drops below rounding noise;
      // judge the full step by the gradient instead.
      const double b_old = m.intercept;
      Eigen::VectorXd w_old = m.weights;
      m.intercept -= d0;
      m.weights -= d;
      const double g_new = gradient();
      if (!(g_new < gmax)) {
        m.intercept = b_old;
        m.weights = std::move(w_old);
        gmax = gradient();
        break;
      }
      f = prob.objective(m.intercept, m.weights);
      gmax = g_new;
      continue;
    }
    gmax = gradient();
  }
  m.objective = f;
  m.grad_max = gmax;
  m.converged = gmax <= opt.tol;

  Eigen::VectorXd s2 = pr.cwiseProduct((1.0 - pr.array()).matrix());
  if (solver->factor(s2)) {
    double v0;
    Eigen::VectorXd v;
    solver->inverse_diag(v0, v);
    if (v0 > 0.0 && (v.array() > 0.0).all()) {
      m.intercept_se = std::sqrt(v0);
      m.se = v.cwiseSqrt();
    }
  }
  return m;
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided Wald p-value for z = beta / se.
inline double wald_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

struct WaldStat {
  std::string term;
  double beta = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

inline WaldStat make_wald(std::string term, double beta, double se) {
  const double z = beta / se;
  return {std::move(term), beta, se, z, wald_p(z)};
}

/// One Wald statistic per column, named by `columns`.
inline std::vector<WaldStat> wald_stats(const LogisticModel& m,
                                        const std::vector<std::string>& columns) {
  if (!m.has_se())
    throw Error(
        "information matrix is singular; standard errors are unavailable "
        "(retrain with a larger lambda)");
  require(columns.size() == m.n_features(), "wald_stats: column name count mismatch");
  std::vector<WaldStat> out;
  out.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j)
    out.push_back(make_wald(columns[j], m.weights[static_cast<Eigen::Index>(j)],
                            m.se[static_cast<Eigen::Index>(j)]));
  return out;
}

inline std::vector<WaldStat> wald_stats(const LogisticModel& m, const TfidfModel& vocab) {
  return wald_stats(m, vocab.terms());
}

inline nlohmann::json model_to_json(const LogisticModel& m,
                                    const std::vector<std::string>& columns) {
  require(columns.size() == m.n_features(), "model_to_json: column name count mismatch");
  nlohmann::json coef = nlohmann::json::object(), se = nlohmann::json::object();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    coef[columns[j]] = m.weights[jj];
    if (m.has_se()) se[columns[j]] = m.se[jj];
  }
  return {{"coefficients", coef},
          {"intercept", m.intercept},
          {"lambda", m.lambda},
          {"se", se},
          {"intercept_se", m.has_se() ? nlohmann::json(m.intercept_se) : nlohmann::json()},
          {"converged", m.converged},
          {"n_iter", m.n_iter},
          {"objective", m.objective},
          {"grad_max", m.grad_max},
          {"solver", m.solver}};
}

}  // namespace lexcue
