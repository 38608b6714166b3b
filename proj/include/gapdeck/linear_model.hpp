#pragma once

// Dense linear learners shared by the embedding and nuisance stages:
// least squares, coordinate-descent LASSO and simplex-constrained stacking.
// Everything here is templated on the scalar type and accepts any Eigen
// expression for the design and the response.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gapdeck/errors.hpp"

namespace gapdeck {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LinearModel {
  Scalar intercept{0};
  VectorX<Scalar> coef;

  template <typename Derived>
  VectorX<Scalar> predict(const Eigen::MatrixBase<Derived>& x) const {
    VectorX<Scalar> out = x * coef;
    out.array() += intercept;
    return out;
  }
};

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return Scalar(0);
}

/// Per-column location/scale. Columns with zero spread keep scale 0 and are
/// never standardized (their coefficient is pinned to zero).
template <typename Scalar>
struct Standardization {
  VectorX<Scalar> mean;
  VectorX<Scalar> scale;

  template <typename Derived>
  static Standardization fit(const Eigen::MatrixBase<Derived>& x) {
    Standardization s;
    const auto n = static_cast<Scalar>(x.rows());
    s.mean = x.colwise().sum().transpose() / n;
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Scalar var = (x.col(j).array() - s.mean(j)).square().sum() / n;
      const Scalar sd = std::sqrt(var);
      s.scale(j) = sd > Scalar(1e-12) * (Scalar(1) + std::abs(s.mean(j))) ? sd : Scalar(0);
    }
    return s;
  }
};

/// Least squares with an unpenalized intercept. Slopes are the minimum-norm
/// solution on centered data, so rank-deficient designs are accepted.
template <typename DerivedX, typename DerivedY>
LinearModel<typename DerivedX::Scalar> ols_fit(const Eigen::MatrixBase<DerivedX>& x,
                                               const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.rows() < 2) throw EstimationError("ols_fit: fewer than 2 rows");
  if (x.rows() != y.rows()) throw EstimationError("ols_fit: row count mismatch");
  const auto n = static_cast<Scalar>(x.rows());
  const VectorX<Scalar> x_mean = x.colwise().sum().transpose() / n;
  const Scalar y_mean = y.sum() / n;
  LinearModel<Scalar> model;
  if (x.cols() == 0) {
    model.coef.resize(0);
    model.intercept = y_mean;
    return model;
  }
  const MatrixX<Scalar> xc = x.rowwise() - x_mean.transpose();
  const VectorX<Scalar> yc = y.array() - y_mean;
  Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(xc);
  cod.setThreshold(Scalar(1e-10));
  model.coef = cod.solve(yc);
  model.intercept = y_mean - x_mean.dot(model.coef);
  return model;
}

/// Sufficient statistics of a LASSO problem on standardized, centered
/// columns: gram = X~'X~/n, xy = X~'(y - ybar)/n, yy = |y - ybar|^2/n.
template <typename Scalar>
struct LassoGram {
  Eigen::Index n = 0;
  Scalar y_mean{0};
  Scalar yy{0};
  Standardization<Scalar> standardization;
  MatrixX<Scalar> gram;
  VectorX<Scalar> xy;

  template <typename DerivedX, typename DerivedY>
  static LassoGram build(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
    LassoGram g;
    g.n = x.rows();
    const auto n = static_cast<Scalar>(g.n);
    g.standardization = Standardization<Scalar>::fit(x);
    const auto& st = g.standardization;
    MatrixX<Scalar> xs(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (st.scale(j) > 0) {
        xs.col(j) = (x.col(j).array() - st.mean(j)) / st.scale(j);
      } else {
        xs.col(j).setZero();
      }
    }
    g.y_mean = y.sum() / n;
    const VectorX<Scalar> yc = y.array() - g.y_mean;
    g.gram = (xs.transpose() * xs) / n;
    g.xy = (xs.transpose() * yc) / n;
    g.yy = yc.squaredNorm() / n;
    return g;
  }

  Scalar lambda_max() const { return xy.size() ? xy.cwiseAbs().maxCoeff() : Scalar(0); }

  /// (1/2n)|y - X~b|^2 + lambda |b|_1 evaluated from the sufficient statistics.
  Scalar objective(const VectorX<Scalar>& beta, Scalar lambda) const {
    return Scalar(0.5) * (yy - Scalar(2) * xy.dot(beta) + beta.dot(gram * beta)) +
           lambda * beta.cwiseAbs().sum();
  }

  LinearModel<Scalar> to_original_scale(const VectorX<Scalar>& beta) const {
    const auto& st = standardization;
    LinearModel<Scalar> model;
    model.coef = VectorX<Scalar>::Zero(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (st.scale(j) > 0) model.coef(j) = beta(j) / st.scale(j);
    }
    model.intercept = y_mean - st.mean.dot(model.coef);
    return model;
  }
};

template <typename Scalar>
struct LassoFit {
  LinearModel<Scalar> model;
  VectorX<Scalar> standardized_coef;
  int sweeps = 0;
  std::vector<Scalar> objective_trace;  // objective after each sweep
};

/// Thrown when coordinate descent does not reach the tolerance. Carries the
/// last iterate so callers can inspect or accept it.
template <typename Scalar>
class LassoConvergenceError : public EstimationError {
 public:
  LassoConvergenceError(const std::string& what, LassoFit<Scalar> last)
      : EstimationError(what), last_(std::move(last)) {}
  const LassoFit<Scalar>& last_iterate() const { return last_; }

 private:
  LassoFit<Scalar> last_;
};

/// Cyclic coordinate descent in covariance mode. Converged when the largest
/// standardized coefficient change in a sweep falls below tol.
template <typename Scalar>
LassoFit<Scalar> lasso_solve(const LassoGram<Scalar>& g, Scalar lambda, Scalar tol, int max_iter,
                             const VectorX<Scalar>* warm_start = nullptr, bool record_trace = false) {
  if (!(lambda >= 0)) throw EstimationError("lasso: lambda must be >= 0");
  const Eigen::Index p = g.xy.size();
  LassoFit<Scalar> fit;
  VectorX<Scalar> beta = warm_start ? *warm_start : VectorX<Scalar>::Zero(p);
  // grad_j = xy_j - (G beta)_j, maintained incrementally
  VectorX<Scalar> resid_corr = g.xy - g.gram * beta;
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    Scalar max_change = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Scalar gjj = g.gram(j, j);
      if (gjj <= 0) continue;
      const Scalar old = beta(j);
      const Scalar z = resid_corr(j) + gjj * old;
      const Scalar updated = soft_threshold(z, lambda) / gjj;
      const Scalar delta = updated - old;
      if (delta != 0) {
        beta(j) = updated;
        resid_corr.noalias() -= g.gram.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.sweeps = sweep + 1;
    if (record_trace) fit.objective_trace.push_back(g.objective(beta, lambda));
    if (max_change < tol) {
      fit.standardized_coef = beta;
      fit.model = g.to_original_scale(beta);
      return fit;
    }
  }
  fit.standardized_coef = beta;
  fit.model = g.to_original_scale(beta);
  throw LassoConvergenceError<Scalar>("lasso: no convergence within max_iter sweeps", std::move(fit));
}

template <typename DerivedX, typename DerivedY>
LinearModel<typename DerivedX::Scalar> lasso_fit(const Eigen::MatrixBase<DerivedX>& x,
                                                 const Eigen::MatrixBase<DerivedY>& y,
                                                 typename DerivedX::Scalar lambda,
                                                 typename DerivedX::Scalar tol = 1e-10,
                                                 int max_iter = 100000) {
  using Scalar = typename DerivedX::Scalar;
  if (x.rows() < 2) throw EstimationError("lasso_fit: fewer than 2 rows");
  const auto g = LassoGram<Scalar>::build(x, y);
  return lasso_solve<Scalar>(g, lambda, tol, max_iter).model;
}

/// `count` log-spaced values from lambda_max down to lambda_max * ratio.
template <typename Scalar>
std::vector<Scalar> default_lambda_grid(Scalar lambda_max, int count = 50, Scalar ratio = Scalar(1e-4)) {
  std::vector<Scalar> grid;
  if (count <= 0) return grid;
  if (!(lambda_max > 0)) return {Scalar(0)};
  grid.reserve(count);
  const Scalar log_hi = std::log(lambda_max);
  const Scalar log_lo = std::log(lambda_max * ratio);
  for (int i = 0; i < count; ++i) {
    const Scalar t = count == 1 ? Scalar(0) : Scalar(i) / Scalar(count - 1);
    grid.push_back(std::exp(log_hi + t * (log_lo - log_hi)));
  }
  return grid;
}

/// Seeded balanced fold labels 0..folds-1 for n rows.
inline std::vector<int> make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return fold;
}

template <typename Scalar>
struct LassoCvResult {
  Scalar lambda{0};
  std::vector<Scalar> grid;
  std::vector<Scalar> cv_mse;
  LinearModel<Scalar> model;
};

/// K-fold cross-validated LASSO. The grid is swept from the largest lambda
/// down with warm starts; ties in CV error go to the larger lambda.
template <typename DerivedX, typename DerivedY>
LassoCvResult<typename DerivedX::Scalar> lasso_cv(const Eigen::MatrixBase<DerivedX>& x,
                                                  const Eigen::MatrixBase<DerivedY>& y,
                                                  std::vector<typename DerivedX::Scalar> grid, int folds,
                                                  std::uint64_t seed,
                                                  typename DerivedX::Scalar tol = 1e-8,
                                                  int max_iter = 100000) {
  using Scalar = typename DerivedX::Scalar;
  if (grid.empty()) throw ConfigError("lasso_cv: empty lambda grid");
  if (folds < 2) throw ConfigError("lasso_cv: folds must be >= 2");
  if (x.rows() < 2 * folds) throw EstimationError("lasso_cv: too few rows for the fold count");
  std::sort(grid.begin(), grid.end(), std::greater<Scalar>());

  const auto fold = make_folds(x.rows(), folds, seed);
  std::vector<Scalar> sse(grid.size(), Scalar(0));
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < x.rows(); ++i) (fold[i] == f ? test : train).push_back(i);
    const MatrixX<Scalar> xtr = x(train, Eigen::all);
    const VectorX<Scalar> ytr = y(train);
    const MatrixX<Scalar> xte = x(test, Eigen::all);
    const VectorX<Scalar> yte = y(test);
    const auto g = LassoGram<Scalar>::build(xtr, ytr);
    VectorX<Scalar> warm = VectorX<Scalar>::Zero(x.cols());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      LassoFit<Scalar> fit;
      try {
        fit = lasso_solve<Scalar>(g, grid[k], tol, max_iter, &warm);
      } catch (const LassoConvergenceError<Scalar>& e) {
        fit = e.last_iterate();
      }
      warm = fit.standardized_coef;
      sse[k] += (fit.model.predict(xte) - yte).squaredNorm();
    }
  }
  LassoCvResult<Scalar> out;
  out.grid = grid;
  out.cv_mse.resize(grid.size());
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.cv_mse[k] = sse[k] / static_cast<Scalar>(x.rows());
    if (out.cv_mse[k] < out.cv_mse[best]) best = k;
  }
  out.lambda = grid[best];
  const auto g = LassoGram<Scalar>::build(x, y);
  try {
    out.model = lasso_solve<Scalar>(g, out.lambda, tol, max_iter).model;
  } catch (const LassoConvergenceError<Scalar>& e) {
    out.model = e.last_iterate().model;
  }
  return out;
}

/// Least-squares weights on the probability simplex (w >= 0, sum w = 1).
/// Exact for up to 12 learners by enumerating supports; each support is an
/// equality-constrained least-squares problem solved in minimum-norm form.
/// Among supports whose loss ties the optimum, the largest wins, so
/// identical learners share weight equally.
template <typename DerivedP, typename DerivedY>
VectorX<typename DerivedP::Scalar> stack_weights(const Eigen::MatrixBase<DerivedP>& preds,
                                                 const Eigen::MatrixBase<DerivedY>& target) {
  using Scalar = typename DerivedP::Scalar;
  const Eigen::Index k = preds.cols();
  if (k < 1) throw EstimationError("stack: no learners");
  if (preds.rows() != target.rows()) throw EstimationError("stack: row count mismatch");
  if (k > 12) throw EstimationError("stack: at most 12 learners supported");
  VectorX<Scalar> uniform = VectorX<Scalar>::Constant(k, Scalar(1) / Scalar(k));
  if (k == 1) return uniform;

  bool all_identical = true;
  for (Eigen::Index j = 1; j < k && all_identical; ++j) {
    all_identical = (preds.col(j) - preds.col(0)).cwiseAbs().maxCoeff() == Scalar(0);
  }
  if (all_identical) return uniform;

  const MatrixX<Scalar> gram = preds.transpose() * preds;
  const VectorX<Scalar> pty = preds.transpose() * target;
  const Scalar yty = target.squaredNorm();
  auto loss_of = [&](const VectorX<Scalar>& w) {
    return yty - Scalar(2) * w.dot(pty) + w.dot(gram * w);
  };

  VectorX<Scalar> best_w = uniform;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  int best_size = 0;
  const Scalar tie_tol = Scalar(1e-12) * (Scalar(1) + yty);
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < k; ++j)
      if (mask & (1u << j)) support.push_back(j);
    const auto s = static_cast<Eigen::Index>(support.size());
    MatrixX<Scalar> kkt = MatrixX<Scalar>::Zero(s + 1, s + 1);
    VectorX<Scalar> rhs(s + 1);
    for (Eigen::Index a = 0; a < s; ++a) {
      for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = gram(support[a], support[b]);
      kkt(a, s) = kkt(s, a) = Scalar(1);
      rhs(a) = pty(support[a]);
    }
    rhs(s) = Scalar(1);
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(kkt);
    const VectorX<Scalar> sol = cod.solve(rhs);
    VectorX<Scalar> w = VectorX<Scalar>::Zero(k);
    bool feasible = true;
    for (Eigen::Index a = 0; a < s; ++a) {
      if (!(sol(a) >= -Scalar(1e-12))) feasible = false;
      w(support[a]) = std::max(sol(a), Scalar(0));
    }
    if (!feasible) continue;
    const Scalar total = w.sum();
    if (!(total > 0)) continue;
    w /= total;
    const Scalar loss = loss_of(w);
    if (loss < best_loss - tie_tol || (loss <= best_loss + tie_tol && s > best_size)) {
      best_loss = std::min(loss, best_loss);
      best_w = w;
      best_size = static_cast<int>(s);
    }
  }
  return best_w;
}

}  // namespace gapdeck
