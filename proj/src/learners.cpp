#include "gapdeck/learners.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>

#include "gapdeck/core_data.hpp"
#include "gapdeck/errors.hpp"
#include "gapdeck/parallel.hpp"

namespace gapdeck {

namespace {

using Eigen::all;

enum Target : std::uint64_t { kTargetM0 = 0, kTargetM1 = 1, kTargetE = 2, kTargetCount = 3 };

}  // namespace

StackedModel::Members StackedModel::fit_members(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                const LearnerConfig& config, std::uint64_t seed) {
  Members m;
  if (config.use_ols) m.ols = ols_fit(x, y);
  if (config.use_lasso) {
    if (x.rows() >= 2 * std::max(2, config.lasso_folds) && x.cols() > 0) {
      const auto gram = LassoGram<double>::build(x, y);
      auto grid = default_lambda_grid(gram.lambda_max(), config.lasso_grid);
      m.lasso = lasso_cv(x, y, grid, std::max(2, config.lasso_folds), derive_seed(seed, 11)).model;
    } else {
      m.lasso = ols_fit(x, y);
    }
  }
  if (config.use_forest) {
    ForestParams params = config.forest;
    params.seed = derive_seed(seed, 12);
    m.forest = RandomForest::fit(x, y, params);
  }
  return m;
}

Eigen::MatrixXd StackedModel::predict_members(const Members& m, const Eigen::MatrixXd& x) {
  const int k = int(m.ols.has_value()) + int(m.lasso.has_value()) + int(m.forest.has_value());
  Eigen::MatrixXd out(x.rows(), k);
  int c = 0;
  if (m.ols) out.col(c++) = m.ols->predict(x);
  if (m.lasso) out.col(c++) = m.lasso->predict(x);
  if (m.forest) out.col(c++) = m.forest->predict(x);
  return out;
}

StackedModel StackedModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LearnerConfig& config,
                               std::uint64_t seed) {
  const int k = config.learner_count();
  if (k == 0) throw ConfigError("stacking: no learners enabled");
  if (x.rows() < 2) throw EstimationError("stacking: fewer than 2 training rows");
  StackedModel model;
  if (k == 1 || x.rows() < 10) {
    model.members_ = fit_members(x, y, config, seed);
    model.weights_ = Eigen::VectorXd::Constant(k, 1.0 / k);
    return model;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::mt19937_64 rng(derive_seed(seed, 21));
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(config.stack_holdout * static_cast<double>(x.rows()) + 0.5), 1, x.rows() - 2);
  std::vector<Eigen::Index> hold(order.begin(), order.begin() + holdout);
  std::vector<Eigen::Index> train(order.begin() + holdout, order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());

  const Eigen::MatrixXd x_train = x(train, all);
  const Eigen::VectorXd y_train = y(train);
  const auto inner = fit_members(x_train, y_train, config, derive_seed(seed, 22));
  const Eigen::MatrixXd preds = predict_members(inner, x(hold, all));
  model.weights_ = stack_weights(preds, y(hold));
  model.members_ = fit_members(x, y, config, derive_seed(seed, 23));
  return model;
}

Eigen::MatrixXd StackedModel::predict_each(const Eigen::MatrixXd& x) const { return predict_members(members_, x); }

Eigen::VectorXd StackedModel::predict(const Eigen::MatrixXd& x) const { return predict_each(x) * weights_; }

std::vector<std::string> StackedModel::learner_names() const {
  std::vector<std::string> names;
  if (members_.ols) names.emplace_back("ols");
  if (members_.lasso) names.emplace_back("lasso");
  if (members_.forest) names.emplace_back("forest");
  return names;
}

double clip_probability(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

Eigen::VectorXd cross_fit_group_propensity(const Samples& samples, const ZDesign& z, const std::vector<int>& fold,
                                           int folds, double clip_eps) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = samples[i].d;
  Eigen::VectorXd out(n);
  for (int f = 0; f < folds; ++f) {
    std::vector<char> mask(samples.size());
    bool any_test = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = fold[i] != f;
      any_test |= fold[i] == f;
    }
    if (!any_test) continue;
    const Eigen::VectorXd fitted = project_on_z(z, d, &mask);
    for (Eigen::Index i = 0; i < n; ++i)
      if (fold[i] == f) out(i) = clip_probability(fitted(i), clip_eps);
  }
  return out;
}

NuisanceFits cross_fit(const Samples& samples, CovariateSet x_set, const ZDesign* z, const std::vector<int>& fold,
                       int folds, std::uint64_t seed, const LearnerConfig& learners, double clip_eps) {
  if (folds < 2) throw ConfigError("cross_fit: folds must be >= 2");
  if (fold.size() != samples.size()) throw EstimationError("cross_fit: fold vector length mismatch");
  if (!(clip_eps > 0 && clip_eps < 0.5)) throw ConfigError("cross_fit: clip_eps must be in (0, 0.5)");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const DesignMatrix design = build_design(samples, x_set);
  Eigen::VectorXd y(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = samples[i].y;
    d(i) = samples[i].d;
  }

  NuisanceFits fits;
  fits.fold = fold;
  fits.clip_eps = clip_eps;
  fits.m0 = Eigen::VectorXd::Zero(n);
  if (learners.fit_m1) fits.m1 = Eigen::VectorXd::Zero(n);
  fits.e_x = Eigen::VectorXd::Zero(n);
  const int k = learners.learner_count();
  fits.m0_weights = Eigen::MatrixXd::Zero(folds, k);
  fits.e_weights = Eigen::MatrixXd::Zero(folds, k);

  const std::size_t jobs = static_cast<std::size_t>(folds) * kTargetCount;
  parallel_for(jobs, learners.threads, [&](std::size_t job) {
    const int f = static_cast<int>(job / kTargetCount);
    const auto target = static_cast<Target>(job % kTargetCount);
    if (target == kTargetM1 && !learners.fit_m1) return;
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fold[i] == f) {
        test.push_back(i);
      } else if (target == kTargetE || samples[i].d == (target == kTargetM1 ? 1 : 0)) {
        train.push_back(i);
      }
    }
    if (test.empty()) return;
    if (train.size() < 2) {
      const char* group = target == kTargetM1 ? "D=1" : (target == kTargetM0 ? "D=0" : "any");
      throw EstimationError("cross_fit: complement of fold " + std::to_string(f) + " has fewer than 2 " + group +
                            " rows; strengthen trimming or reduce folds");
    }
    const Eigen::VectorXd& label = target == kTargetE ? d : y;
    const auto model =
        StackedModel::fit(design.x(train, all), label(train), learners, derive_seed(seed, 100 + f, target));
    const Eigen::VectorXd pred = model.predict(design.x(test, all));
    Eigen::VectorXd& dest = target == kTargetM0 ? fits.m0 : (target == kTargetM1 ? fits.m1 : fits.e_x);
    for (std::size_t t = 0; t < test.size(); ++t) dest(test[t]) = pred(static_cast<Eigen::Index>(t));
    if (target == kTargetM0) fits.m0_weights.row(f) = model.weights().transpose();
    if (target == kTargetE) fits.e_weights.row(f) = model.weights().transpose();
  });

  for (Eigen::Index i = 0; i < n; ++i) {
    const double clipped = clip_probability(fits.e_x(i), clip_eps);
    if (clipped != fits.e_x(i)) ++fits.clipped;
    fits.e_x(i) = clipped;
  }
  if (z) fits.r_z = cross_fit_group_propensity(samples, *z, fold, folds, clip_eps);
  return fits;
}

NuisanceFits cross_fit(const Samples& samples, CovariateSet x_set, const ZDesign* z, int folds, std::uint64_t seed,
                       const LearnerConfig& learners, double clip_eps) {
  if (folds < 2) throw ConfigError("cross_fit: folds must be >= 2");
  const auto fold = make_folds(static_cast<Eigen::Index>(samples.size()), folds, seed);
  return cross_fit(samples, x_set, z, fold, folds, seed, learners, clip_eps);
}

void write_nuisance_diagnostics(std::ostream& out, const Samples& samples, const NuisanceFits& fits) {
  out << "index,fold,d,y,m0,m1,e_x,r_z\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << i << ',' << fits.fold[i] << ',' << samples[i].d << ',' << csv::format_double(samples[i].y) << ','
        << csv::format_double(fits.m0(k)) << ',' << (fits.m1.size() ? csv::format_double(fits.m1(k)) : "") << ','
        << csv::format_double(fits.e_x(k)) << ',' << (fits.r_z.size() ? csv::format_double(fits.r_z(k)) : "")
        << '\n';
  }
}

}  // namespace gapdeck
