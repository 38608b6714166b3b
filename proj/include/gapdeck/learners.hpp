#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gapdeck/design.hpp"
#include "gapdeck/forest.hpp"
#include "gapdeck/linear_model.hpp"
#include "gapdeck/sample.hpp"

namespace gapdeck {

/// Default lower/upper clip for every estimated probability.
inline constexpr double kDefaultClipEps = 0.01;

struct LearnerConfig {
  bool use_ols = true;
  bool use_lasso = true;
  bool use_forest = true;
  ForestParams forest;
  int lasso_folds = 3;
  int lasso_grid = 20;
  double stack_holdout = 0.2;  // share of the training rows used to fit stacking weights
  bool fit_m1 = true;
  std::size_t threads = 0;

  int learner_count() const { return int(use_ols) + int(use_lasso) + int(use_forest); }
};

/// OLS, LASSO and forest combined with simplex weights. Weights are fit on
/// an inner holdout of the training rows; the learners are then refit on
/// all training rows.
class StackedModel {
 public:
  static StackedModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LearnerConfig& config,
                          std::uint64_t seed);

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  /// One column per enabled learner, in the order ols, lasso, forest.
  Eigen::MatrixXd predict_each(const Eigen::MatrixXd& x) const;

  const Eigen::VectorXd& weights() const { return weights_; }
  std::vector<std::string> learner_names() const;

 private:
  struct Members {
    std::optional<LinearModel<double>> ols;
    std::optional<LinearModel<double>> lasso;
    std::optional<RandomForest> forest;
  };
  static Members fit_members(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LearnerConfig& config,
                             std::uint64_t seed);
  static Eigen::MatrixXd predict_members(const Members& m, const Eigen::MatrixXd& x);

  Members members_;
  Eigen::VectorXd weights_;
};

/// Cross-fitted nuisance predictions. For every sample i the stored values
/// come from models trained without fold[i].
struct NuisanceFits {
  Eigen::VectorXd m0;   // E[Y | D=0, X]
  Eigen::VectorXd m1;   // E[Y | D=1, X] (empty when not requested)
  Eigen::VectorXd e_x;  // P(D=1 | X), clipped
  Eigen::VectorXd r_z;  // P(D=1 | Z), clipped (empty without a Z design)
  std::vector<int> fold;
  double clip_eps = kDefaultClipEps;
  std::size_t clipped = 0;  // probabilities moved by clipping
  /// Stacking weights per fold, one row per fold, for m0 and e_x.
  Eigen::MatrixXd m0_weights;
  Eigen::MatrixXd e_weights;
};

double clip_probability(double p, double eps);

/// Cross-fits m0, m1, e(X) and, when z is given, r(Z). The fold vector
/// must label every sample with a value in [0, folds).
NuisanceFits cross_fit(const Samples& samples, CovariateSet x_set, const ZDesign* z, const std::vector<int>& fold,
                       int folds, std::uint64_t seed, const LearnerConfig& learners,
                       double clip_eps = kDefaultClipEps);

/// Seeded shuffle into folds, then cross_fit.
NuisanceFits cross_fit(const Samples& samples, CovariateSet x_set, const ZDesign* z, int folds, std::uint64_t seed,
                       const LearnerConfig& learners, double clip_eps = kDefaultClipEps);

/// Out-of-fold projection of D on Z (per-group shares for grouped designs),
/// clipped to [eps, 1 - eps].
Eigen::VectorXd cross_fit_group_propensity(const Samples& samples, const ZDesign& z, const std::vector<int>& fold,
                                           int folds, double clip_eps);

/// Audit file: one row per sample with fold, d, y and the nuisances.
void write_nuisance_diagnostics(std::ostream& out, const Samples& samples, const NuisanceFits& fits);

}  // namespace gapdeck
