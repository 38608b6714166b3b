#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gapdeck/design.hpp"
#include "gapdeck/learners.hpp"
#include "gapdeck/sample.hpp"

namespace gapdeck {

/// counterfactual: target is phi(Z) = E[m0(X) | Z, D=1], the male mean
///   under the female covariate distribution within Z.
/// gap: target is phi(Z) - E[Y | Z, D=1], the male-minus-female residual
///   gap within Z.
enum class BlpMode { kCounterfactual, kGap };

/// How the last correction term (the one for estimating r(Z)) is formed.
/// kPrinted multiplies (D - r) by the unit's own m0(X) e(X) / r^2.
/// kCentered multiplies it by the projection of m0(X) e(X) on Z, which is
/// the influence-function term for the ratio E[m0 e | Z] / r(Z); it has
/// conditional mean zero and makes an intercept-only fit reproduce the
/// aggregate doubly robust estimate.
enum class EifForm { kCentered, kPrinted };

/// Full-sample Z weighting, or reweighting to the female Z distribution.
enum class BlpWeighting { kFull, kFemale };

std::string to_string(BlpMode mode);
std::string to_string(EifForm form);
std::string to_string(BlpWeighting weighting);

struct EifTerms {
  double outcome_model = 0.0;     // m0 e / r
  double outcome_residual = 0.0;  // (1-D)(Y - m0)/(1-e) * e/r
  double propensity = 0.0;        // m0 (D - e)/r
  double group_share = 0.0;       // -c/r^2 (D - r), c = m0 e or its projection on Z
  double total() const { return outcome_model + outcome_residual + propensity + group_share; }
};

/// The four terms for one unit. `m0e_center` replaces the unit's own
/// m0*e in the last term (pass m0*e to get the printed form).
EifTerms eif_terms(double y, int d, double m0, double e, double r, double m0e_center);

/// Printed-form pseudo-outcome for one sample.
double eif_pseudo_outcome(const EmbeddedSample& sample, double m0, double e, double r);

/// Pseudo-outcomes for every sample; nuisance.r_z must match z.
Eigen::VectorXd eif_pseudo_outcomes(const Samples& samples, const ZDesign& z, const NuisanceFits& nuisance,
                                    EifForm form = EifForm::kCentered);

struct CellEstimate {
  CellKey cell;
  double estimate = 0.0;
  double se = 0.0;
  long n = 0;
};

struct BlpResult {
  BlpMode mode = BlpMode::kGap;
  ZMode z_mode = ZMode::kAdditive;
  EifForm form = EifForm::kCentered;
  BlpWeighting weighting = BlpWeighting::kFull;
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  std::vector<std::string> aliased;
  std::vector<CellEstimate> cell_table;  // saturated designs only
  /// Z'W(target - Z beta) per coordinate; zero at the solution.
  Eigen::VectorXd moment_residual;
};

struct BlpOptions {
  BlpMode mode = BlpMode::kGap;
  EifForm form = EifForm::kCentered;
  BlpWeighting weighting = BlpWeighting::kFull;
};

/// Least-squares projection of the pseudo-outcome on Z with
/// heteroskedasticity-robust (HC0) standard errors that treat the
/// pseudo-outcome as data. Y and m0 are shifted by mean(m0) before the
/// pseudo-outcomes are formed.
BlpResult blp(const Samples& samples, const ZDesign& z, const NuisanceFits& nuisance, const BlpOptions& options = {});

/// Copy of `fits` with r_z cross-fitted on z using the same folds.
NuisanceFits with_group_propensity(const NuisanceFits& fits, const Samples& samples, const ZDesign& z, int folds);

/// Saturated gap-mode BLP: one residual-gap estimate per non-trimmed cell.
std::vector<CellEstimate> cell_heterogeneity(const Samples& samples, const NuisanceFits& nuisance, int folds,
                                             const BlpOptions& options = {});

}  // namespace gapdeck
