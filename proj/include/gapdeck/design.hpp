#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gapdeck/sample.hpp"

namespace gapdeck {

/// Nested covariate sets: X1 = month, X2 = + age, X3 = + desired region,
/// X4 = + desired occupation.
enum class CovariateSet { kX1 = 1, kX2 = 2, kX3 = 3, kX4 = 4 };

std::string to_string(CovariateSet set);

/// Feature matrix for a covariate set. Month enters as 11 dummies (January
/// is the baseline), age in years, each embedding as its two coordinates and
/// the missing-occupation indicator as 0/1.
struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
};

DesignMatrix build_design(const Samples& samples, CovariateSet set);

/// Regressors for the best linear predictor over descriptive cells.
enum class ZMode {
  kIntercept,    // constant only
  kAdditive,     // intercept + age, region, occupation quintile dummies (baselines dropped)
  kSaturated,    // one indicator per observed cell
  kAgeQuintile,  // one indicator per observed age quintile
};

std::string to_string(ZMode mode);

/// Dummy design over cells. Saturated-style designs (exactly one indicator
/// per row, no intercept) are stored as group ids and never materialized.
struct ZDesign {
  ZMode mode = ZMode::kIntercept;
  Eigen::MatrixXd matrix;            // empty when grouped
  std::vector<int> group;            // group id per row when grouped
  std::vector<std::string> names;    // one per column / group
  std::vector<std::string> aliased;  // columns dropped for rank deficiency

  bool grouped() const { return !group.empty(); }
  Eigen::Index columns() const { return grouped() ? static_cast<Eigen::Index>(names.size()) : matrix.cols(); }
  Eigen::Index rows() const { return grouped() ? static_cast<Eigen::Index>(group.size()) : matrix.rows(); }
};

ZDesign build_z_design(const Samples& samples, ZMode mode);

/// Fitted values of the least-squares projection of v on the design,
/// optionally restricted to rows with mask[i] != 0 (others get the
/// projection evaluated at their Z). Groups without fitting rows get the
/// mean over fitting rows.
Eigen::VectorXd project_on_z(const ZDesign& z, const Eigen::VectorXd& v, const std::vector<char>* fit_mask = nullptr);

}  // namespace gapdeck
