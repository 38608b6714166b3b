#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gapdeck/core_data.hpp"
#include "gapdeck/sample.hpp"

namespace gapdeck {

/// Two-dimensional summary of a categorical covariate: the predicted log
/// posted lower wage of the category and the mean seeker age in it.
/// Categories that cannot be summarized fall back to the medians.
template <typename Key>
struct CategoryEmbedding {
  struct Entry {
    double pred_wage = 0.0;
    double mean_age = 0.0;
  };

  std::map<Key, Entry> entries;
  double median_pred_wage = 0.0;
  double median_mean_age = 0.0;
  /// Categories that received median substitution in at least one dimension.
  std::vector<Key> substituted;
  /// Penalty selected for the wage dimension (0 for plain means).
  double lambda = 0.0;

  bool contains(const Key& key) const { return entries.count(key) > 0; }

  Eigen::Vector2d medians() const { return {median_pred_wage, median_mean_age}; }

  Eigen::Vector2d lookup(const Key& key) const {
    const auto it = entries.find(key);
    if (it == entries.end()) return medians();
    return {it->second.pred_wage, it->second.mean_age};
  }
};

using RegionEmbedding = CategoryEmbedding<int>;
using OccupationEmbedding = CategoryEmbedding<std::string>;

/// Per-prefecture mean of ln(wage_lower) and mean seeker age.
RegionEmbedding fit_region_embedding(const std::vector<PostingRecord>& postings,
                                     const std::vector<SeekerRecord>& seekers);

/// Default penalty path for the occupation regression: 50 log-spaced values
/// from the smallest full-shrinkage penalty down by a factor 1e-4.
std::vector<double> default_occupation_lambda_grid(const std::vector<PostingRecord>& postings, int count = 50);

/// LASSO of ln(wage_lower) on one-hot occupation indicators with an
/// unpenalized intercept; a single-value grid skips cross-validation.
OccupationEmbedding fit_occupation_embedding(const std::vector<PostingRecord>& postings,
                                             const std::vector<SeekerRecord>& seekers,
                                             const std::vector<double>& lambda_grid, int folds = 5,
                                             std::uint64_t seed = 1);

struct EmbedReport {
  std::size_t missing_occupation = 0;
  std::size_t unseen_occupation = 0;
  std::size_t unseen_region = 0;
};

Samples embed(const std::vector<SeekerRecord>& seekers, const RegionEmbedding& region_emb,
              const OccupationEmbedding& occ_emb, EmbedReport* report = nullptr);

/// One-hot LASSO sufficient statistics; exposed for tests and diagnostics.
struct OneHotLassoFit {
  double intercept = 0.0;
  std::vector<double> group_fitted;  // intercept + coefficient, per group
};
OneHotLassoFit onehot_lasso(const std::vector<int>& group, const Eigen::VectorXd& y, int groups, double lambda,
                            double tol = 1e-12, int max_iter = 1000000);

/// Export format: header "category,pred_wage,mean_age", one row per
/// category, then a final row whose category is "__median__".
void write_embedding(std::ostream& out, const RegionEmbedding& emb);
void write_embedding(std::ostream& out, const OccupationEmbedding& emb);
RegionEmbedding read_region_embedding(std::istream& in);
OccupationEmbedding read_occupation_embedding(std::istream& in);

}  // namespace gapdeck
