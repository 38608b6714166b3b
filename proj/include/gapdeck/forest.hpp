#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace gapdeck {

struct ForestParams {
  int trees = 200;
  int max_depth = 32;
  int min_leaf = 20;
  int mtry = 0;  // 0 -> ceil(sqrt(p))
  int max_bins = 64;
  std::uint64_t seed = 1;
};

/// Bootstrap-aggregated CART regression trees with squared-error splits.
/// Used unchanged for 0/1 labels, where the leaf mean is a probability.
///
/// Candidate split points are at most max_bins per feature, taken from the
/// distinct training values (or their quantiles when there are more). Rows
/// are put in a canonical order before bootstrapping, so the fitted forest
/// does not depend on the order of the training rows.
class RandomForest {
 public:
  static RandomForest fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params);

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

  std::size_t tree_count() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<std::vector<Node>> trees_;
};

}  // namespace gapdeck
