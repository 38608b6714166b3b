#include "gapdeck/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gapdeck/errors.hpp"
#include "gapdeck/parallel.hpp"

namespace gapdeck {

namespace {

struct BinnedFeature {
  std::vector<double> cuts;  // code(v) = #cuts < v; x <= cuts[b] <=> code <= b
  std::vector<std::uint8_t> codes;
  int bins() const { return static_cast<int>(cuts.size()) + 1; }
};

BinnedFeature bin_feature(const Eigen::Ref<const Eigen::VectorXd>& col, int max_bins) {
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  BinnedFeature f;
  if (static_cast<int>(uniq.size()) <= max_bins) {
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) f.cuts.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  } else {
    const std::size_t n = sorted.size();
    for (int j = 1; j < max_bins; ++j) {
      const double c = sorted[std::min(n - 1, n * static_cast<std::size_t>(j) / max_bins)];
      if (c < uniq.back() && (f.cuts.empty() || c > f.cuts.back())) f.cuts.push_back(c);
    }
  }
  f.codes.resize(static_cast<std::size_t>(col.size()));
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    f.codes[i] = static_cast<std::uint8_t>(std::lower_bound(f.cuts.begin(), f.cuts.end(), col(i)) - f.cuts.begin());
  }
  return f;
}

struct Split {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

}  // namespace

RandomForest RandomForest::fit(const Eigen::MatrixXd& x_in, const Eigen::VectorXd& y_in, const ForestParams& params) {
  if (params.trees < 1) throw ConfigError("forest: trees must be >= 1");
  if (params.max_bins < 2 || params.max_bins > 256) throw ConfigError("forest: max_bins must be in [2, 256]");
  if (x_in.rows() != y_in.size()) throw EstimationError("forest: row count mismatch");
  if (x_in.rows() == 0) throw EstimationError("forest: no rows");
  const Eigen::Index n = x_in.rows();
  const Eigen::Index p = x_in.cols();

  // canonical row order: lexicographic on (features, target)
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (x_in(a, j) != x_in(b, j)) return x_in(a, j) < x_in(b, j);
    }
    return y_in(a) < y_in(b);
  });
  const Eigen::MatrixXd x = x_in(order, Eigen::all);
  const Eigen::VectorXd y = y_in(order);

  std::vector<BinnedFeature> features;
  features.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) features.push_back(bin_feature(x.col(j), params.max_bins));

  const int mtry = params.mtry > 0 ? std::min<int>(params.mtry, static_cast<int>(p))
                                   : std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))));
  const int min_leaf = std::max(1, params.min_leaf);

  RandomForest forest;
  forest.trees_.resize(static_cast<std::size_t>(params.trees));
  for (int t = 0; t < params.trees; ++t) {
    std::mt19937_64 rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());

    std::vector<Node>& nodes = forest.trees_[t];
    struct Work {
      std::size_t begin, end;
      int depth;
      int node;
    };
    std::vector<Work> stack;
    nodes.push_back(Node{});
    stack.push_back({0, idx.size(), 0, 0});
    std::vector<int> feat_order(static_cast<std::size_t>(p));
    std::vector<double> hist_sum;
    std::vector<long> hist_count;

    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      const auto count = static_cast<long>(w.end - w.begin);
      double total = 0.0;
      for (std::size_t k = w.begin; k < w.end; ++k) total += y(idx[k]);
      nodes[w.node].value = total / static_cast<double>(count);
      if (w.depth >= params.max_depth || count < 2L * min_leaf) continue;

      std::iota(feat_order.begin(), feat_order.end(), 0);
      for (int a = 0; a < mtry; ++a) {
        std::uniform_int_distribution<int> d(a, static_cast<int>(p) - 1);
        std::swap(feat_order[a], feat_order[d(rng)]);
      }
      Split best;
      const double parent = total * total / static_cast<double>(count);
      for (int a = 0; a < mtry; ++a) {
        const int j = feat_order[a];
        const auto& f = features[j];
        const int bins = f.bins();
        if (bins < 2) continue;
        hist_sum.assign(bins, 0.0);
        hist_count.assign(bins, 0);
        for (std::size_t k = w.begin; k < w.end; ++k) {
          const auto c = f.codes[idx[k]];
          hist_sum[c] += y(idx[k]);
          ++hist_count[c];
        }
        double left_sum = 0.0;
        long left_count = 0;
        for (int b = 0; b + 1 < bins; ++b) {
          left_sum += hist_sum[b];
          left_count += hist_count[b];
          const long right_count = count - left_count;
          if (left_count < min_leaf) continue;
          if (right_count < min_leaf) break;
          if (hist_count[b] == 0) continue;  // same partition as the previous bin
          const double right_sum = total - left_sum;
          const double gain = left_sum * left_sum / static_cast<double>(left_count) +
                              right_sum * right_sum / static_cast<double>(right_count) - parent;
          if (gain > best.gain) best = {j, b, gain};
        }
      }
      if (best.feature < 0 || best.gain <= 1e-12 * (1.0 + std::abs(parent))) continue;

      const auto& f = features[best.feature];
      const auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                         idx.begin() + static_cast<std::ptrdiff_t>(w.end),
                                         [&](Eigen::Index i) { return f.codes[i] <= best.bin; });
      const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
      const int left = static_cast<int>(nodes.size());
      nodes.push_back(Node{});
      nodes.push_back(Node{});
      nodes[w.node].feature = best.feature;
      nodes[w.node].threshold = f.cuts[best.bin];
      nodes[w.node].left = left;
      nodes[w.node].right = left + 1;
      stack.push_back({mid, w.end, w.depth + 1, left + 1});
      stack.push_back({w.begin, mid, w.depth + 1, left});
    }
  }
  return forest;
}

double RandomForest::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  double sum = 0.0;
  for (const auto& nodes : trees_) {
    int k = 0;
    while (nodes[k].feature >= 0) k = row(nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    sum += nodes[k].value;
  }
  return sum / static_cast<double>(trees_.size());
}

Eigen::VectorXd RandomForest::predict(const Eigen::MatrixXd& x) const {
  // one contiguous column per row; trees in the outer loop stay cache-resident
  const Eigen::MatrixXd xt = x.transpose();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const auto& nodes : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double* row = xt.col(i).data();
      int k = 0;
      while (nodes[k].feature >= 0) k = row[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
      out(i) += nodes[k].value;
    }
  }
  return out / static_cast<double>(trees_.size());
}

}  // namespace gapdeck
