#include "gapdeck/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "gapdeck/errors.hpp"
#include "gapdeck/linear_model.hpp"

namespace gapdeck {

std::string CellKey::label() const {
  std::string occ = occ_q == kUnknownOccupation ? std::string("U") : std::to_string(occ_q);
  return "A" + std::to_string(age_q) + "R" + std::to_string(region_q) + "O" + occ;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct MeanAccumulator {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

/// Fills medians from the categories that have each dimension, then
/// substitutes them where a dimension is missing.
template <typename Key>
void finalize(CategoryEmbedding<Key>& emb, const std::map<Key, MeanAccumulator>& wage,
              const std::map<Key, MeanAccumulator>& age, const std::set<Key>& keys) {
  std::vector<double> wages, ages;
  for (const auto& [k, acc] : wage) wages.push_back(acc.mean());
  for (const auto& [k, acc] : age) ages.push_back(acc.mean());
  emb.median_pred_wage = median_of(wages);
  emb.median_mean_age = median_of(ages);
  for (const auto& key : keys) {
    typename CategoryEmbedding<Key>::Entry entry;
    bool substituted = false;
    if (const auto it = wage.find(key); it != wage.end()) {
      entry.pred_wage = it->second.mean();
    } else {
      entry.pred_wage = emb.median_pred_wage;
      substituted = true;
    }
    if (const auto it = age.find(key); it != age.end()) {
      entry.mean_age = it->second.mean();
    } else {
      entry.mean_age = emb.median_mean_age;
      substituted = true;
    }
    emb.entries[key] = entry;
    if (substituted) emb.substituted.push_back(key);
  }
}

struct GroupStats {
  std::vector<double> count, sum, sumsq;
  double n = 0, total = 0, total_sq = 0;

  explicit GroupStats(int groups) : count(groups, 0.0), sum(groups, 0.0), sumsq(groups, 0.0) {}
  void add(int g, double y) {
    count[g] += 1;
    sum[g] += y;
    sumsq[g] += y * y;
    n += 1;
    total += y;
    total_sq += y * y;
  }
};

LassoGram<double> onehot_gram(const GroupStats& s) {
  const auto groups = static_cast<Eigen::Index>(s.count.size());
  LassoGram<double> g;
  g.n = static_cast<Eigen::Index>(s.n);
  g.y_mean = s.total / s.n;
  g.yy = s.total_sq / s.n - g.y_mean * g.y_mean;
  auto& st = g.standardization;
  st.mean.resize(groups);
  st.scale.resize(groups);
  g.xy.resize(groups);
  for (Eigen::Index c = 0; c < groups; ++c) {
    const double p = s.count[c] / s.n;
    st.mean(c) = p;
    st.scale(c) = (p > 0 && p < 1) ? std::sqrt(p * (1 - p)) : 0.0;
    g.xy(c) = st.scale(c) > 0 ? p * (s.sum[c] / s.count[c] - g.y_mean) / st.scale(c) : 0.0;
  }
  g.gram = Eigen::MatrixXd::Zero(groups, groups);
  for (Eigen::Index a = 0; a < groups; ++a) {
    if (st.scale(a) == 0) continue;
    for (Eigen::Index b = 0; b < groups; ++b) {
      if (st.scale(b) == 0) continue;
      const double cov = (a == b ? st.mean(a) : 0.0) - st.mean(a) * st.mean(b);
      g.gram(a, b) = cov / (st.scale(a) * st.scale(b));
    }
  }
  return g;
}

std::vector<double> fitted_per_group(const LinearModel<double>& model) {
  std::vector<double> out(static_cast<std::size_t>(model.coef.size()));
  for (Eigen::Index c = 0; c < model.coef.size(); ++c) out[c] = model.intercept + model.coef(c);
  return out;
}

LassoFit<double> solve_lenient(const LassoGram<double>& g, double lambda, double tol, int max_iter,
                               const Eigen::VectorXd* warm) {
  try {
    return lasso_solve<double>(g, lambda, tol, max_iter, warm);
  } catch (const LassoConvergenceError<double>& e) {
    return e.last_iterate();
  }
}

}  // namespace

OneHotLassoFit onehot_lasso(const std::vector<int>& group, const Eigen::VectorXd& y, int groups, double lambda,
                            double tol, int max_iter) {
  GroupStats stats(groups);
  for (std::size_t i = 0; i < group.size(); ++i) stats.add(group[i], y(static_cast<Eigen::Index>(i)));
  const auto g = onehot_gram(stats);
  const auto fit = lasso_solve<double>(g, lambda, tol, max_iter);
  return {fit.model.intercept, fitted_per_group(fit.model)};
}

RegionEmbedding fit_region_embedding(const std::vector<PostingRecord>& postings,
                                     const std::vector<SeekerRecord>& seekers) {
  std::map<int, MeanAccumulator> wage, age;
  std::set<int> keys;
  for (const auto& p : postings) {
    wage[p.region].add(std::log(p.wage_lower));
    keys.insert(p.region);
  }
  for (const auto& s : seekers) {
    age[s.region].add(static_cast<double>(s.age));
    keys.insert(s.region);
  }
  RegionEmbedding emb;
  finalize(emb, wage, age, keys);
  return emb;
}

std::vector<double> default_occupation_lambda_grid(const std::vector<PostingRecord>& postings, int count) {
  std::map<std::string, int> index;
  for (const auto& p : postings) index.emplace(p.occupation, 0);
  int next = 0;
  for (auto& [k, v] : index) v = next++;
  GroupStats stats(next);
  for (const auto& p : postings) stats.add(index[p.occupation], std::log(p.wage_lower));
  if (stats.n == 0) return {};
  return default_lambda_grid(onehot_gram(stats).lambda_max(), count);
}

OccupationEmbedding fit_occupation_embedding(const std::vector<PostingRecord>& postings,
                                             const std::vector<SeekerRecord>& seekers,
                                             const std::vector<double>& lambda_grid, int folds, std::uint64_t seed) {
  if (postings.empty()) throw DataError("fit_occupation_embedding: no postings");
  if (lambda_grid.empty()) throw ConfigError("fit_occupation_embedding: empty lambda_grid");

  std::map<std::string, int> index;
  for (const auto& p : postings) index.emplace(p.occupation, 0);
  int groups = 0;
  std::vector<std::string> names;
  for (auto& [k, v] : index) {
    v = groups++;
    names.push_back(k);
  }
  std::vector<int> group(postings.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(postings.size()));
  for (std::size_t i = 0; i < postings.size(); ++i) {
    group[i] = index[postings[i].occupation];
    y(static_cast<Eigen::Index>(i)) = std::log(postings[i].wage_lower);
  }

  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 100000;
  std::vector<double> grid = lambda_grid;
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  double lambda = grid.front();
  if (grid.size() > 1) {
    if (folds < 2) throw ConfigError("fit_occupation_embedding: folds must be >= 2");
    const auto fold = make_folds(static_cast<Eigen::Index>(postings.size()), folds, seed);
    std::vector<double> sse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
      GroupStats train(groups), test(groups);
      for (std::size_t i = 0; i < group.size(); ++i) {
        (fold[i] == f ? test : train).add(group[i], y(static_cast<Eigen::Index>(i)));
      }
      const auto g = onehot_gram(train);
      Eigen::VectorXd warm = Eigen::VectorXd::Zero(groups);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto fit = solve_lenient(g, grid[k], kTol, kMaxIter, &warm);
        warm = fit.standardized_coef;
        const auto fitted = fitted_per_group(fit.model);
        for (int c = 0; c < groups; ++c) {
          // sum over held-out rows of (y - f_c)^2
          sse[k] += test.sumsq[c] - 2.0 * fitted[c] * test.sum[c] + test.count[c] * fitted[c] * fitted[c];
        }
      }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (sse[k] < sse[best]) best = k;
    lambda = grid[best];
  }

  GroupStats all(groups);
  for (std::size_t i = 0; i < group.size(); ++i) all.add(group[i], y(static_cast<Eigen::Index>(i)));
  const auto fit = solve_lenient(onehot_gram(all), lambda, kTol, kMaxIter, nullptr);
  const auto fitted = fitted_per_group(fit.model);

  std::map<std::string, MeanAccumulator> wage, age;
  std::set<std::string> keys(names.begin(), names.end());
  for (int c = 0; c < groups; ++c) wage[names[c]].add(fitted[c]);
  for (const auto& s : seekers) {
    if (s.occupation && keys.count(*s.occupation)) age[*s.occupation].add(static_cast<double>(s.age));
  }
  OccupationEmbedding emb;
  finalize(emb, wage, age, keys);
  emb.lambda = lambda;
  return emb;
}

Samples embed(const std::vector<SeekerRecord>& seekers, const RegionEmbedding& region_emb,
              const OccupationEmbedding& occ_emb, EmbedReport* report) {
  EmbedReport local;
  Samples out;
  out.reserve(seekers.size());
  for (const auto& s : seekers) {
    EmbeddedSample e;
    e.y = outcome(s).y;
    e.d = s.gender;
    e.month = s.month;
    e.age = s.age;
    e.region = s.region;
    e.occupation = s.occupation;
    if (!region_emb.contains(s.region)) ++local.unseen_region;
    e.region_embed = region_emb.lookup(s.region);
    if (!s.occupation) {
      e.occ_missing = 1;
      e.occ_embed = occ_emb.medians();
      ++local.missing_occupation;
    } else {
      if (!occ_emb.contains(*s.occupation)) ++local.unseen_occupation;
      e.occ_embed = occ_emb.lookup(*s.occupation);
    }
    out.push_back(std::move(e));
  }
  if (report) *report = local;
  return out;
}

namespace {

template <typename Key>
void write_embedding_impl(std::ostream& out, const CategoryEmbedding<Key>& emb) {
  out << "category,pred_wage,mean_age\n";
  for (const auto& [key, entry] : emb.entries) {
    if constexpr (std::is_same_v<Key, int>) {
      out << key;
    } else {
      out << csv::escape(key);
    }
    out << ',' << csv::format_double(entry.pred_wage) << ',' << csv::format_double(entry.mean_age) << '\n';
  }
  out << "__median__," << csv::format_double(emb.median_pred_wage) << ','
      << csv::format_double(emb.median_mean_age) << '\n';
}

template <typename Key>
CategoryEmbedding<Key> read_embedding_impl(std::istream& in) {
  CategoryEmbedding<Key> emb;
  std::string line;
  if (!std::getline(in, line)) throw DataError("embedding file: missing header");
  bool have_median = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw DataError("embedding file: expected 3 fields");
    const double wage = std::stod(f[1]);
    const double age = std::stod(f[2]);
    if (f[0] == "__median__") {
      emb.median_pred_wage = wage;
      emb.median_mean_age = age;
      have_median = true;
      continue;
    }
    if constexpr (std::is_same_v<Key, int>) {
      emb.entries[std::stoi(f[0])] = {wage, age};
    } else {
      emb.entries[f[0]] = {wage, age};
    }
  }
  if (!have_median) throw DataError("embedding file: missing __median__ row");
  return emb;
}

}  // namespace

void write_embedding(std::ostream& out, const RegionEmbedding& emb) { write_embedding_impl(out, emb); }
void write_embedding(std::ostream& out, const OccupationEmbedding& emb) { write_embedding_impl(out, emb); }
RegionEmbedding read_region_embedding(std::istream& in) { return read_embedding_impl<int>(in); }
OccupationEmbedding read_occupation_embedding(std::istream& in) { return read_embedding_impl<std::string>(in); }

}  // namespace gapdeck
