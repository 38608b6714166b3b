#include "gapdeck/decomposition.hpp"

#include <cmath>

#include "gapdeck/errors.hpp"
#include "gapdeck/parallel.hpp"

namespace gapdeck {

namespace {

double influence_se(const Eigen::VectorXd& psi) {
  const auto n = static_cast<double>(psi.size());
  const double mean = psi.mean();
  const double var = (psi.array() - mean).square().sum() / (n - 1.0);
  return std::sqrt(var / n);
}

Estimate negated(const Estimate& e) { return {-e.estimate, e.se}; }

}  // namespace

InfluenceEstimate adjusted_gap(const Samples& samples, const NuisanceFits& nuisance) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (nuisance.m0.size() != n || nuisance.e_x.size() != n)
    throw EstimationError("adjusted_gap: nuisance length mismatch");
  double n1 = 0;
  for (const auto& s : samples) n1 += s.d;
  if (n1 == 0 || n1 == static_cast<double>(n)) throw EstimationError("adjusted_gap: need both female and male rows");
  const double p = n1 / static_cast<double>(n);

  // per-unit terms D(Y - m0) and (1-D) e/(1-e) (Y - m0)
  Eigen::VectorXd treated(n), control(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[i];
    const double resid = s.y - nuisance.m0(i);
    const double e = nuisance.e_x(i);
    treated(i) = s.d ? resid : 0.0;
    control(i) = s.d ? 0.0 : e / (1.0 - e) * resid;
    sum += treated(i) - control(i);
  }
  InfluenceEstimate out;
  out.estimate = sum / n1;
  out.influence.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.influence(i) = (treated(i) - samples[i].d * out.estimate - control(i)) / p;
  }
  out.se = influence_se(out.influence);
  return out;
}

InfluenceEstimate raw_difference(const Samples& samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  double n1 = 0, s1 = 0, s0 = 0;
  for (const auto& s : samples) {
    n1 += s.d;
    (s.d ? s1 : s0) += s.y;
  }
  const double n0 = static_cast<double>(n) - n1;
  if (n1 == 0 || n0 == 0) throw EstimationError("raw_difference: need both female and male rows");
  const double mean1 = s1 / n1, mean0 = s0 / n0;
  const double p = n1 / static_cast<double>(n);
  InfluenceEstimate out;
  out.estimate = mean1 - mean0;
  out.influence.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[i];
    out.influence(i) = s.d ? (s.y - mean1) / p : -(s.y - mean0) / (1.0 - p);
  }
  out.se = influence_se(out.influence);
  return out;
}

double DecompositionResult::telescoping_error() const {
  double sum = 0.0;
  for (const auto& [name, c] : contributions) sum += c.estimate;
  return raw_gap.estimate - sum - residual.estimate;
}

DecompositionResult decompose(const Samples& samples, const DecompositionConfig& config, std::size_t n_trimmed,
                              const Samples* untrimmed) {
  if (samples.empty()) throw EstimationError("decompose: no samples after trimming");
  DecompositionResult result;
  result.n_used = samples.size();
  result.n_trimmed = n_trimmed;
  result.fold = make_folds(static_cast<Eigen::Index>(samples.size()), config.folds, config.seed);

  const auto raw = raw_difference(samples);
  result.raw_gap = negated(raw.summary());
  result.raw_gap_untrimmed = untrimmed ? negated(raw_difference(*untrimmed).summary()) : result.raw_gap;

  std::array<InfluenceEstimate, 5> phi;
  phi[0] = raw;
  for (int level = 1; level <= 4; ++level) {
    auto fits = cross_fit(samples, static_cast<CovariateSet>(level), nullptr, result.fold, config.folds,
                          derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(level)), config.learners,
                          config.clip_eps);
    phi[level] = adjusted_gap(samples, fits);
    result.phi[level] = phi[level].summary();
    result.gap[level] = negated(phi[level].summary());
    result.nuisance.emplace(level, std::move(fits));
  }
  for (int k = 1; k <= 4; ++k) {
    // gap(X_{k-1}) - gap(X_k) = phi(X_k) - phi(X_{k-1})
    const Eigen::VectorXd diff = phi[k].influence - phi[k - 1].influence;
    const double g_prev = k == 1 ? result.raw_gap.estimate : result.gap[k - 1].estimate;
    result.contributions[DecompositionResult::kBlocks[k - 1]] = {g_prev - result.gap[k].estimate,
                                                                 influence_se(diff)};
  }
  result.residual = result.gap[4];
  return result;
}

Estimate subgroup_decompose(const Samples& samples, const std::set<std::string>& codes,
                            const DecompositionConfig& config) {
  if (codes.empty()) throw ConfigError("subgroup_decompose: empty occupation filter");
  Samples subset;
  for (const auto& s : samples) {
    const std::string& code = s.occupation ? *s.occupation : kUnknownOccupationCode;
    if (codes.count(code)) subset.push_back(s);
  }
  if (subset.empty()) throw EstimationError("subgroup_decompose: filter matches no seekers");
  const auto fold = make_folds(static_cast<Eigen::Index>(subset.size()), config.folds, config.seed);
  const auto fits = cross_fit(subset, CovariateSet::kX4, nullptr, fold, config.folds, derive_seed(config.seed, 1004),
                              config.learners, config.clip_eps);
  return negated(adjusted_gap(subset, fits).summary());
}

}  // namespace gapdeck
