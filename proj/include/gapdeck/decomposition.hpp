#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>

#include <Eigen/Core>

#include "gapdeck/learners.hpp"
#include "gapdeck/sample.hpp"

namespace gapdeck {

struct Estimate {
  double estimate = 0.0;
  double se = 0.0;
};

/// Point estimate with its per-unit influence contributions (mean zero);
/// se = sd(influence) / sqrt(n).
struct InfluenceEstimate {
  double estimate = 0.0;
  double se = 0.0;
  Eigen::VectorXd influence;

  Estimate summary() const { return {estimate, se}; }
};

/// Doubly robust estimate of phi = E[Y | D=1] - E[m0(X) | D=1], the
/// female-minus-male gap after giving men the female covariate
/// distribution. Uses the cross-fitted m0 and e(X) of `nuisance`.
InfluenceEstimate adjusted_gap(const Samples& samples, const NuisanceFits& nuisance);

/// mean(Y | D=1) - mean(Y | D=0) with its influence contributions.
InfluenceEstimate raw_difference(const Samples& samples);

struct DecompositionConfig {
  int folds = 5;
  std::uint64_t seed = 1;
  LearnerConfig learners;
  double clip_eps = kDefaultClipEps;
};

/// Generalized KOB-Duncan decomposition over the nested sets X1..X4.
///
/// phi holds the adjusted gaps in the female-minus-male orientation. The
/// reported gaps (raw_gap, gap, contributions, residual) are male-minus-
/// female, gap(X) = -phi(X), so a positive contribution means equalizing
/// that covariate's distribution narrows the gap:
///   contribution(k) = gap(X_{k-1}) - gap(X_k),  gap(X_0) = raw_gap,
///   residual = gap(X4),  raw_gap = sum(contributions) + residual.
struct DecompositionResult {
  static constexpr std::array<const char*, 4> kBlocks = {"month", "age", "region", "occupation"};

  Estimate raw_gap;            // on the trimmed sample
  Estimate raw_gap_untrimmed;  // before trimming (equals raw_gap when nothing was trimmed)
  std::map<int, Estimate> phi;  // keyed by covariate-set level 1..4
  std::map<int, Estimate> gap;
  std::map<std::string, Estimate> contributions;
  Estimate residual;
  std::size_t n_used = 0;
  std::size_t n_trimmed = 0;

  /// Cross-fitted nuisances per covariate-set level, all on one fold split.
  std::map<int, NuisanceFits> nuisance;
  std::vector<int> fold;

  /// raw_gap - sum(contributions) - residual; zero up to rounding.
  double telescoping_error() const;
};

/// `samples` must already be trimmed; n_trimmed and the untrimmed raw gap
/// are carried into the result for reporting.
DecompositionResult decompose(const Samples& samples, const DecompositionConfig& config, std::size_t n_trimmed = 0,
                              const Samples* untrimmed = nullptr);

/// Occupation code used in subgroup filters for seekers without one.
inline const std::string kUnknownOccupationCode = "__unknown__";

/// Residual gap (male minus female, X4 adjustment) on the seekers whose
/// occupation code is in `codes`. Nuisances are refit on the subsample.
Estimate subgroup_decompose(const Samples& samples, const std::set<std::string>& codes,
                            const DecompositionConfig& config);

}  // namespace gapdeck
