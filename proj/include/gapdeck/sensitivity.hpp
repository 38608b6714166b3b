#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gapdeck/decomposition.hpp"
#include "gapdeck/learners.hpp"
#include "gapdeck/sample.hpp"

namespace gapdeck {

/// Partial R^2 of the occupation block: for the outcome among men
/// (m0 with vs. without occupation) and for the gender propensity e(X)
/// (Brier score with vs. without occupation).
struct BenchmarkGains {
  double gain_y = 0.0;
  double gain_d = 0.0;
  std::vector<std::string> warnings;  // clamped negative gains
};

BenchmarkGains benchmark_strength(const Samples& samples, const NuisanceFits& with_occ,
                                  const NuisanceFits& without_occ);

/// sqrt(k gy/(1 - k gy)) * sqrt(k gd/(1 - k gd)) * scale.
/// Requires k gy < 1 and k gd < 1.
double bias_bound(double gain_y, double gain_d, double kappa, double scale);

/// sqrt(E[(1-D)(Y - m0)^2]) * sqrt(E[alpha^2]) with the Riesz representer
/// alpha = (1-D) e / ((1-e) p) of E[m0(X) | D=1].
double sensitivity_scale(const Samples& samples, const NuisanceFits& nuisance);

struct KappaSolution {
  double kappa = 0.0;
  bool infinite = false;  // bound stays below |residual| on (0, kappa_max]
};

/// Smallest kappa with bias_bound(...) = |residual|, by bisection.
KappaSolution solve_kappa_star(double residual, double gain_y, double gain_d, double scale, double kappa_max = 10.0,
                               double tol = 1e-4);

/// Largest kappa the bound is evaluated at: min(kappa_max, 0.999 / max gain).
double kappa_upper(double gain_y, double gain_d, double kappa_max);

struct SensitivityOptions {
  double kappa_max = 10.0;
  int curve_points = 100;
  double tol = 1e-4;
};

struct SensitivityResult {
  double residual = 0.0;
  double occ_contribution = 0.0;
  double gain_y = 0.0;
  double gain_d = 0.0;
  double scale = 0.0;
  double kappa_star = 0.0;
  bool kappa_star_infinite = false;
  double kappa_max = 10.0;
  std::vector<std::pair<double, double>> bound_curve;  // (kappa, bound)
  std::vector<std::string> warnings;
  std::string method = "reconstruction: product of benchmarked partial R2 factors";
};

/// Benchmarks against the occupation block using the X3 and X4 nuisances of
/// the decomposition (same folds by construction).
SensitivityResult sensitivity(const Samples& samples, const DecompositionResult& decomposition,
                              const SensitivityOptions& options = {});

}  // namespace gapdeck
