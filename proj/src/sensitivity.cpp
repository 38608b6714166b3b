#include "gapdeck/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gapdeck/errors.hpp"

namespace gapdeck {

namespace {

double relative_gain(double without, double with, const char* name, std::vector<std::string>& warnings) {
  if (!(without > 0)) return 0.0;
  const double gain = (without - with) / without;
  if (gain < 0) {
    warnings.push_back(std::string(name) + " gain was negative (" + std::to_string(gain) + "); clamped to 0");
    return 0.0;
  }
  return std::min(gain, 1.0);
}

}  // namespace

BenchmarkGains benchmark_strength(const Samples& samples, const NuisanceFits& with_occ,
                                  const NuisanceFits& without_occ) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (with_occ.m0.size() != n || without_occ.m0.size() != n || with_occ.e_x.size() != n ||
      without_occ.e_x.size() != n)
    throw EstimationError("benchmark_strength: nuisance length mismatch");
  if (with_occ.fold != without_occ.fold) throw EstimationError("benchmark_strength: nuisances use different folds");
  double mse_with = 0, mse_without = 0, brier_with = 0, brier_without = 0;
  long n0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[i];
    if (s.d == 0) {
      mse_with += std::pow(s.y - with_occ.m0(i), 2);
      mse_without += std::pow(s.y - without_occ.m0(i), 2);
      ++n0;
    }
    brier_with += std::pow(s.d - with_occ.e_x(i), 2);
    brier_without += std::pow(s.d - without_occ.e_x(i), 2);
  }
  if (n0 == 0) throw EstimationError("benchmark_strength: no male rows");
  BenchmarkGains g;
  g.gain_y = relative_gain(mse_without, mse_with, "outcome", g.warnings);
  g.gain_d = relative_gain(brier_without, brier_with, "propensity", g.warnings);
  return g;
}

double bias_bound(double gain_y, double gain_d, double kappa, double scale) {
  const double ky = kappa * gain_y, kd = kappa * gain_d;
  if (ky >= 1.0 || kd >= 1.0) throw EstimationError("bias_bound: kappa * gain must be below 1");
  if (kappa <= 0) return 0.0;
  return std::sqrt(ky / (1.0 - ky)) * std::sqrt(kd / (1.0 - kd)) * scale;
}

double sensitivity_scale(const Samples& samples, const NuisanceFits& nuisance) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (nuisance.m0.size() != n || nuisance.e_x.size() != n)
    throw EstimationError("sensitivity_scale: nuisance length mismatch");
  double n1 = 0;
  for (const auto& s : samples) n1 += s.d;
  const double p = n1 / static_cast<double>(n);
  if (p <= 0 || p >= 1) throw EstimationError("sensitivity_scale: need both female and male rows");
  double resid2 = 0, alpha2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (samples[i].d) continue;
    const double e = nuisance.e_x(i);
    resid2 += std::pow(samples[i].y - nuisance.m0(i), 2);
    alpha2 += std::pow(e / ((1.0 - e) * p), 2);
  }
  return std::sqrt(resid2 / static_cast<double>(n)) * std::sqrt(alpha2 / static_cast<double>(n));
}

double kappa_upper(double gain_y, double gain_d, double kappa_max) {
  const double g = std::max(gain_y, gain_d);
  return g > 0 ? std::min(kappa_max, 0.999 / g) : kappa_max;
}

KappaSolution solve_kappa_star(double residual, double gain_y, double gain_d, double scale, double kappa_max,
                               double tol) {
  if (!(kappa_max > 0)) throw ConfigError("kappa_max must be positive");
  if (!(tol > 0)) throw ConfigError("sensitivity tolerance must be positive");
  const double target = std::abs(residual);
  if (target == 0) return {0.0, false};
  const double g = std::max(gain_y, gain_d);
  // open domain (0, 1/g); stop just short of the pole
  const double hi_domain = g > 0 ? std::nextafter(1.0 / g, 0.0) : std::numeric_limits<double>::infinity();
  double hi = std::min(kappa_max, hi_domain);
  if (!(bias_bound(gain_y, gain_d, hi, scale) >= target)) return {std::numeric_limits<double>::infinity(), true};
  double lo = 0.0;
  while (hi - lo > tol * 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (bias_bound(gain_y, gain_d, mid, scale) < target ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi), false};
}

SensitivityResult sensitivity(const Samples& samples, const DecompositionResult& decomposition,
                              const SensitivityOptions& options) {
  if (options.curve_points < 2) throw ConfigError("sensitivity: curve_points must be >= 2");
  const auto with_it = decomposition.nuisance.find(4);
  const auto without_it = decomposition.nuisance.find(3);
  if (with_it == decomposition.nuisance.end() || without_it == decomposition.nuisance.end())
    throw EstimationError("sensitivity: decomposition lacks X3/X4 nuisances");
  SensitivityResult r;
  r.residual = decomposition.residual.estimate;
  r.occ_contribution = decomposition.contributions.at("occupation").estimate;
  r.kappa_max = options.kappa_max;
  const auto gains = benchmark_strength(samples, with_it->second, without_it->second);
  r.gain_y = gains.gain_y;
  r.gain_d = gains.gain_d;
  r.warnings = gains.warnings;
  r.scale = sensitivity_scale(samples, with_it->second);
  const auto k = solve_kappa_star(r.residual, r.gain_y, r.gain_d, r.scale, options.kappa_max, options.tol);
  r.kappa_star = k.kappa;
  r.kappa_star_infinite = k.infinite;
  const double upper = kappa_upper(r.gain_y, r.gain_d, options.kappa_max);
  for (int i = 0; i < options.curve_points; ++i) {
    const double kappa = upper * i / (options.curve_points - 1);
    r.bound_curve.emplace_back(kappa, bias_bound(r.gain_y, r.gain_d, kappa, r.scale));
  }
  return r;
}

}  // namespace gapdeck
