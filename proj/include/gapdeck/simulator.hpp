#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gapdeck/blp.hpp"
#include "gapdeck/core_data.hpp"
#include "gapdeck/descriptives.hpp"
#include "gapdeck/embedding.hpp"

namespace gapdeck {

/// Synthetic labor market on a discrete lattice
/// (month x age x region x occupation-or-missing).
///
/// Covariates are drawn independently given gender. Men's log desired wage is
///   mu0(x) = intercept + month_effect[m] + age_slope (a - age_center)
///            + region_coef level_r + occ_coef level_o + gamma U + noise,
/// women's adds the offset g(x):
///   g(x) = gap_base + gap_age_slope (a - age_center)
///          - u_depth exp(-(a - u_center)^2 / (2 u_width^2))
///          + gap_region_slope level_r + gap_occ_slope level_o.
/// U ~ Bernoulli(q_D) is never written out, so it acts as an omitted
/// confounder when gamma != 0.
struct ScenarioConfig {
  std::string preset = "custom";
  std::size_t n_seekers = 50000;
  std::size_t n_postings = 5000;
  std::uint64_t seed = 1;
  std::size_t block_size = 8192;

  double female_share = 0.4;

  int age_min = 20;
  int age_max = 64;
  std::array<double, 2> age_mean = {44.0, 41.0};  // indexed by D
  std::array<double, 2> age_sd = {11.0, 11.0};

  std::array<double, 2> month_tilt = {0.0, 0.0};
  std::array<double, 12> month_effect{};

  std::vector<int> region_codes;
  std::vector<double> region_level;
  std::array<double, 2> region_tilt = {0.0, 0.0};

  std::vector<std::string> occupation_codes;
  std::vector<double> occupation_level;
  std::array<double, 2> occupation_tilt = {0.0, 0.0};
  std::array<double, 2> missing_occupation = {0.06, 0.06};
  double missing_level = 0.0;

  double intercept = 12.2;
  double age_center = 40.0;
  double age_slope = 0.0;
  double region_coef = 1.0;
  double occ_coef = 1.0;
  double noise_sd = 0.25;

  double gap_base = 0.0;
  double gap_age_slope = 0.0;
  double u_depth = 0.0;
  double u_center = 42.0;
  double u_width = 5.0;
  double gap_region_slope = 0.0;
  double gap_occ_slope = 0.0;

  double confounder_effect = 0.0;
  std::array<double, 2> confounder_share = {0.0, 0.0};

  double posting_base = 12.2;
  double posting_sd = 0.2;
  double posting_region_scale = 1.0;
  double posting_occ_scale = 1.0;

  void validate() const;
};

/// Named presets: null, paper-shape, u-shape-heterogeneity, omitted-confounder.
ScenarioConfig scenario_preset(const std::string& name);
std::vector<std::string> preset_names();

struct Lattice {
  int months = 12;
  int ages = 0;
  int regions = 0;
  int occupations = 0;  // known occupations; index `occupations` means missing

  std::size_t size() const;
  std::size_t index(int m, int a, int r, int o) const;
  /// (month 0..11, age offset, region index, occupation index)
  std::array<int, 4> coords(std::size_t i) const;
};

/// Exact joint law of (D, X) and the conditional outcome means.
struct Population {
  ScenarioConfig config;
  Lattice lattice;
  std::vector<double> w0, w1;  // P(D=0, x), P(D=1, x)
  std::vector<double> m0, m1;  // E[Y | D, x]
};

Population population(const ScenarioConfig& config);

/// Same law with the lattice points where keep[i] == 0 removed (weights
/// renormalized).
Population restrict_population(const Population& pop, const std::vector<char>& keep);

/// Block membership of a covariate subset, in the order
/// (month, age, region, occupation).
using CovariateSubset = std::array<bool, 4>;
CovariateSubset nested_subset(int level);

/// sum_x f(x | D=1) [E[Y | D=1, x_S] - E[Y | D=0, x_S]] over the lattice,
/// female minus male.
double oracle_phi(const Population& pop, const CovariateSubset& subset);
double oracle_phi(const Population& pop, int level);

/// E[g(X) | D=1] + gamma (q1 - q0) from the per-gender marginals; equals
/// the full-set oracle_phi of the unrestricted population.
double oracle_phi_direct(const ScenarioConfig& config);

struct OracleValues {
  std::array<double, 5> phi{};  // female minus male, level 0 = raw
  double raw_gap = 0.0;         // male minus female, like DecompositionResult
  std::map<std::string, double> contributions;
  double residual = 0.0;
};

OracleValues oracle_values(const Population& pop);

/// Cell index of every lattice point under realized quantile bins and
/// embeddings.
std::vector<int> map_lattice(const Population& pop, const CellTable& cells, const RegionEmbedding& region_emb,
                             const OccupationEmbedding& occ_emb);

/// Lattice points whose cell was not trimmed.
std::vector<char> kept_points(const std::vector<int>& lattice_cells, const CellTable& cells);

/// Per-cell BLP target: gap mode gives E[m0 | c, D=1] - E[Y | c, D=1];
/// counterfactual mode gives E[m0 | c, D=1]. Cells without women are omitted.
std::map<int, double> oracle_cell_targets(const Population& pop, const std::vector<int>& lattice_cells,
                                          BlpMode mode = BlpMode::kGap);

/// Same target per age quintile.
std::map<int, double> oracle_age_quintile_targets(const Population& pop, const std::vector<int>& lattice_cells,
                                                  BlpMode mode = BlpMode::kGap);

/// Population BLP coefficients for the named additive Z columns
/// (as produced by build_z_design).
Eigen::VectorXd oracle_blp_additive(const Population& pop, const std::vector<int>& lattice_cells,
                                    const std::vector<std::string>& names, BlpMode mode = BlpMode::kGap,
                                    BlpWeighting weighting = BlpWeighting::kFull);

/// Population version of the occupation-benchmarked sensitivity quantities.
struct SensitivityTruth {
  double residual = 0.0;
  double gain_y = 0.0;
  double gain_d = 0.0;
  double scale = 0.0;
  double kappa_star = 0.0;
};
SensitivityTruth oracle_sensitivity(const Population& pop);

/// Sets confounder_effect so the population kappa_star equals target.
double calibrate_confounder(ScenarioConfig& config, double target_kappa);

struct SimulatedData {
  std::vector<SeekerRecord> seekers;
  std::vector<PostingRecord> postings;
};

SimulatedData generate(const ScenarioConfig& config);

}  // namespace gapdeck
