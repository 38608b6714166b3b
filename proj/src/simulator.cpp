#include "gapdeck/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "gapdeck/decomposition.hpp"
#include "gapdeck/errors.hpp"
#include "gapdeck/parallel.hpp"
#include "gapdeck/sensitivity.hpp"

namespace gapdeck {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> normalized(std::vector<double> w) {
  double total = 0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> standardized(const std::vector<double>& levels) {
  double mean = 0;
  for (double v : levels) mean += v;
  mean /= static_cast<double>(levels.size());
  double var = 0;
  for (double v : levels) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(levels.size()));
  std::vector<double> z(levels.size(), 0.0);
  if (sd > 0)
    for (std::size_t i = 0; i < levels.size(); ++i) z[i] = (levels[i] - mean) / sd;
  return z;
}

struct Marginals {
  std::array<std::vector<double>, 2> month, age, region, occupation;  // occupation has a trailing missing entry
};

Marginals marginals(const ScenarioConfig& c) {
  Marginals m;
  const auto zr = standardized(c.region_level);
  const auto zo = standardized(c.occupation_level);
  for (int d = 0; d < 2; ++d) {
    std::vector<double> w;
    for (int k = 0; k < 12; ++k) w.push_back(std::exp(c.month_tilt[d] * (k - 5.5) / 5.5));
    m.month[d] = normalized(w);
    w.clear();
    for (int a = c.age_min; a <= c.age_max; ++a)
      w.push_back(std::exp(-0.5 * std::pow((a - c.age_mean[d]) / c.age_sd[d], 2)));
    m.age[d] = normalized(w);
    w.clear();
    for (double z : zr) w.push_back(std::exp(c.region_tilt[d] * z));
    m.region[d] = normalized(w);
    w.clear();
    for (double z : zo) w.push_back(std::exp(c.occupation_tilt[d] * z));
    w = normalized(w);
    for (double& v : w) v *= 1.0 - c.missing_occupation[d];
    w.push_back(c.missing_occupation[d]);
    m.occupation[d] = std::move(w);
  }
  return m;
}

double male_mean(const ScenarioConfig& c, int m, int age, int r, int o, int occupations) {
  const double occ = o < occupations ? c.occ_coef * c.occupation_level[o] : c.missing_level;
  return c.intercept + c.month_effect[m] + c.age_slope * (age - c.age_center) + c.region_coef * c.region_level[r] +
         occ;
}

double age_offset(const ScenarioConfig& c, int age) {
  return c.gap_age_slope * (age - c.age_center) -
         c.u_depth * std::exp(-0.5 * std::pow((age - c.u_center) / c.u_width, 2));
}

double female_offset(const ScenarioConfig& c, int age, int r, int o, int occupations) {
  const double occ = o < occupations ? c.gap_occ_slope * c.occupation_level[o] : 0.0;
  return c.gap_base + age_offset(c, age) + c.gap_region_slope * c.region_level[r] + occ;
}

Lattice lattice_of(const ScenarioConfig& c) {
  Lattice l;
  l.ages = c.age_max - c.age_min + 1;
  l.regions = static_cast<int>(c.region_codes.size());
  l.occupations = static_cast<int>(c.occupation_codes.size());
  return l;
}

void fill_levels(ScenarioConfig& c, int regions, double region_span, int occupations, double occ_span) {
  c.region_codes.clear();
  c.region_level.clear();
  for (int i = 0; i < regions; ++i) {
    c.region_codes.push_back(3 * i + 1);
    const int rank = (7 * i) % regions;
    c.region_level.push_back(-region_span + 2.0 * region_span * rank / (regions - 1));
  }
  c.occupation_codes.clear();
  c.occupation_level.clear();
  for (int i = 0; i < occupations; ++i) {
    char code[16];
    std::snprintf(code, sizeof code, "occ%02d", i + 1);
    c.occupation_codes.emplace_back(code);
    const int rank = (7 * i) % occupations;
    c.occupation_level.push_back(-occ_span + 2.0 * occ_span * rank / (occupations - 1));
  }
  for (int m = 0; m < 12; ++m) c.month_effect[m] = 0.01 * std::sin(2.0 * kPi * m / 12.0);
}

std::vector<std::size_t> group_keys(const Population& pop, const CovariateSubset& subset, std::size_t* groups) {
  const Lattice& l = pop.lattice;
  const std::array<int, 4> dims = {l.months, l.ages, l.regions, l.occupations + 1};
  std::size_t total = 1;
  for (int j = 0; j < 4; ++j)
    if (subset[j]) total *= static_cast<std::size_t>(dims[j]);
  std::vector<std::size_t> keys(l.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto c = l.coords(i);
    std::size_t key = 0;
    for (int j = 0; j < 4; ++j)
      if (subset[j]) key = key * static_cast<std::size_t>(dims[j]) + static_cast<std::size_t>(c[j]);
    keys[i] = key;
  }
  *groups = total;
  return keys;
}

struct GroupSums {
  std::vector<double> w0, w1, s0, s1;  // weight and weighted m sums per group
};

GroupSums group_sums(const Population& pop, const std::vector<std::size_t>& keys, std::size_t groups) {
  GroupSums g{std::vector<double>(groups, 0.0), std::vector<double>(groups, 0.0), std::vector<double>(groups, 0.0),
              std::vector<double>(groups, 0.0)};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    g.w0[keys[i]] += pop.w0[i];
    g.w1[keys[i]] += pop.w1[i];
    g.s0[keys[i]] += pop.w0[i] * pop.m0[i];
    g.s1[keys[i]] += pop.w1[i] * pop.m1[i];
  }
  return g;
}

double within_variance(const ScenarioConfig& c, int d) {
  const double q = c.confounder_share[d];
  return c.noise_sd * c.noise_sd + c.confounder_effect * c.confounder_effect * q * (1.0 - q);
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("scenario: " + what); };
  if (n_seekers < 2) fail("n_seekers must be >= 2");
  if (n_postings < 1) fail("n_postings must be >= 1");
  if (block_size < 1) fail("block_size must be >= 1");
  if (!(female_share > 0 && female_share < 1)) fail("female_share must be in (0, 1)");
  if (age_min < 15 || age_max < age_min) fail("age range must satisfy 15 <= age_min <= age_max");
  for (int d = 0; d < 2; ++d) {
    if (!(age_sd[d] > 0)) fail("age_sd must be positive");
    if (!(missing_occupation[d] >= 0 && missing_occupation[d] < 1)) fail("missing_occupation must be in [0, 1)");
    if (!(confounder_share[d] >= 0 && confounder_share[d] <= 1)) fail("confounder_share must be in [0, 1]");
  }
  if (region_codes.empty() || region_codes.size() != region_level.size()) fail("region codes/levels mismatch");
  if (std::set<int>(region_codes.begin(), region_codes.end()).size() != region_codes.size())
    fail("duplicate region code");
  for (int r : region_codes)
    if (r < 1 || r > 47) fail("region codes must be in 1..47");
  if (occupation_codes.empty() || occupation_codes.size() != occupation_level.size())
    fail("occupation codes/levels mismatch");
  if (std::set<std::string>(occupation_codes.begin(), occupation_codes.end()).size() != occupation_codes.size())
    fail("duplicate occupation code");
  for (const auto& code : occupation_codes)
    if (code.empty()) fail("empty occupation code");
  if (!(noise_sd >= 0) || !(posting_sd >= 0)) fail("noise sds must be nonnegative");
  if (!(u_width > 0)) fail("u_width must be positive");
}

std::vector<std::string> preset_names() {
  return {"null", "paper-shape", "u-shape-heterogeneity", "omitted-confounder"};
}

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig c;
  c.preset = name;
  fill_levels(c, 15, 0.15, 20, 0.3);
  c.age_slope = -0.005;
  c.region_coef = 0.5;
  if (name == "null") {
    c.age_mean = {42.0, 42.0};
    c.region_tilt = {0.2, 0.2};
    c.occupation_tilt = {0.3, 0.3};
  } else if (name == "paper-shape" || name == "u-shape-heterogeneity") {
    c.age_mean = {44.0, 41.0};
    c.region_tilt = {0.2, 0.09};
    c.occupation_tilt = {0.25, 0.04};
    c.gap_base = -0.148;
    if (name == "u-shape-heterogeneity") {
      c.u_depth = 0.10;
      c.gap_region_slope = 0.3;
      c.gap_occ_slope = -0.2;
    }
  } else if (name == "omitted-confounder") {
    c.n_seekers = 100000;
    c.age_mean = {42.0, 42.0};
    c.region_tilt = {0.0, 0.0};
    c.occupation_tilt = {1.0, -1.0};
    c.noise_sd = 0.15;
    c.confounder_share = {0.6, 0.2};
    calibrate_confounder(c, 1.0 / 3.0);
  } else {
    throw ConfigError("unknown simulator preset '" + name + "'");
  }
  return c;
}

std::size_t Lattice::size() const {
  return static_cast<std::size_t>(months) * ages * regions * (occupations + 1);
}

std::size_t Lattice::index(int m, int a, int r, int o) const {
  return ((static_cast<std::size_t>(m) * ages + a) * regions + r) * (occupations + 1) + o;
}

std::array<int, 4> Lattice::coords(std::size_t i) const {
  const auto o = static_cast<int>(i % (occupations + 1));
  i /= static_cast<std::size_t>(occupations + 1);
  const auto r = static_cast<int>(i % regions);
  i /= static_cast<std::size_t>(regions);
  const auto a = static_cast<int>(i % ages);
  return {static_cast<int>(i / ages), a, r, o};
}

Population population(const ScenarioConfig& config) {
  config.validate();
  Population pop;
  pop.config = config;
  pop.lattice = lattice_of(config);
  const Lattice& l = pop.lattice;
  const auto marg = marginals(config);
  const std::size_t n = l.size();
  pop.w0.resize(n);
  pop.w1.resize(n);
  pop.m0.resize(n);
  pop.m1.resize(n);
  const double p = config.female_share;
  const double u0 = config.confounder_effect * config.confounder_share[0];
  const double u1 = config.confounder_effect * config.confounder_share[1];
  for (std::size_t i = 0; i < n; ++i) {
    const auto [m, a, r, o] = l.coords(i);
    pop.w0[i] = (1 - p) * marg.month[0][m] * marg.age[0][a] * marg.region[0][r] * marg.occupation[0][o];
    pop.w1[i] = p * marg.month[1][m] * marg.age[1][a] * marg.region[1][r] * marg.occupation[1][o];
    const int age = config.age_min + a;
    const double mu = male_mean(config, m, age, r, o, l.occupations);
    pop.m0[i] = mu + u0;
    pop.m1[i] = mu + female_offset(config, age, r, o, l.occupations) + u1;
  }
  return pop;
}

Population restrict_population(const Population& pop, const std::vector<char>& keep) {
  if (keep.size() != pop.lattice.size()) throw EstimationError("restrict_population: mask size mismatch");
  Population out = pop;
  double total = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) out.w0[i] = out.w1[i] = 0.0;
    total += out.w0[i] + out.w1[i];
  }
  if (!(total > 0)) throw EstimationError("restrict_population: nothing kept");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.w0[i] /= total;
    out.w1[i] /= total;
  }
  return out;
}

CovariateSubset nested_subset(int level) {
  if (level < 0 || level > 4) throw ConfigError("covariate level must be in 0..4");
  CovariateSubset s{};
  for (int j = 0; j < level; ++j) s[j] = true;
  return s;
}

double oracle_phi(const Population& pop, const CovariateSubset& subset) {
  std::size_t groups = 0;
  const auto keys = group_keys(pop, subset, &groups);
  const auto g = group_sums(pop, keys, groups);
  double female = 0, female_mean = 0, counterfactual = 0;
  for (std::size_t k = 0; k < groups; ++k) {
    if (g.w1[k] <= 0) continue;
    if (g.w0[k] <= 0) throw EstimationError("oracle_phi: covariate value without men (positivity)");
    female += g.w1[k];
    female_mean += g.s1[k];
    counterfactual += g.w1[k] * g.s0[k] / g.w0[k];
  }
  return (female_mean - counterfactual) / female;
}

double oracle_phi(const Population& pop, int level) { return oracle_phi(pop, nested_subset(level)); }

double oracle_phi_direct(const ScenarioConfig& c) {
  c.validate();
  const auto marg = marginals(c);
  const int occupations = static_cast<int>(c.occupation_codes.size());
  double e = c.gap_base;
  for (std::size_t a = 0; a < marg.age[1].size(); ++a) e += marg.age[1][a] * age_offset(c, c.age_min + int(a));
  for (std::size_t r = 0; r < marg.region[1].size(); ++r)
    e += marg.region[1][r] * c.gap_region_slope * c.region_level[r];
  for (int o = 0; o < occupations; ++o) e += marg.occupation[1][o] * c.gap_occ_slope * c.occupation_level[o];
  return e + c.confounder_effect * (c.confounder_share[1] - c.confounder_share[0]);
}

OracleValues oracle_values(const Population& pop) {
  OracleValues v;
  for (int level = 0; level <= 4; ++level) v.phi[level] = oracle_phi(pop, level);
  v.raw_gap = -v.phi[0];
  for (int k = 1; k <= 4; ++k) v.contributions[DecompositionResult::kBlocks[k - 1]] = v.phi[k] - v.phi[k - 1];
  v.residual = -v.phi[4];
  return v;
}

std::vector<int> map_lattice(const Population& pop, const CellTable& cells, const RegionEmbedding& region_emb,
                             const OccupationEmbedding& occ_emb) {
  const Lattice& l = pop.lattice;
  const auto& c = pop.config;
  std::vector<int> age_q(l.ages), region_q(l.regions), occ_q(l.occupations + 1);
  for (int a = 0; a < l.ages; ++a) age_q[a] = cells.age_bins.bin_of(c.age_min + a);
  for (int r = 0; r < l.regions; ++r) region_q[r] = cells.region_bins.bin_of(region_emb.lookup(c.region_codes[r])(0));
  for (int o = 0; o < l.occupations; ++o)
    occ_q[o] = cells.occupation_bins.edges.empty()
                   ? 1
                   : cells.occupation_bins.bin_of(occ_emb.lookup(c.occupation_codes[o])(0));
  occ_q[l.occupations] = CellKey::kUnknownOccupation;
  std::vector<int> out(l.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto [m, a, r, o] = l.coords(i);
    out[i] = CellKey{age_q[a], region_q[r], occ_q[o]}.index();
  }
  return out;
}

std::vector<char> kept_points(const std::vector<int>& lattice_cells, const CellTable& cells) {
  std::vector<char> keep(lattice_cells.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = !cells.cells[lattice_cells[i]].trimmed;
  return keep;
}

namespace {

struct CellMass {
  double pooled = 0, female = 0, female_m0 = 0, female_m1 = 0;
  double target(BlpMode mode) const {
    return mode == BlpMode::kGap ? (female_m0 - female_m1) / female : female_m0 / female;
  }
};

std::map<int, CellMass> cell_masses(const Population& pop, const std::vector<int>& lattice_cells,
                                    int (*group)(int cell)) {
  if (lattice_cells.size() != pop.lattice.size()) throw EstimationError("oracle: lattice map size mismatch");
  std::map<int, CellMass> out;
  for (std::size_t i = 0; i < lattice_cells.size(); ++i) {
    if (pop.w0[i] + pop.w1[i] <= 0) continue;
    auto& m = out[group(lattice_cells[i])];
    m.pooled += pop.w0[i] + pop.w1[i];
    m.female += pop.w1[i];
    m.female_m0 += pop.w1[i] * pop.m0[i];
    m.female_m1 += pop.w1[i] * pop.m1[i];
  }
  return out;
}

std::map<int, double> targets(const std::map<int, CellMass>& masses, BlpMode mode) {
  std::map<int, double> out;
  for (const auto& [k, m] : masses)
    if (m.female > 0) out[k] = m.target(mode);
  return out;
}

}  // namespace

std::map<int, double> oracle_cell_targets(const Population& pop, const std::vector<int>& lattice_cells,
                                          BlpMode mode) {
  return targets(cell_masses(pop, lattice_cells, [](int c) { return c; }), mode);
}

std::map<int, double> oracle_age_quintile_targets(const Population& pop, const std::vector<int>& lattice_cells,
                                                  BlpMode mode) {
  return targets(cell_masses(pop, lattice_cells, [](int c) { return CellKey::from_index(c).age_q; }), mode);
}

Eigen::VectorXd oracle_blp_additive(const Population& pop, const std::vector<int>& lattice_cells,
                                    const std::vector<std::string>& names, BlpMode mode, BlpWeighting weighting) {
  const auto masses = cell_masses(pop, lattice_cells, [](int c) { return c; });
  const auto k = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  for (const auto& [cell, m] : masses) {
    if (m.female <= 0) continue;
    const CellKey key = CellKey::from_index(cell);
    Eigen::VectorXd row(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const std::string& name = names[static_cast<std::size_t>(j)];
      double v = 0;
      if (name == "intercept") v = 1;
      else if (name == "occ_unknown") v = key.occ_q == CellKey::kUnknownOccupation;
      else if (name.rfind("age_q", 0) == 0) v = key.age_q == std::stoi(name.substr(5));
      else if (name.rfind("region_q", 0) == 0) v = key.region_q == std::stoi(name.substr(8));
      else if (name.rfind("occ_q", 0) == 0) v = key.occ_q == std::stoi(name.substr(5));
      else throw ConfigError("oracle_blp_additive: unknown column " + name);
      row(j) = v;
    }
    const double w = weighting == BlpWeighting::kFull ? m.pooled : m.female;
    gram += w * row * row.transpose();
    rhs += w * m.target(mode) * row;
  }
  return gram.completeOrthogonalDecomposition().solve(rhs);
}

SensitivityTruth oracle_sensitivity(const Population& pop) {
  SensitivityTruth t;
  t.residual = -oracle_phi(pop, 4);
  std::size_t groups = 0;
  const auto keys = group_keys(pop, nested_subset(3), &groups);
  const auto g = group_sums(pop, keys, groups);
  double total = 0, p = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    total += pop.w0[i] + pop.w1[i];
    p += pop.w1[i];
  }
  p /= total;
  const double var0 = within_variance(pop.config, 0);
  double male = 0, between = 0, brier_with = 0, brier_without = 0, alpha2 = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double w = pop.w0[i] + pop.w1[i];
    if (w <= 0) continue;
    const std::size_t k = keys[i];
    male += pop.w0[i];
    if (pop.w0[i] > 0) between += pop.w0[i] * std::pow(pop.m0[i] - g.s0[k] / g.w0[k], 2);
    const double e4 = pop.w1[i] / w;
    const double e3 = g.w1[k] / (g.w0[k] + g.w1[k]);
    brier_with += w * e4 * (1 - e4);
    brier_without += w * e3 * (1 - e3);
    alpha2 += pop.w0[i] * std::pow(e4 / ((1 - e4) * p), 2);
  }
  const double mse_with = var0;
  const double mse_without = var0 + between / male;
  t.gain_y = mse_without > 0 ? (mse_without - mse_with) / mse_without : 0.0;
  t.gain_d = brier_without > 0 ? (brier_without - brier_with) / brier_without : 0.0;
  t.scale = std::sqrt(male / total * var0) * std::sqrt(alpha2 / total);
  const auto k = solve_kappa_star(t.residual, t.gain_y, t.gain_d, t.scale, 10.0, 1e-12);
  t.kappa_star = k.infinite ? std::numeric_limits<double>::infinity() : k.kappa;
  return t;
}

double calibrate_confounder(ScenarioConfig& config, double target_kappa) {
  if (!(target_kappa > 0)) throw ConfigError("calibrate_confounder: target must be positive");
  auto kappa_at = [&](double gamma) {
    config.confounder_effect = gamma;
    return oracle_sensitivity(population(config)).kappa_star;
  };
  double lo = 0.0, hi = 0.05;
  while (kappa_at(hi) < target_kappa) {
    lo = hi;
    hi *= 2;
    if (hi > 100) throw ConfigError("calibrate_confounder: target strength not reachable");
  }
  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kappa_at(mid) < target_kappa ? lo : hi) = mid;
  }
  config.confounder_effect = 0.5 * (lo + hi);
  return config.confounder_effect;
}

SimulatedData generate(const ScenarioConfig& config) {
  config.validate();
  const auto marg = marginals(config);
  const Lattice l = lattice_of(config);
  SimulatedData data;
  data.seekers.resize(config.n_seekers);
  data.postings.resize(config.n_postings);

  const std::size_t bs = config.block_size;
  const std::size_t seeker_blocks = (config.n_seekers + bs - 1) / bs;
  const std::size_t posting_blocks = (config.n_postings + bs - 1) / bs;
  parallel_for(seeker_blocks + posting_blocks, 0, [&](std::size_t job) {
    if (job < seeker_blocks) {
      std::mt19937_64 rng(derive_seed(config.seed, 1, job));
      std::bernoulli_distribution female(config.female_share);
      std::normal_distribution<double> noise(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::array<std::discrete_distribution<int>, 2> month, age, region, occ;
      for (int d = 0; d < 2; ++d) {
        month[d] = {marg.month[d].begin(), marg.month[d].end()};
        age[d] = {marg.age[d].begin(), marg.age[d].end()};
        region[d] = {marg.region[d].begin(), marg.region[d].end()};
        occ[d] = {marg.occupation[d].begin(), marg.occupation[d].end()};
      }
      const std::size_t end = std::min(config.n_seekers, (job + 1) * bs);
      for (std::size_t i = job * bs; i < end; ++i) {
        const int d = female(rng) ? 1 : 0;
        const int m = month[d](rng), a = age[d](rng), r = region[d](rng), o = occ[d](rng);
        const bool u = unit(rng) < config.confounder_share[d];
        const double eps = noise(rng);
        const int years = config.age_min + a;
        double y = male_mean(config, m, years, r, o, l.occupations) + config.noise_sd * eps;
        if (d) y += female_offset(config, years, r, o, l.occupations);
        if (u) y += config.confounder_effect;
        char id[24];
        std::snprintf(id, sizeof id, "S%07zu", i + 1);
        auto& s = data.seekers[i];
        s.id = id;
        s.gender = d;
        s.age = years;
        s.month = m + 1;
        s.region = config.region_codes[r];
        if (o < l.occupations) s.occupation = config.occupation_codes[o];
        s.desired_wage = std::exp(y) / 1000.0;
      }
    } else {
      const std::size_t block = job - seeker_blocks;
      std::mt19937_64 rng(derive_seed(config.seed, 2, block));
      std::uniform_int_distribution<int> region(0, l.regions - 1), occ(0, l.occupations - 1);
      std::normal_distribution<double> noise(0.0, 1.0);
      std::uniform_real_distribution<double> spread(0.05, 0.5);
      const std::size_t end = std::min(config.n_postings, (block + 1) * bs);
      for (std::size_t i = block * bs; i < end; ++i) {
        const int r = region(rng), o = occ(rng);
        const double ln_lower = config.posting_base + config.posting_region_scale * config.region_level[r] +
                                config.posting_occ_scale * config.occupation_level[o] + config.posting_sd * noise(rng);
        char id[24];
        std::snprintf(id, sizeof id, "P%07zu", i + 1);
        auto& p = data.postings[i];
        p.id = id;
        p.region = config.region_codes[r];
        p.occupation = config.occupation_codes[o];
        p.wage_lower = std::max(1.0, std::round(std::exp(ln_lower)));
        p.wage_upper = std::round(p.wage_lower * (1.0 + spread(rng)));
      }
    }
  });
  return data;
}

}  // namespace gapdeck
