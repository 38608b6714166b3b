#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "gapdeck/core_data.hpp"
#include "gapdeck/errors.hpp"
#include "gapdeck/pipeline.hpp"
#include "gapdeck/simulator.hpp"

using namespace gapdeck;

namespace {

Population two_cells() {
  Population pop;
  pop.lattice.months = 1;
  pop.lattice.ages = 1;
  pop.lattice.regions = 2;
  pop.lattice.occupations = 0;
  pop.w1 = {0.4 * 0.75, 0.4 * 0.25};
  pop.w0 = {0.6 * 0.5, 0.6 * 0.5};
  pop.m0 = {12.0, 12.5};
  pop.m1 = {12.1, 12.8};
  return pop;
}

double weighted_mean(const std::vector<double>& w, const std::vector<double>& v) {
  double s = 0, t = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w[i] * v[i];
    t += w[i];
  }
  return s / t;
}

}  // namespace

TEST_CASE("two-cell lattice by hand") {
  const auto pop = two_cells();
  REQUIRE(pop.lattice.size() == 2);
  CHECK(oracle_phi(pop, CovariateSubset{true, true, true, true}) == doctest::Approx(0.15).epsilon(1e-14));
}

TEST_CASE("empty covariate subset gives the raw difference") {
  const auto pop = two_cells();
  const double raw = weighted_mean(pop.w1, pop.m1) - weighted_mean(pop.w0, pop.m0);
  CHECK(oracle_phi(pop, CovariateSubset{}) == doctest::Approx(raw).epsilon(1e-14));
  for (const auto& name : preset_names()) {
    const auto p = population(scenario_preset(name));
    CHECK(std::abs(oracle_phi(p, 0) - (weighted_mean(p.w1, p.m1) - weighted_mean(p.w0, p.m0))) < 1e-12);
  }
}

TEST_CASE("positivity failure in the oracle is an error") {
  auto pop = two_cells();
  pop.w0[1] = 0;
  CHECK_THROWS_AS(oracle_phi(pop, CovariateSubset{true, true, true, true}), EstimationError);
}

TEST_CASE("lattice sum and direct evaluation agree") {
  for (const auto& name : preset_names()) {
    const auto config = scenario_preset(name);
    CHECK(std::abs(oracle_phi(population(config), 4) - oracle_phi_direct(config)) < 1e-12);
  }
}

TEST_CASE("oracle values telescope") {
  for (const auto& name : preset_names()) {
    const auto v = oracle_values(population(scenario_preset(name)));
    double sum = 0;
    for (const auto& [k, c] : v.contributions) sum += c;
    CHECK(std::abs(v.raw_gap - sum - v.residual) < 1e-12);
    CHECK(v.raw_gap == -v.phi[0]);
  }
}

TEST_CASE("null preset has no gap at the full covariate set") {
  const auto pop = population(scenario_preset("null"));
  CHECK(std::abs(oracle_phi(pop, 4)) < 1e-12);
  // with identical outcome functions the raw gap is sum_x (f1 - f0) m(x)
  double raw = 0;
  double p1 = 0, p0 = 0;
  for (std::size_t i = 0; i < pop.w0.size(); ++i) {
    p1 += pop.w1[i];
    p0 += pop.w0[i];
  }
  for (std::size_t i = 0; i < pop.w0.size(); ++i) {
    CHECK(pop.m0[i] == pop.m1[i]);
    raw += (pop.w1[i] / p1 - pop.w0[i] / p0) * pop.m0[i];
  }
  CHECK(std::abs(oracle_phi(pop, 0) - raw) < 1e-12);
}

TEST_CASE("paper-shape preset has the planted sign pattern") {
  const auto v = oracle_values(population(scenario_preset("paper-shape")));
  CHECK(v.contributions.at("age") < 0);
  CHECK(v.contributions.at("region") > 0);
  CHECK(v.contributions.at("occupation") > v.contributions.at("region"));
  CHECK(v.residual > 0);
  CHECK(std::abs(v.contributions.at("month")) < 1e-10);
}

TEST_CASE("confounder calibration hits the target strength ratio") {
  auto config = scenario_preset("omitted-confounder");
  const auto truth = oracle_sensitivity(population(config));
  CHECK(truth.kappa_star == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(truth.residual > 0);
  CHECK(truth.gain_y > 0);
  CHECK(truth.gain_d > 0);
  CHECK(bias_bound(truth.gain_y, truth.gain_d, truth.kappa_star, truth.scale) ==
        doctest::Approx(std::abs(truth.residual)).epsilon(1e-6));
  calibrate_confounder(config, 0.5);
  CHECK(oracle_sensitivity(population(config)).kappa_star == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("same seed gives byte-identical files at any thread count") {
  auto config = scenario_preset("paper-shape");
  config.n_seekers = 20000;
  config.n_postings = 3000;
  config.block_size = 1000;
  setenv("GAPDECK_THREADS", "1", 1);
  const auto a = simulate_artifacts(config);
  setenv("GAPDECK_THREADS", "3", 1);
  const auto b = simulate_artifacts(config);
  unsetenv("GAPDECK_THREADS");
  CHECK(a == b);
  config.seed = 2;
  CHECK(simulate_artifacts(config).at("seekers.csv") != a.at("seekers.csv"));
}

TEST_CASE("generated files pass ingest unchanged") {
  auto config = scenario_preset("u-shape-heterogeneity");
  config.n_seekers = 5000;
  const auto art = simulate_artifacts(config);
  std::istringstream s(art.at("seekers.csv")), p(art.at("postings.csv"));
  const auto seekers = parse_seekers(s, {});
  const auto postings = parse_postings(p, {});
  CHECK(seekers.records.size() == 5000);
  CHECK(seekers.report.rows_dropped() == 0);
  CHECK(postings.records.size() == config.n_postings);
  CHECK(postings.report.rows_dropped() == 0);
}

TEST_CASE("empirical moments converge to the configured law") {
  auto config = scenario_preset("paper-shape");
  config.n_seekers = 1000000;
  config.n_postings = 10;
  const auto pop = population(config);
  const auto data = generate(config);
  double n[2] = {0, 0}, age[2] = {0, 0}, age2[2] = {0, 0}, y[2] = {0, 0}, y2[2] = {0, 0};
  for (const auto& s : data.seekers) {
    const double ly = std::log(s.desired_wage * 1000.0);
    n[s.gender] += 1;
    age[s.gender] += s.age;
    age2[s.gender] += double(s.age) * s.age;
    y[s.gender] += ly;
    y2[s.gender] += ly * ly;
  }
  const double total = n[0] + n[1];
  const double share = n[1] / total;
  CHECK(std::abs(share - config.female_share) <= 4 * std::sqrt(share * (1 - share) / total));
  const std::vector<double>* w[2] = {&pop.w0, &pop.w1};
  const std::vector<double>* m[2] = {&pop.m0, &pop.m1};
  for (int d = 0; d < 2; ++d) {
    std::vector<double> ages(pop.w0.size());
    for (std::size_t i = 0; i < ages.size(); ++i) ages[i] = config.age_min + pop.lattice.coords(i)[1];
    const double mean_age = age[d] / n[d], sd_age = std::sqrt(age2[d] / n[d] - mean_age * mean_age);
    CHECK(std::abs(mean_age - weighted_mean(*w[d], ages)) <= 4 * sd_age / std::sqrt(n[d]));
    const double mean_y = y[d] / n[d], sd_y = std::sqrt(y2[d] / n[d] - mean_y * mean_y);
    CHECK(std::abs(mean_y - weighted_mean(*w[d], *m[d])) <= 4 * sd_y / std::sqrt(n[d]));
  }
}

TEST_CASE("invalid scenarios are rejected") {
  auto c = scenario_preset("null");
  c.female_share = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = scenario_preset("null");
  c.n_seekers = 1;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = scenario_preset("null");
  c.region_codes[0] = 60;
  CHECK_THROWS_AS(population(c), ConfigError);
  CHECK_THROWS_AS(scenario_preset("nope"), ConfigError);
}

TEST_CASE("restricting the lattice renormalizes the weights") {
  const auto pop = population(scenario_preset("null"));
  std::vector<char> keep(pop.lattice.size(), 1);
  for (std::size_t i = 0; i < keep.size(); i += 3) keep[i] = 0;
  const auto r = restrict_population(pop, keep);
  double total = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    total += r.w0[i] + r.w1[i];
    if (!keep[i]) CHECK(r.w0[i] + r.w1[i] == 0.0);
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS_AS(restrict_population(pop, std::vector<char>(keep.size(), 0)), EstimationError);
}
