#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gapdeck/blp.hpp"
#include "gapdeck/decomposition.hpp"
#include "gapdeck/descriptives.hpp"
#include "gapdeck/errors.hpp"

using namespace gapdeck;

namespace {

// Z = (age quintile, region quintile), X adds a binary x inside each cell.
struct Lattice {
  double gap_base = 0.1;
  double gap_age = 0.02;
  double gap_region3 = 0.03;

  double m0(int a, int x) const { return 12.0 + 0.05 * a + 0.1 * x; }
  double e(int a, int x) const { return 0.2 + 0.1 * x + 0.02 * a; }
  double r(int a) const { return 0.5 * (e(a, 0) + e(a, 1)); }
  double gap(int a, int reg) const { return gap_base + gap_age * (a - 1) + (reg == 3 ? gap_region3 : 0.0); }
  // E[m0 | z, D=1]
  double counterfactual(int a) const { return (e(a, 0) * m0(a, 0) + e(a, 1) * m0(a, 1)) / (e(a, 0) + e(a, 1)); }
};

struct Drawn {
  Samples samples;
  NuisanceFits exact;
};

Drawn draw(const Lattice& lat, int n, std::uint64_t seed, bool homogeneous = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> z(0, 0.2);
  Drawn out;
  out.exact.m0.resize(n);
  out.exact.e_x.resize(n);
  out.exact.r_z.resize(n);
  for (int i = 0; i < n; ++i) {
    const int a = 1 + static_cast<int>(rng() % 5);
    const int reg = 1 + static_cast<int>(rng() % 5);
    const int x = static_cast<int>(rng() % 2);
    EmbeddedSample s;
    s.cell = CellKey{a, reg, 1};
    s.d = u(rng) < lat.e(a, x);
    const double g = homogeneous ? lat.gap_base : lat.gap(a, reg);
    s.y = lat.m0(a, x) - (s.d ? g : 0.0) + z(rng);
    out.samples.push_back(s);
    out.exact.m0(i) = lat.m0(a, x);
    out.exact.e_x(i) = lat.e(a, x);
    out.exact.r_z(i) = lat.r(a);
  }
  out.exact.fold = make_folds(n, 2, seed);
  return out;
}

}  // namespace

TEST_CASE("correction terms cancel for a woman under constant propensities") {
  for (double p : {0.1, 0.4, 0.7}) {
    for (double m0 : {-1.0, 0.0, 12.3}) {
      const auto t = eif_terms(9.0, 1, m0, p, p, m0 * p);
      CHECK(t.outcome_residual == 0.0);
      CHECK(t.propensity + t.group_share == doctest::Approx(0.0).scale(1.0));
      CHECK(t.total() == doctest::Approx(m0));
      EmbeddedSample s;
      s.d = 1;
      s.y = 9.0;
      CHECK(eif_pseudo_outcome(s, m0, p, p) == doctest::Approx(m0));
    }
  }
}

TEST_CASE("zero outcome and zero model give a zero pseudo-outcome") {
  for (int d : {0, 1}) CHECK(eif_terms(0.0, d, 0.0, 0.3, 0.4, 0.0).total() == 0.0);
}

TEST_CASE("terms follow the printed expansion") {
  const double y = 12.5, m0 = 12.1, e = 0.3, r = 0.4;
  const auto t = eif_terms(y, 0, m0, e, r, m0 * e);
  CHECK(t.outcome_model == doctest::Approx(m0 * e / r));
  CHECK(t.outcome_residual == doctest::Approx((y - m0) / (1 - e) * e / r));
  CHECK(t.propensity == doctest::Approx(m0 * (0 - e) / r));
  CHECK(t.group_share == doctest::Approx(-m0 * e / (r * r) * (0 - r)));
}

TEST_CASE("constant propensities reduce the BLP to least squares of a simple target") {
  const Lattice lat;
  auto d = draw(lat, 4000, 1);
  double p = 0;
  for (const auto& s : d.samples) p += s.d;
  p /= d.samples.size();
  d.exact.e_x.setConstant(p);
  d.exact.r_z.setConstant(p);
  const auto z = build_z_design(d.samples, ZMode::kAdditive);
  const auto n = static_cast<Eigen::Index>(d.samples.size());
  Eigen::VectorXd simple(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = d.samples[i];
    simple(i) = d.exact.m0(i) + (1 - s.d) * (s.y - d.exact.m0(i)) / (1 - p);
  }
  const Eigen::VectorXd ols = z.matrix.colPivHouseholderQr().solve(simple);
  BlpOptions printed;
  printed.mode = BlpMode::kCounterfactual;
  printed.form = EifForm::kPrinted;
  CHECK((blp(d.samples, z, d.exact, printed).beta - ols).cwiseAbs().maxCoeff() < 1e-10);

  // the centered form agrees when m0 lies in the span of Z
  for (Eigen::Index i = 0; i < n; ++i) d.exact.m0(i) = lat.m0(d.samples[i].cell.age_q, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = d.samples[i];
    simple(i) = d.exact.m0(i) + (1 - s.d) * (s.y - d.exact.m0(i)) / (1 - p);
  }
  const Eigen::VectorXd ols2 = z.matrix.colPivHouseholderQr().solve(simple);
  BlpOptions centered;
  centered.mode = BlpMode::kCounterfactual;
  CHECK((blp(d.samples, z, d.exact, centered).beta - ols2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the solution satisfies the moment condition") {
  const Lattice lat;
  const auto d = draw(lat, 5000, 2);
  const auto z = build_z_design(d.samples, ZMode::kAdditive);
  for (auto mode : {BlpMode::kGap, BlpMode::kCounterfactual}) {
    for (auto weighting : {BlpWeighting::kFull, BlpWeighting::kFemale}) {
      BlpOptions o;
      o.mode = mode;
      o.weighting = weighting;
      const auto r = blp(d.samples, z, d.exact, o);
      CHECK(r.moment_residual.cwiseAbs().maxCoeff() < 1e-8);
      CHECK(r.se.minCoeff() > 0);
    }
  }
}

TEST_CASE("intercept-only gap mode equals the aggregate residual") {
  const Lattice lat;
  auto d = draw(lat, 6000, 3);
  double p = 0;
  for (const auto& s : d.samples) p += s.d;
  p /= d.samples.size();
  d.exact.r_z.setConstant(p);
  const auto z = build_z_design(d.samples, ZMode::kIntercept);
  const auto r = blp(d.samples, z, d.exact);
  const double residual = -adjusted_gap(d.samples, d.exact).estimate;
  CHECK(std::abs(r.beta(0) - residual) < 1e-10);

  // HC0 for a single constant column: sqrt(sum resid^2) / n, on the shifted scale
  const double shift = d.exact.m0.mean();
  auto shifted = d;
  for (auto& s : shifted.samples) s.y -= shift;
  shifted.exact.m0.array() -= shift;
  const auto phi = eif_pseudo_outcomes(shifted.samples, z, shifted.exact);
  double y1 = 0, n1 = 0;
  for (const auto& s : shifted.samples) {
    y1 += s.d * s.y;
    n1 += s.d;
  }
  y1 /= n1;
  double ss = 0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = shifted.samples[i];
    const double target = phi(static_cast<Eigen::Index>(i)) - (s.d * (s.y - y1) / p + y1);
    ss += std::pow(target - r.beta(0), 2);
  }
  CHECK(r.se(0) == doctest::Approx(std::sqrt(ss) / d.samples.size()).epsilon(1e-9));
}

TEST_CASE("planted linear gap coefficients are recovered") {
  const Lattice lat;
  const auto d = draw(lat, 60000, 4);
  const auto z = build_z_design(d.samples, ZMode::kAdditive);
  const auto r = blp(d.samples, z, d.exact);
  std::map<std::string, double> truth = {{"intercept", lat.gap_base}, {"region_q3", lat.gap_region3}};
  for (int q = 2; q <= 5; ++q) truth["age_q" + std::to_string(q)] = lat.gap_age * (q - 1);
  CHECK(std::find(r.aliased.begin(), r.aliased.end(), "occ_unknown") != r.aliased.end());
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const double want = truth.count(r.names[j]) ? truth[r.names[j]] : 0.0;
    CHECK(std::abs(r.beta(j) - want) <= 3 * r.se(j));
  }
}

TEST_CASE("saturated cells match the cell oracles") {
  const Lattice lat;
  const auto d = draw(lat, 60000, 5);
  const auto z = build_z_design(d.samples, ZMode::kSaturated);
  BlpOptions cf;
  cf.mode = BlpMode::kCounterfactual;
  const auto counter = blp(d.samples, z, d.exact, cf);
  const auto gap = blp(d.samples, z, d.exact);
  REQUIRE(counter.cell_table.size() == 25);
  int inside_cf = 0, inside_gap = 0;
  for (std::size_t g = 0; g < 25; ++g) {
    const auto& c = counter.cell_table[g];
    inside_cf += std::abs(c.estimate - lat.counterfactual(c.cell.age_q)) <= 3 * c.se;
    const auto& h = gap.cell_table[g];
    CHECK(h.cell == c.cell);
    inside_gap += std::abs(h.estimate - lat.gap(h.cell.age_q, h.cell.region_q)) <= 3 * h.se;
  }
  CHECK(inside_cf >= 24);
  CHECK(inside_gap >= 24);
}

TEST_CASE("homogeneous gap leaves cell differences inside the joint band") {
  const Lattice lat;
  const auto d = draw(lat, 40000, 6, true);
  const auto cells = cell_heterogeneity(d.samples, d.exact, 2);
  REQUIRE(cells.size() == 25);
  int outside = 0;
  for (std::size_t a = 0; a < cells.size(); ++a)
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      const double band = 3 * std::hypot(cells[a].se, cells[b].se);
      outside += std::abs(cells[a].estimate - cells[b].estimate) > band;
    }
  CHECK(outside <= 3);
}

TEST_CASE("trimmed cells are absent from the cell table") {
  const Lattice lat;
  auto d = draw(lat, 5000, 7);
  // make one cell all male
  for (auto& s : d.samples)
    if (s.cell == CellKey{2, 2, 1}) s.d = 0;
  const auto table = aggregate_cells(d.samples);
  const auto trim = apply_trim(d.samples, table);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.samples.size()); ++i)
    if (!table.at(d.samples[i].cell).trimmed) keep.push_back(i);
  NuisanceFits fits;
  fits.m0 = d.exact.m0(keep);
  fits.e_x = d.exact.e_x(keep);
  fits.fold = make_folds(static_cast<Eigen::Index>(keep.size()), 2, 1);
  const auto cells = cell_heterogeneity(trim.kept, fits, 2);
  CHECK(cells.size() == 24);
  for (const auto& c : cells) CHECK_FALSE(c.cell == (CellKey{2, 2, 1}));
  long total = 0;
  for (const auto& c : cells) total += c.n;
  CHECK(total == static_cast<long>(trim.kept.size()));
}

TEST_CASE("missing group propensity is an estimation error") {
  const Lattice lat;
  auto d = draw(lat, 200, 8);
  d.exact.r_z.resize(0);
  const auto z = build_z_design(d.samples, ZMode::kIntercept);
  CHECK_THROWS_AS(blp(d.samples, z, d.exact), EstimationError);
}

TEST_CASE("group propensity is the out-of-fold female share") {
  const Lattice lat;
  const auto d = draw(lat, 3000, 9);
  const auto z = build_z_design(d.samples, ZMode::kAgeQuintile);
  const auto fits = with_group_propensity(d.exact, d.samples, z, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    double num = 0, den = 0;
    for (std::size_t j = 0; j < d.samples.size(); ++j) {
      if (d.exact.fold[j] == d.exact.fold[i] || d.samples[j].cell.age_q != d.samples[i].cell.age_q) continue;
      num += d.samples[j].d;
      den += 1;
    }
    CHECK(fits.r_z(static_cast<Eigen::Index>(i)) == doctest::Approx(std::clamp(num / den, 0.01, 0.99)));
  }
}
