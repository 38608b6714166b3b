#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gapdeck/errors.hpp"
#include "gapdeck/forest.hpp"
#include "gapdeck/learners.hpp"
#include "gapdeck/linear_model.hpp"

using namespace gapdeck;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0, 1);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = z(rng);
  return x;
}

// Sylvester Hadamard columns 1..p: mean zero, unit variance, orthogonal.
Eigen::MatrixXd hadamard_columns(int log2n, Eigen::Index p) {
  Eigen::MatrixXd h(1, 1);
  h(0, 0) = 1;
  for (int k = 0; k < log2n; ++k) {
    Eigen::MatrixXd next(2 * h.rows(), 2 * h.cols());
    next << h, h, h, -h;
    h = next;
  }
  return h.middleCols(1, p);
}

double soft(double z, double g) { return z > g ? z - g : (z < -g ? z + g : 0.0); }

Samples linear_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Samples out;
  for (int i = 0; i < n; ++i) {
    EmbeddedSample s;
    s.month = 1 + static_cast<int>(rng() % 12);
    s.age = 20 + static_cast<int>(rng() % 45);
    s.d = static_cast<int>(rng() % 2);
    s.region_embed = {12 + 0.1 * z(rng), 40};
    s.occ_embed = {12 + 0.1 * z(rng), 40};
    s.y = 12 + 0.01 * (s.age - 40) + 0.5 * (s.region_embed(0) - 12) + 0.1 * z(rng);
    out.push_back(s);
  }
  return out;
}

LearnerConfig small_learners() {
  LearnerConfig c;
  c.forest.trees = 20;
  c.forest.min_leaf = 5;
  return c;
}

}  // namespace

TEST_CASE("ols recovers an exact slope") {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  const Eigen::VectorXd y = 2 * x.col(0);
  const auto m = ols_fit(x, y);
  CHECK(std::abs(m.coef(0) - 2.0) < 1e-10);
  CHECK(std::abs(m.intercept) < 1e-10);
}

TEST_CASE("ols on a constant response is intercept only") {
  std::mt19937_64 rng(1);
  const auto x = random_matrix(20, 2, rng);
  const auto m = ols_fit(x, Eigen::VectorXd::Constant(20, 3.5));
  CHECK(m.coef.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.intercept == doctest::Approx(3.5));
}

TEST_CASE("ols residuals satisfy the normal equations") {
  std::mt19937_64 rng(2);
  const auto x = random_matrix(100, 3, rng);
  const Eigen::VectorXd y = random_matrix(100, 1, rng).col(0) + x.col(1);
  const auto m = ols_fit(x, y);
  const Eigen::VectorXd r = y - m.predict(x);
  CHECK((x.transpose() * r).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(r.sum()) < 1e-8);
}

TEST_CASE("ols accepts rank-deficient designs and rejects tiny ones") {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd x(30, 3);
  x.leftCols(2) = random_matrix(30, 2, rng);
  x.col(2) = x.col(0) + x.col(1);
  const Eigen::VectorXd y = x.col(0);
  const auto m = ols_fit(x, y);
  CHECK((m.predict(x) - y).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(ols_fit(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1)), EstimationError);
}

TEST_CASE("lasso at zero penalty equals ols") {
  std::mt19937_64 rng(4);
  const auto x = random_matrix(200, 5, rng);
  const Eigen::VectorXd y = x * Eigen::VectorXd::LinSpaced(5, -1, 1) + random_matrix(200, 1, rng).col(0);
  const auto ols = ols_fit(x, y);
  const auto lasso = lasso_fit(x, y, 0.0, 1e-14, 1000000);
  CHECK((ols.coef - lasso.coef).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(ols.intercept - lasso.intercept) < 1e-8);
}

TEST_CASE("lasso at lambda_max zeroes every slope") {
  std::mt19937_64 rng(5);
  const auto x = random_matrix(50, 4, rng);
  const Eigen::VectorXd y = x.col(0) + random_matrix(50, 1, rng).col(0);
  const auto g = LassoGram<double>::build(x, y);
  // max |X~'y|/n computed directly
  double lmax = 0;
  for (Eigen::Index j = 0; j < 4; ++j) {
    const Eigen::VectorXd c = x.col(j).array() - x.col(j).mean();
    const double sd = std::sqrt(c.squaredNorm() / 50);
    lmax = std::max(lmax, std::abs(c.dot(y)) / (50 * sd));
  }
  CHECK(g.lambda_max() == doctest::Approx(lmax).epsilon(1e-12));
  for (double lambda : {lmax, 2 * lmax}) {
    const auto m = lasso_fit(x, y, lambda);
    CHECK(m.coef.cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.intercept == doctest::Approx(y.mean()));
  }
}

TEST_CASE("lasso on an orthonormal design soft-thresholds ols") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = hadamard_columns(6, 8);
  const Eigen::VectorXd y =
      x * (Eigen::VectorXd(8) << 1.5, -0.8, 0.3, 0.05, -0.02, 0, 0.7, -1.2).finished() +
      0.3 * random_matrix(64, 1, rng).col(0);
  const auto ols = ols_fit(x, y);
  for (double lambda : {0.0, 0.01, 0.1, 0.5, 1.0}) {
    const auto m = lasso_fit(x, y, lambda);
    for (Eigen::Index j = 0; j < 8; ++j) CHECK(std::abs(m.coef(j) - soft(ols.coef(j), lambda)) < 1e-6);
  }
}

TEST_CASE("lasso objective never increases across sweeps") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x = random_matrix(100, 6, rng);
  x.col(1) += 0.9 * x.col(0);
  x.col(2) += 0.8 * x.col(1);
  const Eigen::VectorXd y = x.col(2) - x.col(0) + random_matrix(100, 1, rng).col(0);
  const auto g = LassoGram<double>::build(x, y);
  for (double lambda : {0.0, 0.05, 0.2}) {
    const auto fit = lasso_solve<double>(g, lambda, 1e-12, 100000, nullptr, true);
    REQUIRE(fit.objective_trace.size() >= 2);
    const double start = g.objective(Eigen::VectorXd::Zero(6), lambda);
    CHECK(fit.objective_trace.front() <= start + 1e-15);
    for (std::size_t s = 1; s < fit.objective_trace.size(); ++s)
      CHECK(fit.objective_trace[s] <= fit.objective_trace[s - 1] + 1e-14);
  }
}

TEST_CASE("lasso non-convergence carries the last iterate") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd x = random_matrix(100, 4, rng);
  x.col(1) = x.col(0) + 0.01 * x.col(1);
  const Eigen::VectorXd y = x.col(0) + x.col(1);
  const auto g = LassoGram<double>::build(x, y);
  try {
    lasso_solve<double>(g, 0.0, 1e-15, 2);
    FAIL("expected non-convergence");
  } catch (const LassoConvergenceError<double>& e) {
    CHECK(e.last_iterate().sweeps == 2);
    CHECK(e.last_iterate().standardized_coef.size() == 4);
  }
}

TEST_CASE("depth-zero tree predicts one constant") {
  std::mt19937_64 rng(9);
  const auto x = random_matrix(100, 2, rng);
  const Eigen::VectorXd y = x.col(0);
  ForestParams p;
  p.trees = 1;
  p.max_depth = 0;
  const auto f = RandomForest::fit(x, y, p);
  const auto pred = f.predict(random_matrix(30, 2, rng));
  CHECK(pred.maxCoeff() == pred.minCoeff());
  CHECK(pred(0) >= y.minCoeff());
  CHECK(pred(0) <= y.maxCoeff());
}

TEST_CASE("forest fits a step function") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd x(500, 1);
  Eigen::VectorXd y(500);
  for (int i = 0; i < 500; ++i) {
    x(i, 0) = u(rng);
    y(i) = x(i, 0) > 0 ? 1.0 : 0.0;
  }
  ForestParams p;
  p.trees = 200;
  p.min_leaf = 1;
  const auto f = RandomForest::fit(x, y, p);
  Eigen::MatrixXd grid(201, 1);
  Eigen::VectorXd truth(201);
  for (int i = 0; i < 201; ++i) {
    grid(i, 0) = -1 + 0.01 * i;
    truth(i) = grid(i, 0) > 0 ? 1.0 : 0.0;
  }
  CHECK((f.predict(grid) - truth).squaredNorm() / 201 < 0.05);
}

TEST_CASE("forest is deterministic and ignores row order") {
  std::mt19937_64 rng(11);
  const auto x = random_matrix(300, 3, rng);
  const Eigen::VectorXd y = x.col(0).array().square() + x.col(1).array();
  ForestParams p;
  p.trees = 30;
  p.seed = 42;
  const auto a = RandomForest::fit(x, y, p).predict(x);
  const auto b = RandomForest::fit(x, y, p).predict(x);
  CHECK(a == b);
  std::vector<Eigen::Index> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Eigen::MatrixXd xs = x(perm, Eigen::all);
  const Eigen::VectorXd ys = y(perm);
  const auto c = RandomForest::fit(xs, ys, p).predict(x);
  CHECK((a - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forest on a constant target is constant") {
  std::mt19937_64 rng(12);
  const auto x = random_matrix(50, 2, rng);
  ForestParams p;
  p.trees = 5;
  const auto pred = RandomForest::fit(x, Eigen::VectorXd::Constant(50, 0.3), p).predict(x);
  CHECK((pred.array() - 0.3).abs().maxCoeff() < 1e-15);
}

TEST_CASE("stacking puts the weight on a perfect learner") {
  std::mt19937_64 rng(13);
  const Eigen::VectorXd y = random_matrix(200, 1, rng).col(0);
  Eigen::MatrixXd preds(200, 2);
  preds.col(0) = y;
  preds.col(1) = random_matrix(200, 1, rng).col(0);
  const auto w = stack_weights(preds, y);
  CHECK(w(0) >= 0.99);
}

TEST_CASE("stacking matches or beats a 0.01 simplex grid") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd y = random_matrix(100, 1, rng).col(0);
    Eigen::MatrixXd preds(100, 3);
    for (int j = 0; j < 3; ++j) preds.col(j) = y + (0.3 + 0.4 * j) * random_matrix(100, 1, rng).col(0);
    if (trial % 3 == 0) preds.col(2) = -y;
    const auto w = stack_weights(preds, y);
    CHECK(std::abs(w.sum() - 1) < 1e-12);
    CHECK(w.minCoeff() >= 0);
    const double loss = (preds * w - y).squaredNorm();
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 100; ++a)
      for (int b = 0; a + b <= 100; ++b) {
        const Eigen::Vector3d g(a / 100.0, b / 100.0, (100 - a - b) / 100.0);
        best = std::min(best, (preds * g - y).squaredNorm());
      }
    CHECK(loss <= best + 1e-6);
  }
}

TEST_CASE("identical learners share weight equally") {
  std::mt19937_64 rng(15);
  const Eigen::VectorXd y = random_matrix(50, 1, rng).col(0);
  Eigen::MatrixXd preds(50, 2);
  preds.col(0) = preds.col(1) = y + random_matrix(50, 1, rng).col(0);
  const auto w = stack_weights(preds, y);
  CHECK(w(0) == doctest::Approx(0.5));
  CHECK(w(1) == doctest::Approx(0.5));
}

TEST_CASE("design matrices grow with the covariate set") {
  const auto samples = linear_samples(20, 1);
  CHECK(build_design(samples, CovariateSet::kX1).x.cols() == 11);
  CHECK(build_design(samples, CovariateSet::kX2).x.cols() == 12);
  CHECK(build_design(samples, CovariateSet::kX3).x.cols() == 14);
  const auto d4 = build_design(samples, CovariateSet::kX4);
  CHECK(d4.x.cols() == 17);
  CHECK(d4.x.allFinite());
  for (Eigen::Index i = 0; i < d4.x.rows(); ++i) CHECK(d4.x.row(i).head(11).sum() == (samples[i].month > 1 ? 1 : 0));
}

TEST_CASE("cross-fitted predictions are out of fold") {
  auto samples = linear_samples(10, 2);
  for (int i = 0; i < 10; ++i) samples[i].d = i % 2;
  const auto config = small_learners();
  const auto base = cross_fit(samples, CovariateSet::kX2, nullptr, 2, 5, config);
  for (int f = 0; f < 2; ++f) {
    auto changed = samples;
    for (int i = 0; i < 10; ++i)
      if (base.fold[i] == f) changed[i].y += 100.0 * (i + 1);
    const auto other = cross_fit(changed, CovariateSet::kX2, nullptr, 2, 5, config);
    CHECK(other.fold == base.fold);
    for (int i = 0; i < 10; ++i) {
      if (base.fold[i] != f) continue;
      CHECK(other.m0(i) == base.m0(i));
      CHECK(other.m1(i) == base.m1(i));
    }
  }
  std::array<int, 2> counts{};
  for (int f : base.fold) ++counts[f];
  CHECK(counts[0] == 5);
  CHECK(counts[1] == 5);
}

TEST_CASE("propensities are clipped") {
  CHECK(clip_probability(0.001, 0.01) == 0.01);
  CHECK(clip_probability(0.999, 0.01) == 0.99);
  CHECK(clip_probability(0.4, 0.01) == 0.4);
  auto samples = linear_samples(400, 3);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].d = i % 200 == 0 ? 1 : 0;
  LearnerConfig ols_only;
  ols_only.use_lasso = ols_only.use_forest = false;
  ols_only.fit_m1 = false;
  const auto fits = cross_fit(samples, CovariateSet::kX1, nullptr, 2, 1, ols_only, 0.01);
  CHECK(fits.e_x.minCoeff() >= 0.01);
  CHECK(fits.e_x.maxCoeff() <= 0.99);
  CHECK(fits.clipped > 0);
}

TEST_CASE("a fold complement without men is an error") {
  auto samples = linear_samples(20, 4);
  for (auto& s : samples) s.d = 1;
  samples[0].d = 0;
  CHECK_THROWS_AS(cross_fit(samples, CovariateSet::kX1, nullptr, 2, 1, small_learners()), EstimationError);
}

TEST_CASE("stacked model is close to the best single learner on fresh data") {
  const auto train = linear_samples(2000, 5);
  const auto test = linear_samples(2000, 6);
  const auto xtr = build_design(train, CovariateSet::kX3).x;
  const auto xte = build_design(test, CovariateSet::kX3).x;
  Eigen::VectorXd ytr(2000), yte(2000);
  for (int i = 0; i < 2000; ++i) {
    ytr(i) = train[i].y;
    yte(i) = test[i].y;
  }
  auto config = small_learners();
  config.forest.trees = 50;
  const auto model = StackedModel::fit(xtr, ytr, config, 9);
  const double stacked = (model.predict(xte) - yte).squaredNorm() / 2000;
  const auto each = model.predict_each(xte);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < each.cols(); ++j) best = std::min(best, (each.col(j) - yte).squaredNorm() / 2000);
  CHECK(stacked <= best + 0.01);
  CHECK(std::abs(model.weights().sum() - 1) < 1e-12);
}
