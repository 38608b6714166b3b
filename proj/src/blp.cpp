#include "gapdeck/blp.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "gapdeck/errors.hpp"

namespace gapdeck {

std::string to_string(BlpMode mode) { return mode == BlpMode::kGap ? "gap" : "counterfactual"; }
std::string to_string(EifForm form) { return form == EifForm::kCentered ? "centered" : "printed"; }
std::string to_string(BlpWeighting weighting) { return weighting == BlpWeighting::kFull ? "full" : "female"; }

EifTerms eif_terms(double y, int d, double m0, double e, double r, double m0e_center) {
  EifTerms t;
  t.outcome_model = m0 * e / r;
  t.outcome_residual = d ? 0.0 : (y - m0) / (1.0 - e) * e / r;
  t.propensity = m0 * (d - e) / r;
  t.group_share = -m0e_center / (r * r) * (d - r);
  return t;
}

double eif_pseudo_outcome(const EmbeddedSample& sample, double m0, double e, double r) {
  return eif_terms(sample.y, sample.d, m0, e, r, m0 * e).total();
}

namespace {

void check_nuisance(const Samples& samples, const ZDesign& z, const NuisanceFits& nuisance) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n == 0) throw EstimationError("blp: no samples");
  if (z.rows() != n) throw EstimationError("blp: Z design row count mismatch");
  if (nuisance.m0.size() != n || nuisance.e_x.size() != n)
    throw EstimationError("blp: nuisance length mismatch");
  if (nuisance.r_z.size() != n) throw EstimationError("blp: r(Z) missing; cross-fit with a Z design");
}

Eigen::VectorXd column(const Samples& samples, bool outcome) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = outcome ? samples[i].y : samples[i].d;
  return v;
}

}  // namespace

Eigen::VectorXd eif_pseudo_outcomes(const Samples& samples, const ZDesign& z, const NuisanceFits& nuisance,
                                    EifForm form) {
  check_nuisance(samples, z, nuisance);
  const Eigen::VectorXd m0e = nuisance.m0.cwiseProduct(nuisance.e_x);
  const Eigen::VectorXd center = form == EifForm::kCentered ? project_on_z(z, m0e) : m0e;
  Eigen::VectorXd out(m0e.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    out(i) = eif_terms(s.y, s.d, nuisance.m0(i), nuisance.e_x(i), nuisance.r_z(i), center(i)).total();
  }
  return out;
}

BlpResult blp(const Samples& samples, const ZDesign& z, const NuisanceFits& nuisance, const BlpOptions& options) {
  check_nuisance(samples, z, nuisance);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::VectorXd d = column(samples, false);
  const double p = d.mean();
  if (p <= 0.0 || p >= 1.0) throw EstimationError("blp: need both female and male rows");

  // pseudo-outcomes around mean(m0); both targets commute with the shift
  const double shift = nuisance.m0.mean();
  Samples centered = samples;
  for (auto& s : centered) s.y -= shift;
  NuisanceFits shifted = nuisance;
  shifted.m0.array() -= shift;
  Eigen::VectorXd target = eif_pseudo_outcomes(centered, z, shifted, options.form);

  if (options.mode == BlpMode::kGap) {
    // female mean within Z, corrected by the female residual: D (Y - mu1)/r + mu1
    std::vector<char> female(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) female[i] = static_cast<char>(samples[i].d);
    const Eigen::VectorXd y = column(centered, true);
    const Eigen::VectorXd mu1 = project_on_z(z, y, &female);
    for (Eigen::Index i = 0; i < n; ++i) target(i) -= d(i) * (y(i) - mu1(i)) / nuisance.r_z(i) + mu1(i);
  } else {
    target.array() += shift;
  }

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (options.weighting == BlpWeighting::kFemale) w = nuisance.r_z / p;

  BlpResult result;
  result.mode = options.mode;
  result.z_mode = z.mode;
  result.form = options.form;
  result.weighting = options.weighting;
  result.names = z.names;
  result.aliased = z.aliased;
  const Eigen::Index k = z.columns();

  if (z.grouped()) {
    const auto groups = static_cast<std::size_t>(k);
    std::vector<double> sw(groups, 0.0), swt(groups, 0.0), meat(groups, 0.0);
    std::vector<long> count(groups, 0);
    std::vector<int> cell_of(groups, -1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(z.group[i]);
      sw[g] += w(i);
      swt[g] += w(i) * target(i);
      ++count[g];
      if (cell_of[g] < 0) cell_of[g] = samples[i].cell.index();
    }
    result.beta.resize(k);
    for (std::size_t g = 0; g < groups; ++g) {
      if (sw[g] <= 0) throw EstimationError("blp: empty Z group " + z.names[g]);
      result.beta(static_cast<Eigen::Index>(g)) = swt[g] / sw[g];
    }
    result.moment_residual = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(z.group[i]);
      const double resid = target(i) - result.beta(static_cast<Eigen::Index>(g));
      meat[g] += w(i) * w(i) * resid * resid;
      result.moment_residual(static_cast<Eigen::Index>(g)) += w(i) * resid;
    }
    result.se.resize(k);
    for (std::size_t g = 0; g < groups; ++g) result.se(static_cast<Eigen::Index>(g)) = std::sqrt(meat[g]) / sw[g];
    if (z.mode == ZMode::kSaturated) {
      for (std::size_t g = 0; g < groups; ++g) {
        const auto idx = static_cast<Eigen::Index>(g);
        result.cell_table.push_back({CellKey::from_index(cell_of[g]), result.beta(idx), result.se(idx), count[g]});
      }
    }
    return result;
  }

  const Eigen::MatrixXd& zm = z.matrix;
  const Eigen::MatrixXd zw = zm.array().colwise() * w.array();
  const Eigen::MatrixXd gram = zw.transpose() * zm;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  cod.setThreshold(1e-12);
  if (cod.rank() < k) throw EstimationError("blp: Z design is rank deficient");
  result.beta = cod.solve(zw.transpose() * target);
  const Eigen::VectorXd resid = target - zm * result.beta;
  result.moment_residual = zw.transpose() * resid;
  const Eigen::MatrixXd scores = zm.array().colwise() * (w.array() * resid.array());
  const Eigen::MatrixXd bread = cod.pseudoInverse();
  const Eigen::MatrixXd cov = bread * (scores.transpose() * scores) * bread;
  result.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

NuisanceFits with_group_propensity(const NuisanceFits& fits, const Samples& samples, const ZDesign& z, int folds) {
  NuisanceFits out = fits;
  out.r_z = cross_fit_group_propensity(samples, z, fits.fold, folds, fits.clip_eps);
  return out;
}

std::vector<CellEstimate> cell_heterogeneity(const Samples& samples, const NuisanceFits& nuisance, int folds,
                                             const BlpOptions& options) {
  const ZDesign z = build_z_design(samples, ZMode::kSaturated);
  const auto fits = with_group_propensity(nuisance, samples, z, folds);
  return blp(samples, z, fits, options).cell_table;
}

}  // namespace gapdeck
