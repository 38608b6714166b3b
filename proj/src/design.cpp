#include "gapdeck/design.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Dense>

#include "gapdeck/errors.hpp"

namespace gapdeck {

std::string to_string(CovariateSet set) { return "X" + std::to_string(static_cast<int>(set)); }

std::string to_string(ZMode mode) {
  switch (mode) {
    case ZMode::kIntercept: return "intercept";
    case ZMode::kAdditive: return "additive";
    case ZMode::kSaturated: return "saturated";
    case ZMode::kAgeQuintile: return "age_quintile";
  }
  return "unknown";
}

DesignMatrix build_design(const Samples& samples, CovariateSet set) {
  const int level = static_cast<int>(set);
  DesignMatrix dm;
  for (int m = 2; m <= 12; ++m) dm.names.push_back("month_" + std::to_string(m));
  if (level >= 2) dm.names.push_back("age");
  if (level >= 3) {
    dm.names.push_back("region_pred_wage");
    dm.names.push_back("region_mean_age");
  }
  if (level >= 4) {
    dm.names.push_back("occ_pred_wage");
    dm.names.push_back("occ_mean_age");
    dm.names.push_back("occ_missing");
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  dm.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(dm.names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[i];
    if (s.month >= 2) dm.x(i, s.month - 2) = 1.0;
    Eigen::Index c = 11;
    if (level >= 2) dm.x(i, c++) = s.age;
    if (level >= 3) {
      dm.x(i, c++) = s.region_embed(0);
      dm.x(i, c++) = s.region_embed(1);
    }
    if (level >= 4) {
      dm.x(i, c++) = s.occ_embed(0);
      dm.x(i, c++) = s.occ_embed(1);
      dm.x(i, c++) = s.occ_missing;
    }
  }
  return dm;
}

namespace {

ZDesign grouped_design(const Samples& samples, ZMode mode, int (*key)(const EmbeddedSample&),
                       std::string (*label)(int)) {
  ZDesign z;
  z.mode = mode;
  std::map<int, int> ids;
  for (const auto& s : samples) ids.emplace(key(s), 0);
  int next = 0;
  for (auto& [k, id] : ids) {
    id = next++;
    z.names.push_back(label(k));
  }
  z.group.reserve(samples.size());
  for (const auto& s : samples) z.group.push_back(ids[key(s)]);
  return z;
}

}  // namespace

ZDesign build_z_design(const Samples& samples, ZMode mode) {
  if (samples.empty()) throw DataError("build_z_design: no samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  switch (mode) {
    case ZMode::kSaturated:
      return grouped_design(
          samples, mode, [](const EmbeddedSample& s) { return s.cell.index(); },
          [](int k) { return CellKey::from_index(k).label(); });
    case ZMode::kAgeQuintile:
      return grouped_design(
          samples, mode, [](const EmbeddedSample& s) { return s.cell.age_q; },
          [](int k) { return "age_q" + std::to_string(k); });
    case ZMode::kIntercept: {
      ZDesign z;
      z.mode = mode;
      z.matrix = Eigen::MatrixXd::Ones(n, 1);
      z.names = {"intercept"};
      return z;
    }
    case ZMode::kAdditive: break;
  }

  std::vector<std::string> names = {"intercept"};
  for (int q = 2; q <= 5; ++q) names.push_back("age_q" + std::to_string(q));
  for (int q = 2; q <= 5; ++q) names.push_back("region_q" + std::to_string(q));
  for (int q = 2; q <= 5; ++q) names.push_back("occ_q" + std::to_string(q));
  names.push_back("occ_unknown");
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = samples[i].cell;
    full(i, 0) = 1.0;
    if (c.age_q >= 2) full(i, c.age_q - 1) = 1.0;
    if (c.region_q >= 2) full(i, 4 + c.region_q - 1) = 1.0;
    if (c.occ_q >= 2) full(i, 8 + c.occ_q - 1) = 1.0;
  }
  // drop aliased columns, keeping the earliest independent ones
  std::vector<Eigen::Index> keep;
  ZDesign z;
  z.mode = mode;
  Eigen::MatrixXd kept(n, 0);
  for (Eigen::Index j = 0; j < full.cols(); ++j) {
    Eigen::MatrixXd trial(n, kept.cols() + 1);
    trial << kept, full.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial.transpose() * trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols()) {
      kept = std::move(trial);
      z.names.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      z.aliased.push_back(names[static_cast<std::size_t>(j)]);
    }
  }
  z.matrix = std::move(kept);
  return z;
}

Eigen::VectorXd project_on_z(const ZDesign& z, const Eigen::VectorXd& v, const std::vector<char>* fit_mask) {
  const Eigen::Index n = z.rows();
  if (v.size() != n) throw EstimationError("project_on_z: length mismatch");
  auto use = [&](Eigen::Index i) { return !fit_mask || (*fit_mask)[static_cast<std::size_t>(i)]; };
  Eigen::VectorXd out(n);
  if (z.grouped()) {
    const auto groups = static_cast<std::size_t>(z.columns());
    std::vector<double> sum(groups, 0.0), count(groups, 0.0);
    double total = 0.0, total_count = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!use(i)) continue;
      sum[z.group[i]] += v(i);
      count[z.group[i]] += 1.0;
      total += v(i);
      total_count += 1.0;
    }
    if (total_count == 0) throw EstimationError("project_on_z: no fitting rows");
    const double fallback = total / total_count;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(z.group[i]);
      out(i) = count[g] > 0 ? sum[g] / count[g] : fallback;
    }
    return out;
  }
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i)
    if (use(i)) rows.push_back(i);
  if (rows.empty()) throw EstimationError("project_on_z: no fitting rows");
  const Eigen::MatrixXd zf = z.matrix(rows, Eigen::all);
  const Eigen::VectorXd vf = v(rows);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(zf);
  cod.setThreshold(1e-10);
  const Eigen::VectorXd beta = cod.solve(vf);
  out = z.matrix * beta;
  return out;
}

}  // namespace gapdeck
