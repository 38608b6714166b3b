#include "gapdeck/descriptives.hpp"

#include <algorithm>
#include <cmath>

#include "gapdeck/errors.hpp"

namespace gapdeck {

int QuantileBins::bin_of(double value) const {
  for (std::size_t j = 0; j < edges.size(); ++j)
    if (value <= edges[j]) return static_cast<int>(j) + 1;
  return static_cast<int>(edges.size());
}

QuantileBins quantile_bins(const std::vector<double>& values, int k) {
  if (k < 2) throw ConfigError("quantile_bins: k must be >= 2");
  if (values.empty()) throw DataError("quantile_bins: no values");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  QuantileBins bins;
  bins.edges.resize(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    // ceil(j n / k) in exact integer arithmetic
    const std::size_t pos = (static_cast<std::size_t>(j) * n + static_cast<std::size_t>(k) - 1) / k;
    bins.edges[j - 1] = sorted[std::max<std::size_t>(pos, 1) - 1];
  }
  bins.degenerate = sorted.front() == sorted.back();
  bins.assignment.reserve(n);
  for (const double v : values) bins.assignment.push_back(bins.bin_of(v));
  return bins;
}

int CellTable::trimmed_count() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const CellStats& c) { return c.trimmed; }));
}

CellTable aggregate_cells(const Samples& samples, double trim_threshold) {
  CellTable table;
  table.trim_threshold = trim_threshold;
  struct Acc {
    double sum_y[2] = {0, 0};
    double sum_w[2] = {0, 0};
    long n[2] = {0, 0};
  };
  std::array<Acc, CellKey::kCount> acc{};
  for (const auto& s : samples) {
    auto& a = acc[s.cell.index()];
    const int g = s.d ? 1 : 0;
    a.sum_y[g] += s.y;
    a.sum_w[g] += std::exp(s.y) / 1000.0;
    ++a.n[g];
  }
  for (int c = 0; c < CellKey::kCount; ++c) {
    auto& st = table.cells[c];
    const auto& a = acc[c];
    st.n_male = a.n[0];
    st.n_female = a.n[1];
    const long total = a.n[0] + a.n[1];
    st.female_share = total ? static_cast<double>(a.n[1]) / static_cast<double>(total) : 0.0;
    st.mean_y_male = a.n[0] ? a.sum_y[0] / static_cast<double>(a.n[0]) : 0.0;
    st.mean_y_female = a.n[1] ? a.sum_y[1] / static_cast<double>(a.n[1]) : 0.0;
    st.mean_wage_male = a.n[0] ? a.sum_w[0] / static_cast<double>(a.n[0]) : 0.0;
    st.mean_wage_female = a.n[1] ? a.sum_w[1] / static_cast<double>(a.n[1]) : 0.0;
    st.trimmed = st.female_share < trim_threshold;
  }
  return table;
}

CellTable build_cells(Samples& samples, double trim_threshold) {
  if (samples.empty()) throw DataError("build_cells: no samples");
  std::vector<double> ages, regions, occupations;
  ages.reserve(samples.size());
  regions.reserve(samples.size());
  for (const auto& s : samples) {
    ages.push_back(static_cast<double>(s.age));
    regions.push_back(s.region_embed(0));
    if (!s.occ_missing) occupations.push_back(s.occ_embed(0));
  }
  const auto age_bins = quantile_bins(ages, 5);
  const auto region_bins = quantile_bins(regions, 5);
  QuantileBins occ_bins;
  if (!occupations.empty()) occ_bins = quantile_bins(occupations, 5);

  std::size_t known = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = samples[i];
    s.cell.age_q = age_bins.assignment[i];
    s.cell.region_q = region_bins.assignment[i];
    s.cell.occ_q = s.occ_missing ? CellKey::kUnknownOccupation : occ_bins.assignment[known++];
  }

  CellTable table = aggregate_cells(samples, trim_threshold);
  table.age_bins = age_bins;
  table.region_bins = region_bins;
  table.occupation_bins = occ_bins;
  if (age_bins.degenerate) table.warnings.push_back("all ages identical: single age group");
  if (region_bins.degenerate) table.warnings.push_back("all region embeddings identical: single region group");
  if (occ_bins.degenerate) table.warnings.push_back("all occupation embeddings identical: single occupation group");
  return table;
}

std::vector<char> trim_mask(const Samples& samples, const CellTable& cells) {
  std::vector<char> mask(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) mask[i] = cells.at(samples[i].cell).trimmed ? 1 : 0;
  return mask;
}

TrimResult apply_trim(const Samples& samples, const CellTable& cells) {
  TrimResult out;
  out.kept.reserve(samples.size());
  for (const auto& s : samples) {
    if (cells.at(s.cell).trimmed) {
      ++out.n_trimmed;
    } else {
      out.kept.push_back(s);
    }
  }
  return out;
}

std::vector<FigureRow> figure_data(const CellTable& cells) {
  std::vector<FigureRow> rows;
  rows.reserve(CellKey::kCount);
  for (int c = 0; c < CellKey::kCount; ++c) {
    const auto& st = cells.cells[c];
    rows.push_back({CellKey::from_index(c), st.n_male, st.n_female, st.mean_wage_male, st.mean_wage_female,
                    st.female_share, st.trimmed});
  }
  return rows;
}

}  // namespace gapdeck
