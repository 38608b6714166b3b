#pragma once

#include <array>
#include <string>
#include <vector>

#include "gapdeck/sample.hpp"

namespace gapdeck {

/// Empirical quantile grouping. edges[j-1] is the sorted value at position
/// ceil(j * n / k); a value goes to the first bin whose edge is >= it, so
/// ties land in the lowest admissible bin.
struct QuantileBins {
  std::vector<double> edges;
  std::vector<int> assignment;  // 1-based bin per input value
  bool degenerate = false;       // all inputs identical

  int bin_of(double value) const;
};

QuantileBins quantile_bins(const std::vector<double>& values, int k);

struct CellStats {
  long n_male = 0;
  long n_female = 0;
  double female_share = 0.0;
  double mean_y_male = 0.0;
  double mean_y_female = 0.0;
  double mean_wage_male = 0.0;    // arithmetic mean desired wage, 1,000 yen
  double mean_wage_female = 0.0;
  bool trimmed = true;
};

/// Default trimming threshold: cells whose female share is below 0.1%
/// (male ratio above 99.9%) are excluded.
inline constexpr double kDefaultTrimThreshold = 0.001;

struct CellTable {
  std::array<CellStats, CellKey::kCount> cells{};
  QuantileBins age_bins;
  QuantileBins region_bins;
  QuantileBins occupation_bins;
  double trim_threshold = kDefaultTrimThreshold;
  std::vector<std::string> warnings;

  const CellStats& at(const CellKey& key) const { return cells[key.index()]; }
  int trimmed_count() const;
};

/// Assigns every sample its cell (age quintile x region quintile x
/// occupation quintile or Unknown) and aggregates per-cell statistics.
/// Region and occupation quintiles are taken over seekers, so categories
/// are weighted by how many seekers desire them.
CellTable build_cells(Samples& samples, double trim_threshold = kDefaultTrimThreshold);

/// Recomputes stats from already-assigned cells.
CellTable aggregate_cells(const Samples& samples, double trim_threshold = kDefaultTrimThreshold);

/// Per-sample exclusion flags derived from the trimmed cells.
std::vector<char> trim_mask(const Samples& samples, const CellTable& cells);

struct TrimResult {
  Samples kept;
  std::size_t n_trimmed = 0;
};
TrimResult apply_trim(const Samples& samples, const CellTable& cells);

struct FigureRow {
  CellKey cell;
  long n_male = 0;
  long n_female = 0;
  double mean_wage_male = 0.0;
  double mean_wage_female = 0.0;
  double female_share = 0.0;
  bool trimmed = false;
};

/// One row per cell in index order; wages in units of 1,000 yen.
std::vector<FigureRow> figure_data(const CellTable& cells);

}  // namespace gapdeck
