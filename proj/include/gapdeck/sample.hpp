#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gapdeck {

/// One of the 5 x 5 x 6 descriptive cells. occ_q == kUnknownOccupation marks
/// seekers without a desired occupation.
struct CellKey {
  static constexpr int kUnknownOccupation = 6;
  static constexpr int kCount = 150;

  int age_q = 1;
  int region_q = 1;
  int occ_q = 1;

  /// Dense index in [0, 150): age-major, then region, then occupation.
  int index() const { return ((age_q - 1) * 5 + (region_q - 1)) * 6 + (occ_q - 1); }
  static CellKey from_index(int index) {
    return CellKey{index / 30 + 1, (index / 6) % 5 + 1, index % 6 + 1};
  }
  std::string label() const;

  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend auto operator<=>(const CellKey& a, const CellKey& b) { return a.index() <=> b.index(); }
};

/// A seeker after embedding: outcome, treatment indicator and covariates.
struct EmbeddedSample {
  double y = 0.0;
  int d = 0;
  int month = 1;
  int age = 0;
  Eigen::Vector2d region_embed = Eigen::Vector2d::Zero();
  Eigen::Vector2d occ_embed = Eigen::Vector2d::Zero();
  int occ_missing = 0;
  CellKey cell;

  int region = 0;
  std::optional<std::string> occupation;
};

using Samples = std::vector<EmbeddedSample>;

}  // namespace gapdeck
