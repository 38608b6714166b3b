#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapdeck/blp.hpp"
#include "gapdeck/core_data.hpp"
#include "gapdeck/decomposition.hpp"
#include "gapdeck/descriptives.hpp"
#include "gapdeck/embedding.hpp"
#include "gapdeck/sensitivity.hpp"
#include "gapdeck/simulator.hpp"

namespace gapdeck {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognized configuration key with its default. Empty default means
/// unset.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value configuration. Lines starting with '#' and blank lines
/// are ignored; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(std::istream& in, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;  // set to a non-empty value
  const std::string& get(const std::string& key) const;

  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::uint64_t seed() const;

  /// Sorted key=value lines of every setting that can change results.
  std::string canonical() const;
  /// FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Stage { kIngest = 1, kEmbed, kDescribe, kDecompose, kBlp, kSensitivity, kAll };

/// Typed settings derived from a RunConfig; validate() checks types, ranges
/// and that the input files exist.
struct PipelineSettings {
  std::filesystem::path seekers;
  std::filesystem::path postings;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  SeekerSchema seeker_schema;
  PostingSchema posting_schema;
  std::vector<double> lambda_grid;  // empty: default grid
  int lambda_count = 50;
  int embedding_folds = 5;
  double trim_threshold = kDefaultTrimThreshold;
  DecompositionConfig decomposition;
  BlpOptions blp;
  ZMode blp_z = ZMode::kAdditive;
  SensitivityOptions sensitivity;
  std::vector<std::string> subgroup_occupations;
  bool diagnostics = false;
  std::string config_hash;
};

PipelineSettings settings_from(const RunConfig& config, bool need_inputs = true);

/// Output files by name, kept in memory until the whole stage succeeds.
using Artifacts = std::map<std::string, std::string>;

struct PipelineResult {
  Loaded<SeekerRecord> seekers;
  Loaded<PostingRecord> postings;
  RegionEmbedding region_embedding;
  OccupationEmbedding occupation_embedding;
  EmbedReport embed_report;
  Samples samples;
  CellTable cells;
  TrimResult trim;
  std::optional<DecompositionResult> decomposition;
  std::optional<Estimate> subgroup;
  std::optional<BlpResult> blp;
  std::optional<BlpResult> age_quintiles;
  std::vector<CellEstimate> cell_table;
  std::optional<SensitivityResult> sensitivity;
  Artifacts artifacts;
};

/// Runs every stage up to and including `last` and renders its artifacts.
PipelineResult run_pipeline(const PipelineSettings& settings, Stage last = Stage::kAll);

/// summary.json and figure CSVs from computed results.
Artifacts emit_report(const PipelineResult& result, const PipelineSettings& settings);

/// Rebuilds summary.json from decomposition.json and sensitivity.json
/// found in dir.
Artifacts report_from_directory(const std::filesystem::path& dir);

/// Writes each artifact through a temporary file and rename.
void write_artifacts(const Artifacts& artifacts, const std::filesystem::path& dir);

/// seekers.csv, postings.csv and oracle.json for a scenario.
Artifacts simulate_artifacts(const ScenarioConfig& scenario);

}  // namespace gapdeck
