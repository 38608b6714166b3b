#include "gapdeck/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gapdeck/errors.hpp"
#include "gapdeck/parallel.hpp"

namespace gapdeck {

using nlohmann::ordered_json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

// keys that never change numerical output
bool hashed(const std::string& key) { return key != "threads" && key != "output_dir"; }

std::string fmt(double v) { return csv::format_double(v); }

ordered_json estimate_json(const Estimate& e) { return {{"estimate", e.estimate}, {"se", e.se}}; }

ordered_json stamp(const PipelineSettings& s) {
  ordered_json j;
  j["config_hash"] = s.config_hash;
  j["seed"] = s.seed;
  return j;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json report_json(const IngestReport& r) {
  ordered_json drops = ordered_json::object();
  for (const auto& [k, v] : r.drops) drops[k] = v;
  return {{"source", r.source},
          {"rows_read", r.rows_read},
          {"rows_kept", r.rows_kept},
          {"rows_dropped", r.rows_dropped()},
          {"drops", drops}};
}

ZMode parse_z_mode(const std::string& v) {
  if (v == "intercept") return ZMode::kIntercept;
  if (v == "additive") return ZMode::kAdditive;
  if (v == "saturated") return ZMode::kSaturated;
  if (v == "age_quintile") return ZMode::kAgeQuintile;
  throw ConfigError("blp_z must be intercept, additive, saturated or age_quintile (got '" + v + "')");
}

ordered_json blp_json(const BlpResult& r) {
  ordered_json coef = ordered_json::array();
  for (Eigen::Index j = 0; j < r.beta.size(); ++j)
    coef.push_back({{"name", r.names[static_cast<std::size_t>(j)]}, {"estimate", r.beta(j)}, {"se", r.se(j)}});
  return {{"z", to_string(r.z_mode)},
          {"mode", to_string(r.mode)},
          {"form", to_string(r.form)},
          {"weighting", to_string(r.weighting)},
          {"coefficients", coef},
          {"aliased", r.aliased}};
}

std::string cells_csv(const CellTable& table) {
  std::ostringstream out;
  out << "cell,age_q,region_q,occ_q,n_male,n_female,female_share,mean_y_male,mean_y_female,mean_wage_male,"
         "mean_wage_female,trimmed\n";
  for (int c = 0; c < CellKey::kCount; ++c) {
    const CellKey key = CellKey::from_index(c);
    const auto& s = table.cells[c];
    out << key.label() << ',' << key.age_q << ',' << key.region_q << ','
        << (key.occ_q == CellKey::kUnknownOccupation ? std::string("U") : std::to_string(key.occ_q)) << ','
        << s.n_male << ',' << s.n_female << ',' << fmt(s.female_share) << ',' << fmt(s.mean_y_male) << ','
        << fmt(s.mean_y_female) << ',' << fmt(s.mean_wage_male) << ',' << fmt(s.mean_wage_female) << ','
        << (s.trimmed ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string figure1_csv(const CellTable& table) {
  std::ostringstream out;
  out << "cell,n_male,n_female,mean_wage_male,mean_wage_female,trimmed\n";
  for (const auto& row : figure_data(table))
    out << row.cell.label() << ',' << row.n_male << ',' << row.n_female << ',' << fmt(row.mean_wage_male) << ','
        << fmt(row.mean_wage_female) << ',' << (row.trimmed ? 1 : 0) << '\n';
  return out.str();
}

std::string figure2_csv(const CellTable& table) {
  std::ostringstream out;
  out << "cell,female_share,male_share,trimmed\n";
  for (const auto& row : figure_data(table)) {
    const bool empty = row.n_male + row.n_female == 0;
    out << row.cell.label() << ',' << fmt(row.female_share) << ',' << fmt(empty ? 0.0 : 1.0 - row.female_share)
        << ',' << (row.trimmed ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string trim_mask_csv(const std::vector<SeekerRecord>& seekers, const Samples& samples, const CellTable& table) {
  std::ostringstream out;
  out << "id,cell,trimmed\n";
  const auto mask = trim_mask(samples, table);
  for (std::size_t i = 0; i < samples.size(); ++i)
    out << csv::escape(seekers[i].id) << ',' << samples[i].cell.label() << ',' << (mask[i] ? 1 : 0) << '\n';
  return out.str();
}

std::string figure5_csv(const DecompositionResult& d) {
  std::ostringstream out;
  out << "component,estimate,se,ci_low,ci_high\n";
  auto row = [&](const std::string& name, const Estimate& e) {
    out << name << ',' << fmt(e.estimate) << ',' << fmt(e.se) << ',' << fmt(e.estimate - 1.96 * e.se) << ','
        << fmt(e.estimate + 1.96 * e.se) << '\n';
  };
  row("raw_gap", d.raw_gap);
  for (const char* block : DecompositionResult::kBlocks) row(block, d.contributions.at(block));
  row("residual", d.residual);
  return out.str();
}

std::string figure6_csv(const std::vector<CellEstimate>& estimates, const CellTable& cells) {
  std::map<int, const CellEstimate*> by_cell;
  for (const auto& c : estimates) by_cell[c.cell.index()] = &c;
  std::ostringstream out;
  out << "cell,age_q,region_q,occ_q,trimmed,n,estimate,se,ci_low,ci_high\n";
  for (int i = 0; i < CellKey::kCount; ++i) {
    const CellKey key = CellKey::from_index(i);
    out << key.label() << ',' << key.age_q << ',' << key.region_q << ','
        << (key.occ_q == CellKey::kUnknownOccupation ? std::string("U") : std::to_string(key.occ_q)) << ','
        << (cells.cells[i].trimmed ? 1 : 0) << ',';
    const auto it = by_cell.find(i);
    if (it == by_cell.end()) {
      out << "0,,,,\n";
      continue;
    }
    const auto& c = *it->second;
    out << c.n << ',' << fmt(c.estimate) << ',' << fmt(c.se) << ',' << fmt(c.estimate - 1.96 * c.se) << ','
        << fmt(c.estimate + 1.96 * c.se) << '\n';
  }
  return out.str();
}

template <typename Emb>
std::string embedding_csv(const Emb& emb) {
  std::ostringstream out;
  write_embedding(out, emb);
  return out.str();
}

ordered_json decomposition_json(const DecompositionResult& d, const PipelineResult& r, const PipelineSettings& s) {
  ordered_json j = stamp(s);
  j["raw_gap"] = estimate_json(d.raw_gap);
  j["raw_gap_untrimmed"] = estimate_json(d.raw_gap_untrimmed);
  ordered_json gaps = ordered_json::object(), phi = ordered_json::object();
  for (int k = 1; k <= 4; ++k) {
    gaps["X" + std::to_string(k)] = estimate_json(d.gap.at(k));
    phi["X" + std::to_string(k)] = estimate_json(d.phi.at(k));
  }
  j["gap"] = gaps;
  j["phi"] = phi;
  ordered_json contrib = ordered_json::object();
  for (const char* block : DecompositionResult::kBlocks) contrib[block] = estimate_json(d.contributions.at(block));
  j["contributions"] = contrib;
  j["residual"] = estimate_json(d.residual);
  j["telescoping_error"] = d.telescoping_error();
  j["n_used"] = d.n_used;
  j["n_trimmed"] = d.n_trimmed;
  j["folds"] = s.decomposition.folds;
  ordered_json clipped = ordered_json::object();
  for (const auto& [level, fits] : d.nuisance) clipped["X" + std::to_string(level)] = fits.clipped;
  j["propensity_clipped"] = clipped;
  if (r.subgroup) {
    j["subgroup"] = {{"occupations", s.subgroup_occupations},
                     {"residual", estimate_json(*r.subgroup)}};
  }
  return j;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seekers", "", "seeker CSV path"},
      {"postings", "", "posting CSV path"},
      {"output_dir", "gapdeck_out", "artifact directory"},
      {"seed", "", "master seed (required)"},
      {"threads", "0", "worker cap (0: GAPDECK_THREADS or all cores)"},
      {"folds", "5", "cross-fitting folds"},
      {"clip_eps", "0.01", "probability clip"},
      {"trim_threshold", "0.001", "cells with a lower female share are trimmed"},
      {"lambda_grid", "", "comma-separated occupation LASSO penalties (default: automatic path)"},
      {"lambda_count", "50", "size of the automatic penalty path"},
      {"embedding_folds", "5", "CV folds for the occupation embedding"},
      {"learners", "ols,lasso,forest", "stacked learners"},
      {"fit_m1", "true", "also cross-fit E[Y | D=1, X] (diagnostics only)"},
      {"lasso_folds", "3", "CV folds inside the nuisance LASSO"},
      {"lasso_grid", "20", "penalties tried by the nuisance LASSO"},
      {"stack_holdout", "0.2", "share of training rows used to fit stacking weights"},
      {"forest_trees", "200", "trees per forest"},
      {"forest_max_depth", "32", "maximum tree depth"},
      {"forest_min_leaf", "20", "minimum leaf size"},
      {"forest_mtry", "0", "features tried per split (0: ceil(sqrt(p)))"},
      {"forest_max_bins", "64", "split candidates per feature"},
      {"drop_missing_occupation", "false", "drop seekers without a desired occupation"},
      {"blp_mode", "gap", "gap or counterfactual"},
      {"blp_form", "centered", "centered or printed correction term"},
      {"blp_weighting", "full", "full or female"},
      {"blp_z", "additive", "intercept, additive, saturated or age_quintile"},
      {"kappa_max", "10", "largest sensitivity strength ratio"},
      {"sensitivity_tol", "0.0001", "bisection tolerance for kappa_star"},
      {"subgroup_occupations", "", "comma-separated occupation codes for a subgroup residual"},
      {"diagnostics", "false", "write per-sample nuisance files"},
      {"seeker_id_column", "id", ""},
      {"seeker_gender_column", "gender", ""},
      {"seeker_age_column", "age", ""},
      {"seeker_month_column", "month", ""},
      {"seeker_region_column", "region", ""},
      {"seeker_occupation_column", "occupation", ""},
      {"seeker_wage_column", "desired_wage", ""},
      {"posting_id_column", "id", ""},
      {"posting_region_column", "region", ""},
      {"posting_occupation_column", "occupation", ""},
      {"posting_lower_column", "wage_lower", ""},
      {"posting_upper_column", "wage_upper", ""},
      {"preset", "paper-shape", "simulator preset"},
      {"n_seekers", "", "simulated seekers (default: preset)"},
      {"n_postings", "", "simulated postings (default: preset)"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value");
    config.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse(in, path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return !get(key).empty(); }

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

long RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

namespace {

double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

}  // namespace

double RunConfig::get_double(const std::string& key) const { return parse_number(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t RunConfig::seed() const {
  if (!has("seed")) throw ConfigError("seed is required");
  const std::string& v = get("seed");
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v[0] == '-') throw ConfigError("seed: expected a nonnegative integer, got '" + v + "'");
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_)
    if (hashed(k)) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineSettings settings_from(const RunConfig& c, bool need_inputs) {
  PipelineSettings s;
  s.seed = c.seed();
  s.config_hash = c.hash();
  s.output_dir = c.get("output_dir");
  if (s.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (need_inputs) {
    for (const char* key : {"seekers", "postings"}) {
      if (!c.has(key)) throw ConfigError(std::string(key) + " path is required");
      const std::filesystem::path p = c.get(key);
      if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(key) + " file not found: " + p.string());
    }
  }
  s.seekers = c.get("seekers");
  s.postings = c.get("postings");

  s.seeker_schema.id = c.get("seeker_id_column");
  s.seeker_schema.gender = c.get("seeker_gender_column");
  s.seeker_schema.age = c.get("seeker_age_column");
  s.seeker_schema.month = c.get("seeker_month_column");
  s.seeker_schema.region = c.get("seeker_region_column");
  s.seeker_schema.occupation = c.get("seeker_occupation_column");
  s.seeker_schema.desired_wage = c.get("seeker_wage_column");
  s.seeker_schema.drop_missing_occupation = c.get_bool("drop_missing_occupation");
  s.posting_schema.id = c.get("posting_id_column");
  s.posting_schema.region = c.get("posting_region_column");
  s.posting_schema.occupation = c.get("posting_occupation_column");
  s.posting_schema.wage_lower = c.get("posting_lower_column");
  s.posting_schema.wage_upper = c.get("posting_upper_column");

  for (const auto& item : c.get_list("lambda_grid")) {
    const double v = parse_number("lambda_grid", item);
    if (v < 0) throw ConfigError("lambda_grid: penalties must be nonnegative");
    s.lambda_grid.push_back(v);
  }
  if (c.has("lambda_grid") && s.lambda_grid.empty()) throw ConfigError("lambda_grid: empty grid");
  s.lambda_count = static_cast<int>(c.get_int("lambda_count"));
  if (s.lambda_count < 1) throw ConfigError("lambda_count must be >= 1");
  s.embedding_folds = static_cast<int>(c.get_int("embedding_folds"));
  if (s.embedding_folds < 2) throw ConfigError("embedding_folds must be >= 2");
  s.trim_threshold = c.get_double("trim_threshold");
  if (s.trim_threshold < 0 || s.trim_threshold > 1) throw ConfigError("trim_threshold must be in [0, 1]");

  auto& d = s.decomposition;
  d.seed = s.seed;
  d.folds = static_cast<int>(c.get_int("folds"));
  if (d.folds < 2) throw ConfigError("folds must be >= 2");
  d.clip_eps = c.get_double("clip_eps");
  if (!(d.clip_eps > 0 && d.clip_eps < 0.5)) throw ConfigError("clip_eps must be in (0, 0.5)");
  auto& l = d.learners;
  l.use_ols = l.use_lasso = l.use_forest = false;
  for (const auto& name : c.get_list("learners")) {
    if (name == "ols") l.use_ols = true;
    else if (name == "lasso") l.use_lasso = true;
    else if (name == "forest") l.use_forest = true;
    else throw ConfigError("learners: unknown learner '" + name + "'");
  }
  if (l.learner_count() == 0) throw ConfigError("learners: at least one learner is required");
  l.fit_m1 = c.get_bool("fit_m1");
  l.lasso_folds = static_cast<int>(c.get_int("lasso_folds"));
  l.lasso_grid = static_cast<int>(c.get_int("lasso_grid"));
  l.stack_holdout = c.get_double("stack_holdout");
  if (l.lasso_folds < 2) throw ConfigError("lasso_folds must be >= 2");
  if (l.lasso_grid < 1) throw ConfigError("lasso_grid must be >= 1");
  if (!(l.stack_holdout > 0 && l.stack_holdout < 1)) throw ConfigError("stack_holdout must be in (0, 1)");
  l.forest.trees = static_cast<int>(c.get_int("forest_trees"));
  l.forest.max_depth = static_cast<int>(c.get_int("forest_max_depth"));
  l.forest.min_leaf = static_cast<int>(c.get_int("forest_min_leaf"));
  l.forest.mtry = static_cast<int>(c.get_int("forest_mtry"));
  l.forest.max_bins = static_cast<int>(c.get_int("forest_max_bins"));
  if (l.forest.trees < 1) throw ConfigError("forest_trees must be >= 1");
  if (l.forest.max_depth < 0) throw ConfigError("forest_max_depth must be >= 0");
  if (l.forest.min_leaf < 1) throw ConfigError("forest_min_leaf must be >= 1");
  if (l.forest.mtry < 0) throw ConfigError("forest_mtry must be >= 0");
  if (l.forest.max_bins < 2) throw ConfigError("forest_max_bins must be >= 2");
  const long threads = c.get_int("threads");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  l.threads = static_cast<std::size_t>(threads);

  const std::string mode = c.get("blp_mode");
  if (mode == "gap") s.blp.mode = BlpMode::kGap;
  else if (mode == "counterfactual") s.blp.mode = BlpMode::kCounterfactual;
  else throw ConfigError("blp_mode must be gap or counterfactual");
  const std::string form = c.get("blp_form");
  if (form == "centered") s.blp.form = EifForm::kCentered;
  else if (form == "printed") s.blp.form = EifForm::kPrinted;
  else throw ConfigError("blp_form must be centered or printed");
  const std::string weighting = c.get("blp_weighting");
  if (weighting == "full") s.blp.weighting = BlpWeighting::kFull;
  else if (weighting == "female") s.blp.weighting = BlpWeighting::kFemale;
  else throw ConfigError("blp_weighting must be full or female");
  s.blp_z = parse_z_mode(c.get("blp_z"));

  s.sensitivity.kappa_max = c.get_double("kappa_max");
  s.sensitivity.tol = c.get_double("sensitivity_tol");
  if (!(s.sensitivity.kappa_max > 0)) throw ConfigError("kappa_max must be positive");
  if (!(s.sensitivity.tol > 0)) throw ConfigError("sensitivity_tol must be positive");
  s.subgroup_occupations = c.get_list("subgroup_occupations");
  s.diagnostics = c.get_bool("diagnostics");
  return s;
}

PipelineResult run_pipeline(const PipelineSettings& s, Stage last) {
  PipelineResult r;
  auto& out = r.artifacts;

  r.seekers = load_seekers(s.seekers, s.seeker_schema);
  r.postings = load_postings(s.postings, s.posting_schema);
  {
    ordered_json j = stamp(s);
    j["seekers"] = report_json(r.seekers.report);
    j["postings"] = report_json(r.postings.report);
    out["ingest_report.json"] = dump(j);
  }
  if (last == Stage::kIngest) return r;

  r.region_embedding = fit_region_embedding(r.postings.records, r.seekers.records);
  const auto grid = s.lambda_grid.empty() ? default_occupation_lambda_grid(r.postings.records, s.lambda_count)
                                          : s.lambda_grid;
  r.occupation_embedding = fit_occupation_embedding(r.postings.records, r.seekers.records, grid, s.embedding_folds,
                                                    derive_seed(s.seed, 0xe3b));
  r.samples = embed(r.seekers.records, r.region_embedding, r.occupation_embedding, &r.embed_report);
  out["region_embedding.csv"] = embedding_csv(r.region_embedding);
  out["occupation_embedding.csv"] = embedding_csv(r.occupation_embedding);
  {
    ordered_json j = stamp(s);
    j["occupation_lambda"] = r.occupation_embedding.lambda;
    j["missing_occupation"] = r.embed_report.missing_occupation;
    j["unseen_occupation"] = r.embed_report.unseen_occupation;
    j["unseen_region"] = r.embed_report.unseen_region;
    j["substituted_regions"] = r.region_embedding.substituted;
    j["substituted_occupations"] = r.occupation_embedding.substituted;
    out["embedding_report.json"] = dump(j);
  }
  if (last == Stage::kEmbed) return r;

  r.cells = build_cells(r.samples, s.trim_threshold);
  r.trim = apply_trim(r.samples, r.cells);
  out["cells.csv"] = cells_csv(r.cells);
  out["trim_mask.csv"] = trim_mask_csv(r.seekers.records, r.samples, r.cells);
  out["figure1.csv"] = figure1_csv(r.cells);
  out["figure2.csv"] = figure2_csv(r.cells);
  if (last == Stage::kDescribe) return r;

  const Samples& kept = r.trim.kept;
  r.decomposition = decompose(kept, s.decomposition, r.trim.n_trimmed, &r.samples);
  if (!s.subgroup_occupations.empty()) {
    const std::set<std::string> codes(s.subgroup_occupations.begin(), s.subgroup_occupations.end());
    r.subgroup = subgroup_decompose(kept, codes, s.decomposition);
  }
  out["decomposition.json"] = dump(decomposition_json(*r.decomposition, r, s));
  out["figure5.csv"] = figure5_csv(*r.decomposition);
  if (s.diagnostics) {
    for (const auto& [level, fits] : r.decomposition->nuisance) {
      std::ostringstream diag;
      write_nuisance_diagnostics(diag, kept, fits);
      out["nuisance_X" + std::to_string(level) + ".csv"] = diag.str();
    }
  }
  if (last == Stage::kDecompose) return r;

  const NuisanceFits& x4 = r.decomposition->nuisance.at(4);
  {
    const ZDesign z = build_z_design(kept, s.blp_z);
    r.blp = blp(kept, z, with_group_propensity(x4, kept, z, s.decomposition.folds), s.blp);
    const ZDesign za = build_z_design(kept, ZMode::kAgeQuintile);
    r.age_quintiles = blp(kept, za, with_group_propensity(x4, kept, za, s.decomposition.folds), s.blp);
    r.cell_table = cell_heterogeneity(kept, x4, s.decomposition.folds, s.blp);
    ordered_json j = stamp(s);
    j["blp"] = blp_json(*r.blp);
    j["age_quintiles"] = blp_json(*r.age_quintiles);
    j["cells_reported"] = r.cell_table.size();
    out["blp.json"] = dump(j);
    out["figure6.csv"] = figure6_csv(r.cell_table, r.cells);
  }
  if (last == Stage::kBlp) return r;

  r.sensitivity = sensitivity(kept, *r.decomposition, s.sensitivity);
  {
    const auto& v = *r.sensitivity;
    ordered_json j = stamp(s);
    j["method"] = v.method;
    j["residual"] = v.residual;
    j["occ_contribution"] = v.occ_contribution;
    j["gain_y"] = v.gain_y;
    j["gain_d"] = v.gain_d;
    j["scale"] = v.scale;
    j["kappa_max"] = v.kappa_max;
    j["kappa_star_infinite"] = v.kappa_star_infinite;
    j["kappa_star"] = v.kappa_star_infinite ? ordered_json(nullptr) : ordered_json(v.kappa_star);
    ordered_json curve = ordered_json::array();
    for (const auto& [k, b] : v.bound_curve) curve.push_back({{"kappa", k}, {"bound", b}});
    j["bound_curve"] = curve;
    j["warnings"] = v.warnings;
    out["sensitivity.json"] = dump(j);
  }
  if (last == Stage::kSensitivity) return r;

  for (auto& [name, content] : emit_report(r, s)) out[name] = content;
  return r;
}

Artifacts emit_report(const PipelineResult& r, const PipelineSettings& s) {
  Artifacts out;
  out["figure1.csv"] = figure1_csv(r.cells);
  out["figure2.csv"] = figure2_csv(r.cells);
  ordered_json j = stamp(s);
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    out["figure5.csv"] = figure5_csv(d);
    j["raw_gap"] = estimate_json(d.raw_gap);
    j["raw_gap_untrimmed"] = estimate_json(d.raw_gap_untrimmed);
    ordered_json contrib = ordered_json::object();
    for (const char* block : DecompositionResult::kBlocks) contrib[block] = estimate_json(d.contributions.at(block));
    j["contributions"] = contrib;
    j["residual"] = estimate_json(d.residual);
    j["n_used"] = d.n_used;
    j["n_trimmed"] = d.n_trimmed;
  }
  if (r.blp) out["figure6.csv"] = figure6_csv(r.cell_table, r.cells);
  if (r.sensitivity)
    j["kappa_star"] =
        r.sensitivity->kappa_star_infinite ? ordered_json(nullptr) : ordered_json(r.sensitivity->kappa_star);
  j["trimmed_cells"] = r.cells.trimmed_count();
  std::vector<std::string> warnings = r.cells.warnings;
  for (const auto& reg : r.region_embedding.substituted)
    warnings.push_back("region " + std::to_string(reg) + " has no postings; median embedding used");
  if (r.embed_report.unseen_occupation)
    warnings.push_back(std::to_string(r.embed_report.unseen_occupation) +
                       " seekers desire occupations absent from postings; median embedding used");
  if (r.sensitivity)
    for (const auto& w : r.sensitivity->warnings) warnings.push_back(w);
  j["warnings"] = warnings;
  out["summary.json"] = dump(j);
  return out;
}

Artifacts report_from_directory(const std::filesystem::path& dir) {
  auto read_json = [&](const std::string& name) {
    std::ifstream in(dir / name);
    if (!in) throw ConfigError("report: missing " + (dir / name).string() + "; run the pipeline first");
    try {
      return ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw DataError("report: cannot parse " + (dir / name).string() + ": " + e.what());
    }
  };
  const auto d = read_json("decomposition.json");
  ordered_json j;
  j["config_hash"] = d.at("config_hash");
  j["seed"] = d.at("seed");
  for (const char* key : {"raw_gap", "raw_gap_untrimmed", "contributions", "residual", "n_used", "n_trimmed"})
    j[key] = d.at(key);
  j["kappa_star"] = nullptr;
  if (std::filesystem::exists(dir / "sensitivity.json")) j["kappa_star"] = read_json("sensitivity.json").at("kappa_star");
  if (std::filesystem::exists(dir / "cells.csv")) {
    std::ifstream in(dir / "cells.csv");
    std::string line;
    std::getline(in, line);
    int trimmed = 0;
    while (std::getline(in, line))
      if (!line.empty() && line.back() == '1') ++trimmed;
    j["trimmed_cells"] = trimmed;
  }
  j["warnings"] = ordered_json::array();
  return {{"summary.json", dump(j)}};
}

void write_artifacts(const Artifacts& artifacts, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  for (const auto& [name, content] : artifacts) {
    const auto target = dir / name;
    const auto tmp = dir / (name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + tmp.string());
      f << content;
      if (!f) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw ConfigError("cannot move " + tmp.string() + " to " + target.string() + ": " + ec.message());
  }
}

Artifacts simulate_artifacts(const ScenarioConfig& scenario) {
  const auto data = generate(scenario);
  Artifacts out;
  {
    std::ostringstream s;
    write_seekers(s, data.seekers);
    out["seekers.csv"] = s.str();
    std::ostringstream p;
    write_postings(p, data.postings);
    out["postings.csv"] = p.str();
  }
  const Population pop = population(scenario);
  const auto values = oracle_values(pop);
  ordered_json j;
  j["preset"] = scenario.preset;
  j["seed"] = scenario.seed;
  j["n_seekers"] = scenario.n_seekers;
  j["n_postings"] = scenario.n_postings;
  j["confounder_effect"] = scenario.confounder_effect;
  ordered_json phi = ordered_json::object();
  for (int k = 0; k <= 4; ++k) phi["X" + std::to_string(k)] = values.phi[k];
  j["phi"] = phi;
  j["phi_direct"] = oracle_phi_direct(scenario);
  j["raw_gap"] = values.raw_gap;
  j["contributions"] = values.contributions;
  j["residual"] = values.residual;
  const auto sens = oracle_sensitivity(pop);
  j["sensitivity"] = {{"gain_y", sens.gain_y},
                      {"gain_d", sens.gain_d},
                      {"scale", sens.scale},
                      {"kappa_star", std::isfinite(sens.kappa_star) ? ordered_json(sens.kappa_star) : nullptr}};

  // cell-level truths under the cell grouping that default settings produce
  const auto region = fit_region_embedding(data.postings, data.seekers);
  const auto occ = fit_occupation_embedding(data.postings, data.seekers,
                                            default_occupation_lambda_grid(data.postings), 5, scenario.seed);
  Samples samples = embed(data.seekers, region, occ);
  const CellTable cells = build_cells(samples);
  const auto lattice_cells = map_lattice(pop, cells, region, occ);
  const Population kept = restrict_population(pop, kept_points(lattice_cells, cells));
  ordered_json cell_gaps = ordered_json::object();
  for (const auto& [cell, gap] : oracle_cell_targets(kept, lattice_cells))
    cell_gaps[CellKey::from_index(cell).label()] = gap;
  j["cell_gaps"] = cell_gaps;
  ordered_json age_gaps = ordered_json::object();
  for (const auto& [q, gap] : oracle_age_quintile_targets(kept, lattice_cells))
    age_gaps["age_q" + std::to_string(q)] = gap;
  j["age_quintile_gaps"] = age_gaps;
  out["oracle.json"] = dump(j);
  return out;
}

}  // namespace gapdeck
