#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gapdeck/errors.hpp"
#include "gapdeck/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEstimation = 4;

struct Command {
  std::string name;
  std::string help;
  gapdeck::Stage stage;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"ingest", "validate input files and write ingest_report.json", gapdeck::Stage::kIngest},
      {"embed", "fit region and occupation embeddings", gapdeck::Stage::kEmbed},
      {"describe", "build the 150 cells, trimming mask and figure 1/2 data", gapdeck::Stage::kDescribe},
      {"decompose", "adjusted gaps and the sequential decomposition", gapdeck::Stage::kDecompose},
      {"blp", "best linear predictor of the residual gap and the cell table", gapdeck::Stage::kBlp},
      {"sensitivity", "occupation-benchmarked sensitivity analysis", gapdeck::Stage::kSensitivity},
      {"run", "all stages plus summary.json", gapdeck::Stage::kAll},
  };
  return list;
}

gapdeck::RunConfig build_config(const std::string& config_path, const std::map<std::string, CLI::Option*>& options,
                                const std::map<std::string, std::string>& values) {
  gapdeck::RunConfig config = config_path.empty() ? gapdeck::RunConfig() : gapdeck::RunConfig::load(config_path);
  for (const auto& [key, opt] : options)
    if (opt->count() > 0) config.set(key, values.at(key));
  return config;
}

void print_summary(const gapdeck::PipelineResult& r) {
  std::printf("seekers kept %zu of %zu, postings kept %zu of %zu\n", r.seekers.report.rows_kept,
              r.seekers.report.rows_read, r.postings.report.rows_kept, r.postings.report.rows_read);
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    std::printf("raw gap %.4f (%.4f)  residual %.4f (%.4f)  n_used %zu  n_trimmed %zu\n", d.raw_gap.estimate,
                d.raw_gap.se, d.residual.estimate, d.residual.se, d.n_used, d.n_trimmed);
    for (const char* block : gapdeck::DecompositionResult::kBlocks) {
      const auto& c = d.contributions.at(block);
      std::printf("  %-10s %.4f (%.4f)\n", block, c.estimate, c.se);
    }
  }
  if (r.sensitivity) {
    if (r.sensitivity->kappa_star_infinite)
      std::printf("kappa_star: not reached below kappa_max\n");
    else
      std::printf("kappa_star %.4f\n", r.sensitivity->kappa_star);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gapdeck: doubly robust decomposition of gender gaps in desired wages"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value configuration file");
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : gapdeck::config_keys()) {
    auto* opt = app.add_option("--" + key.name, values[key.name], key.help);
    if (key.name == "threads") opt->envname("GAPDECK_THREADS");
    options[key.name] = opt;
  }

  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands()) subs[c.name] = app.add_subcommand(c.name, c.help);
  auto* simulate = app.add_subcommand("simulate", "write a synthetic scenario with its exact oracle values");
  auto* report = app.add_subcommand("report", "rebuild summary.json from artifacts in output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto config = build_config(config_path, options, values);
    if (simulate->parsed()) {
      auto scenario = gapdeck::scenario_preset(config.get("preset"));
      scenario.seed = config.seed();
      if (config.has("n_seekers")) scenario.n_seekers = static_cast<std::size_t>(config.get_int("n_seekers"));
      if (config.has("n_postings")) scenario.n_postings = static_cast<std::size_t>(config.get_int("n_postings"));
      scenario.validate();
      const std::filesystem::path dir = config.get("output_dir");
      gapdeck::write_artifacts(gapdeck::simulate_artifacts(scenario), dir);
      std::printf("wrote %s scenario (%zu seekers, %zu postings) to %s\n", scenario.preset.c_str(),
                  scenario.n_seekers, scenario.n_postings, dir.string().c_str());
      return 0;
    }
    if (report->parsed()) {
      const std::filesystem::path dir = config.get("output_dir");
      gapdeck::write_artifacts(gapdeck::report_from_directory(dir), dir);
      std::printf("wrote %s\n", (dir / "summary.json").string().c_str());
      return 0;
    }
    for (const auto& c : commands()) {
      if (!subs.at(c.name)->parsed()) continue;
      const auto settings = gapdeck::settings_from(config);
      const auto result = gapdeck::run_pipeline(settings, c.stage);
      gapdeck::write_artifacts(result.artifacts, settings.output_dir);
      print_summary(result);
      return 0;
    }
  } catch (const gapdeck::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gapdeck::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const gapdeck::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
