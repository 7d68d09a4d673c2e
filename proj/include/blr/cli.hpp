#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blr/analysis.hpp"
#include "blr/data.hpp"
#include "blr/eval.hpp"
#include "blr/model.hpp"
#include "blr/sampler.hpp"
#include "blr/synth.hpp"

namespace blr::cli {

struct AnalysisSettings {
  double mass = 0.95;
  std::optional<double> p;  // defaults to the observed outcome rate
  std::vector<double> d_values = default_d_values();
  double delta = 1.0;
  int max_lag = 30;
  int n_bins = 20;
};

struct EvalSettings {
  double test_fraction = 0.3;
  bool reduced_grid = true;
  int folds = 3;
};

/// Everything a subcommand needs, parsed from one JSON document.
struct RunConfig {
  std::filesystem::path config_path;
  std::string config_text;  // verbatim, echoed into manifests
  std::filesystem::path data_path;
  Schema schema;
  bool has_schema = false;
  double prior_mean = 0.0;
  double prior_variance = 1000.0;
  ChainConfig chains;
  AnalysisSettings analysis;
  EvalSettings eval;
  std::optional<SynthConfig> synth;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  ModelSpec<double> model_spec(Eigen::Index dim) const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> thin;
  bool reduced_grid = false;
};

/// Parse and validate a config file. Relative paths resolve against the config's directory.
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

void cmd_fit(const RunConfig& cfg);
void cmd_diagnose(const RunConfig& cfg, const std::filesystem::path& draws);
void cmd_analyze(const RunConfig& cfg, const std::filesystem::path& draws);
void cmd_evaluate(const RunConfig& cfg);
void cmd_synth(const RunConfig& cfg);

/// Entry point; returns the process exit code (0, 2 config, 3 data, 4 numeric).
int run(int argc, char** argv);

}  // namespace blr::cli
