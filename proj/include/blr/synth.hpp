#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blr/common.hpp"
#include "blr/data.hpp"
#include "blr/model.hpp"
#include "blr/sampler.hpp"

namespace blr {

struct CovariateSpec {
  enum class Kind { Normal, Binary, Categorical };
  std::string name;
  Kind kind = Kind::Normal;
  double prob = 0.5;          // Binary: P(x = 1)
  std::vector<double> probs;  // Categorical: level probabilities; level 0 is the omitted baseline

  static CovariateSpec normal(std::string name) { return {std::move(name), Kind::Normal, 0.5, {}}; }
  static CovariateSpec binary(std::string name, double p) {
    return {std::move(name), Kind::Binary, p, {}};
  }
  static CovariateSpec categorical(std::string name, std::vector<double> probs) {
    return {std::move(name), Kind::Categorical, 0.5, std::move(probs)};
  }
  /// Encoded column count: 1, or levels - 1 for categoricals.
  Eigen::Index width() const;
  /// Raw label of categorical level k.
  static std::string level_label(std::size_t k) { return "c" + std::to_string(k); }
};

/**
 * How rows go missing at the second wave.
 *
 * on_z: P(A = 1) = sigmoid(intercept + gamma' z), z = encoded covariate
 * columns listed in `z_columns` (1-based, so 0 would be the intercept).
 * on_y additionally adds `outcome_effect * y`, breaking the conditional
 * independence of A and Y given X.
 */
struct AttritionSpec {
  enum class Mode { None, Random, OnZ, OnY };
  Mode mode = Mode::None;
  double q = 0.0;  // Random: P(A = 1)
  std::vector<Eigen::Index> z_columns;
  double intercept = 0.0;
  VectorXd gamma;
  double outcome_effect = 0.0;
};

struct SynthConfig {
  Eigen::Index n = 2000;
  VectorXd theta_true;  // intercept first, then encoded covariate columns
  std::vector<CovariateSpec> covariates;
  AttritionSpec attrition;
  double u_effect = 0.0;  // weight of an unobserved N(0,1) cause of Y only
  double v_effect = 0.0;  // weight of an unobserved N(0,1) cause of A only
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<std::string> feature_names() const;
};

/// Five-covariate default: four standard normals and one binary.
SynthConfig default_synth_config(std::uint64_t seed = 1);

struct SynthCohort {
  Dataset full;               // every generated row
  std::vector<int> attrited;  // A per row of `full`
  Dataset observed;           // rows with A = 0
  VectorXd theta_true;
  VectorXd true_prob;         // sigmoid(x' theta_true) per row of `full`
  RawTable raw;               // full cohort in raw CSV form, with an "attrited" column
  Schema schema;              // encodes `raw` back to `full` (up to standardization)

  double retention() const {
    return full.n() ? static_cast<double>(observed.n()) / static_cast<double>(full.n()) : 0.0;
  }
};

SynthCohort generate(const SynthConfig& cfg);

/// observed.csv (A = 0 rows), full.csv (all rows plus "attrited"), truth.json.
void write_cohort(const std::filesystem::path& dir, const SynthCohort& cohort, const SynthConfig& cfg);

struct BiasReport {
  std::vector<std::string> parameters;
  VectorXd mean_bias;       // mean over replications of (posterior mean - truth)
  VectorXd standard_error;  // across replications
  int replications = 0;
  double mean_retention = 0;
};

/// Refit the observed cohort of `replications` seeded cohorts and average the error.
BiasReport bias_probe(const SynthConfig& cfg, const ModelSpec<double>& spec,
                      const ChainConfig& chains, int replications);

void write_bias_report(const std::filesystem::path& path, const BiasReport& report);

}  // namespace blr
