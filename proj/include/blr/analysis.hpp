#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "blr/common.hpp"
#include "blr/data.hpp"
#include "blr/sampler.hpp"

namespace blr {

using DrawVector = Eigen::Ref<const VectorXd>;

struct HpdInterval {
  double lower;
  double upper;
  double mass;
};

/// Shortest window of ceil(mass * L) consecutive order statistics; ties go to the lowest start.
HpdInterval hpd(const DrawVector& draws, double mass = 0.95);

struct Summary {
  double mean;
  double q25;
  double median;
  double q75;
};

/// Quantile of sorted values with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p);

Summary summarize(const DrawVector& draws);

struct OddsChangeDraws {
  std::string name;
  double delta = 1.0;
  VectorXd draws;  // exp(delta * theta_j) - 1, all > -1
};

OddsChangeDraws odds_change(const DrawVector& theta_j, double delta = 1.0, std::string name = {});

/// HPD window of theta_j mapped through exp(delta * theta) - 1, so the odds interval
/// excludes 0 exactly when the coefficient interval does.
HpdInterval odds_change_hpd(const DrawVector& theta_j, double delta = 1.0, double mass = 0.95);

/// Relative change in the odds p/(1-p) when the probability moves from p to p + d.
double omega(double p, double d);

struct HypothesisThresholds {
  double p;
  double d;         // |d|
  double epsilon1;  // omega(p, -|d|) < 0
  double epsilon2;  // omega(p, +|d|) > 0
};

HypothesisThresholds make_thresholds(double p, double d);

enum class Verdict { Negative, Null, Positive };

/// "-", "0" or "+".
const char* verdict_symbol(Verdict v);

struct Decision {
  Verdict verdict;
  double p_negative;
  double p_null;
  double p_positive;
  Eigen::Index n_negative;  // draw counts behind the probabilities
  Eigen::Index n_null;
  Eigen::Index n_positive;
};

/// Empirical region probabilities of the odds-change draws and their argmax,
/// with ties resolved in the order Null, Negative, Positive.
Decision decide(const DrawVector& odds_change_draws, const HypothesisThresholds& th);

struct DecisionTable {
  std::vector<std::string> parameters;
  std::vector<double> d_values;
  std::vector<HypothesisThresholds> thresholds;  // one per d
  std::vector<std::vector<Decision>> decisions;  // [parameter][d]
};

inline const std::vector<double>& default_d_values() {
  static const std::vector<double> d{0.01, 0.02, 0.03, 0.04, 0.05};
  return d;
}

/// Verdict grid for every non-intercept parameter against each |d|.
DecisionTable decision_table(const PosteriorDraws& pd, double p,
                             const std::vector<double>& d_values = default_d_values(),
                             double delta = 1.0);

/// (1/L) sum_l sigmoid(x' theta_l), draws given as L x dim.
double posterior_predictive(const DrawVector& x, const Eigen::Ref<const MatrixXd>& draws);
double posterior_predictive(const DrawVector& x, const PosteriorDraws& pd);
/// Row-wise predictive probabilities for a design matrix.
VectorXd posterior_predictive_rows(const Eigen::Ref<const MatrixXd>& X,
                                   const Eigen::Ref<const MatrixXd>& draws);

/// d/dx_j of the posterior predictive: (1/L) sum_l s_l (1 - s_l) theta_lj.
double marginal_effect(const DrawVector& x, const Eigen::Ref<const MatrixXd>& draws, Eigen::Index j);
double marginal_effect(const DrawVector& x, const PosteriorDraws& pd, Eigen::Index j);

struct MarginalEffectSample {
  std::string name;
  VectorXd effects;  // one per dataset row
};

/// Marginal effect of quantitative column j at every row of `ds`.
MarginalEffectSample marginal_effect_distribution(const Dataset& ds, const PosteriorDraws& pd,
                                                  Eigen::Index j);

// CSV exports; each mirrors the column layout of the corresponding results table.
void write_hpd_table(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const std::vector<HpdInterval>& rows);
void write_summary_table(const std::filesystem::path& path, const std::vector<std::string>& names,
                         const std::vector<Summary>& rows);
void write_decision_table(const std::filesystem::path& path, const DecisionTable& table);
void write_thresholds(const std::filesystem::path& path, const DecisionTable& table);

}  // namespace blr
