#include "blr/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "blr/csv.hpp"
#include "blr/model.hpp"

namespace blr {

HpdInterval hpd(const DrawVector& draws, double mass) {
  const auto L = draws.size();
  if (L < 10) throw data_error("analysis.hpd", "need at least 10 draws");
  if (!(mass > 0.0 && mass < 1.0)) throw config_error("analysis.hpd", "mass must lie in (0, 1)");
  std::vector<double> sorted(draws.data(), draws.data() + L);
  std::sort(sorted.begin(), sorted.end());
  // ceil(mass * L) with a guard against 0.95 * 100 landing a hair above 95
  const double target = mass * static_cast<double>(L);
  auto window = static_cast<Eigen::Index>(std::ceil(target - 1e-9 * std::max(1.0, target)));
  window = std::clamp<Eigen::Index>(window, 1, L);
  Eigen::Index best = 0;
  double best_width = sorted[window - 1] - sorted[0];
  for (Eigen::Index i = 1; i + window <= L; ++i) {
    const double w = sorted[i + window - 1] - sorted[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {sorted[best], sorted[best + window - 1], mass};
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw data_error("analysis", "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(const DrawVector& draws) {
  if (draws.size() < 1) throw data_error("analysis.summary", "no draws");
  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  double mean = draws.mean();
  // keep the mean of a constant sample exactly equal to the constant
  if (sorted.front() == sorted.back()) mean = sorted.front();
  return {mean, quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5),
          quantile_sorted(sorted, 0.75)};
}

OddsChangeDraws odds_change(const DrawVector& theta_j, double delta, std::string name) {
  if (!std::isfinite(delta)) throw config_error("analysis.odds", "delta must be finite");
  OddsChangeDraws out;
  out.name = std::move(name);
  out.delta = delta;
  out.draws = (delta * theta_j.array()).unaryExpr([](double v) { return std::expm1(v); });
  return out;
}

HpdInterval odds_change_hpd(const DrawVector& theta_j, double delta, double mass) {
  if (!std::isfinite(delta)) throw config_error("analysis.odds", "delta must be finite");
  const HpdInterval h = hpd(theta_j, mass);
  const double a = std::expm1(delta * h.lower);
  const double b = std::expm1(delta * h.upper);
  return {std::min(a, b), std::max(a, b), mass};
}

double omega(double p, double d) {
  if (!(p > 0.0 && p < 1.0) || !(p + d > 0.0 && p + d < 1.0)) {
    throw config_error("analysis.omega", "p and p + d must lie in (0, 1)");
  }
  const double q = p + d;
  return (q / (1.0 - q)) / (p / (1.0 - p)) - 1.0;
}

HypothesisThresholds make_thresholds(double p, double d) {
  const double a = std::abs(d);
  if (!(a > 0.0) || !(p - a > 0.0) || !(p + a < 1.0)) {
    throw config_error("analysis.thresholds",
                       "need |d| > 0 and p - |d| > 0 and p + |d| < 1 (p=" + csv::format(p) +
                           ", d=" + csv::format(d) + ")");
  }
  return {p, a, omega(p, -a), omega(p, a)};
}

const char* verdict_symbol(Verdict v) {
  switch (v) {
    case Verdict::Negative: return "-";
    case Verdict::Null: return "0";
    case Verdict::Positive: return "+";
  }
  return "?";
}

Decision decide(const DrawVector& odds_change_draws, const HypothesisThresholds& th) {
  const auto L = odds_change_draws.size();
  if (L == 0) throw data_error("analysis.decide", "no draws");
  Eigen::Index neg = 0, pos = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    const double v = odds_change_draws(l);
    if (v < th.epsilon1) {
      ++neg;
    } else if (v > th.epsilon2) {
      ++pos;
    }
  }
  const Eigen::Index null = L - neg - pos;
  Decision d;
  const double Ld = static_cast<double>(L);
  d.p_negative = static_cast<double>(neg) / Ld;
  d.p_null = static_cast<double>(null) / Ld;
  d.p_positive = static_cast<double>(pos) / Ld;
  d.n_negative = neg;
  d.n_null = null;
  d.n_positive = pos;
  if (null >= neg && null >= pos) {
    d.verdict = Verdict::Null;
  } else if (neg >= pos) {
    d.verdict = Verdict::Negative;
  } else {
    d.verdict = Verdict::Positive;
  }
  return d;
}

DecisionTable decision_table(const PosteriorDraws& pd, double p, const std::vector<double>& d_values,
                             double delta) {
  DecisionTable table;
  table.d_values = d_values;
  for (double d : d_values) table.thresholds.push_back(make_thresholds(p, d));
  const MatrixXd draws = pd.flattened();
  for (Eigen::Index j = 0; j < pd.dim(); ++j) {
    if (pd.feature_names[j] == "(Intercept)") continue;
    const OddsChangeDraws oc = odds_change(draws.col(j), delta, pd.feature_names[j]);
    std::vector<Decision> row;
    for (const auto& th : table.thresholds) row.push_back(decide(oc.draws, th));
    table.parameters.push_back(pd.feature_names[j]);
    table.decisions.push_back(std::move(row));
  }
  return table;
}

double posterior_predictive(const DrawVector& x, const Eigen::Ref<const MatrixXd>& draws) {
  if (x.size() != draws.cols()) throw data_error("analysis.predict", "dimension mismatch");
  if (draws.rows() == 0) throw data_error("analysis.predict", "no draws");
  const VectorXd eta = draws * x;
  return eta.unaryExpr([](double z) { return sigmoid(z); }).mean();
}

double posterior_predictive(const DrawVector& x, const PosteriorDraws& pd) {
  return posterior_predictive(x, pd.flattened());
}

VectorXd posterior_predictive_rows(const Eigen::Ref<const MatrixXd>& X,
                                   const Eigen::Ref<const MatrixXd>& draws) {
  if (X.cols() != draws.cols()) throw data_error("analysis.predict", "dimension mismatch");
  if (draws.rows() == 0) throw data_error("analysis.predict", "no draws");
  VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = posterior_predictive(X.row(i).transpose(), draws);
  return out;
}

double marginal_effect(const DrawVector& x, const Eigen::Ref<const MatrixXd>& draws, Eigen::Index j) {
  if (x.size() != draws.cols()) throw data_error("analysis.marginal", "dimension mismatch");
  if (j < 0 || j >= draws.cols()) throw data_error("analysis.marginal", "coefficient index out of range");
  if (draws.rows() == 0) throw data_error("analysis.marginal", "no draws");
  const VectorXd eta = draws * x;
  double total = 0;
  for (Eigen::Index l = 0; l < eta.size(); ++l) {
    const double s = sigmoid(eta(l));
    total += s * (1.0 - s) * draws(l, j);
  }
  return total / static_cast<double>(eta.size());
}

double marginal_effect(const DrawVector& x, const PosteriorDraws& pd, Eigen::Index j) {
  return marginal_effect(x, pd.flattened(), j);
}

MarginalEffectSample marginal_effect_distribution(const Dataset& ds, const PosteriorDraws& pd,
                                                  Eigen::Index j) {
  if (j < 0 || j >= ds.dim()) throw data_error("analysis.marginal", "coefficient index out of range");
  if (ds.feature_kinds[j] != FeatureKind::Quantitative) {
    throw data_error("analysis.marginal", "'" + ds.feature_names[j] + "' is not quantitative");
  }
  if (pd.feature_names != ds.feature_names) {
    throw data_error("analysis.marginal", "draws and dataset have different features");
  }
  const MatrixXd draws = pd.flattened();
  MarginalEffectSample out;
  out.name = ds.feature_names[j];
  out.effects.resize(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out.effects(i) = marginal_effect(ds.X.row(i).transpose(), draws, j);
  }
  return out;
}

void write_hpd_table(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const std::vector<HpdInterval>& rows) {
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back({names[i], csv::format(rows[i].lower), csv::format(rows[i].upper)});
  }
  const std::string pct = csv::format(rows.empty() ? 95.0 : rows.front().mass * 100.0);
  csv::write_file(path, {"parameter", "hpd" + pct + "_lower", "hpd" + pct + "_upper"}, out);
}

void write_summary_table(const std::filesystem::path& path, const std::vector<std::string>& names,
                         const std::vector<Summary>& rows) {
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = rows[i];
    out.push_back({names[i], csv::format(s.mean), csv::format(s.q25), csv::format(s.median),
                   csv::format(s.q75)});
  }
  csv::write_file(path, {"parameter", "mean", "q25", "median", "q75"}, out);
}

void write_decision_table(const std::filesystem::path& path, const DecisionTable& table) {
  std::vector<std::string> header{"parameter"};
  for (double d : table.d_values) header.push_back(csv::format(std::abs(d)));
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < table.parameters.size(); ++i) {
    std::vector<std::string> r{table.parameters[i]};
    for (const auto& dec : table.decisions[i]) r.emplace_back(verdict_symbol(dec.verdict));
    out.push_back(std::move(r));
  }
  csv::write_file(path, header, out);
}

void write_thresholds(const std::filesystem::path& path, const DecisionTable& table) {
  std::vector<std::vector<std::string>> out;
  for (const auto& th : table.thresholds) {
    out.push_back({csv::format(th.p), csv::format(th.d), csv::format(th.epsilon1),
                   csv::format(th.epsilon2)});
  }
  csv::write_file(path, {"p", "abs_d", "epsilon1", "epsilon2"}, out);
}

}  // namespace blr
