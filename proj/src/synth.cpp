#include "blr/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "blr/csv.hpp"

namespace blr {

Eigen::Index CovariateSpec::width() const {
  return kind == Kind::Categorical ? static_cast<Eigen::Index>(probs.size()) - 1 : 1;
}

namespace {

// Encoding order matches data::encode: binaries, then categoricals, then quantitatives.
std::vector<std::size_t> encoding_order(const std::vector<CovariateSpec>& covs) {
  std::vector<std::size_t> order;
  for (auto kind : {CovariateSpec::Kind::Binary, CovariateSpec::Kind::Categorical,
                    CovariateSpec::Kind::Normal}) {
    for (std::size_t i = 0; i < covs.size(); ++i) {
      if (covs[i].kind == kind) order.push_back(i);
    }
  }
  return order;
}

const char* mode_name(AttritionSpec::Mode m) {
  switch (m) {
    case AttritionSpec::Mode::None: return "none";
    case AttritionSpec::Mode::Random: return "random";
    case AttritionSpec::Mode::OnZ: return "on_z";
    case AttritionSpec::Mode::OnY: return "on_y";
  }
  return "?";
}

}  // namespace

std::vector<std::string> SynthConfig::feature_names() const {
  std::vector<std::string> names{"(Intercept)"};
  for (auto i : encoding_order(covariates)) {
    const auto& c = covariates[i];
    if (c.kind == CovariateSpec::Kind::Categorical) {
      for (std::size_t k = 1; k < c.probs.size(); ++k) {
        names.push_back(indicator_name(c.name, CovariateSpec::level_label(k)));
      }
    } else {
      names.push_back(c.name);
    }
  }
  return names;
}

void SynthConfig::validate() const {
  if (n < 1) throw config_error("synth.config", "n must be >= 1");
  for (const auto& c : covariates) {
    if (c.name.empty() || c.name == "y" || c.name == "attrited") {
      throw config_error("synth.config", "invalid covariate name '" + c.name + "'");
    }
    if (c.kind == CovariateSpec::Kind::Binary && !(c.prob >= 0.0 && c.prob <= 1.0)) {
      throw config_error("synth.config", "binary probability of '" + c.name + "' outside [0, 1]");
    }
    if (c.kind == CovariateSpec::Kind::Categorical) {
      if (c.probs.size() < 2) throw config_error("synth.config", "categorical '" + c.name + "' needs >= 2 levels");
      double total = 0;
      for (double p : c.probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw config_error("synth.config", "level probability outside [0, 1]");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw config_error("synth.config", "level probabilities of '" + c.name + "' must sum to 1");
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(feature_names().size());
  if (theta_true.size() != dim) {
    throw config_error("synth.config", "theta_true has " + std::to_string(theta_true.size()) +
                                           " entries, expected " + std::to_string(dim));
  }
  const auto& a = attrition;
  if (a.mode == AttritionSpec::Mode::Random && !(a.q >= 0.0 && a.q <= 1.0)) {
    throw config_error("synth.config", "attrition probability outside [0, 1]");
  }
  if (a.mode == AttritionSpec::Mode::OnZ || a.mode == AttritionSpec::Mode::OnY) {
    if (static_cast<Eigen::Index>(a.z_columns.size()) != a.gamma.size()) {
      throw config_error("synth.config", "z_columns and gamma differ in length");
    }
    for (auto z : a.z_columns) {
      if (z < 1 || z >= dim) throw config_error("synth.config", "z column outside the covariate set");
    }
  }
}

SynthConfig default_synth_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = 2000;
  cfg.seed = seed;
  cfg.covariates = {CovariateSpec::normal("x1"), CovariateSpec::normal("x2"),
                    CovariateSpec::normal("x3"), CovariateSpec::normal("x4"),
                    CovariateSpec::binary("b1", 0.4)};
  // (Intercept), b1, x1, x2, x3, x4
  cfg.theta_true.resize(6);
  cfg.theta_true << -0.5, 0.8, 1.0, -0.7, 0.4, -0.2;
  return cfg;
}

SynthCohort generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto names = cfg.feature_names();
  const auto dim = static_cast<Eigen::Index>(names.size());
  const auto order = encoding_order(cfg.covariates);
  std::vector<Eigen::Index> first_col(cfg.covariates.size());
  {
    Eigen::Index col = 1;
    for (auto i : order) {
      first_col[i] = col;
      col += cfg.covariates[i].width();
    }
  }

  SynthCohort out;
  out.theta_true = cfg.theta_true;
  Dataset& full = out.full;
  full.feature_names = names;
  full.feature_kinds.assign(static_cast<std::size_t>(dim), FeatureKind::Intercept);
  for (auto i : order) {
    const auto& c = cfg.covariates[i];
    const auto kind = c.kind == CovariateSpec::Kind::Normal   ? FeatureKind::Quantitative
                      : c.kind == CovariateSpec::Kind::Binary ? FeatureKind::Binary
                                                              : FeatureKind::Indicator;
    for (Eigen::Index k = 0; k < c.width(); ++k) full.feature_kinds[first_col[i] + k] = kind;
    if (kind == FeatureKind::Quantitative) full.standardization.columns.push_back({first_col[i], 0.0, 1.0});
  }
  full.X = MatrixXd::Zero(cfg.n, dim);
  full.X.col(0).setOnes();
  full.y.resize(cfg.n);
  out.true_prob.resize(cfg.n);
  out.attrited.assign(static_cast<std::size_t>(cfg.n), 0);

  out.raw.column_names.clear();
  for (const auto& c : cfg.covariates) out.raw.column_names.push_back(c.name);
  out.raw.column_names.push_back("y");
  out.raw.column_names.push_back("attrited");

  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    std::vector<Cell> raw_row;
    for (std::size_t c = 0; c < cfg.covariates.size(); ++c) {
      const auto& spec = cfg.covariates[c];
      switch (spec.kind) {
        case CovariateSpec::Kind::Normal: {
          const double v = normal(rng);
          full.X(i, first_col[c]) = v;
          raw_row.emplace_back(v);
          break;
        }
        case CovariateSpec::Kind::Binary: {
          const double v = unif(rng) < spec.prob ? 1.0 : 0.0;
          full.X(i, first_col[c]) = v;
          raw_row.emplace_back(v);
          break;
        }
        case CovariateSpec::Kind::Categorical: {
          std::discrete_distribution<std::size_t> level(spec.probs.begin(), spec.probs.end());
          const std::size_t k = level(rng);
          if (k > 0) full.X(i, first_col[c] + static_cast<Eigen::Index>(k) - 1) = 1.0;
          raw_row.emplace_back(CovariateSpec::level_label(k));
          break;
        }
      }
    }
    // U, V and both uniforms are always drawn so the covariate stream does not
    // depend on the attrition mode.
    const double u = normal(rng);
    const double v = normal(rng);
    const double u_y = unif(rng);
    const double u_a = unif(rng);

    const double eta = full.X.row(i).dot(cfg.theta_true);
    out.true_prob(i) = sigmoid(eta);
    const double y = u_y < sigmoid(eta + cfg.u_effect * u) ? 1.0 : 0.0;
    full.y(i) = y;

    const auto& a = cfg.attrition;
    double p_attrit = 0.0;
    switch (a.mode) {
      case AttritionSpec::Mode::None: break;
      case AttritionSpec::Mode::Random: p_attrit = a.q; break;
      case AttritionSpec::Mode::OnZ:
      case AttritionSpec::Mode::OnY: {
        double lin = a.intercept + cfg.v_effect * v;
        for (std::size_t z = 0; z < a.z_columns.size(); ++z) {
          lin += a.gamma(static_cast<Eigen::Index>(z)) * full.X(i, a.z_columns[z]);
        }
        if (a.mode == AttritionSpec::Mode::OnY) lin += a.outcome_effect * y;
        p_attrit = sigmoid(lin);
        break;
      }
    }
    out.attrited[i] = u_a < p_attrit ? 1 : 0;
    raw_row.emplace_back(y);
    raw_row.emplace_back(static_cast<double>(out.attrited[i]));
    out.raw.rows.push_back(std::move(raw_row));
  }
  full.row_ids.resize(static_cast<std::size_t>(cfg.n));
  for (Eigen::Index i = 0; i < cfg.n; ++i) full.row_ids[i] = static_cast<std::size_t>(i);

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    if (!out.attrited[i]) kept.push_back(i);
  }
  out.observed = full.subset(kept);

  out.schema.outcome = "y";
  out.schema.intercept = true;
  for (auto i : order) {
    const auto& c = cfg.covariates[i];
    switch (c.kind) {
      case CovariateSpec::Kind::Normal: out.schema.quantitative_cols.push_back(c.name); break;
      case CovariateSpec::Kind::Binary: out.schema.binary_cols.push_back(c.name); break;
      case CovariateSpec::Kind::Categorical: {
        CategoricalColumn cat{c.name, {}, CovariateSpec::level_label(0)};
        for (std::size_t k = 0; k < c.probs.size(); ++k) cat.categories.push_back(CovariateSpec::level_label(k));
        out.schema.categorical_cols.push_back(std::move(cat));
        break;
      }
    }
  }
  return out;
}

namespace {

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return csv::format(*d);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return "NA";
}

nlohmann::ordered_json schema_json(const Schema& s) {
  nlohmann::ordered_json j;
  j["outcome"] = s.outcome;
  j["intercept"] = s.intercept;
  j["binary"] = s.binary_cols;
  j["categorical"] = nlohmann::ordered_json::array();
  for (const auto& c : s.categorical_cols) {
    j["categorical"].push_back({{"name", c.name}, {"categories", c.categories}, {"omitted", c.omitted}});
  }
  j["quantitative"] = s.quantitative_cols;
  return j;
}

}  // namespace

void write_cohort(const std::filesystem::path& dir, const SynthCohort& cohort, const SynthConfig& cfg) {
  std::filesystem::create_directories(dir);
  const auto& header = cohort.raw.column_names;
  std::vector<std::string> observed_header(header.begin(), header.end() - 1);
  std::vector<std::vector<std::string>> full_rows, observed_rows;
  for (std::size_t i = 0; i < cohort.raw.rows.size(); ++i) {
    std::vector<std::string> r;
    for (const auto& c : cohort.raw.rows[i]) r.push_back(cell_text(c));
    if (!cohort.attrited[i]) observed_rows.emplace_back(r.begin(), r.end() - 1);
    full_rows.push_back(std::move(r));
  }
  csv::write_file(dir / "full.csv", header, full_rows);
  csv::write_file(dir / "observed.csv", observed_header, observed_rows);

  nlohmann::ordered_json truth;
  truth["seed"] = cfg.seed;
  truth["n"] = cfg.n;
  truth["n_observed"] = cohort.observed.n();
  truth["retention"] = cohort.retention();
  truth["attrition"] = mode_name(cfg.attrition.mode);
  truth["feature_names"] = cohort.full.feature_names;
  truth["theta_true"] = std::vector<double>(cohort.theta_true.data(),
                                            cohort.theta_true.data() + cohort.theta_true.size());
  truth["schema"] = schema_json(cohort.schema);
  std::ofstream out(dir / "truth.json", std::ios::binary);
  if (!out) throw data_error("synth.write", "cannot write truth.json");
  out << truth.dump(2) << '\n';
}

BiasReport bias_probe(const SynthConfig& cfg, const ModelSpec<double>& spec,
                      const ChainConfig& chains, int replications) {
  if (replications < 2) throw config_error("synth.bias", "need at least two replications");
  const auto names = cfg.feature_names();
  const auto dim = static_cast<Eigen::Index>(names.size());
  MatrixXd errors(replications, dim);
  double retention = 0;
  for (int r = 0; r < replications; ++r) {
    SynthConfig rep = cfg;
    rep.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(r);
    const SynthCohort cohort = generate(rep);
    ChainConfig cc = chains;
    cc.seed = chains.seed + static_cast<std::uint64_t>(r);
    const PosteriorDraws pd = run_chains(cohort.observed, spec, cc);
    errors.row(r) = pd.flattened().colwise().mean() - cohort.theta_true.transpose();
    retention += cohort.retention();
  }
  BiasReport report;
  report.parameters = names;
  report.replications = replications;
  report.mean_retention = retention / replications;
  report.mean_bias = errors.colwise().mean().transpose();
  const MatrixXd centered = errors.rowwise() - report.mean_bias.transpose();
  report.standard_error =
      (centered.array().square().colwise().sum() / (replications - 1.0)).sqrt().transpose() /
      std::sqrt(static_cast<double>(replications));
  return report;
}

void write_bias_report(const std::filesystem::path& path, const BiasReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < report.parameters.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    rows.push_back({report.parameters[j], csv::format(report.mean_bias(k)),
                    csv::format(report.standard_error(k))});
  }
  csv::write_file(path, {"parameter", "mean_bias", "std_error"}, rows);
}

}  // namespace blr
