#include "blr/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "blr/analysis.hpp"
#include "blr/csv.hpp"
#include "blr/diagnostics.hpp"

namespace blr::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw config_error("config", std::string("bad value for '") + key + "': " + e.what());
  }
}

Schema parse_schema(const json& j) {
  Schema s;
  s.outcome = get_or<std::string>(j, "outcome", "");
  s.intercept = get_or<bool>(j, "intercept", true);
  s.binary_cols = get_or<std::vector<std::string>>(j, "binary", {});
  s.quantitative_cols = get_or<std::vector<std::string>>(j, "quantitative", {});
  if (j.contains("categorical")) {
    for (const auto& c : j["categorical"]) {
      CategoricalColumn col;
      col.name = get_or<std::string>(c, "name", "");
      col.categories = get_or<std::vector<std::string>>(c, "categories", {});
      col.omitted = get_or<std::string>(c, "omitted", col.categories.empty() ? "" : col.categories.front());
      s.categorical_cols.push_back(std::move(col));
    }
  }
  s.validate();
  return s;
}

AttritionSpec::Mode parse_mode(const std::string& m) {
  if (m == "none") return AttritionSpec::Mode::None;
  if (m == "random") return AttritionSpec::Mode::Random;
  if (m == "on_z") return AttritionSpec::Mode::OnZ;
  if (m == "on_y") return AttritionSpec::Mode::OnY;
  throw config_error("config.synth", "unknown attrition mode '" + m + "'");
}

SynthConfig parse_synth(const json& j, std::uint64_t seed) {
  SynthConfig cfg = default_synth_config(seed);
  cfg.n = get_or<Eigen::Index>(j, "n", cfg.n);
  if (j.contains("covariates")) {
    cfg.covariates.clear();
    for (const auto& c : j["covariates"]) {
      const auto name = get_or<std::string>(c, "name", "");
      const auto type = get_or<std::string>(c, "type", "normal");
      if (type == "normal") {
        cfg.covariates.push_back(CovariateSpec::normal(name));
      } else if (type == "binary") {
        cfg.covariates.push_back(CovariateSpec::binary(name, get_or<double>(c, "p", 0.5)));
      } else if (type == "categorical") {
        cfg.covariates.push_back(
            CovariateSpec::categorical(name, get_or<std::vector<double>>(c, "probs", {})));
      } else {
        throw config_error("config.synth", "unknown covariate type '" + type + "'");
      }
    }
  }
  if (j.contains("theta_true")) {
    const auto v = get_or<std::vector<double>>(j, "theta_true", {});
    cfg.theta_true = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  cfg.u_effect = get_or<double>(j, "u_effect", 0.0);
  cfg.v_effect = get_or<double>(j, "v_effect", 0.0);
  if (j.contains("attrition")) {
    const auto& a = j["attrition"];
    cfg.attrition.mode = parse_mode(get_or<std::string>(a, "mode", "none"));
    cfg.attrition.q = get_or<double>(a, "q", 0.0);
    cfg.attrition.intercept = get_or<double>(a, "intercept", 0.0);
    cfg.attrition.outcome_effect = get_or<double>(a, "c", 0.0);
    const auto names = cfg.feature_names();
    for (const auto& z : get_or<std::vector<std::string>>(a, "z", {})) {
      auto it = std::find(names.begin(), names.end(), z);
      if (it == names.end() || it == names.begin()) {
        throw config_error("config.synth", "attrition variable '" + z + "' is not a covariate");
      }
      cfg.attrition.z_columns.push_back(static_cast<Eigen::Index>(it - names.begin()));
    }
    const auto g = get_or<std::vector<double>>(a, "gamma", {});
    cfg.attrition.gamma = Eigen::Map<const VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("io.write", "cannot write " + path.string());
  out << text;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (!cfg.has_schema) throw config_error("config", "no schema section");
  if (cfg.data_path.empty()) throw config_error("config", "no data path");
  const RawTable raw = load_table(cfg.data_path);
  return encode(raw, cfg.schema);
}

void write_manifest(const RunConfig& cfg, const std::string& command, double seconds,
                    const json& extra) {
  json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["config_path"] = cfg.config_path.string();
  try {
    m["config"] = json::parse(cfg.config_text);
  } catch (const json::exception&) {
    m["config"] = cfg.config_text;
  }
  m["wall_time_seconds"] = seconds;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text(cfg.out_dir / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ModelSpec<double> RunConfig::model_spec(Eigen::Index dim) const {
  return {VectorXd::Constant(dim, prior_mean), VectorXd::Constant(dim, prior_variance)};
}

RunConfig load_config(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw config_error("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw config_error("config", std::string("invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  cfg.config_path = path;
  cfg.config_text = buf.str();
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (overrides.seed) cfg.seed = *overrides.seed;
  cfg.out_dir = resolve(get_or<std::string>(j, "out_dir", "out"));
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (j.contains("data")) cfg.data_path = resolve(get_or<std::string>(j, "data", ""));
  if (j.contains("schema")) {
    cfg.schema = parse_schema(j["schema"]);
    cfg.has_schema = true;
  }
  if (j.contains("model")) {
    cfg.prior_mean = get_or<double>(j["model"], "prior_mean", 0.0);
    cfg.prior_variance = get_or<double>(j["model"], "prior_variance", 1000.0);
    if (!(cfg.prior_variance > 0.0)) throw config_error("config.model", "prior_variance must be positive");
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    cfg.chains.n_chains = get_or<int>(s, "chains", cfg.chains.n_chains);
    cfg.chains.warmup = get_or<int>(s, "warmup", cfg.chains.warmup);
    cfg.chains.thin = get_or<int>(s, "thin", cfg.chains.thin);
    cfg.chains.draws_per_chain = get_or<int>(s, "draws", cfg.chains.draws_per_chain);
    cfg.chains.max_tree_depth = get_or<int>(s, "max_tree_depth", cfg.chains.max_tree_depth);
    cfg.chains.target_accept = get_or<double>(s, "target_accept", cfg.chains.target_accept);
  }
  if (overrides.thin) cfg.chains.thin = *overrides.thin;
  cfg.chains.seed = cfg.seed;
  cfg.chains.validate();
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    cfg.analysis.mass = get_or<double>(a, "mass", cfg.analysis.mass);
    if (a.contains("p") && !a["p"].is_null()) cfg.analysis.p = get_or<double>(a, "p", 0.0);
    cfg.analysis.d_values = get_or<std::vector<double>>(a, "d", cfg.analysis.d_values);
    cfg.analysis.delta = get_or<double>(a, "delta", cfg.analysis.delta);
    cfg.analysis.max_lag = get_or<int>(a, "max_lag", cfg.analysis.max_lag);
    cfg.analysis.n_bins = get_or<int>(a, "bins", cfg.analysis.n_bins);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    cfg.eval.test_fraction = get_or<double>(e, "test_fraction", cfg.eval.test_fraction);
    const auto grid = get_or<std::string>(e, "grid", "reduced");
    if (grid != "reduced" && grid != "full") throw config_error("config.eval", "grid must be 'reduced' or 'full'");
    cfg.eval.reduced_grid = grid == "reduced";
    cfg.eval.folds = get_or<int>(e, "folds", cfg.eval.folds);
  }
  if (overrides.reduced_grid) cfg.eval.reduced_grid = true;
  if (j.contains("synth")) cfg.synth = parse_synth(j["synth"], cfg.seed);
  return cfg;
}

void cmd_fit(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = load_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  const PosteriorDraws pd = run_chains(ds, cfg.model_spec(ds.dim()), cfg.chains);
  write_draws(cfg.out_dir / "draws.csv", pd);
  const DiagnosticsReport report = diagnose(pd, cfg.analysis.max_lag, cfg.analysis.n_bins);
  write_diagnostics(cfg.out_dir / "diagnostics.csv", report);

  json extra;
  extra["n_rows"] = ds.n();
  extra["n_dropped"] = ds.n_dropped;
  extra["feature_names"] = ds.feature_names;
  std::vector<double> steps;
  for (const auto& c : pd.chains) steps.push_back(c.step_size);
  extra["step_sizes"] = steps;
  extra["divergent"] = report.n_divergent;
  write_manifest(cfg, "fit", elapsed(start), extra);
}

void cmd_diagnose(const RunConfig& cfg, const fs::path& draws) {
  const auto start = std::chrono::steady_clock::now();
  const PosteriorDraws pd = read_draws(draws);
  fs::create_directories(cfg.out_dir);
  const DiagnosticsReport report = diagnose(pd, cfg.analysis.max_lag, cfg.analysis.n_bins);
  write_diagnostics(cfg.out_dir / "diagnostics.csv", report);
  write_rank_histograms(cfg.out_dir / "rank_histograms.csv", report);
  write_autocorrelations(cfg.out_dir / "autocorrelation.csv", report);
  std::vector<std::vector<std::string>> div;
  for (std::size_t c = 0; c < report.n_divergent.size(); ++c) {
    div.push_back({std::to_string(c + 1), std::to_string(report.n_divergent[c])});
  }
  csv::write_file(cfg.out_dir / "divergences.csv", {"chain", "n_divergent"}, div);
  write_manifest(cfg, "diagnose", elapsed(start), json{{"draws", draws.string()}});
}

void cmd_analyze(const RunConfig& cfg, const fs::path& draws_path) {
  const auto start = std::chrono::steady_clock::now();
  const PosteriorDraws pd = read_draws(draws_path);
  const Dataset ds = load_dataset(cfg);
  if (pd.feature_names != ds.feature_names) {
    throw data_error("analyze", "draws parameters do not match the encoded dataset columns");
  }
  fs::create_directories(cfg.out_dir);
  const MatrixXd draws = pd.flattened();
  const double mass = cfg.analysis.mass;

  std::vector<std::string> names;
  std::vector<HpdInterval> hpds;
  std::vector<Summary> stats;
  for (Eigen::Index j = 0; j < pd.dim(); ++j) {
    names.push_back(pd.feature_names[j]);
    hpds.push_back(hpd(draws.col(j), mass));
    stats.push_back(summarize(draws.col(j)));
  }
  write_hpd_table(cfg.out_dir / "posterior_hpd.csv", names, hpds);
  write_summary_table(cfg.out_dir / "posterior_stats.csv", names, stats);

  std::vector<std::string> odds_names;
  std::vector<HpdInterval> odds_hpds;
  std::vector<Summary> odds_stats;
  for (Eigen::Index j = 0; j < pd.dim(); ++j) {
    if (ds.feature_kinds[j] == FeatureKind::Intercept) continue;
    const auto oc = odds_change(draws.col(j), cfg.analysis.delta, pd.feature_names[j]);
    odds_names.push_back(oc.name);
    odds_hpds.push_back(odds_change_hpd(draws.col(j), cfg.analysis.delta, mass));
    odds_stats.push_back(summarize(oc.draws));
  }
  write_hpd_table(cfg.out_dir / "odds_hpd.csv", odds_names, odds_hpds);
  write_summary_table(cfg.out_dir / "odds_stats.csv", odds_names, odds_stats);

  const double p = cfg.analysis.p.value_or(ds.outcome_rate());
  const DecisionTable table = decision_table(pd, p, cfg.analysis.d_values, cfg.analysis.delta);
  write_decision_table(cfg.out_dir / "decisions.csv", table);
  write_thresholds(cfg.out_dir / "thresholds.csv", table);

  std::vector<std::string> me_names;
  std::vector<HpdInterval> me_hpds;
  std::vector<Summary> me_stats;
  for (Eigen::Index j = 0; j < ds.dim(); ++j) {
    if (ds.feature_kinds[j] != FeatureKind::Quantitative) continue;
    const auto me = marginal_effect_distribution(ds, pd, j);
    me_names.push_back(me.name);
    me_hpds.push_back(me.effects.size() >= 10 ? hpd(me.effects, mass)
                                              : HpdInterval{me.effects.minCoeff(), me.effects.maxCoeff(), mass});
    me_stats.push_back(summarize(me.effects));
  }
  write_hpd_table(cfg.out_dir / "marginal_hpd.csv", me_names, me_hpds);
  write_summary_table(cfg.out_dir / "marginal_stats.csv", me_names, me_stats);
  write_manifest(cfg, "analyze", elapsed(start), json{{"draws", draws_path.string()}, {"p", p}});
}

void cmd_evaluate(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = load_dataset(cfg);
  const SplitResult parts = split(ds, cfg.eval.test_fraction, cfg.seed);
  fs::create_directories(cfg.out_dir);
  const PosteriorDraws pd = run_chains(parts.train, cfg.model_spec(ds.dim()), cfg.chains);
  const auto grid = cfg.eval.reduced_grid ? reduced_grid() : full_grid();
  const GridSearchResult search = grid_search(parts.train, grid, cfg.eval.folds, cfg.seed);
  const auto [logistic, forest] = compare(parts.train, parts.test, pd, search.best, cfg.seed);

  write_roc(cfg.out_dir / "roc_logistic.csv", logistic.roc);
  write_roc(cfg.out_dir / "roc_forest.csv", forest.roc);
  write_auc_table(cfg.out_dir / "auc.csv", {logistic, forest});
  std::vector<std::vector<std::string>> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& c = grid[g];
    rows.push_back({std::to_string(c.n_trees), std::to_string(c.m_features), std::to_string(c.min_node),
                    csv::format(c.sample_fraction), c.with_replacement ? "true" : "false",
                    std::isfinite(search.scores[g]) ? csv::format(search.scores[g]) : "NA"});
  }
  csv::write_file(cfg.out_dir / "grid_search.csv",
                  {"n_trees", "m_features", "min_node", "sample_fraction", "replacement", "cv_auc"}, rows);
  write_manifest(cfg, "evaluate", elapsed(start),
                 json{{"n_train", parts.train.n()}, {"n_test", parts.test.n()},
                      {"forest", search.best.describe()}, {"cv_auc", search.best_score}});
}

void cmd_synth(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SynthConfig sc = cfg.synth ? *cfg.synth : default_synth_config(cfg.seed);
  sc.seed = cfg.seed;
  const SynthCohort cohort = generate(sc);
  write_cohort(cfg.out_dir, cohort, sc);
  write_manifest(cfg, "synth", elapsed(start),
                 json{{"n", cohort.full.n()}, {"n_observed", cohort.observed.n()}});
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian logistic regression: NUTS sampling, diagnostics, and analysis"};
  app.require_subcommand(1);
  fs::path config_path;
  Overrides overrides;
  std::uint64_t seed = 0;
  std::string out_dir;
  int thin = 0;
  std::string draws;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--thin", thin, "override sampler thinning")->check(CLI::PositiveNumber);
    sub->add_flag("--reduced-grid", overrides.reduced_grid, "use the reduced forest grid");
  };
  auto* fit = app.add_subcommand("fit", "sample the posterior and write draws + diagnostics");
  auto* diag = app.add_subcommand("diagnose", "R-hat, ESS, rank histograms, autocorrelation");
  auto* analyze = app.add_subcommand("analyze", "HPD, odds change, decisions, marginal effects");
  auto* evaluate = app.add_subcommand("evaluate", "ROC/AUC against a tuned random forest");
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  for (auto* s : {fit, diag, analyze, evaluate, synth}) add_common(s);
  for (auto* s : {diag, analyze}) s->add_option("--draws", draws, "draws CSV (default: <out-dir>/draws.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    auto* active = app.get_subcommands().front();
    if (active->count("--seed")) overrides.seed = seed;
    if (active->count("--out-dir")) overrides.out_dir = fs::path(out_dir);
    if (active->count("--thin")) overrides.thin = thin;
    const RunConfig cfg = load_config(config_path, overrides);
    const fs::path draws_path = draws.empty() ? cfg.out_dir / "draws.csv" : fs::path(draws);
    if (active == fit) cmd_fit(cfg);
    if (active == diag) cmd_diagnose(cfg, draws_path);
    if (active == analyze) cmd_analyze(cfg, draws_path);
    if (active == evaluate) cmd_evaluate(cfg);
    if (active == synth) cmd_synth(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Numeric);
  }
  return 0;
}

}  // namespace blr::cli
