#include <doctest.h>

#include <cmath>
#include <map>

#include <json.hpp>

#include "blr/synth.hpp"
#include "helpers.hpp"

using namespace blr;

namespace {

SynthConfig discrete_z_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = 6000;
  cfg.seed = seed;
  cfg.covariates = {CovariateSpec::normal("x1"), CovariateSpec::binary("b1", 0.5),
                    CovariateSpec::categorical("g", {0.3, 0.3, 0.4}), CovariateSpec::normal("x2")};
  // (Intercept), b1, g[c1], g[c2], x1, x2
  cfg.theta_true = (VectorXd(6) << -0.3, 0.7, -0.5, 0.4, 0.9, -0.6).finished();
  cfg.attrition.mode = AttritionSpec::Mode::OnZ;
  cfg.attrition.z_columns = {1, 2, 3};
  cfg.attrition.intercept = -1.0;
  cfg.attrition.gamma = (VectorXd(3) << 1.0, -0.8, 0.6).finished();
  cfg.v_effect = 0.5;
  return cfg;
}

ChainConfig quick_chains(std::uint64_t seed) {
  ChainConfig c;
  c.n_chains = 2;
  c.warmup = 300;
  c.draws_per_chain = 300;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("feature names follow the encoding order") {
  const SynthConfig cfg = discrete_z_config(1);
  CHECK(cfg.feature_names() ==
        std::vector<std::string>{"(Intercept)", "b1", "g[c1]", "g[c2]", "x1", "x2"});
  CHECK(default_synth_config().feature_names() ==
        std::vector<std::string>{"(Intercept)", "b1", "x1", "x2", "x3", "x4"});
}

TEST_CASE("no attrition keeps every row") {
  const SynthCohort c = generate(default_synth_config(3));
  CHECK(c.full.n() == 2000);
  CHECK(c.observed.n() == c.full.n());
  CHECK(c.observed.X == c.full.X);
  CHECK(c.observed.y == c.full.y);
  CHECK(c.retention() == 1.0);
}

TEST_CASE("truth probabilities and structure") {
  const SynthConfig cfg = discrete_z_config(4);
  const SynthCohort c = generate(cfg);
  for (Eigen::Index i = 0; i < c.full.n(); ++i) {
    CHECK(c.true_prob(i) == sigmoid(c.full.X.row(i).dot(cfg.theta_true)));
    const double block = c.full.X(i, 2) + c.full.X(i, 3);
    CHECK(block <= 1.0);
  }
  CHECK((c.full.X.col(0).array() == 1.0).all());
  CHECK(((c.full.y.array() == 0.0) || (c.full.y.array() == 1.0)).all());
  long observed = 0;
  for (int a : c.attrited) observed += a == 0;
  CHECK(observed == c.observed.n());
}

TEST_CASE("generate is reproducible per seed") {
  const SynthConfig cfg = discrete_z_config(5);
  const SynthCohort a = generate(cfg);
  const SynthCohort b = generate(cfg);
  CHECK(a.full.X == b.full.X);
  CHECK(a.full.y == b.full.y);
  CHECK(a.attrited == b.attrited);
  SynthConfig other = cfg;
  other.seed = 6;
  CHECK(generate(other).full.X != a.full.X);
}

TEST_CASE("attrition mode does not change the covariate stream") {
  SynthConfig cfg = discrete_z_config(7);
  const SynthCohort with = generate(cfg);
  cfg.attrition = AttritionSpec{};
  const SynthCohort without = generate(cfg);
  CHECK(with.full.X == without.full.X);
  CHECK(with.full.y == without.full.y);
}

TEST_CASE("random attrition retains about two thirds") {
  SynthConfig cfg = default_synth_config(8);
  cfg.n = 2698;
  cfg.attrition.mode = AttritionSpec::Mode::Random;
  cfg.attrition.q = 0.34;
  const SynthCohort c = generate(cfg);
  const double expected = 2698 * 0.66;
  const double band = 3.0 * std::sqrt(2698 * 0.34 * 0.66);
  CHECK(std::abs(static_cast<double>(c.observed.n()) - expected) < band);
}

TEST_CASE("attrition on Z leaves P(Y | Z) unchanged among the retained") {
  const SynthCohort c = generate(discrete_z_config(9));
  CHECK(c.retention() > 0.4);
  CHECK(c.retention() < 0.9);
  auto bucket = [](const Dataset& ds, Eigen::Index i) {
    return static_cast<int>(ds.X(i, 1)) * 3 + static_cast<int>(ds.X(i, 2)) + 2 * static_cast<int>(ds.X(i, 3));
  };
  std::map<int, std::pair<double, double>> full, kept;  // bucket -> (positives, count)
  for (Eigen::Index i = 0; i < c.full.n(); ++i) {
    auto& f = full[bucket(c.full, i)];
    f.first += c.full.y(i);
    f.second += 1;
  }
  for (Eigen::Index i = 0; i < c.observed.n(); ++i) {
    auto& k = kept[bucket(c.observed, i)];
    k.first += c.observed.y(i);
    k.second += 1;
  }
  CHECK(full.size() == 6);
  for (const auto& [b, f] : full) {
    const auto& k = kept.at(b);
    const double p_full = f.first / f.second;
    const double p_kept = k.first / k.second;
    const double se = std::sqrt(p_full * (1 - p_full) / k.second);
    INFO("bucket " << b);
    CHECK(std::abs(p_kept - p_full) < 2 * se);
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg = default_synth_config();
  cfg.theta_true.resize(3);
  CHECK_THROWS_AS(generate(cfg), Error);
  cfg = default_synth_config();
  cfg.covariates[4].prob = 1.5;
  CHECK_THROWS_AS(generate(cfg), Error);
  cfg = discrete_z_config(1);
  cfg.covariates[2].probs = {0.5, 0.6, 0.1};
  CHECK_THROWS_AS(generate(cfg), Error);
  cfg = discrete_z_config(1);
  cfg.attrition.z_columns = {0, 1, 2};
  CHECK_THROWS_AS(generate(cfg), Error);
}

TEST_CASE("cohort files") {
  SynthConfig cfg = discrete_z_config(10);
  cfg.n = 300;
  const SynthCohort c = generate(cfg);
  testing::TempDir dir("synth");
  write_cohort(dir.path(), c, cfg);
  const RawTable full = load_table(dir / "full.csv");
  const RawTable obs = load_table(dir / "observed.csv");
  CHECK(full.n_rows() == 300);
  CHECK(full.column_names.back() == "attrited");
  CHECK(static_cast<Eigen::Index>(obs.n_rows()) == c.observed.n());

  const Dataset enc = encode(obs, c.schema);
  CHECK(enc.feature_names == c.observed.feature_names);
  const Dataset raw_scale = restandardize(enc, c.observed.standardization);
  CHECK((raw_scale.X - c.observed.X).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(enc.y == c.observed.y);

  const auto truth = nlohmann::json::parse(testing::read_text(dir / "truth.json"));
  CHECK(truth["seed"] == 10);
  CHECK(truth["n_observed"] == c.observed.n());
  CHECK(truth["attrition"] == "on_z");
  CHECK(truth["theta_true"].size() == 6);
  CHECK(truth["theta_true"][4].get<double>() == 0.9);
}

TEST_CASE("bias probe under outcome-independent and outcome-driven attrition") {
  SynthConfig cfg = default_synth_config(11);
  cfg.attrition.mode = AttritionSpec::Mode::OnY;
  cfg.attrition.z_columns = {1, 2};
  cfg.attrition.gamma = (VectorXd(2) << 0.8, -0.6).finished();
  cfg.attrition.intercept = -1.2;
  const auto spec = ModelSpec<double>::weakly_informative(6);

  cfg.attrition.outcome_effect = 0.0;
  const BiasReport none = bias_probe(cfg, spec, quick_chains(1), 20);
  CHECK(none.replications == 20);
  CHECK(none.standard_error.size() == 6);
  CHECK((none.standard_error.array() > 0).all());
  for (Eigen::Index j = 0; j < 6; ++j) {
    INFO(none.parameters[j]);
    CHECK(std::abs(none.mean_bias(j)) < 0.05);
  }

  cfg.attrition.outcome_effect = 2.0;
  const BiasReport strong = bias_probe(cfg, spec, quick_chains(1), 20);
  CHECK(std::abs(strong.mean_bias(0)) > 0.1);
  CHECK(strong.mean_retention < none.mean_retention);

  testing::TempDir dir("synth");
  write_bias_report(dir / "bias.csv", strong);
  CHECK(testing::read_text(dir / "bias.csv").rfind("parameter,mean_bias,std_error\n(Intercept),", 0) == 0);
}
