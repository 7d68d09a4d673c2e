#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>

#include <json.hpp>

#include "blr/cli.hpp"
#include "blr/csv.hpp"
#include "helpers.hpp"

using namespace blr;

namespace {

struct Outcome {
  int code;
  std::string err;
};

std::string cli_path() {
  const char* p = std::getenv("BLR_CLI");
  REQUIRE_MESSAGE(p != nullptr, "BLR_CLI must point at the blr executable");
  return p;
}

Outcome run_cli(const std::string& args, const testing::TempDir& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = "'" + cli_path() + "' " + args + " >/dev/null 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_text(err)};
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  return csv::read_records(p);
}

// 50 rows: outcome, a binary, a three-level categorical and two scores.
void write_toy_data(const std::filesystem::path& p) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* schools[] = {"State", "Municipal", "Private"};
  std::ostringstream out;
  out << "behind,female,school,math,language\n";
  for (int i = 0; i < 50; ++i) {
    const double math = 50 + 10 * nd(rng);
    const double lang = 50 + 10 * nd(rng);
    const int female = u(rng) < 0.5;
    const double eta = -1.0 - 0.08 * (math - 50) + 0.5 * female;
    out << (u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0) << ',' << female << ',' << schools[i % 3] << ','
        << math << ',' << lang << '\n';
  }
  testing::write_text(p, out.str());
}

nlohmann::json toy_config() {
  return {{"seed", 7},
          {"data", "toy.csv"},
          {"out_dir", "out"},
          {"schema",
           {{"outcome", "behind"},
            {"binary", {"female"}},
            {"categorical", {{{"name", "school"}, {"categories", {"State", "Municipal", "Private"}}, {"omitted", "State"}}}},
            {"quantitative", {"math", "language"}}}},
          {"sampler", {{"chains", 2}, {"warmup", 100}, {"draws", 100}}},
          {"eval", {{"test_fraction", 0.3}, {"grid", "reduced"}, {"folds", 3}}}};
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { testing::write_text(p, j.dump(2)); }

}  // namespace

TEST_CASE("fit on a toy dataset") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  write_json(dir / "run.json", toy_config());
  const Outcome r = run_cli("fit --config '" + (dir / "run.json").string() + "'", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto draws = read_csv(dir / "out/draws.csv");
  CHECK(draws.size() == 201);
  CHECK(draws[0] == std::vector<std::string>{"chain", "draw", "divergent", "(Intercept)", "female",
                                             "school[Municipal]", "school[Private]", "math", "language"});
  const auto diag = read_csv(dir / "out/diagnostics.csv");
  CHECK(diag.size() == 1 + 6);
  CHECK(diag[0] == std::vector<std::string>{"parameter", "Rhat", "Bulk_ESS", "Tail_ESS"});
  const auto manifest = nlohmann::json::parse(testing::read_text(dir / "out/manifest_fit.json"));
  CHECK(manifest["seed"] == 7);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest["config"]["sampler"]["draws"] == 100);
}

TEST_CASE("fit reruns are byte-identical") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  write_json(dir / "run.json", toy_config());
  const std::string cfg = "--config '" + (dir / "run.json").string() + "'";
  REQUIRE(run_cli("fit " + cfg + " --out-dir '" + (dir / "a").string() + "'", dir).code == 0);
  REQUIRE(run_cli("fit " + cfg + " --out-dir '" + (dir / "b").string() + "'", dir).code == 0);
  CHECK(testing::read_text(dir / "a/draws.csv") == testing::read_text(dir / "b/draws.csv"));
  CHECK(testing::read_text(dir / "a/diagnostics.csv") == testing::read_text(dir / "b/diagnostics.csv"));
  REQUIRE(run_cli("fit " + cfg + " --seed 8 --out-dir '" + (dir / "c").string() + "'", dir).code == 0);
  CHECK(testing::read_text(dir / "a/draws.csv") != testing::read_text(dir / "c/draws.csv"));
}

TEST_CASE("corrupted CSV fails in data.load") {
  testing::TempDir dir("cli");
  testing::write_text(dir / "toy.csv", "behind,female,school,math,language\n1,0,State,50\n");
  write_json(dir / "run.json", toy_config());
  const Outcome r = run_cli("fit --config '" + (dir / "run.json").string() + "'", dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("data.load") != std::string::npos);
}

TEST_CASE("config errors exit with code 2") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  auto cfg = toy_config();
  cfg["sampler"]["target_accept"] = 1.5;
  write_json(dir / "bad.json", cfg);
  CHECK(run_cli("fit --config '" + (dir / "bad.json").string() + "'", dir).code == 2);
  testing::write_text(dir / "broken.json", "{ not json");
  CHECK(run_cli("fit --config '" + (dir / "broken.json").string() + "'", dir).code == 2);
  CHECK(run_cli("fit", dir).code == 2);
  CHECK(run_cli("frobnicate --config x", dir).code == 2);
}

TEST_CASE("analyze emits the result tables") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  auto cfg = toy_config();
  cfg["analysis"] = {{"p", 0.1303}};
  write_json(dir / "run.json", cfg);
  const std::string c = "--config '" + (dir / "run.json").string() + "'";
  REQUIRE(run_cli("fit " + c, dir).code == 0);
  const Outcome r = run_cli("analyze " + c, dir);
  INFO(r.err);
  REQUIRE(r.code == 0);

  const auto dec = read_csv(dir / "out/decisions.csv");
  CHECK(dec[0] == std::vector<std::string>{"parameter", "0.01", "0.02", "0.03", "0.04", "0.05"});
  CHECK(dec.size() == 1 + 5);
  for (std::size_t i = 1; i < dec.size(); ++i)
    for (std::size_t k = 1; k < dec[i].size(); ++k) CHECK((dec[i][k] == "-" || dec[i][k] == "0" || dec[i][k] == "+"));

  const auto th = read_csv(dir / "out/thresholds.csv");
  CHECK(th[0] == std::vector<std::string>{"p", "abs_d", "epsilon1", "epsilon2"});
  CHECK(std::stod(th[1][2]) == doctest::Approx(-0.0872).epsilon(5e-4 / 0.0872));
  CHECK(std::stod(th[1][3]) == doctest::Approx(0.0892).epsilon(5e-4 / 0.0892));

  CHECK(read_csv(dir / "out/posterior_hpd.csv").size() == 1 + 6);
  CHECK(read_csv(dir / "out/posterior_stats.csv")[0] ==
        std::vector<std::string>{"parameter", "mean", "q25", "median", "q75"});
  CHECK(read_csv(dir / "out/odds_hpd.csv").size() == 1 + 5);
  CHECK(read_csv(dir / "out/odds_stats.csv").size() == 1 + 5);
  const auto me = read_csv(dir / "out/marginal_stats.csv");
  REQUIRE(me.size() == 3);
  CHECK(me[1][0] == "math");
  CHECK(me[2][0] == "language");
  CHECK(read_csv(dir / "out/marginal_hpd.csv").size() == 3);
}

TEST_CASE("p defaults to the observed outcome rate") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  write_json(dir / "run.json", toy_config());
  const std::string c = "--config '" + (dir / "run.json").string() + "'";
  REQUIRE(run_cli("fit " + c, dir).code == 0);
  REQUIRE(run_cli("analyze " + c, dir).code == 0);
  const RawTable raw = load_table(dir / "toy.csv");
  double positives = 0;
  for (const auto& row : raw.rows) positives += std::get<double>(row[0]);
  const auto th = read_csv(dir / "out/thresholds.csv");
  CHECK(std::stod(th[1][0]) == doctest::Approx(positives / 50.0).epsilon(1e-15));
}

TEST_CASE("analyze rejects empty or mismatched draws") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  write_json(dir / "run.json", toy_config());
  const std::string c = "--config '" + (dir / "run.json").string() + "'";
  testing::write_text(dir / "empty.csv", "");
  const Outcome empty = run_cli("analyze " + c + " --draws '" + (dir / "empty.csv").string() + "'", dir);
  CHECK(empty.code != 0);
  testing::write_text(dir / "other.csv", "chain,draw,divergent,a\n1,1,0,0.5\n");
  CHECK(run_cli("analyze " + c + " --draws '" + (dir / "other.csv").string() + "'", dir).code == 3);
}

TEST_CASE("diagnose a four-chain draw file") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  auto cfg = toy_config();
  cfg["sampler"]["chains"] = 4;
  cfg["analysis"] = {{"max_lag", 5}, {"bins", 10}};
  write_json(dir / "run.json", cfg);
  const std::string c = "--config '" + (dir / "run.json").string() + "'";
  REQUIRE(run_cli("fit " + c, dir).code == 0);
  const Outcome r = run_cli("diagnose " + c, dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto hist = read_csv(dir / "out/rank_histograms.csv");
  CHECK(hist[0] == std::vector<std::string>{"parameter", "bin", "chain_1", "chain_2", "chain_3", "chain_4"});
  CHECK(hist.size() == 1 + 6 * 10);
  long total = 0;
  for (std::size_t i = 1; i <= 10; ++i) total += std::stol(hist[i][2]);
  CHECK(total == 100);
  const auto ac = read_csv(dir / "out/autocorrelation.csv");
  CHECK(ac.size() == 1 + 6 * 6);
  CHECK(ac[1][2] == "1");
  CHECK(read_csv(dir / "out/divergences.csv").size() == 5);
}

TEST_CASE("evaluate emits two AUC rows") {
  testing::TempDir dir("cli");
  write_toy_data(dir / "toy.csv");
  write_json(dir / "run.json", toy_config());
  const Outcome r = run_cli("evaluate --reduced-grid --config '" + (dir / "run.json").string() + "'", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto auc = read_csv(dir / "out/auc.csv");
  REQUIRE(auc.size() == 3);
  CHECK(auc[1][0] == "Logistic Regression");
  CHECK(auc[2][0] == "Random Forest");
  CHECK(read_csv(dir / "out/roc_logistic.csv")[0] == std::vector<std::string>{"threshold", "fpr", "tpr"});
  CHECK(read_csv(dir / "out/roc_forest.csv").back()[1] == "1");
  CHECK(read_csv(dir / "out/grid_search.csv").size() == 1 + 32);
}

TEST_CASE("synth, fit and analyze end to end within a minute") {
  testing::TempDir dir("cli");
  nlohmann::json cfg = {{"seed", 3},
                        {"out_dir", "cohort"},
                        {"synth", {{"n", 500}, {"attrition", {{"mode", "none"}}}}}};
  write_json(dir / "synth.json", cfg);
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run_cli("synth --config '" + (dir / "synth.json").string() + "'", dir).code == 0);
  const auto truth = nlohmann::json::parse(testing::read_text(dir / "cohort/truth.json"));
  CHECK(truth["n_observed"] == 500);

  nlohmann::json run = {{"seed", 3},
                        {"data", "cohort/observed.csv"},
                        {"out_dir", "fit"},
                        {"schema", truth["schema"]},
                        {"sampler", {{"chains", 4}, {"warmup", 1000}, {"draws", 1000}}}};
  write_json(dir / "run.json", run);
  const std::string c = "--config '" + (dir / "run.json").string() + "'";
  REQUIRE(run_cli("fit " + c, dir).code == 0);
  REQUIRE(run_cli("analyze " + c, dir).code == 0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
  CHECK(read_csv(dir / "fit/draws.csv").size() == 4001);
}

TEST_CASE("synth cohorts are reproducible and honour attrition settings") {
  testing::TempDir dir("cli");
  nlohmann::json cfg = {
      {"seed", 4},
      {"synth",
       {{"n", 400},
        {"covariates", {{{"name", "x1"}, {"type", "normal"}}, {{"name", "g"}, {"type", "categorical"}, {"probs", {0.5, 0.5}}}}},
        {"theta_true", {0.1, 0.5, -0.4}},
        {"attrition", {{"mode", "random"}, {"q", 0.3}}}}}};
  write_json(dir / "s.json", cfg);
  const std::string c = "--config '" + (dir / "s.json").string() + "'";
  REQUIRE(run_cli("synth " + c + " --out-dir '" + (dir / "a").string() + "'", dir).code == 0);
  REQUIRE(run_cli("synth " + c + " --out-dir '" + (dir / "b").string() + "'", dir).code == 0);
  CHECK(testing::read_text(dir / "a/full.csv") == testing::read_text(dir / "b/full.csv"));
  CHECK(testing::read_text(dir / "a/observed.csv") == testing::read_text(dir / "b/observed.csv"));
  const auto truth = nlohmann::json::parse(testing::read_text(dir / "a/truth.json"));
  CHECK(truth["feature_names"] == nlohmann::json({"(Intercept)", "g[c1]", "x1"}));
  CHECK(truth["n_observed"].get<int>() < 400);

  cfg["synth"]["attrition"] = {{"mode", "on_z"}, {"z", {"nope"}}, {"gamma", {1.0}}};
  write_json(dir / "bad.json", cfg);
  CHECK(run_cli("synth --config '" + (dir / "bad.json").string() + "'", dir).code == 2);
}
