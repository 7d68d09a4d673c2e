#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>

#include "blr/diagnostics.hpp"
#include "helpers.hpp"

using namespace blr;

namespace {

// Classic R-hat written out from the between/within decomposition.
double rhat_oracle(const MatrixXd& chains) {
  const double n = static_cast<double>(chains.rows());
  const double m = static_cast<double>(chains.cols());
  const VectorXd means = chains.colwise().mean().transpose();
  const double grand = means.mean();
  const double B = n / (m - 1.0) * (means.array() - grand).square().sum();
  double W = 0;
  for (Eigen::Index c = 0; c < chains.cols(); ++c) {
    W += (chains.col(c).array() - means(c)).square().sum() / (n - 1.0);
  }
  W /= m;
  return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

PosteriorDraws flags_only(int chains, int draws) {
  PosteriorDraws pd;
  pd.feature_names = {"a"};
  for (int c = 0; c < chains; ++c) {
    ChainResult<double> r;
    r.draws = MatrixXd::Zero(draws, 1);
    r.divergent.assign(draws, 0);
    pd.chains.push_back(r);
  }
  return pd;
}

}  // namespace

TEST_CASE("split_chains halves each chain") {
  MatrixXd m(5, 2);
  m << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  const MatrixXd s = split_chains(m);
  REQUIRE(s.rows() == 2);
  REQUIRE(s.cols() == 4);
  CHECK(s(0, 0) == 1);
  CHECK(s(1, 1) == 5);  // middle draw dropped
  CHECK(s(0, 2) == 10);
  CHECK(s(1, 3) == 50);
}

TEST_CASE("rank normalization follows the offset rule") {
  MatrixXd m(2, 2);
  m << 3.0, 1.0, 4.0, 1.0;  // ranks: 3, 4, 1.5, 1.5
  const MatrixXd z = rank_normalize(m);
  const boost::math::normal nd;
  auto expected = [&](double r) { return boost::math::quantile(nd, (r - 0.375) / 4.25); };
  CHECK(z(0, 0) == doctest::Approx(expected(3)));
  CHECK(z(1, 0) == doctest::Approx(expected(4)));
  CHECK(z(0, 1) == doctest::Approx(expected(1.5)));
  CHECK(z(1, 1) == z(0, 1));
}

TEST_CASE("classic R-hat matches the variance decomposition") {
  std::mt19937_64 rng(1);
  MatrixXd m = testing::normal_matrix(50, 3, rng);
  m.col(2).array() += 0.7;
  CHECK(*rhat_classic(m) == doctest::Approx(rhat_oracle(m)).epsilon(1e-12));
}

TEST_CASE("split rank R-hat equals classic R-hat of the transformed halves") {
  std::mt19937_64 rng(2);
  const MatrixXd m = testing::ar1_chains(200, 4, 0.5, rng);
  CHECK(*split_rank_rhat(m) ==
        doctest::Approx(std::max(1.0, rhat_oracle(rank_normalize(split_chains(m))))).epsilon(1e-12));
}

TEST_CASE("R-hat of iid chains is near one") {
  std::mt19937_64 rng(3);
  const MatrixXd m = testing::normal_matrix(1000, 4, rng);
  const double r = *split_rank_rhat(m);
  CHECK(r >= 1.0 - 1e-8);
  CHECK(r <= 1.01);
}

TEST_CASE("R-hat flags offset chains") {
  std::mt19937_64 rng(4);
  MatrixXd m = 1e-3 * testing::normal_matrix(500, 2, rng);
  m.col(1).array() += 10.0;
  // ranks cap the statistic for two fully separated chains near 1.83
  CHECK(*split_rank_rhat(m) > 1.5);
  CHECK(*rhat_classic(split_chains(m)) > 2.0);
}

TEST_CASE("R-hat is invariant under monotone transforms") {
  std::mt19937_64 rng(5);
  const MatrixXd m = testing::ar1_chains(300, 4, 0.3, rng);
  const MatrixXd e = m.array().exp();
  CHECK(std::abs(*split_rank_rhat(m) - *split_rank_rhat(e)) < 1e-12);
  CHECK(std::abs(*ess_bulk(m) - *ess_bulk(e)) < 1e-9);
}

TEST_CASE("ESS of iid draws is close to the draw count") {
  std::mt19937_64 rng(6);
  const MatrixXd m = testing::normal_matrix(1000, 4, rng);
  const double bulk = *ess_bulk(m);
  CHECK(bulk >= 3400);
  CHECK(bulk <= 4600);
  const double tail = *ess_tail(m);
  CHECK(tail >= 3000);
  CHECK(tail <= 5000);
}

TEST_CASE("ESS of a sticky AR(1) chain is small") {
  std::mt19937_64 rng(7);
  const MatrixXd m = testing::ar1_chains(1000, 4, 0.9, rng);
  const double bulk = *ess_bulk(m);
  CHECK(bulk < 0.2 * 4000);
  // analytic value N (1 - rho) / (1 + rho) is about 210
  CHECK(bulk > 100);
  CHECK(bulk < 400);
}

TEST_CASE("degenerate chains yield the sentinel") {
  const MatrixXd m = MatrixXd::Constant(100, 4, 2.5);
  CHECK_FALSE(split_rank_rhat(m).has_value());
  CHECK_FALSE(ess_bulk(m).has_value());
  CHECK_FALSE(ess_tail(m).has_value());
  CHECK(format_estimate(std::nullopt) == "degenerate");
  CHECK(format_estimate(1.5) == "1.5");
  CHECK_THROWS_AS(autocorrelation(m.col(0), 5), Error);
}

TEST_CASE("diagnostics need two chains of four draws") {
  std::mt19937_64 rng(8);
  CHECK_THROWS_AS(split_rank_rhat(testing::normal_matrix(100, 1, rng)), Error);
  CHECK_THROWS_AS(split_rank_rhat(testing::normal_matrix(3, 4, rng)), Error);
}

TEST_CASE("rank histograms of identical distributions are flat") {
  std::mt19937_64 rng(9);
  const MatrixXd m = testing::normal_matrix(1000, 4, rng);
  const Eigen::MatrixXi h = rank_histogram(m, 20);
  REQUIRE(h.rows() == 20);
  REQUIRE(h.cols() == 4);
  int within = 0;
  const double expected = 1000.0 / 20.0;
  for (Eigen::Index c = 0; c < 4; ++c) {
    CHECK(h.col(c).sum() == 1000);
    for (Eigen::Index b = 0; b < 20; ++b) within += std::abs(h(b, c) - expected) <= 4 * std::sqrt(expected);
  }
  CHECK(within >= 0.95 * 80);
}

TEST_CASE("a shifted chain fills the top rank bins") {
  std::mt19937_64 rng(10);
  MatrixXd m = testing::normal_matrix(1000, 4, rng);
  m.col(3).array() += 5.0;
  const Eigen::MatrixXi h = rank_histogram(m, 20);
  CHECK(h.col(3).tail(5).sum() > 0.9 * 1000);
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(h.col(c).sum() == 1000);
}

TEST_CASE("autocorrelation") {
  std::mt19937_64 rng(11);
  const VectorXd iid = testing::normal_matrix(5000, 1, rng);
  const VectorXd a = autocorrelation(iid, 10);
  REQUIRE(a.size() == 11);
  CHECK(a(0) == 1.0);
  for (Eigen::Index k = 1; k <= 10; ++k) CHECK(std::abs(a(k)) < 3.0 / std::sqrt(5000.0));

  const VectorXd ar = testing::ar1_chains(10000, 1, 0.9, rng);
  const VectorXd b = autocorrelation(ar, 5);
  CHECK(b(0) == 1.0);
  CHECK(b(1) >= 0.85);
  CHECK(b(1) <= 0.95);
  CHECK_THROWS_AS(autocorrelation(ar.head(5), 5), Error);
}

TEST_CASE("autocorrelation matches the direct sum") {
  std::mt19937_64 rng(12);
  const VectorXd x = testing::ar1_chains(64, 1, 0.4, rng);
  const VectorXd a = autocorrelation(x, 6);
  const double mean = x.mean();
  const VectorXd c = x.array() - mean;
  for (Eigen::Index k = 0; k <= 6; ++k) {
    double num = 0;
    for (Eigen::Index i = 0; i + k < x.size(); ++i) num += c(i) * c(i + k);
    CHECK(a(k) == doctest::Approx(num / c.squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("divergence counts per chain") {
  PosteriorDraws pd = flags_only(4, 30);
  CHECK(divergence_count(pd) == std::vector<int>{0, 0, 0, 0});
  pd.chains[1].divergent[2] = pd.chains[1].divergent[7] = pd.chains[1].divergent[29] = 1;
  CHECK(divergence_count(pd) == std::vector<int>{0, 3, 0, 0});
}

TEST_CASE("diagnose and its exports") {
  std::mt19937_64 rng(13);
  PosteriorDraws pd;
  pd.feature_names = {"a", "b"};
  for (int c = 0; c < 3; ++c) {
    ChainResult<double> r;
    r.draws = testing::normal_matrix(200, 2, rng);
    r.draws.col(1).setConstant(1.0);
    r.divergent.assign(200, 0);
    pd.chains.push_back(r);
  }
  const DiagnosticsReport rep = diagnose(pd, 10, 20);
  REQUIRE(rep.parameters.size() == 2);
  CHECK(rep.parameters[0].rhat.has_value());
  CHECK_FALSE(rep.parameters[1].rhat.has_value());
  CHECK(rep.parameters[0].autocorr.rows() == 11);
  CHECK(rep.parameters[0].autocorr.cols() == 3);
  CHECK(rep.total_divergent() == 0);

  testing::TempDir dir("diag");
  write_diagnostics(dir / "d.csv", rep);
  write_rank_histograms(dir / "h.csv", rep);
  write_autocorrelations(dir / "a.csv", rep);
  const std::string d = testing::read_text(dir / "d.csv");
  CHECK(d.rfind("parameter,Rhat,Bulk_ESS,Tail_ESS\n", 0) == 0);
  CHECK(d.find("b,degenerate,degenerate,degenerate") != std::string::npos);
  CHECK(testing::read_text(dir / "h.csv").rfind("parameter,bin,chain_1,chain_2,chain_3\n", 0) == 0);
  CHECK(testing::read_text(dir / "a.csv").rfind("parameter,lag,chain_1,chain_2,chain_3\n", 0) == 0);
}
