#include "blr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "blr/csv.hpp"

namespace blr {

namespace {

void require_shape(const ChainMatrix& chains, Eigen::Index min_chains, Eigen::Index min_draws) {
  if (chains.cols() < min_chains || chains.rows() < min_draws) {
    throw data_error("diagnostics", "need at least " + std::to_string(min_chains) + " chains of " +
                                        std::to_string(min_draws) + " draws");
  }
}

bool is_constant(const ChainMatrix& chains) {
  return chains.size() == 0 || (chains.array() == chains(0, 0)).all();
}

// Average ranks (1-based) of all entries, in column-major order.
VectorXd pooled_ranks(const ChainMatrix& chains) {
  const Eigen::Index total = chains.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto value = [&](Eigen::Index k) { return chains(k % chains.rows(), k / chains.rows()); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return value(a) < value(b); });
  VectorXd ranks(total);
  for (Eigen::Index i = 0; i < total;) {
    Eigen::Index j = i;
    while (j + 1 < total && value(order[j + 1]) == value(order[i])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

// Biased autocovariance of one chain for lag t.
double autocovariance(const Eigen::Ref<const VectorXd>& centered, Eigen::Index t) {
  const Eigen::Index n = centered.size();
  return centered.head(n - t).dot(centered.tail(n - t)) / static_cast<double>(n);
}

}  // namespace

MatrixXd split_chains(const ChainMatrix& chains) {
  const Eigen::Index half = chains.rows() / 2;
  const Eigen::Index offset = chains.rows() - half;  // skips the middle draw for odd lengths
  MatrixXd out(half, chains.cols() * 2);
  for (Eigen::Index c = 0; c < chains.cols(); ++c) {
    out.col(2 * c) = chains.col(c).head(half);
    out.col(2 * c + 1) = chains.col(c).segment(offset, half);
  }
  return out;
}

MatrixXd rank_normalize(const ChainMatrix& chains) {
  const VectorXd ranks = pooled_ranks(chains);
  const double total = static_cast<double>(chains.size());
  const boost::math::normal standard;
  MatrixXd out(chains.rows(), chains.cols());
  for (Eigen::Index k = 0; k < chains.size(); ++k) {
    const double u = (ranks(k) - 0.375) / (total + 0.25);
    out(k % chains.rows(), k / chains.rows()) = boost::math::quantile(standard, u);
  }
  return out;
}

Estimate rhat_classic(const ChainMatrix& chains) {
  require_shape(chains, 2, 2);
  if (is_constant(chains)) return std::nullopt;
  const double n = static_cast<double>(chains.rows());
  const VectorXd means = chains.colwise().mean().transpose();
  VectorXd vars(chains.cols());
  for (Eigen::Index c = 0; c < chains.cols(); ++c) {
    vars(c) = (chains.col(c).array() - means(c)).square().sum() / (n - 1.0);
  }
  const double within = vars.mean();
  const double between =
      n * (means.array() - means.mean()).square().sum() / static_cast<double>(chains.cols() - 1);
  if (!(within > 0.0)) return std::nullopt;
  return std::sqrt(((n - 1.0) / n * within + between / n) / within);
}

Estimate split_rank_rhat(const ChainMatrix& chains) {
  require_shape(chains, 2, 4);
  if (is_constant(chains)) return std::nullopt;
  const Estimate r = rhat_classic(rank_normalize(split_chains(chains)));
  // sampling noise can push the ratio a hair under 1
  if (r) return std::max(1.0, *r);
  return r;
}

Estimate ess(const ChainMatrix& chains) {
  require_shape(chains, 1, 4);
  if (is_constant(chains)) return std::nullopt;
  const Eigen::Index n = chains.rows();
  const Eigen::Index m = chains.cols();
  const double nd = static_cast<double>(n);

  MatrixXd centered = chains.rowwise() - chains.colwise().mean();
  const VectorXd means = chains.colwise().mean().transpose();
  auto mean_acov = [&](Eigen::Index t) {
    double s = 0;
    for (Eigen::Index c = 0; c < m; ++c) s += autocovariance(centered.col(c), t);
    return s / static_cast<double>(m);
  };

  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  if (!(var_plus > 0.0)) return std::nullopt;

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  auto rho_at = [&](Eigen::Index t) { return 1.0 - (mean_var - mean_acov(t)) / var_plus; };
  Eigen::Index t = 0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[0] = rho_even;
  rho[1] = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = rho_at(t);
    rho_odd = rho_at(t + 1);
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Geyer's initial monotone sequence on pair sums.
  for (t = 2; t <= max_t - 2; t += 2) {
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }

  const double total = nd * static_cast<double>(m);
  double tau = -1.0 + rho[max_t];
  for (Eigen::Index k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

Estimate ess_bulk(const ChainMatrix& chains) {
  require_shape(chains, 1, 4);
  if (is_constant(chains)) return std::nullopt;
  return ess(rank_normalize(split_chains(chains)));
}

Estimate ess_tail(const ChainMatrix& chains) {
  require_shape(chains, 1, 4);
  if (is_constant(chains)) return std::nullopt;
  std::vector<double> sorted(chains.data(), chains.data() + chains.size());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  Estimate result;
  for (double p : {0.05, 0.95}) {
    const double q = quantile(p);
    const MatrixXd indicator = (chains.array() <= q).cast<double>();
    const Estimate e = ess(split_chains(indicator));
    if (!e) return std::nullopt;
    result = result ? std::min(*result, *e) : *e;
  }
  return result;
}

Eigen::MatrixXi rank_histogram(const ChainMatrix& chains, int n_bins) {
  require_shape(chains, 1, 1);
  if (n_bins < 1) throw config_error("diagnostics", "n_bins must be >= 1");
  const VectorXd ranks = pooled_ranks(chains);
  const double total = static_cast<double>(chains.size());
  Eigen::MatrixXi hist = Eigen::MatrixXi::Zero(n_bins, chains.cols());
  for (Eigen::Index k = 0; k < chains.size(); ++k) {
    auto bin = static_cast<int>(std::floor((ranks(k) - 1.0) * n_bins / total));
    bin = std::clamp(bin, 0, n_bins - 1);
    ++hist(bin, k / chains.rows());
  }
  return hist;
}

VectorXd autocorrelation(const Eigen::Ref<const VectorXd>& chain, int max_lag) {
  if (max_lag < 0 || chain.size() <= max_lag) {
    throw data_error("diagnostics", "chain length must exceed max_lag");
  }
  const VectorXd centered = chain.array() - chain.mean();
  const double c0 = autocovariance(centered, 0);
  if (!(c0 > 0.0)) throw data_error("diagnostics", "autocorrelation of a constant chain");
  VectorXd rho(max_lag + 1);
  for (int t = 0; t <= max_lag; ++t) rho(t) = autocovariance(centered, t) / c0;
  rho(0) = 1.0;
  return rho;
}

std::vector<int> divergence_count(const PosteriorDraws& pd) {
  std::vector<int> counts;
  for (const auto& c : pd.chains) {
    counts.push_back(static_cast<int>(std::count(c.divergent.begin(), c.divergent.end(), 1)));
  }
  return counts;
}

int DiagnosticsReport::total_divergent() const {
  return std::accumulate(n_divergent.begin(), n_divergent.end(), 0);
}

DiagnosticsReport diagnose(const PosteriorDraws& pd, int max_lag, int n_bins) {
  DiagnosticsReport report;
  report.n_divergent = divergence_count(pd);
  for (Eigen::Index j = 0; j < pd.dim(); ++j) {
    const MatrixXd chains = pd.parameter(j);
    ParameterDiagnostics d;
    d.name = pd.feature_names[j];
    const bool multi = chains.cols() >= 2 && chains.rows() >= 4;
    d.rhat = multi ? split_rank_rhat(chains) : std::nullopt;
    d.ess_bulk = chains.rows() >= 4 ? ess_bulk(chains) : std::nullopt;
    d.ess_tail = chains.rows() >= 4 ? ess_tail(chains) : std::nullopt;
    const int lag = std::min<int>(max_lag, static_cast<int>(chains.rows()) - 1);
    d.autocorr = MatrixXd::Constant(lag + 1, chains.cols(), std::nan(""));
    for (Eigen::Index c = 0; c < chains.cols(); ++c) {
      if ((chains.col(c).array() != chains(0, c)).any()) {
        d.autocorr.col(c) = autocorrelation(chains.col(c), lag);
      }
    }
    d.rank_histogram = rank_histogram(chains, n_bins);
    report.parameters.push_back(std::move(d));
  }
  return report;
}

std::string format_estimate(const Estimate& e) { return e ? csv::format(*e) : "degenerate"; }

void write_diagnostics(const std::filesystem::path& path, const DiagnosticsReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : report.parameters) {
    rows.push_back({p.name, format_estimate(p.rhat), format_estimate(p.ess_bulk),
                    format_estimate(p.ess_tail)});
  }
  csv::write_file(path, {"parameter", "Rhat", "Bulk_ESS", "Tail_ESS"}, rows);
}

namespace {
std::vector<std::string> chain_header(const std::string& second, Eigen::Index chains) {
  std::vector<std::string> h{"parameter", second};
  for (Eigen::Index c = 0; c < chains; ++c) h.push_back("chain_" + std::to_string(c + 1));
  return h;
}
}  // namespace

void write_rank_histograms(const std::filesystem::path& path, const DiagnosticsReport& report) {
  std::vector<std::vector<std::string>> rows;
  Eigen::Index chains = 0;
  for (const auto& p : report.parameters) {
    chains = p.rank_histogram.cols();
    for (Eigen::Index b = 0; b < p.rank_histogram.rows(); ++b) {
      std::vector<std::string> r{p.name, std::to_string(b + 1)};
      for (Eigen::Index c = 0; c < chains; ++c) r.push_back(std::to_string(p.rank_histogram(b, c)));
      rows.push_back(std::move(r));
    }
  }
  csv::write_file(path, chain_header("bin", chains), rows);
}

void write_autocorrelations(const std::filesystem::path& path, const DiagnosticsReport& report) {
  std::vector<std::vector<std::string>> rows;
  Eigen::Index chains = 0;
  for (const auto& p : report.parameters) {
    chains = p.autocorr.cols();
    for (Eigen::Index t = 0; t < p.autocorr.rows(); ++t) {
      std::vector<std::string> r{p.name, std::to_string(t)};
      for (Eigen::Index c = 0; c < chains; ++c) r.push_back(csv::format(p.autocorr(t, c)));
      rows.push_back(std::move(r));
    }
  }
  csv::write_file(path, chain_header("lag", chains), rows);
}

}  // namespace blr
