#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blr/common.hpp"
#include "blr/sampler.hpp"

namespace blr {

// Chain inputs are draws x chains matrices for a single parameter.
using ChainMatrix = Eigen::Ref<const MatrixXd>;

/// Diagnostic value; std::nullopt marks degenerate (zero-variance) input.
using Estimate = std::optional<double>;

/// Split each chain in half; with an odd length the middle draw is dropped.
MatrixXd split_chains(const ChainMatrix& chains);

/// Pooled ranks (ties averaged) mapped through the normal quantile of
/// (rank - 3/8) / (S + 1/4).
MatrixXd rank_normalize(const ChainMatrix& chains);

/// Classic potential scale reduction over the columns given, no splitting.
Estimate rhat_classic(const ChainMatrix& chains);

/// Split, rank-normalized R-hat, floored at 1.
Estimate split_rank_rhat(const ChainMatrix& chains);

/// Effective sample size of the columns given (autocorrelation sum truncated by
/// Geyer's initial monotone sequence).
Estimate ess(const ChainMatrix& chains);

Estimate ess_bulk(const ChainMatrix& chains);

/// Minimum ESS of the 5% and 95% quantile exceedance indicators.
Estimate ess_tail(const ChainMatrix& chains);

/// n_bins x chains counts of each chain's pooled ranks over uniform rank bins.
Eigen::MatrixXi rank_histogram(const ChainMatrix& chains, int n_bins = 20);

/// Biased autocorrelation, lag 0..max_lag.
VectorXd autocorrelation(const Eigen::Ref<const VectorXd>& chain, int max_lag);

std::vector<int> divergence_count(const PosteriorDraws& pd);

struct ParameterDiagnostics {
  std::string name;
  Estimate rhat;
  Estimate ess_bulk;
  Estimate ess_tail;
  MatrixXd autocorr;              // (max_lag + 1) x chains
  Eigen::MatrixXi rank_histogram;  // n_bins x chains
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostics> parameters;
  std::vector<int> n_divergent;  // per chain

  int total_divergent() const;
};

DiagnosticsReport diagnose(const PosteriorDraws& pd, int max_lag = 30, int n_bins = 20);

/// "degenerate" or the shortest round-trip decimal.
std::string format_estimate(const Estimate& e);

/// Columns: parameter, Rhat, Bulk_ESS, Tail_ESS.
void write_diagnostics(const std::filesystem::path& path, const DiagnosticsReport& report);
/// Columns: parameter, bin, chain_1..chain_m.
void write_rank_histograms(const std::filesystem::path& path, const DiagnosticsReport& report);
/// Columns: parameter, lag, chain_1..chain_m.
void write_autocorrelations(const std::filesystem::path& path, const DiagnosticsReport& report);

}  // namespace blr
