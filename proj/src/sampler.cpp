#include "blr/sampler.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "blr/csv.hpp"

namespace blr {

void ChainConfig::validate() const {
  if (n_chains < 1 || draws_per_chain < 1 || thin < 1 || max_tree_depth < 1 || warmup < 0) {
    throw config_error("sampler.config", "chain counts must be >= 1 (warmup >= 0)");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw config_error("sampler.config", "target_accept must lie in (0, 1)");
  }
  if (!(init_radius > 0.0)) throw config_error("sampler.config", "init_radius must be positive");
}

std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(chain),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

Eigen::Index PosteriorDraws::total_draws() const {
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.draws.rows();
  return total;
}

MatrixXd PosteriorDraws::flattened() const {
  MatrixXd out(total_draws(), dim());
  Eigen::Index row = 0;
  for (const auto& c : chains) {
    out.middleRows(row, c.draws.rows()) = c.draws;
    row += c.draws.rows();
  }
  return out;
}

std::vector<int> PosteriorDraws::chain_of_row() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(total_draws()));
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out.insert(out.end(), static_cast<std::size_t>(chains[c].draws.rows()), static_cast<int>(c));
  }
  return out;
}

MatrixXd PosteriorDraws::parameter(Eigen::Index j) const {
  if (chains.empty()) throw data_error("diagnostics", "no chains");
  const Eigen::Index n = chains.front().draws.rows();
  MatrixXd out(n, n_chains());
  for (int c = 0; c < n_chains(); ++c) {
    if (chains[c].draws.rows() != n) throw data_error("diagnostics", "chains differ in length");
    out.col(c) = chains[c].draws.col(j);
  }
  return out;
}

Eigen::Index PosteriorDraws::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (feature_names[j] == name) return static_cast<Eigen::Index>(j);
  }
  throw data_error("draws", "unknown parameter '" + name + "'");
}

PosteriorDraws run_chains(const Dataset& ds, const ModelSpec<double>& spec, const ChainConfig& cfg) {
  if (ds.n() == 0 && ds.dim() == 0) throw data_error("sampler", "empty dataset");
  LogisticPosterior<double> target(ds.X, ds.y, spec);
  return run_chains_on(target, ds.dim(), ds.feature_names, cfg);
}

void write_draws(const std::filesystem::path& path, const PosteriorDraws& pd) {
  std::vector<std::string> header{"chain", "draw", "divergent"};
  header.insert(header.end(), pd.feature_names.begin(), pd.feature_names.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(pd.total_draws()));
  for (std::size_t c = 0; c < pd.chains.size(); ++c) {
    const auto& ch = pd.chains[c];
    for (Eigen::Index i = 0; i < ch.draws.rows(); ++i) {
      std::vector<std::string> r{std::to_string(c + 1), std::to_string(i + 1),
                                 ch.divergent.empty() ? "0" : std::to_string(int(ch.divergent[i]))};
      for (Eigen::Index j = 0; j < ch.draws.cols(); ++j) r.push_back(csv::format(ch.draws(i, j)));
      rows.push_back(std::move(r));
    }
  }
  csv::write_file(path, header, rows);
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  const auto records = csv::read_records(path);
  if (records.empty()) throw data_error("draws.load", "empty draws file " + path.string());
  const auto& header = records.front();
  if (header.size() < 4 || header[0] != "chain" || header[1] != "draw" || header[2] != "divergent") {
    throw data_error("draws.load", "unexpected header in " + path.string());
  }
  if (records.size() < 2) throw data_error("draws.load", "no draws in " + path.string());
  PosteriorDraws pd;
  pd.feature_names.assign(header.begin() + 3, header.end());
  const auto dim = static_cast<Eigen::Index>(pd.feature_names.size());

  auto number = [&](const std::string& s, std::size_t line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw data_error("draws.load", "bad number '" + s + "' on line " + std::to_string(line + 1));
    }
    return v;
  };

  std::map<int, std::vector<std::size_t>> by_chain;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw data_error("draws.load", "ragged row on line " + std::to_string(r + 1));
    }
    by_chain[static_cast<int>(number(records[r][0], r))].push_back(r);
  }
  for (const auto& [chain, lines] : by_chain) {
    ChainResult<double> ch;
    ch.draws.resize(static_cast<Eigen::Index>(lines.size()), dim);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& rec = records[lines[i]];
      ch.divergent.push_back(number(rec[2], lines[i]) != 0.0 ? 1 : 0);
      for (Eigen::Index j = 0; j < dim; ++j) {
        ch.draws(static_cast<Eigen::Index>(i), j) = number(rec[3 + j], lines[i]);
      }
    }
    pd.chains.push_back(std::move(ch));
  }
  return pd;
}

}  // namespace blr
