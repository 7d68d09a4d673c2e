#pragma once

// Template definitions for sampler.hpp.

#include "blr/parallel.hpp"

namespace blr {

namespace detail {

template <typename F>
ChainResult<double> run_one_chain(const F& target, Eigen::Index dim, const ChainConfig& cfg,
                                  int chain) {
  std::mt19937_64 rng = chain_rng(cfg.seed, chain);
  std::uniform_real_distribution<double> init(-cfg.init_radius, cfg.init_radius);

  VectorXd position(dim);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (Eigen::Index i = 0; i < dim; ++i) position(i) = init(rng);
    VectorXd grad(dim);
    const double lp = target(position, grad);
    ok = std::isfinite(lp) && grad.allFinite();
  }
  if (!ok) {
    throw numeric_error("sampler.init", "log density not finite at 100 initial points (chain " +
                                            std::to_string(chain + 1) + ")");
  }

  NutsOptions<double> opt;
  opt.max_tree_depth = cfg.max_tree_depth;
  double epsilon = initial_step_size(position, target, rng);
  DualAverage<double> adapt(epsilon, cfg.target_accept);
  for (int it = 0; it < cfg.warmup; ++it) {
    auto tr = nuts_draw(position, epsilon, target, rng, opt);
    position = std::move(tr.point.position);
    adapt.update(tr.accept_stat);
    epsilon = adapt.epsilon();
  }
  if (cfg.warmup > 0) epsilon = adapt.final_epsilon();

  ChainResult<double> out;
  out.step_size = epsilon;
  out.draws.resize(cfg.draws_per_chain, dim);
  out.divergent.reserve(cfg.draws_per_chain);
  out.tree_depth.reserve(cfg.draws_per_chain);
  out.energy.reserve(cfg.draws_per_chain);
  out.accept_stat.reserve(cfg.draws_per_chain);
  const long iterations = static_cast<long>(cfg.draws_per_chain) * cfg.thin;
  Eigen::Index kept = 0;
  for (long it = 1; it <= iterations; ++it) {
    auto tr = nuts_draw(position, epsilon, target, rng, opt);
    position = std::move(tr.point.position);
    if (it % cfg.thin != 0) continue;
    out.draws.row(kept++) = position.transpose();
    out.divergent.push_back(tr.divergent ? 1 : 0);
    out.tree_depth.push_back(tr.depth);
    out.energy.push_back(tr.energy);
    out.accept_stat.push_back(tr.accept_stat);
  }
  return out;
}

}  // namespace detail

template <typename F>
PosteriorDraws run_chains_on(const F& target, Eigen::Index dim,
                             const std::vector<std::string>& names, const ChainConfig& cfg) {
  cfg.validate();
  if (static_cast<Eigen::Index>(names.size()) != dim) {
    throw config_error("sampler", "feature name count does not match dimension");
  }
  PosteriorDraws pd;
  pd.feature_names = names;
  pd.chains.resize(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(pd.chains.size(), [&](std::size_t c) {
    pd.chains[c] = detail::run_one_chain(target, dim, cfg, static_cast<int>(c));
  });
  return pd;
}

}  // namespace blr
