#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "blr/common.hpp"
#include "blr/data.hpp"
#include "blr/model.hpp"

namespace blr {

/// Position, momentum and cached gradient of one point on a Hamiltonian trajectory.
template <typename S>
struct PhasePoint {
  Vec<S> position;
  Vec<S> momentum;
  Vec<S> gradient;
  S log_density = 0;

  /// Potential plus kinetic energy under the identity mass matrix.
  S hamiltonian() const { return -log_density + S(0.5) * momentum.squaredNorm(); }

  bool finite() const {
    return std::isfinite(log_density) && gradient.allFinite() && position.allFinite();
  }
};

/// Evaluate the target at `position` and return the point with the given momentum.
template <typename S, typename F>
PhasePoint<S> make_phase_point(const F& target, Vec<S> position, Vec<S> momentum) {
  PhasePoint<S> z{std::move(position), std::move(momentum), Vec<S>(), 0};
  z.gradient.resize(z.position.size());
  z.log_density = target(z.position, z.gradient);
  return z;
}

/**
 * One velocity-Verlet step: half kick, drift, half kick.
 *
 * `target(q, grad)` returns log p(q) and writes its gradient. A negative
 * `epsilon` integrates backward in time. A non-finite result is reported by
 * PhasePoint::finite() and treated as divergent by the caller.
 */
template <typename S, typename F>
PhasePoint<S> leapfrog(const PhasePoint<S>& z, S epsilon, const F& target) {
  PhasePoint<S> next;
  const S half = S(0.5) * epsilon;
  next.momentum = z.momentum + half * z.gradient;
  next.position = z.position + epsilon * next.momentum;
  next.gradient.resize(z.position.size());
  next.log_density = target(next.position, next.gradient);
  next.momentum += half * next.gradient;
  return next;
}

/**
 * Dual-averaging controller for the leapfrog step size.
 *
 * Drives the average acceptance statistic toward `target_accept`. During
 * warmup the sampler uses epsilon(); after warmup final_epsilon(), the
 * iterate average, is frozen.
 */
template <typename S>
class DualAverage {
 public:
  DualAverage(S epsilon_init, S target_accept, S t0 = 10, S gamma = S(0.05), S kappa = S(0.75))
      : mu_(std::log(S(10) * epsilon_init)),
        log_epsilon_(std::log(epsilon_init)),
        target_(target_accept),
        t0_(t0),
        gamma_(gamma),
        kappa_(kappa) {}

  void update(S accept_stat) {
    if (std::isnan(accept_stat)) accept_stat = 0;
    ++count_;
    const S m = static_cast<S>(count_);
    const S eta = S(1) / (m + t0_);
    h_bar_ = (S(1) - eta) * h_bar_ + eta * (target_ - accept_stat);
    log_epsilon_ = mu_ - std::sqrt(m) / gamma_ * h_bar_;
    const S w = std::pow(m, -kappa_);
    log_epsilon_bar_ = w * log_epsilon_ + (S(1) - w) * log_epsilon_bar_;
  }

  S epsilon() const { return std::exp(log_epsilon_); }
  S final_epsilon() const { return count_ ? std::exp(log_epsilon_bar_) : epsilon(); }

 private:
  S mu_;
  S log_epsilon_;
  S log_epsilon_bar_ = 0;
  S h_bar_ = 0;
  long count_ = 0;
  S target_;
  S t0_, gamma_, kappa_;
};

/// Step size after feeding an acceptance history to a fresh controller.
template <typename S>
S adapt_step_size(S epsilon_init, S target_accept, std::span<const S> history) {
  DualAverage<S> da(epsilon_init, target_accept);
  for (S a : history) da.update(a);
  return da.epsilon();
}

template <typename S>
struct NutsOptions {
  int max_tree_depth = 10;
  S max_energy_error = S(1000);
};

template <typename S>
struct NutsTransition {
  PhasePoint<S> point;   // selected state, momentum included
  bool divergent = false;
  int depth = 0;         // number of trajectory doublings
  S accept_stat = 0;     // mean Metropolis acceptance over visited leaves
  S energy = 0;          // Hamiltonian of the selected state
  long n_leapfrog = 0;
};

namespace detail {

template <typename S>
bool is_turning(const PhasePoint<S>& minus, const PhasePoint<S>& plus) {
  const Vec<S> span = plus.position - minus.position;
  return plus.momentum.dot(span) < 0 || minus.momentum.dot(span) < 0;
}

template <typename S>
S log_sum_exp(S a, S b) {
  if (a == -std::numeric_limits<S>::infinity()) return b;
  if (b == -std::numeric_limits<S>::infinity()) return a;
  const S m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename S>
struct Subtree {
  PhasePoint<S> minus;  // earliest state in trajectory time
  PhasePoint<S> plus;   // latest state in trajectory time
  PhasePoint<S> sample;
  S log_weight = -std::numeric_limits<S>::infinity();
  S sum_accept = 0;
  long n_leaves = 0;
  bool divergent = false;
  bool turning = false;

  bool usable() const { return !divergent && !turning; }
  const PhasePoint<S>& edge(int direction) const { return direction > 0 ? plus : minus; }
};

template <typename S>
S uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<S>(S(0), S(1))(rng);
}

// Builds 2^depth leapfrog steps from `edge` in `direction`. Within a subtree the
// sample is chosen by progressive multinomial sampling.
template <typename S, typename F>
Subtree<S> build_tree(const PhasePoint<S>& edge, int depth, int direction, S epsilon, S h0,
                      const F& target, const NutsOptions<S>& opt, std::mt19937_64& rng) {
  if (depth == 0) {
    Subtree<S> leaf;
    PhasePoint<S> z = leapfrog(edge, direction * epsilon, target);
    const S h = z.finite() ? z.hamiltonian() : std::numeric_limits<S>::infinity();
    leaf.n_leaves = 1;
    if (!std::isfinite(h) || h - h0 > opt.max_energy_error) {
      leaf.divergent = true;
      leaf.sum_accept = 0;
    } else {
      leaf.log_weight = h0 - h;
      leaf.sum_accept = std::min(S(1), std::exp(h0 - h));
    }
    leaf.minus = z;
    leaf.plus = z;
    leaf.sample = std::move(z);
    return leaf;
  }

  Subtree<S> inner = build_tree(edge, depth - 1, direction, epsilon, h0, target, opt, rng);
  if (!inner.usable()) return inner;
  Subtree<S> outer =
      build_tree(inner.edge(direction), depth - 1, direction, epsilon, h0, target, opt, rng);

  Subtree<S> merged;
  merged.n_leaves = inner.n_leaves + outer.n_leaves;
  merged.sum_accept = inner.sum_accept + outer.sum_accept;
  if (!outer.usable()) {
    merged.divergent = outer.divergent;
    merged.turning = outer.turning;
    return merged;
  }
  merged.log_weight = log_sum_exp(inner.log_weight, outer.log_weight);
  const bool take_outer = std::log(uniform01<S>(rng)) < outer.log_weight - merged.log_weight;
  merged.sample = take_outer ? std::move(outer.sample) : std::move(inner.sample);

  const Subtree<S>& early = direction > 0 ? inner : outer;
  const Subtree<S>& late = direction > 0 ? outer : inner;
  // The merged span plus the two straddling spans that cross the seam.
  merged.turning = is_turning(early.minus, late.plus) || is_turning(early.minus, late.minus) ||
                   is_turning(early.plus, late.plus);
  merged.minus = early.minus;
  merged.plus = late.plus;
  return merged;
}

}  // namespace detail

/**
 * One multinomial No-U-Turn transition from `current` with the identity metric.
 *
 * The trajectory doubles in a random direction until a U-turn is detected at
 * the ends of the whole trajectory or of any subtree, a divergence occurs
 * (energy error above opt.max_energy_error), or max_tree_depth doublings are
 * done. New subtrees replace the current sample with probability
 * min(1, w_new / w_old) (biased progressive sampling).
 */
template <typename S, typename F>
NutsTransition<S> nuts_draw(const Vec<S>& current, S epsilon, const F& target,
                            std::mt19937_64& rng, const NutsOptions<S>& opt = {}) {
  std::normal_distribution<S> normal(S(0), S(1));
  Vec<S> momentum(current.size());
  for (Eigen::Index i = 0; i < momentum.size(); ++i) momentum(i) = normal(rng);
  PhasePoint<S> z0 = make_phase_point(target, current, std::move(momentum));
  const S h0 = z0.hamiltonian();

  NutsTransition<S> out;
  detail::Subtree<S> tree;
  tree.minus = z0;
  tree.plus = z0;
  tree.sample = z0;
  tree.log_weight = 0;
  S sum_accept = 0;
  long n_leaves = 0;

  while (out.depth < opt.max_tree_depth) {
    const int direction = detail::uniform01<S>(rng) < S(0.5) ? -1 : 1;
    detail::Subtree<S> sub = detail::build_tree(tree.edge(direction), out.depth, direction, epsilon,
                                                h0, target, opt, rng);
    sum_accept += sub.sum_accept;
    n_leaves += sub.n_leaves;
    ++out.depth;
    if (sub.divergent) {
      out.divergent = true;
      break;
    }
    if (sub.turning) break;

    if (std::log(detail::uniform01<S>(rng)) < sub.log_weight - tree.log_weight) {
      tree.sample = std::move(sub.sample);
    }
    tree.log_weight = detail::log_sum_exp(tree.log_weight, sub.log_weight);
    bool turning = false;
    if (direction > 0) {
      turning = detail::is_turning(tree.minus, sub.plus) ||
                detail::is_turning(tree.minus, sub.minus) || detail::is_turning(tree.plus, sub.plus);
      tree.plus = std::move(sub.plus);
    } else {
      turning = detail::is_turning(sub.minus, tree.plus) ||
                detail::is_turning(sub.minus, tree.minus) || detail::is_turning(sub.plus, tree.plus);
      tree.minus = std::move(sub.minus);
    }
    if (turning) break;
  }

  out.accept_stat = n_leaves ? sum_accept / static_cast<S>(n_leaves) : S(0);
  out.n_leapfrog = n_leaves;
  out.energy = tree.sample.hamiltonian();
  out.point = std::move(tree.sample);
  return out;
}

/// Heuristic initial step size: double or halve until the one-step acceptance crosses 0.8.
template <typename S, typename F>
S initial_step_size(const Vec<S>& position, const F& target, std::mt19937_64& rng,
                    S epsilon = S(1)) {
  std::normal_distribution<S> normal(S(0), S(1));
  Vec<S> momentum(position.size());
  for (Eigen::Index i = 0; i < momentum.size(); ++i) momentum(i) = normal(rng);
  const PhasePoint<S> z0 = make_phase_point(target, position, momentum);
  const S h0 = z0.hamiltonian();
  auto log_accept = [&](S eps) {
    const PhasePoint<S> z = leapfrog(z0, eps, target);
    const S h = z.finite() ? z.hamiltonian() : std::numeric_limits<S>::infinity();
    return std::isfinite(h) ? h0 - h : -std::numeric_limits<S>::infinity();
  };
  const S threshold = std::log(S(0.8));
  const int direction = log_accept(epsilon) > threshold ? 1 : -1;
  for (int i = 0; i < 100; ++i) {
    const S next = direction > 0 ? epsilon * 2 : epsilon / 2;
    const S la = log_accept(next);
    epsilon = next;
    if (direction > 0 ? !(la > threshold) : (la > threshold)) break;
  }
  return epsilon;
}

struct ChainConfig {
  int n_chains = 4;
  int warmup = 1000;
  int thin = 1;
  int draws_per_chain = 2500;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  std::uint64_t seed = 1;
  double init_radius = 2.0;  // initial coordinates ~ Uniform(-r, r)

  void validate() const;
  long draws_total() const { return static_cast<long>(n_chains) * draws_per_chain; }
};

/// Retained draws and per-draw telemetry of one chain.
template <typename S>
struct ChainResult {
  Mat<S> draws;                 // draws_per_chain x dim
  std::vector<char> divergent;  // aligned with draws rows
  std::vector<int> tree_depth;
  std::vector<S> energy;
  std::vector<S> accept_stat;
  S step_size = 0;
};

/// Merged output of all chains.
struct PosteriorDraws {
  std::vector<ChainResult<double>> chains;
  std::vector<std::string> feature_names;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(feature_names.size()); }
  Eigen::Index total_draws() const;
  int n_chains() const { return static_cast<int>(chains.size()); }

  /// L x dim matrix, chains stacked in order.
  MatrixXd flattened() const;
  /// Chain index of each flattened row.
  std::vector<int> chain_of_row() const;
  /// draws x chains matrix for parameter `j`; all chains must be equally long.
  MatrixXd parameter(Eigen::Index j) const;
  Eigen::Index index_of(const std::string& name) const;
};

/// Draw from an arbitrary target with independent chains (used for both tests and models).
template <typename F>
PosteriorDraws run_chains_on(const F& target, Eigen::Index dim,
                             const std::vector<std::string>& names, const ChainConfig& cfg);

/// Sample the logistic-regression posterior of `ds` under `spec`.
PosteriorDraws run_chains(const Dataset& ds, const ModelSpec<double>& spec, const ChainConfig& cfg);

/// Per-chain RNG seeded from (seed, chain).
std::mt19937_64 chain_rng(std::uint64_t seed, int chain);

/// Columns: chain, draw, divergent, then one per feature name.
void write_draws(const std::filesystem::path& path, const PosteriorDraws& pd);
PosteriorDraws read_draws(const std::filesystem::path& path);

}  // namespace blr

#include "blr/sampler_impl.hpp"
