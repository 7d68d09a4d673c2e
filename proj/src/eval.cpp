#include "blr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "blr/analysis.hpp"
#include "blr/csv.hpp"
#include "blr/parallel.hpp"

namespace blr {

namespace {

struct ClassCounts {
  long positives = 0;
  long negatives = 0;
};

ClassCounts count_classes(const ScoreVector& scores, const ScoreVector& labels) {
  if (scores.size() != labels.size()) throw data_error("eval.roc", "scores and labels differ in length");
  ClassCounts c;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) == 1.0) {
      ++c.positives;
    } else if (labels(i) == 0.0) {
      ++c.negatives;
    } else {
      throw data_error("eval.roc", "labels must be 0/1");
    }
  }
  if (c.positives == 0 || c.negatives == 0) throw data_error("eval.roc", "both classes must be present");
  return c;
}

// Indices sorted by descending score, with the (tp, fp) counts after each tie group.
struct TieGroup {
  double score;
  long tp;
  long fp;
};

std::vector<TieGroup> sweep(const ScoreVector& scores, const ScoreVector& labels) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  std::vector<TieGroup> groups;
  long tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores(order[k]);
    while (k < order.size() && scores(order[k]) == s) {
      if (labels(order[k]) == 1.0) {
        ++tp;
      } else {
        ++fp;
      }
      ++k;
    }
    groups.push_back({s, tp, fp});
  }
  return groups;
}

}  // namespace

RocCurve roc(const ScoreVector& scores, const ScoreVector& labels) {
  const ClassCounts c = count_classes(scores, labels);
  const double P = static_cast<double>(c.positives);
  const double N = static_cast<double>(c.negatives);
  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const auto& g : sweep(scores, labels)) {
    curve.points.push_back({g.score, static_cast<double>(g.fp) / N, static_cast<double>(g.tp) / P});
  }
  return curve;
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double auc(const ScoreVector& scores, const ScoreVector& labels) {
  const ClassCounts c = count_classes(scores, labels);
  // Twice the trapezoid area in count units stays an exact integer.
  long double twice = 0;
  long tp_prev = 0, fp_prev = 0;
  for (const auto& g : sweep(scores, labels)) {
    twice += static_cast<long double>(g.fp - fp_prev) * static_cast<long double>(g.tp + tp_prev);
    tp_prev = g.tp;
    fp_prev = g.fp;
  }
  return static_cast<double>(twice / (2.0L * c.positives * c.negatives));
}

void ForestConfig::validate(Eigen::Index n_covariates) const {
  if (n_trees < 1 || min_node < 1) throw config_error("eval.forest", "n_trees and min_node must be >= 1");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw config_error("eval.forest", "sample_fraction must lie in (0, 1]");
  }
  if (m_features < 1 || m_features > n_covariates) {
    throw config_error("eval.forest", "m_features = " + std::to_string(m_features) + " but only " +
                                          std::to_string(n_covariates) + " covariates");
  }
}

std::string ForestConfig::describe() const {
  return "trees=" + std::to_string(n_trees) + " features=" + std::to_string(m_features) +
         " min_node=" + std::to_string(min_node) + " fraction=" + csv::format(sample_fraction) +
         " replace=" + (with_replacement ? "true" : "false");
}

namespace {
std::vector<ForestConfig> cartesian(const std::vector<int>& trees, const std::vector<int>& features,
                                    const std::vector<int>& nodes, const std::vector<double>& fractions) {
  std::vector<ForestConfig> grid;
  for (int t : trees)
    for (int m : features)
      for (int node : nodes)
        for (double f : fractions)
          for (bool r : {true, false}) grid.push_back({t, m, node, f, r});
  return grid;
}
}  // namespace

std::vector<ForestConfig> full_grid() {
  return cartesian({50, 100, 150, 200, 250, 300, 400, 500, 600}, {2, 3, 4, 5, 6, 7},
                   {1, 3, 5, 10, 15, 20, 30}, {0.5, 0.6, 0.8, 1.0});
}

std::vector<ForestConfig> reduced_grid() { return cartesian({50, 200}, {2, 4}, {1, 10}, {0.6, 1.0}); }

Forest::Tree Forest::grow(const Eigen::Ref<const MatrixXd>& X, const ScoreVector& y,
                          const ForestConfig& cfg, std::uint64_t seed, int tree_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree_index), 0x7f4a7c15u};
  std::mt19937_64 rng(seq);
  const auto n = static_cast<int>(X.rows());
  const auto p = static_cast<int>(X.cols());

  const int n_sample = std::max(1, static_cast<int>(std::lround(cfg.sample_fraction * n)));
  std::vector<int> sample;
  sample.reserve(static_cast<std::size_t>(n_sample));
  if (cfg.with_replacement) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < n_sample; ++i) sample.push_back(pick(rng));
  } else {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < n_sample; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    sample.assign(all.begin(), all.begin() + n_sample);
  }

  Tree tree;
  struct Pending {
    int node;
    std::vector<int> rows;
  };
  std::vector<Pending> stack;
  tree.push_back({});
  stack.push_back({0, std::move(sample)});
  std::vector<int> features(static_cast<std::size_t>(p));
  std::vector<std::pair<double, int>> column;

  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    const auto& rows = job.rows;
    const int size = static_cast<int>(rows.size());
    int pos = 0;
    for (int r : rows) pos += y(r) == 1.0 ? 1 : 0;
    tree[job.node].value = static_cast<double>(pos) / size;
    if (size <= cfg.min_node || pos == 0 || pos == size) continue;

    // n * Gini / 2 for a node with `pos` positives among `count`
    auto impurity = [](int pos_count, int count) {
      return count == 0 ? 0.0
                        : static_cast<double>(pos_count) * (count - pos_count) / static_cast<double>(count);
    };
    const double parent = impurity(pos, size);
    double best = parent;
    int best_feature = -1;
    double best_threshold = 0;

    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < cfg.m_features; ++k) {
      std::uniform_int_distribution<int> pick(k, p - 1);
      std::swap(features[k], features[pick(rng)]);
      const int f = features[k];
      column.clear();
      for (int r : rows) column.emplace_back(X(r, f), y(r) == 1.0 ? 1 : 0);
      std::sort(column.begin(), column.end());
      int left_pos = 0;
      for (int i = 0; i + 1 < size; ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double score = impurity(left_pos, i + 1) + impurity(pos - left_pos, size - i - 1);
        if (score < best) {
          best = score;
          best_feature = f;
          best_threshold = column[i].first;
        }
      }
    }
    if (best_feature < 0 || !(best < parent - 1e-12)) continue;

    std::vector<int> left, right;
    for (int r : rows) (X(r, best_feature) <= best_threshold ? left : right).push_back(r);
    const int left_id = static_cast<int>(tree.size());
    tree.push_back({});
    tree.push_back({});
    tree[job.node].feature = best_feature;
    tree[job.node].threshold = best_threshold;
    tree[job.node].left = left_id;
    tree[job.node].right = left_id + 1;
    stack.push_back({left_id + 1, std::move(right)});
    stack.push_back({left_id, std::move(left)});
  }
  return tree;
}

Forest Forest::fit(const Eigen::Ref<const MatrixXd>& X, const ScoreVector& y,
                   const ForestConfig& cfg, std::uint64_t seed) {
  cfg.validate(X.cols());
  if (X.rows() < 1 || X.rows() != y.size()) throw data_error("eval.forest", "empty or mismatched training data");
  Forest forest;
  forest.trees_.resize(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) forest.trees_[t] = grow(X, y, cfg, seed, t);
  return forest;
}

Forest Forest::fit(const Dataset& train, const ForestConfig& cfg, std::uint64_t seed) {
  const auto cols = train.covariate_columns();
  const MatrixXd X = train.X(Eigen::all, cols);
  Forest forest = fit(X, train.y, cfg, seed);
  forest.columns_ = cols;
  return forest;
}

double Forest::predict_row(const ScoreVector& x) const {
  double total = 0;
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[node].feature >= 0) {
      node = x(tree[node].feature) <= tree[node].threshold ? tree[node].left : tree[node].right;
    }
    total += tree[node].value;
  }
  return total / static_cast<double>(trees_.size());
}

VectorXd Forest::predict(const Eigen::Ref<const MatrixXd>& X) const {
  VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X.row(i).transpose());
  return out;
}

VectorXd Forest::predict(const Dataset& ds) const {
  return predict(ds.X(Eigen::all, columns_));
}

std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2 || n < k) throw data_error("eval.folds", "need at least as many rows as folds (k >= 2)");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

GridSearchResult grid_search(const Dataset& train, const std::vector<ForestConfig>& grid, int folds,
                             std::uint64_t seed) {
  if (grid.empty()) throw config_error("eval.grid", "empty grid");
  const auto cols = train.covariate_columns();
  const MatrixXd X = train.X(Eigen::all, cols);
  const auto n_cov = static_cast<Eigen::Index>(cols.size());

  GridSearchResult result;
  result.folds = make_folds(train.n(), folds, seed);

  struct FoldData {
    MatrixXd X_fit, X_held;
    VectorXd y_fit, y_held;
  };
  std::vector<FoldData> data;
  for (const auto& held : result.folds) {
    std::vector<Eigen::Index> fit_rows;
    std::vector<char> is_held(static_cast<std::size_t>(train.n()), 0);
    for (auto r : held) is_held[r] = 1;
    for (Eigen::Index r = 0; r < train.n(); ++r) {
      if (!is_held[r]) fit_rows.push_back(r);
    }
    FoldData fd{X(fit_rows, Eigen::all), X(held, Eigen::all), train.y(fit_rows), train.y(held)};
    const double held_pos = fd.y_held.sum();
    if (held_pos == 0.0 || held_pos == static_cast<double>(fd.y_held.size())) {
      throw data_error("eval.grid", "a held-out fold contains a single class");
    }
    data.push_back(std::move(fd));
  }

  result.scores.assign(grid.size(), -std::numeric_limits<double>::infinity());
  parallel_for(grid.size(), [&](std::size_t g) {
    if (grid[g].m_features > n_cov) return;
    double total = 0;
    for (std::size_t f = 0; f < data.size(); ++f) {
      const Forest forest = Forest::fit(data[f].X_fit, data[f].y_fit, grid[g], seed + f);
      total += auc(forest.predict(data[f].X_held), data[f].y_held);
    }
    result.scores[g] = total / static_cast<double>(data.size());
  });

  std::size_t best = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g].m_features > n_cov) continue;
    if (best == grid.size() || result.scores[g] > result.scores[best]) best = g;
  }
  if (best == grid.size()) throw config_error("eval.grid", "no grid entry fits the covariate count");
  result.best = grid[best];
  result.best_score = result.scores[best];
  return result;
}

std::pair<AucReport, AucReport> compare(const Dataset& train, const Dataset& test,
                                        const PosteriorDraws& pd, const ForestConfig& cfg,
                                        std::uint64_t seed) {
  if (pd.feature_names != test.feature_names) {
    throw data_error("eval.compare", "draws and test set have different features");
  }
  const VectorXd logistic_scores = posterior_predictive_rows(test.X, pd.flattened());
  const Forest forest = Forest::fit(train, cfg, seed);
  const VectorXd forest_scores = forest.predict(test);
  AucReport a{"Logistic Regression", auc(logistic_scores, test.y), roc(logistic_scores, test.y)};
  AucReport b{"Random Forest", auc(forest_scores, test.y), roc(forest_scores, test.y)};
  return {std::move(a), std::move(b)};
}

void write_roc(const std::filesystem::path& path, const RocCurve& curve) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : curve.points) {
    rows.push_back({csv::format(p.threshold), csv::format(p.fpr), csv::format(p.tpr)});
  }
  csv::write_file(path, {"threshold", "fpr", "tpr"}, rows);
}

void write_auc_table(const std::filesystem::path& path, const std::vector<AucReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) rows.push_back({r.model, csv::format(r.auc)});
  csv::write_file(path, {"model", "auc"}, rows);
}

}  // namespace blr
