#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "blr/common.hpp"
#include "blr/data.hpp"
#include "blr/sampler.hpp"

namespace blr {

using ScoreVector = Eigen::Ref<const VectorXd>;

struct RocPoint {
  double threshold;  // classify positive when score >= threshold
  double fpr;
  double tpr;
};

/// Points from (0,0) to (1,1); tied scores form a single step.
struct RocCurve {
  std::vector<RocPoint> points;
};

RocCurve roc(const ScoreVector& scores, const ScoreVector& labels);

/// Trapezoidal area under a curve.
double trapezoid_area(const RocCurve& curve);

/// Area under the ROC curve, computed from exact class counts.
double auc(const ScoreVector& scores, const ScoreVector& labels);

struct ForestConfig {
  int n_trees = 200;
  int m_features = 2;    // covariates tried at each split
  int min_node = 1;      // nodes of this size or smaller become leaves
  double sample_fraction = 0.6;
  bool with_replacement = true;

  void validate(Eigen::Index n_covariates) const;
  std::string describe() const;
  bool operator==(const ForestConfig&) const = default;
};

/// The full tuning grid, in lexicographic order of (trees, features, node size, fraction, replacement).
std::vector<ForestConfig> full_grid();
/// Two values per axis, for desk-scale runs.
std::vector<ForestConfig> reduced_grid();

/**
 * Random forest of CART classification trees.
 *
 * Each tree sees a random subsample (fraction * n rows, with or without
 * replacement). Splits are axis-aligned, chosen by Gini impurity decrease
 * among m_features randomly drawn covariates. A split sends x <= a left, where
 * a is the largest left-side sample value, so tree decisions depend only on
 * the order of each covariate. A tree predicts the positive
 * fraction of its leaf; the forest averages trees.
 */
class Forest {
 public:
  /// Fits on every non-intercept column of `train`.
  static Forest fit(const Dataset& train, const ForestConfig& cfg, std::uint64_t seed);
  /// Fits on all columns of `X`.
  static Forest fit(const Eigen::Ref<const MatrixXd>& X, const ScoreVector& y,
                    const ForestConfig& cfg, std::uint64_t seed);

  /// Probability for one row of covariates (same column order as fitting).
  double predict_row(const ScoreVector& x) const;
  VectorXd predict(const Eigen::Ref<const MatrixXd>& X) const;
  /// Selects the same dataset columns used in fit(Dataset, ...).
  VectorXd predict(const Dataset& ds) const;

  std::size_t n_trees() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
  };
  using Tree = std::vector<Node>;

  static Tree grow(const Eigen::Ref<const MatrixXd>& X, const ScoreVector& y,
                   const ForestConfig& cfg, std::uint64_t seed, int tree_index);

  std::vector<Tree> trees_;
  std::vector<Eigen::Index> columns_;
};

struct GridSearchResult {
  ForestConfig best;
  double best_score = 0;
  std::vector<double> scores;                     // mean fold AUC, grid order
  std::vector<std::vector<Eigen::Index>> folds;   // held-out row indices per fold
};

/// Rows of `n` assigned to `k` folds after a seeded shuffle.
std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int k, std::uint64_t seed);

/// Exhaustive k-fold cross-validated AUC over `grid`; first best in grid order wins.
/// Configurations needing more covariates than available are skipped.
GridSearchResult grid_search(const Dataset& train, const std::vector<ForestConfig>& grid,
                             int folds, std::uint64_t seed);

struct AucReport {
  std::string model;
  double auc;
  RocCurve roc;
};

/// Score the test rows with the posterior predictive and a forest fit on `train`.
std::pair<AucReport, AucReport> compare(const Dataset& train, const Dataset& test,
                                        const PosteriorDraws& pd, const ForestConfig& cfg,
                                        std::uint64_t seed);

/// Columns: threshold, fpr, tpr.
void write_roc(const std::filesystem::path& path, const RocCurve& curve);
/// Columns: model, auc.
void write_auc_table(const std::filesystem::path& path, const std::vector<AucReport>& reports);

}  // namespace blr
