#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "blr/common.hpp"

namespace blr {

/// A CSV cell: missing, numeric, or free text.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<Cell>> rows;

  std::size_t n_rows() const { return rows.size(); }
  /// Throws a data error naming `column` when absent.
  std::size_t column_index(const std::string& column) const;
};

/// Parse a header-first CSV file. "" and "NA" become missing cells.
RawTable load_table(const std::filesystem::path& path);

/// Build a table from already-split records (first record is the header).
RawTable make_table(const std::vector<std::vector<std::string>>& records);

struct CategoricalColumn {
  std::string name;
  std::vector<std::string> categories;
  std::string omitted;
};

struct Schema {
  std::string outcome;
  std::vector<std::string> binary_cols;
  std::vector<CategoricalColumn> categorical_cols;
  std::vector<std::string> quantitative_cols;
  bool intercept = true;

  void validate() const;
};

enum class FeatureKind { Intercept, Binary, Indicator, Quantitative };

struct ColumnScaling {
  Eigen::Index column;
  double mean;
  double sd;
};

/// Per-column affine map applied to quantitative columns: (x - mean) / sd.
struct Standardization {
  std::vector<ColumnScaling> columns;
};

/// Encoded design matrix and binary outcome. Row i of X pairs with y(i).
struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::vector<std::string> feature_names;
  std::vector<FeatureKind> feature_kinds;
  Standardization standardization;
  std::vector<std::size_t> row_ids;  // source row of each observation
  std::size_t n_dropped = 0;         // rows removed for missing values

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
  double outcome_rate() const { return y.size() ? y.mean() : 0.0; }
  bool has_intercept() const {
    return !feature_kinds.empty() && feature_kinds.front() == FeatureKind::Intercept;
  }
  /// Columns other than the intercept, in order.
  std::vector<Eigen::Index> covariate_columns() const;

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Name used for the indicator column of `category` within `column`.
std::string indicator_name(const std::string& column, const std::string& category);

/// Encode with listwise deletion; quantitative columns are standardized with
/// statistics of the encoded sample itself.
Dataset encode(const RawTable& raw, const Schema& schema);

/// Sample mean and sd (n - 1 denominator) of each quantitative column, in raw units.
Standardization fit_standardization(const Dataset& ds);

/// Undo the dataset's current scaling and apply `target` instead.
Dataset restandardize(const Dataset& ds, const Standardization& target);

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Random train/test partition of size (n - round(n f), round(n f)). Both parts are
/// rescaled with statistics fit on the training rows.
SplitResult split(const Dataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace blr
