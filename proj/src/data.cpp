#include "blr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "blr/csv.hpp"

namespace blr {

namespace {

Cell parse_cell(const std::string& text) {
  if (text.empty() || text == "NA") return std::monostate{};
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && ptr == text.data() + text.size()) return v;
  return text;
}

bool matches_category(const Cell& cell, const std::string& label) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s == label;
  if (const auto* d = std::get_if<double>(&cell)) {
    Cell parsed = parse_cell(label);
    if (const auto* ld = std::get_if<double>(&parsed)) return *ld == *d;
  }
  return false;
}

std::string describe(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* d = std::get_if<double>(&cell)) return csv::format(*d);
  return "NA";
}

}  // namespace

std::size_t RawTable::column_index(const std::string& column) const {
  auto it = std::find(column_names.begin(), column_names.end(), column);
  if (it == column_names.end()) throw data_error("data.encode", "missing column '" + column + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

RawTable make_table(const std::vector<std::vector<std::string>>& records) {
  if (records.empty()) throw data_error("data.load", "no header row");
  RawTable table;
  table.column_names = records.front();
  std::set<std::string> seen;
  for (const auto& name : table.column_names) {
    if (!seen.insert(name).second) throw data_error("data.load", "duplicate header '" + name + "'");
  }
  const std::size_t width = table.column_names.size();
  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw data_error("data.load", "row " + std::to_string(r) + " has " +
                                        std::to_string(records[r].size()) + " fields, expected " +
                                        std::to_string(width));
    }
    std::vector<Cell> row;
    row.reserve(width);
    for (const auto& f : records[r]) row.push_back(parse_cell(f));
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable load_table(const std::filesystem::path& path) {
  return make_table(csv::read_records(path));
}

void Schema::validate() const {
  if (outcome.empty()) throw config_error("data.schema", "outcome column not set");
  std::set<std::string> names;
  auto add = [&](const std::string& n) {
    if (n == outcome) throw config_error("data.schema", "outcome '" + n + "' listed as covariate");
    if (!names.insert(n).second) throw config_error("data.schema", "column '" + n + "' listed twice");
  };
  for (const auto& b : binary_cols) add(b);
  for (const auto& q : quantitative_cols) add(q);
  for (const auto& c : categorical_cols) {
    add(c.name);
    if (c.categories.size() < 2) {
      throw config_error("data.schema", "categorical '" + c.name + "' needs at least two categories");
    }
    if (std::find(c.categories.begin(), c.categories.end(), c.omitted) == c.categories.end()) {
      throw config_error("data.schema", "omitted category '" + c.omitted + "' not in '" + c.name + "'");
    }
  }
}

std::vector<Eigen::Index> Dataset::covariate_columns() const {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < dim(); ++j) {
    if (feature_kinds[j] != FeatureKind::Intercept) cols.push_back(j);
  }
  return cols;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X = X(rows, Eigen::all);
  out.y = y(rows);
  out.feature_names = feature_names;
  out.feature_kinds = feature_kinds;
  out.standardization = standardization;
  out.row_ids.reserve(rows.size());
  for (auto r : rows) out.row_ids.push_back(row_ids.empty() ? static_cast<std::size_t>(r) : row_ids[r]);
  return out;
}

std::string indicator_name(const std::string& column, const std::string& category) {
  return column + "[" + category + "]";
}

Dataset encode(const RawTable& raw, const Schema& schema) {
  schema.validate();
  const std::size_t outcome_idx = raw.column_index(schema.outcome);
  std::vector<std::size_t> used{outcome_idx};
  auto binary_idx = std::vector<std::size_t>{};
  for (const auto& b : schema.binary_cols) binary_idx.push_back(raw.column_index(b));
  auto cat_idx = std::vector<std::size_t>{};
  for (const auto& c : schema.categorical_cols) cat_idx.push_back(raw.column_index(c.name));
  auto quant_idx = std::vector<std::size_t>{};
  for (const auto& q : schema.quantitative_cols) quant_idx.push_back(raw.column_index(q));
  used.insert(used.end(), binary_idx.begin(), binary_idx.end());
  used.insert(used.end(), cat_idx.begin(), cat_idx.end());
  used.insert(used.end(), quant_idx.begin(), quant_idx.end());

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    if (std::none_of(used.begin(), used.end(), [&](std::size_t c) { return is_missing(row[c]); })) {
      kept.push_back(r);
    }
  }

  Dataset ds;
  ds.n_dropped = raw.rows.size() - kept.size();
  if (schema.intercept) {
    ds.feature_names.push_back("(Intercept)");
    ds.feature_kinds.push_back(FeatureKind::Intercept);
  }
  for (const auto& b : schema.binary_cols) {
    ds.feature_names.push_back(b);
    ds.feature_kinds.push_back(FeatureKind::Binary);
  }
  for (const auto& c : schema.categorical_cols) {
    for (const auto& cat : c.categories) {
      if (cat == c.omitted) continue;
      ds.feature_names.push_back(indicator_name(c.name, cat));
      ds.feature_kinds.push_back(FeatureKind::Indicator);
    }
  }
  const auto first_quant = static_cast<Eigen::Index>(ds.feature_names.size());
  for (const auto& q : schema.quantitative_cols) {
    ds.feature_names.push_back(q);
    ds.feature_kinds.push_back(FeatureKind::Quantitative);
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto dim = static_cast<Eigen::Index>(ds.feature_names.size());
  ds.X = MatrixXd::Zero(n, dim);
  ds.y.resize(n);
  ds.row_ids = kept;

  auto as_number = [&](const Cell& cell, const std::string& col, std::size_t row) {
    if (const auto* d = std::get_if<double>(&cell)) return *d;
    throw data_error("data.encode", "non-numeric value '" + describe(cell) + "' in column '" + col +
                                        "' at row " + std::to_string(row + 1));
  };
  auto as_binary = [&](const Cell& cell, const std::string& col, std::size_t row) {
    double v = as_number(cell, col, row);
    if (v != 0.0 && v != 1.0) {
      throw data_error("data.encode", "column '" + col + "' must be 0/1, found " + describe(cell));
    }
    return v;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t r = kept[i];
    const auto& row = raw.rows[r];
    ds.y(i) = as_binary(row[outcome_idx], schema.outcome, r);
    Eigen::Index col = 0;
    if (schema.intercept) ds.X(i, col++) = 1.0;
    for (std::size_t b = 0; b < binary_idx.size(); ++b) {
      ds.X(i, col++) = as_binary(row[binary_idx[b]], schema.binary_cols[b], r);
    }
    for (std::size_t c = 0; c < cat_idx.size(); ++c) {
      const auto& spec = schema.categorical_cols[c];
      const Cell& cell = row[cat_idx[c]];
      bool found = false;
      for (const auto& cat : spec.categories) {
        const bool hit = matches_category(cell, cat);
        found = found || hit;
        if (cat == spec.omitted) continue;
        ds.X(i, col++) = hit ? 1.0 : 0.0;
      }
      if (!found) {
        throw data_error("data.encode", "unseen category '" + describe(cell) + "' in column '" +
                                            spec.name + "'");
      }
    }
    for (std::size_t q = 0; q < quant_idx.size(); ++q) {
      ds.X(i, col++) = as_number(row[quant_idx[q]], schema.quantitative_cols[q], r);
    }
  }

  // Raw values are stored with the identity scaling, then rescaled to sample statistics.
  for (Eigen::Index j = first_quant; j < dim; ++j) ds.standardization.columns.push_back({j, 0.0, 1.0});
  return restandardize(ds, fit_standardization(ds));
}

Standardization fit_standardization(const Dataset& ds) {
  Standardization out;
  for (const auto& cur : ds.standardization.columns) {
    const auto n = ds.n();
    if (n < 2) throw data_error("data.standardize", "need at least two rows to standardize");
    VectorXd raw = ds.X.col(cur.column).array() * cur.sd + cur.mean;
    const double mean = raw.mean();
    const double sd = std::sqrt((raw.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw data_error("data.standardize",
                       "zero-variance column '" + ds.feature_names[cur.column] + "'");
    }
    out.columns.push_back({cur.column, mean, sd});
  }
  return out;
}

Dataset restandardize(const Dataset& ds, const Standardization& target) {
  if (target.columns.size() != ds.standardization.columns.size()) {
    throw data_error("data.standardize", "scaling does not match dataset columns");
  }
  Dataset out = ds;
  for (std::size_t c = 0; c < target.columns.size(); ++c) {
    const auto& cur = ds.standardization.columns[c];
    const auto& next = target.columns[c];
    if (cur.column != next.column) throw data_error("data.standardize", "column order mismatch");
    if (cur.mean == next.mean && cur.sd == next.sd) continue;
    out.X.col(cur.column) =
        ((ds.X.col(cur.column).array() * cur.sd + cur.mean) - next.mean) / next.sd;
  }
  out.standardization = target;
  return out;
}

SplitResult split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw config_error("data.split", "test fraction must lie in (0, 1)");
  }
  const auto n = ds.n();
  const auto n_test = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * test_fraction));
  if (n < 2 || n_test < 1 || n_test >= n) {
    throw data_error("data.split", "fraction " + csv::format(test_fraction) + " of " +
                                       std::to_string(n) + " rows leaves an empty part");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> test_rows(order.begin(), order.begin() + n_test);
  std::vector<Eigen::Index> train_rows(order.begin() + n_test, order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  SplitResult out{ds.subset(train_rows), ds.subset(test_rows)};
  if (!ds.standardization.columns.empty()) {
    const auto stats = fit_standardization(out.train);
    out.train = restandardize(out.train, stats);
    out.test = restandardize(out.test, stats);
  }
  return out;
}

}  // namespace blr
