#include "kmlp/feature_table.hpp"

#include <cmath>

#include "kmlp/error.hpp"

namespace kmlp {

void FeatureTable::validate() const {
  const std::size_t n_cols = cols();
  if (column_names.size() != n_cols || column_kinds.size() != n_cols ||
      categories.size() != n_cols) {
    throw Error(ErrorCode::ShapeError, "column metadata does not match value matrix width");
  }
  if (missing.rows() != values.rows() || missing.cols() != values.cols()) {
    throw Error(ErrorCode::ShapeError, "missing mask shape differs from value matrix");
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (!missing(r, c) && !std::isfinite(values(r, c))) {
        throw Error(ErrorCode::InvalidConfig,
                    "non-finite value in column '" + column_names[c] + "'",
                    static_cast<std::size_t>(r) + 1);
      }
    }
  }
  if (labels) {
    if (labels->size() != rows()) {
      throw Error(ErrorCode::ShapeError, "label count differs from row count");
    }
    for (std::size_t r = 0; r < labels->size(); ++r) {
      if ((*labels)[r] != 0 && (*labels)[r] != 1) {
        throw Error(ErrorCode::LabelError, "label is not 0 or 1", r + 1);
      }
    }
  }
}

FeatureTable make_numeric_table(const Matrix& values, std::optional<std::vector<int>> labels,
                                std::vector<std::string> names) {
  FeatureTable t;
  const auto n_cols = static_cast<std::size_t>(values.cols());
  if (names.empty()) {
    for (std::size_t c = 0; c < n_cols; ++c) names.push_back("x" + std::to_string(c));
  }
  t.column_names = std::move(names);
  t.column_kinds.assign(n_cols, ColumnKind::Numerical);
  t.values = values;
  t.missing = MissingMask::Constant(values.rows(), values.cols(), false);
  t.categories.assign(n_cols, {});
  t.labels = std::move(labels);
  t.validate();
  return t;
}

FeatureTable take_rows(const FeatureTable& table, std::span<const std::size_t> rows) {
  FeatureTable out;
  out.column_names = table.column_names;
  out.column_kinds = table.column_kinds;
  out.categories = table.categories;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.values.resize(n, table.values.cols());
  out.missing.resize(n, table.values.cols());
  if (table.labels) out.labels.emplace();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    if (rows[i] >= table.rows()) {
      throw Error(ErrorCode::InvalidIndex, "row index out of range");
    }
    out.values.row(i) = table.values.row(src);
    out.missing.row(i) = table.missing.row(src);
    if (table.labels) out.labels->push_back((*table.labels)[rows[i]]);
  }
  return out;
}

std::vector<double> present_values(const FeatureTable& table, std::size_t column) {
  std::vector<double> out;
  out.reserve(table.rows());
  const auto c = static_cast<Eigen::Index>(column);
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    if (!table.missing(r, c)) out.push_back(table.values(r, c));
  }
  return out;
}

}  // namespace kmlp
