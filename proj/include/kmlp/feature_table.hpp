#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmlp/tensor.hpp"

namespace kmlp {

enum class ColumnKind { Numerical, Categorical };

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raw tabular data. Categorical cells hold an integer code into the column's
// `categories` dictionary; numerical cells hold the parsed value. Cells with
// missing(r, c) set carry an unspecified value (NaN by convention).
struct FeatureTable {
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  Matrix values;
  MissingMask missing;
  std::vector<std::vector<std::string>> categories;
  std::optional<std::vector<int>> labels;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  bool is_missing(std::size_t r, std::size_t c) const {
    return missing(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  // Throws ShapeError / InvalidConfig when the structural invariants do not
  // hold (shape agreement, finite non-missing values, binary labels).
  void validate() const;
};

// Builds an all-numerical table without missing cells.
FeatureTable make_numeric_table(const Matrix& values,
                                std::optional<std::vector<int>> labels = std::nullopt,
                                std::vector<std::string> names = {});

FeatureTable take_rows(const FeatureTable& table, std::span<const std::size_t> rows);

// Non-missing values of one column, in row order.
std::vector<double> present_values(const FeatureTable& table, std::size_t column);

}  // namespace kmlp
