#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmlp/feature_table.hpp"
#include "kmlp/tensor.hpp"

namespace kmlp::preprocess {

// Equal-frequency bin edges b_0 < b_1 < ... < b_n of one feature.
//
// Intervals are left-open / right-closed, (b_i, b_{i+1}]; the value b_0 itself
// is mapped through the lower clamp. Duplicate quantiles are merged at fit
// time, so the effective bin count may be smaller than the requested one.
struct QuantileBins {
  std::vector<double> boundaries;
  std::size_t requested_bins = 0;

  std::size_t effective_bins() const { return boundaries.size() - 1; }
  double lower() const { return boundaries.front(); }
  double upper() const { return boundaries.back(); }
};

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr std::size_t kDefaultSampleCap = 10'000'000;

// Empirical quantile at rank k/n of an ascending sample, linearly
// interpolated between adjacent order statistics.
double quantile_at_rank(std::span<const double> sorted, std::size_t k, std::size_t n);
double quantile(std::span<const double> sorted, double q);

// Non-finite entries are treated as missing and dropped. Columns longer than
// `sample_cap` are fitted on a seeded uniform subsample of that size.
QuantileBins fit_quantile_bins(std::span<const double> column, std::size_t n,
                               std::size_t sample_cap = kDefaultSampleCap,
                               std::uint64_t seed = 0);

// i/n + (1/n)(x - b_i)/(b_{i+1} - b_i) for x in (b_i, b_{i+1}], clamped to [0, 1].
double qtl_transform(double x, const QuantileBins& bins);

// Bin index scaled to i/n, in [0, (n-1)/n].
double quantile_transform(double x, const QuantileBins& bins);

// One component per bin: 1 below x's bin, the in-bin fraction at x's bin, 0 above.
std::vector<double> ple_encode(double x, const QuantileBins& bins);
void ple_encode_into(double x, const QuantileBins& bins, std::span<double> out);

// ln(x_j / g(x)) with g the geometric mean of (row + offset).
std::vector<double> clr_transform(std::span<const double> row, double offset = 0.0);

enum class Operator { QTL, Quantile, PLE, CLR, ZScore };

std::string_view to_string(Operator op);
Operator parse_operator(std::string_view name);

enum class Encoding {
  Bins,         // QTL, Quantile or PLE over fitted bins
  Constant,     // column with < 2 distinct values: emits 0.5
  LogRatio,     // member of the row-wise CLR group
  Standardize,  // z-score with training mean / standard deviation
  OneHot,       // categorical vocabulary
};

struct ColumnState {
  std::string name;
  ColumnKind source_kind = ColumnKind::Numerical;
  Encoding encoding = Encoding::Bins;
  double median = 0.0;
  QuantileBins bins;
  std::vector<std::string> vocabulary;
  double mean = 0.0;
  double scale = 1.0;
};

struct TransformOptions {
  Operator op = Operator::QTL;
  std::size_t bins = kDefaultBins;
  double clr_offset = 0.0;
  std::size_t sample_cap = kDefaultSampleCap;
  std::uint64_t seed = 0;
};

// Per-column fitted preprocessing state. Immutable after fitting; applying it
// is a pure function of (table, transform).
struct FittedTransform {
  static constexpr int kFormatVersion = 1;

  Operator op = Operator::QTL;
  std::size_t requested_bins = kDefaultBins;
  double clr_offset = 0.0;
  std::vector<ColumnState> columns;

  std::size_t output_width(std::size_t column) const;
  std::size_t output_dim() const;
  std::vector<std::string> constant_columns() const;
  // Content digest of the serialized document; models record it to pin the
  // transform they were trained behind.
  std::string id() const;
};

FittedTransform fit_transform(const FeatureTable& table, const TransformOptions& options);
Matrix apply_transform(const FeatureTable& table, const FittedTransform& transform);

std::string serialize_transform(const FittedTransform& transform);
FittedTransform parse_transform(std::string_view document);

}  // namespace kmlp::preprocess
