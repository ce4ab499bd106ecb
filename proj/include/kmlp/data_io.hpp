#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kmlp/feature_table.hpp"

namespace kmlp::io {

// ---------------------------------------------------------------------------
// CSV

// RFC 4180 records: comma delimiter, double-quote quoting with "" escapes,
// CRLF or LF line ends. A trailing newline does not start a record.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

struct CsvOptions {
  // Defaults to the last column. Empty string means "no label column".
  std::optional<std::string> label_column;
  std::vector<std::string> missing_tokens{"", "NA", "NaN", "?"};
  // When set, labels equal to this token map to 1 and any other value to 0.
  // Otherwise labels must read as the numbers 0 or 1.
  std::optional<std::string> positive_label;
};

// Columns whose present cells all parse as finite numbers are numerical; the
// rest are categorical with a sorted dictionary. Row numbers in errors are
// 1-based data rows (the header is row 0).
FeatureTable read_csv(std::string_view text, const CsvOptions& options = {});
FeatureTable load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

// Shortest round-trip number formatting; missing cells are written empty.
// The label column, when present, is written last under `label_name`.
std::string write_csv(const FeatureTable& table, std::string_view label_name = "label");

// ---------------------------------------------------------------------------
// Splitting

enum class SplitStrategy { Uniform, Stratified, Ordered };
std::string_view to_string(SplitStrategy s);
SplitStrategy parse_split_strategy(std::string_view name);

struct SplitSpec {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
  SplitStrategy strategy = SplitStrategy::Uniform;
  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Seeded permutation cut at round(train*N) and round((train+valid)*N).
// Stratified interleaves the classes before cutting; `labels` is required
// for it. Ordered keeps row order.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec,
                           const std::vector<int>* labels = nullptr);

struct Splits {
  FeatureTable train;
  FeatureTable valid;
  FeatureTable test;
};

// Tables under 10 rows raise EmptyDataset.
Splits split(const FeatureTable& table, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Column summaries

struct ColumnSummary {
  std::string name;
  ColumnKind kind = ColumnKind::Numerical;
  std::size_t present = 0;
  double missing_rate = 0.0;
  std::size_t distinct = 0;
  // Numerical columns only; NaN when no value is present.
  double min = 0.0;
  double max = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (q, value)
};

std::vector<ColumnSummary> describe(const FeatureTable& table,
                                    std::vector<double> probabilities = {0.0, 0.25, 0.5, 0.75, 1.0});
std::string describe_tsv(const std::vector<ColumnSummary>& summary);

// ---------------------------------------------------------------------------
// Benchmark descriptors

struct DatasetDescriptor {
  std::string name;
  std::string abbreviation;
  std::size_t rows = 0;
  std::size_t features = 0;
  std::string label_column;
  std::string source_url;
  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

// The six public benchmarks (CP, MT, CD, EG, HI, JA).
const std::vector<DatasetDescriptor>& builtin_descriptors();
std::vector<DatasetDescriptor> parse_descriptors(std::string_view json_text);
std::string serialize_descriptors(const std::vector<DatasetDescriptor>& list);

// Lookup by abbreviation or name, case-insensitive.
std::optional<DatasetDescriptor> find_descriptor(std::string_view key);

// A "DescriptorMismatch" warning when the table's shape differs from the
// descriptor, nothing otherwise.
std::optional<std::string> check_descriptor(const DatasetDescriptor& d, const FeatureTable& table);

}  // namespace kmlp::io
