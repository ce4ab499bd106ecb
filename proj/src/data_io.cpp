#include "kmlp/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"
#include "kmlp/preprocess.hpp"

namespace kmlp::io {

namespace {

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_open = false;
  std::size_t line = 0;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    record_open = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw Error(ErrorCode::FormatError, "quote inside an unquoted field", line);
        }
        in_quotes = true;
        field_was_quoted = true;
        record_open = true;
        break;
      case ',':
        end_field();
        record_open = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field_was_quoted) {
          throw Error(ErrorCode::FormatError, "text after a closing quote", line);
        }
        field += ch;
        record_open = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::FormatError, "unterminated quoted field", line);
  if (record_open) end_record();
  return records;
}

FeatureTable read_csv(std::string_view text, const CsvOptions& options) {
  auto records = parse_csv(text);
  if (records.empty()) throw Error(ErrorCode::FormatError, "missing header row", 0);
  const std::vector<std::string> header = std::move(records.front());
  const std::size_t width = header.size();
  // Blank lines carry no data.
  std::erase_if(records, [](const auto& r) { return r.size() == 1 && r.front().empty(); });
  const std::size_t n = records.size() - 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw Error(ErrorCode::FormatError,
                  "row has " + std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(width),
                  r);
    }
  }

  std::optional<std::size_t> label_col;
  if (!options.label_column) {
    if (width < 2) throw Error(ErrorCode::FormatError, "need at least one feature and a label column", 0);
    label_col = width - 1;
  } else if (!options.label_column->empty()) {
    const auto it = std::find(header.begin(), header.end(), *options.label_column);
    if (it == header.end()) {
      throw Error(ErrorCode::SchemaMismatch, "label column '" + *options.label_column + "' not in header");
    }
    label_col = static_cast<std::size_t>(it - header.begin());
  }

  auto is_missing = [&](const std::string& s) {
    return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), s) !=
           options.missing_tokens.end();
  };

  FeatureTable t;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (label_col && c == *label_col) continue;
    feature_cols.push_back(c);
    t.column_names.push_back(header[c]);
  }
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  t.values = Matrix::Constant(static_cast<Eigen::Index>(n), d, std::numeric_limits<double>::quiet_NaN());
  t.missing = MissingMask::Constant(static_cast<Eigen::Index>(n), d, false);
  t.column_kinds.assign(feature_cols.size(), ColumnKind::Numerical);
  t.categories.assign(feature_cols.size(), {});

  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    const std::size_t c = feature_cols[j];
    bool numeric = true;
    for (std::size_t r = 0; r < n && numeric; ++r) {
      const std::string& cell = records[r + 1][c];
      if (!is_missing(cell) && !parse_number(cell)) numeric = false;
    }
    const auto jj = static_cast<Eigen::Index>(j);
    if (numeric) {
      for (std::size_t r = 0; r < n; ++r) {
        const std::string& cell = records[r + 1][c];
        const auto rr = static_cast<Eigen::Index>(r);
        if (is_missing(cell)) {
          t.missing(rr, jj) = true;
        } else {
          t.values(rr, jj) = *parse_number(cell);
        }
      }
      continue;
    }
    t.column_kinds[j] = ColumnKind::Categorical;
    std::vector<std::string> dict;
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = records[r + 1][c];
      if (!is_missing(cell)) dict.push_back(cell);
    }
    std::sort(dict.begin(), dict.end());
    dict.erase(std::unique(dict.begin(), dict.end()), dict.end());
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = records[r + 1][c];
      const auto rr = static_cast<Eigen::Index>(r);
      if (is_missing(cell)) {
        t.missing(rr, jj) = true;
      } else {
        const auto pos = std::lower_bound(dict.begin(), dict.end(), cell) - dict.begin();
        t.values(rr, jj) = static_cast<double>(pos);
      }
    }
    t.categories[j] = std::move(dict);
  }

  if (label_col) {
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = records[r + 1][*label_col];
      if (options.positive_label) {
        if (is_missing(cell)) throw Error(ErrorCode::LabelError, "missing label", r + 1);
        labels[r] = cell == *options.positive_label ? 1 : 0;
        continue;
      }
      const auto v = parse_number(cell);
      if (!v || (*v != 0.0 && *v != 1.0)) {
        throw Error(ErrorCode::LabelError, "label '" + cell + "' is not 0 or 1", r + 1);
      }
      labels[r] = static_cast<int>(*v);
    }
    t.labels = std::move(labels);
  }
  t.validate();
  return t;
}

FeatureTable load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "failed reading '" + path.string() + "'");
  return read_csv(buf.str(), options);
}

std::string write_csv(const FeatureTable& table, std::string_view label_name) {
  std::string out;
  for (std::size_t c = 0; c < table.cols(); ++c) {
    if (c > 0) out += ',';
    out += quote_field(table.column_names[c]);
  }
  if (table.labels) {
    if (table.cols() > 0) out += ',';
    out += quote_field(label_name);
  }
  out += '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (c > 0) out += ',';
      if (table.is_missing(r, c)) continue;
      const double v = table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (table.column_kinds[c] == ColumnKind::Categorical) {
        out += quote_field(table.categories[c].at(static_cast<std::size_t>(v)));
      } else {
        out += format_number(v);
      }
    }
    if (table.labels) {
      if (table.cols() > 0) out += ',';
      out += (*table.labels)[r] == 1 ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::string_view to_string(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::Uniform: return "uniform";
    case SplitStrategy::Stratified: return "stratified";
    case SplitStrategy::Ordered: return "ordered";
  }
  return "uniform";
}

SplitStrategy parse_split_strategy(std::string_view name) {
  if (name == "uniform") return SplitStrategy::Uniform;
  if (name == "stratified") return SplitStrategy::Stratified;
  if (name == "ordered") return SplitStrategy::Ordered;
  throw Error(ErrorCode::InvalidConfig, "unknown split strategy '" + std::string(name) + "'");
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && valid >= 0.0 && test >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "split ratios must be non-negative with a positive train share");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "split ratios must sum to 1");
  }
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec, const std::vector<int>* labels) {
  spec.validate();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (spec.strategy != SplitStrategy::Ordered) seeded_shuffle(order, spec.seed);
  if (spec.strategy == SplitStrategy::Stratified) {
    if (labels == nullptr || labels->size() != n) {
      throw Error(ErrorCode::InvalidConfig, "stratified split needs one label per row");
    }
    // Position of each row within its class, scaled to (0, 1); sorting on it
    // spreads both classes evenly along the order.
    std::size_t counts[2] = {0, 0};
    for (std::size_t r : order) ++counts[(*labels)[r] == 1];
    std::size_t seen[2] = {0, 0};
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(n);
    for (std::size_t r : order) {
      const int k = (*labels)[r] == 1;
      keyed.emplace_back((static_cast<double>(seen[k]++) + 0.5) / static_cast<double>(counts[k]), r);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < n; ++i) order[i] = keyed[i].second;
  }
  const auto cut1 = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  const auto cut2 = static_cast<std::size_t>(
      std::llround((spec.train + spec.valid) * static_cast<double>(n)));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut1));
  s.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(cut1),
                 order.begin() + static_cast<std::ptrdiff_t>(std::min(cut2, n)));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(cut2, n)), order.end());
  return s;
}

Splits split(const FeatureTable& table, const SplitSpec& spec) {
  if (table.rows() < 10) {
    throw Error(ErrorCode::EmptyDataset, "need at least 10 rows to split, got " + std::to_string(table.rows()));
  }
  const auto* labels = table.labels ? &*table.labels : nullptr;
  const SplitIndices idx = split_indices(table.rows(), spec, labels);
  return {take_rows(table, idx.train), take_rows(table, idx.valid), take_rows(table, idx.test)};
}

// ---------------------------------------------------------------------------
// Column summaries

std::vector<ColumnSummary> describe(const FeatureTable& table, std::vector<double> probabilities) {
  std::vector<ColumnSummary> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t c = 0; c < table.cols(); ++c) {
    ColumnSummary s;
    s.name = table.column_names[c];
    s.kind = table.column_kinds[c];
    std::vector<double> v = present_values(table, c);
    s.present = v.size();
    s.missing_rate = table.rows() == 0
                         ? 0.0
                         : static_cast<double>(table.rows() - v.size()) / static_cast<double>(table.rows());
    std::sort(v.begin(), v.end());
    s.distinct = static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
    std::vector<double> sorted = present_values(table, c);
    std::sort(sorted.begin(), sorted.end());
    if (s.kind == ColumnKind::Numerical && !sorted.empty()) {
      s.min = sorted.front();
      s.max = sorted.back();
      for (double q : probabilities) s.quantiles.emplace_back(q, preprocess::quantile(sorted, q));
    } else {
      s.min = s.max = nan;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string describe_tsv(const std::vector<ColumnSummary>& summary) {
  std::ostringstream out;
  out.precision(10);
  out << "column\tkind\tpresent\tmissing_rate\tdistinct\tmin\tmax";
  const std::vector<std::pair<double, double>>* qs = nullptr;
  for (const auto& s : summary) {
    if (!s.quantiles.empty()) {
      qs = &s.quantiles;
      break;
    }
  }
  if (qs) {
    for (const auto& [q, v] : *qs) out << "\tq" << q;
  }
  out << '\n';
  for (const auto& s : summary) {
    out << s.name << '\t' << (s.kind == ColumnKind::Numerical ? "numerical" : "categorical") << '\t'
        << s.present << '\t' << s.missing_rate << '\t' << s.distinct << '\t' << s.min << '\t' << s.max;
    if (qs) {
      for (std::size_t k = 0; k < qs->size(); ++k) {
        out << '\t';
        if (k < s.quantiles.size()) out << s.quantiles[k].second;
      }
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Benchmark descriptors

const std::vector<DatasetDescriptor>& builtin_descriptors() {
  static const std::vector<DatasetDescriptor> list = {
      {"Click_prediction_small", "CP", 39948, 9, "click", "https://www.openml.org/d/43901"},
      {"MagicTelescope", "MT", 13376, 10, "class", "https://www.openml.org/d/43971"},
      {"Credit", "CD", 16714, 10, "SeriousDlqin2yrs", "https://www.openml.org/d/45024"},
      {"Eeg-eye-state", "EG", 14980, 14, "Class", "https://www.openml.org/d/1471"},
      {"Higgs", "HI", 98050, 28, "target", "https://www.openml.org/d/42769"},
      {"Jannis", "JA", 57580, 54, "class", "https://www.openml.org/d/41168"},
  };
  return list;
}

std::vector<DatasetDescriptor> parse_descriptors(std::string_view json_text) {
  using nlohmann::json;
  try {
    const json j = json::parse(json_text);
    if (j.at("format").get<std::string>() != "kmlp-benchmarks") {
      throw Error(ErrorCode::FormatError, "not a benchmark registry document");
    }
    std::vector<DatasetDescriptor> out;
    for (const auto& e : j.at("datasets")) {
      out.push_back({e.at("name").get<std::string>(), e.at("abbreviation").get<std::string>(),
                     e.at("rows").get<std::size_t>(), e.at("features").get<std::size_t>(),
                     e.at("label_column").get<std::string>(), e.at("source_url").get<std::string>()});
    }
    return out;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("benchmark registry: ") + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("benchmark registry: ") + e.what());
  }
}

std::string serialize_descriptors(const std::vector<DatasetDescriptor>& list) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = "kmlp-benchmarks";
  j["format_version"] = 1;
  j["datasets"] = ordered_json::array();
  for (const auto& d : list) {
    ordered_json e;
    e["name"] = d.name;
    e["abbreviation"] = d.abbreviation;
    e["rows"] = d.rows;
    e["features"] = d.features;
    e["label_column"] = d.label_column;
    e["source_url"] = d.source_url;
    j["datasets"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::optional<DatasetDescriptor> find_descriptor(std::string_view key) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  };
  const std::string k = lower(key);
  for (const auto& d : builtin_descriptors()) {
    if (lower(d.abbreviation) == k || lower(d.name) == k) return d;
  }
  return std::nullopt;
}

std::optional<std::string> check_descriptor(const DatasetDescriptor& d, const FeatureTable& table) {
  if (table.rows() == d.rows && table.cols() == d.features) return std::nullopt;
  return "DescriptorMismatch: " + d.abbreviation + " expects " + std::to_string(d.rows) +
         " rows x " + std::to_string(d.features) + " features, loaded " +
         std::to_string(table.rows()) + " x " + std::to_string(table.cols());
}

}  // namespace kmlp::io
