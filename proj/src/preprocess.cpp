#include "kmlp/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"

namespace kmlp::preprocess {

using nlohmann::json;

double quantile_at_rank(std::span<const double> sorted, std::size_t k, std::size_t n) {
  if (sorted.empty() || n == 0 || k > n) {
    throw Error(ErrorCode::InvalidConfig, "quantile rank outside [0, 1] or empty sample");
  }
  const std::size_t last = sorted.size() - 1;
  // Integer numerator keeps order statistics exact when the rank lands on one.
  const std::size_t num = k * last;
  const std::size_t lo = num / n;
  const std::size_t rem = num % n;
  if (rem == 0 || lo >= last) return sorted[lo];
  const double frac = static_cast<double>(rem) / static_cast<double>(n);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty() || !(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "quantile rank outside [0, 1] or empty sample");
  }
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

QuantileBins fit_quantile_bins(std::span<const double> column, std::size_t n,
                               std::size_t sample_cap, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "bin count must be positive");
  if (sample_cap < 2) throw Error(ErrorCode::InvalidConfig, "sample cap must be at least 2");

  std::vector<double> sample;
  sample.reserve(std::min(column.size(), sample_cap));
  std::vector<double> finite;
  finite.reserve(column.size());
  std::copy_if(column.begin(), column.end(), std::back_inserter(finite),
               [](double v) { return std::isfinite(v); });
  if (finite.size() > sample_cap) {
    std::mt19937_64 rng(seed);
    std::sample(finite.begin(), finite.end(), std::back_inserter(sample), sample_cap, rng);
  } else {
    sample = std::move(finite);
  }
  std::sort(sample.begin(), sample.end());
  if (sample.empty() || sample.front() == sample.back()) {
    throw Error(ErrorCode::ConstantColumn, "column has fewer than 2 distinct values");
  }

  QuantileBins bins;
  bins.requested_bins = n;
  bins.boundaries.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double b = quantile_at_rank(sample, k, n);
    if (bins.boundaries.empty() || b > bins.boundaries.back()) {
      bins.boundaries.push_back(b);
    }
  }
  return bins;
}

namespace {

// Index i of the interval (b_i, b_{i+1}] holding x; requires b_0 < x < b_n.
std::size_t interval_of(double x, const std::vector<double>& b) {
  const auto it = std::lower_bound(b.begin(), b.end(), x);
  return static_cast<std::size_t>(std::distance(b.begin(), it)) - 1;
}

}  // namespace

double qtl_transform(double x, const QuantileBins& bins) {
  const auto& b = bins.boundaries;
  const auto n = static_cast<double>(bins.effective_bins());
  if (!(x > b.front())) return 0.0;
  if (x >= b.back()) return 1.0;
  const std::size_t i = interval_of(x, b);
  const double frac = (x - b[i]) / (b[i + 1] - b[i]);
  return (static_cast<double>(i) + frac) / n;
}

double quantile_transform(double x, const QuantileBins& bins) {
  const auto& b = bins.boundaries;
  const std::size_t n = bins.effective_bins();
  if (!(x > b.front())) return 0.0;
  if (x >= b.back()) return static_cast<double>(n - 1) / static_cast<double>(n);
  return static_cast<double>(interval_of(x, b)) / static_cast<double>(n);
}

void ple_encode_into(double x, const QuantileBins& bins, std::span<double> out) {
  const auto& b = bins.boundaries;
  const std::size_t n = bins.effective_bins();
  if (out.size() != n) throw Error(ErrorCode::ShapeError, "PLE output span has wrong length");
  for (std::size_t i = 0; i < n; ++i) {
    if (x < b[i]) {
      out[i] = 0.0;
    } else if (x >= b[i + 1]) {
      out[i] = 1.0;
    } else {
      out[i] = (x - b[i]) / (b[i + 1] - b[i]);
    }
  }
}

std::vector<double> ple_encode(double x, const QuantileBins& bins) {
  std::vector<double> out(bins.effective_bins());
  ple_encode_into(x, bins, out);
  return out;
}

std::vector<double> clr_transform(std::span<const double> row, double offset) {
  std::vector<double> logs(row.size());
  double mean_log = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double shifted = row[j] + offset;
    if (!(shifted > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput,
                  "CLR input column " + std::to_string(j) + " is not positive after offset");
    }
    logs[j] = std::log(shifted);
    mean_log += logs[j];
  }
  if (row.empty()) return logs;
  mean_log /= static_cast<double>(row.size());
  for (double& l : logs) l -= mean_log;
  return logs;
}

std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::QTL: return "qtl";
    case Operator::Quantile: return "quantile";
    case Operator::PLE: return "ple";
    case Operator::CLR: return "clr";
    case Operator::ZScore: return "zscore";
  }
  return "qtl";
}

Operator parse_operator(std::string_view name) {
  for (Operator op : {Operator::QTL, Operator::Quantile, Operator::PLE, Operator::CLR,
                      Operator::ZScore}) {
    if (name == to_string(op)) return op;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown preprocessing operator '" + std::string(name) + "'");
}

std::size_t FittedTransform::output_width(std::size_t column) const {
  const ColumnState& c = columns.at(column);
  switch (c.encoding) {
    case Encoding::Bins:
      return op == Operator::PLE ? c.bins.effective_bins() : 1;
    case Encoding::OneHot:
      return c.vocabulary.size();
    default:
      return 1;
  }
}

std::size_t FittedTransform::output_dim() const {
  std::size_t total = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) total += output_width(c);
  return total;
}

std::vector<std::string> FittedTransform::constant_columns() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.encoding == Encoding::Constant) out.push_back(c.name);
  }
  return out;
}

std::string FittedTransform::id() const { return hex_digest(serialize_transform(*this)); }

FittedTransform fit_transform(const FeatureTable& table, const TransformOptions& options) {
  table.validate();
  if (table.rows() == 0 || table.cols() == 0) {
    throw Error(ErrorCode::EmptyDataset, "cannot fit a transform on an empty table");
  }
  const bool binned = options.op == Operator::QTL || options.op == Operator::Quantile ||
                      options.op == Operator::PLE;
  if (binned && options.bins == 0) {
    throw Error(ErrorCode::InvalidConfig, "bin count must be positive");
  }
  if (!(options.clr_offset >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "clr_offset must be non-negative");
  }

  FittedTransform t;
  t.op = options.op;
  t.requested_bins = options.bins;
  t.clr_offset = options.clr_offset;
  t.columns.reserve(table.cols());

  for (std::size_t c = 0; c < table.cols(); ++c) {
    ColumnState state;
    state.name = table.column_names[c];
    state.source_kind = table.column_kinds[c];

    if (state.source_kind == ColumnKind::Categorical) {
      state.encoding = Encoding::OneHot;
      std::vector<std::string> seen;
      for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.is_missing(r, c)) continue;
        const auto code = static_cast<std::size_t>(table.values(r, c));
        seen.push_back(table.categories[c].at(code));
      }
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      state.vocabulary = std::move(seen);
      t.columns.push_back(std::move(state));
      continue;
    }

    std::vector<double> present = present_values(table, c);
    std::vector<double> sorted = present;
    std::sort(sorted.begin(), sorted.end());
    state.median = sorted.empty() ? 0.0 : quantile(sorted, 0.5);

    switch (options.op) {
      case Operator::QTL:
      case Operator::Quantile:
      case Operator::PLE:
        try {
          state.bins = fit_quantile_bins(present, options.bins, options.sample_cap,
                                         mix64(options.seed, c));
          state.encoding = Encoding::Bins;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ConstantColumn) throw;
          state.encoding = Encoding::Constant;
        }
        break;
      case Operator::CLR:
        state.encoding = Encoding::LogRatio;
        break;
      case Operator::ZScore: {
        state.encoding = Encoding::Standardize;
        double mean = 0.0;
        for (double v : present) mean += v;
        mean = present.empty() ? 0.0 : mean / static_cast<double>(present.size());
        double var = 0.0;
        for (double v : present) var += (v - mean) * (v - mean);
        var = present.empty() ? 0.0 : var / static_cast<double>(present.size());
        state.mean = mean;
        state.scale = std::sqrt(var);
        break;
      }
    }
    t.columns.push_back(std::move(state));
  }
  return t;
}

Matrix apply_transform(const FeatureTable& table, const FittedTransform& transform) {
  if (table.cols() != transform.columns.size()) {
    throw Error(ErrorCode::SchemaMismatch,
                "table has " + std::to_string(table.cols()) + " columns, transform expects " +
                    std::to_string(transform.columns.size()));
  }
  for (std::size_t c = 0; c < table.cols(); ++c) {
    const ColumnState& s = transform.columns[c];
    if (table.column_names[c] != s.name || table.column_kinds[c] != s.source_kind) {
      throw Error(ErrorCode::SchemaMismatch, "column " + std::to_string(c) + " ('" +
                                                 table.column_names[c] +
                                                 "') does not match fitted column '" + s.name + "'");
    }
  }

  std::vector<std::size_t> offsets(table.cols());
  std::size_t width = 0;
  std::vector<std::size_t> clr_columns;
  std::vector<std::unordered_map<std::string, std::size_t>> vocab_index(table.cols());
  for (std::size_t c = 0; c < table.cols(); ++c) {
    offsets[c] = width;
    width += transform.output_width(c);
    const ColumnState& s = transform.columns[c];
    if (s.encoding == Encoding::LogRatio) clr_columns.push_back(c);
    if (s.encoding == Encoding::OneHot) {
      for (std::size_t k = 0; k < s.vocabulary.size(); ++k) vocab_index[c][s.vocabulary[k]] = k;
    }
  }

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(table.rows()),
                            static_cast<Eigen::Index>(width));
  std::vector<double> clr_row(clr_columns.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    auto cell = [&](std::size_t c) {
      return table.is_missing(r, c) ? transform.columns[c].median
                                    : table.values(row, static_cast<Eigen::Index>(c));
    };
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const ColumnState& s = transform.columns[c];
      const auto col = static_cast<Eigen::Index>(offsets[c]);
      switch (s.encoding) {
        case Encoding::Bins: {
          const double x = cell(c);
          if (transform.op == Operator::QTL) {
            out(row, col) = qtl_transform(x, s.bins);
          } else if (transform.op == Operator::Quantile) {
            out(row, col) = quantile_transform(x, s.bins);
          } else {
            ple_encode_into(x, s.bins,
                            std::span<double>(&out(row, col), s.bins.effective_bins()));
          }
          break;
        }
        case Encoding::Constant:
          out(row, col) = 0.5;
          break;
        case Encoding::Standardize:
          out(row, col) = s.scale > 0.0 ? (cell(c) - s.mean) / s.scale : 0.0;
          break;
        case Encoding::OneHot: {
          if (table.is_missing(r, c)) break;
          const auto code = static_cast<std::size_t>(table.values(row, static_cast<Eigen::Index>(c)));
          const auto& dict = table.categories[c];
          if (code >= dict.size()) break;
          const auto hit = vocab_index[c].find(dict[code]);
          if (hit != vocab_index[c].end()) {
            out(row, col + static_cast<Eigen::Index>(hit->second)) = 1.0;
          }
          break;
        }
        case Encoding::LogRatio:
          break;
      }
    }
    if (!clr_columns.empty()) {
      for (std::size_t k = 0; k < clr_columns.size(); ++k) clr_row[k] = cell(clr_columns[k]);
      std::vector<double> encoded;
      try {
        encoded = clr_transform(clr_row, transform.clr_offset);
      } catch (const Error&) {
        for (std::size_t k = 0; k < clr_columns.size(); ++k) {
          if (!(clr_row[k] + transform.clr_offset > 0.0)) {
            throw Error(ErrorCode::NonPositiveInput,
                        "column '" + transform.columns[clr_columns[k]].name +
                            "' is not positive after clr_offset",
                        r + 1);
          }
        }
        throw;
      }
      for (std::size_t k = 0; k < clr_columns.size(); ++k) {
        out(row, static_cast<Eigen::Index>(offsets[clr_columns[k]])) = encoded[k];
      }
    }
  }
  return out;
}

namespace {

std::string_view encoding_name(Encoding e) {
  switch (e) {
    case Encoding::Bins: return "bins";
    case Encoding::Constant: return "constant";
    case Encoding::LogRatio: return "log_ratio";
    case Encoding::Standardize: return "standardize";
    case Encoding::OneHot: return "one_hot";
  }
  return "bins";
}

Encoding parse_encoding(const std::string& name) {
  for (Encoding e : {Encoding::Bins, Encoding::Constant, Encoding::LogRatio,
                     Encoding::Standardize, Encoding::OneHot}) {
    if (name == encoding_name(e)) return e;
  }
  throw Error(ErrorCode::FormatError, "unknown column encoding '" + name + "'");
}

}  // namespace

std::string serialize_transform(const FittedTransform& transform) {
  json doc;
  doc["format"] = "kmlp-transform";
  doc["format_version"] = FittedTransform::kFormatVersion;
  doc["operator"] = std::string(to_string(transform.op));
  doc["requested_bins"] = transform.requested_bins;
  doc["clr_offset"] = transform.clr_offset;
  json cols = json::array();
  for (const ColumnState& c : transform.columns) {
    json jc;
    jc["name"] = c.name;
    jc["source"] = c.source_kind == ColumnKind::Numerical ? "numerical" : "categorical";
    jc["encoding"] = std::string(encoding_name(c.encoding));
    jc["median"] = c.median;
    switch (c.encoding) {
      case Encoding::Bins:
        jc["boundaries"] = c.bins.boundaries;
        break;
      case Encoding::OneHot:
        jc["vocabulary"] = c.vocabulary;
        break;
      case Encoding::Standardize:
        jc["mean"] = c.mean;
        jc["scale"] = c.scale;
        break;
      default:
        break;
    }
    cols.push_back(std::move(jc));
  }
  doc["columns"] = std::move(cols);
  return doc.dump(2) + "\n";
}

FittedTransform parse_transform(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("transform document: ") + e.what(), e.byte);
  }
  try {
    if (doc.at("format").get<std::string>() != "kmlp-transform") {
      throw Error(ErrorCode::FormatError, "not a transform document");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != FittedTransform::kFormatVersion) {
      throw Error(ErrorCode::FormatError,
                  "unsupported transform format_version " + std::to_string(version));
    }
    FittedTransform t;
    t.op = parse_operator(doc.at("operator").get<std::string>());
    t.requested_bins = doc.at("requested_bins").get<std::size_t>();
    t.clr_offset = doc.at("clr_offset").get<double>();
    for (const json& jc : doc.at("columns")) {
      ColumnState c;
      c.name = jc.at("name").get<std::string>();
      const std::string source = jc.at("source").get<std::string>();
      if (source != "numerical" && source != "categorical") {
        throw Error(ErrorCode::FormatError, "unknown column source '" + source + "'");
      }
      c.source_kind = source == "numerical" ? ColumnKind::Numerical : ColumnKind::Categorical;
      c.encoding = parse_encoding(jc.at("encoding").get<std::string>());
      c.median = jc.at("median").get<double>();
      if (c.encoding == Encoding::Bins) {
        c.bins.boundaries = jc.at("boundaries").get<std::vector<double>>();
        c.bins.requested_bins = t.requested_bins;
        if (c.bins.boundaries.size() < 2 ||
            !std::is_sorted(c.bins.boundaries.begin(), c.bins.boundaries.end(),
                            std::less_equal<>())) {
          throw Error(ErrorCode::FormatError,
                      "boundaries of column '" + c.name + "' are not strictly increasing");
        }
      } else if (c.encoding == Encoding::OneHot) {
        c.vocabulary = jc.at("vocabulary").get<std::vector<std::string>>();
      } else if (c.encoding == Encoding::Standardize) {
        c.mean = jc.at("mean").get<double>();
        c.scale = jc.at("scale").get<double>();
      }
      t.columns.push_back(std::move(c));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("transform document: ") + e.what());
  }
}

}  // namespace kmlp::preprocess
