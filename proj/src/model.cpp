#include "kmlp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include <json.hpp>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"

namespace kmlp {

using nlohmann::json;
namespace keys = config_keys;

static_assert(std::endian::native == std::endian::little,
              "model files are written in host byte order, assumed little-endian");

// ----------------------------------------------------------------------------
// Configuration

void KmlpConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (kan_layers < 0 || kan_layers > 2) fail("# KAN Layers must be 0, 1 or 2");
  if (mlp_layers < 0 || mlp_layers > 2) fail("# MLP Layers must be 0, 1 or 2");
  if (kan_layers == 0 && mlp_layers == 0) fail("model needs at least one KAN or gMLP layer");
  if (hidden_dim <= 0) fail("hidden dim must be positive");
  if (grid_size <= 0) fail("grid size must be positive");
  if (spline_degree < 0 || spline_degree > 15) fail("spline degree must be in [0, 15]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("Dropout must lie in [0, 1)");
  if (input_dim <= 0) fail("input dim must be positive");
}

namespace {

json config_to_json(const KmlpConfig& c) {
  json j;
  j[keys::kKanLayers] = c.kan_layers;
  j[keys::kMlpLayers] = c.mlp_layers;
  j[keys::kGridSize] = c.grid_size;
  j[keys::kHiddenDim] = c.hidden_dim;
  j[keys::kDropout] = c.dropout;
  j[keys::kSplineDegree] = c.spline_degree;
  j[keys::kInputDim] = c.input_dim;
  j[keys::kSeed] = c.seed;
  j[keys::kInputBatchnorm] = c.input_batchnorm;
  return j;
}

KmlpConfig config_from_json(const json& j) {
  static const std::vector<std::string> known = {
      keys::kKanLayers, keys::kMlpLayers, keys::kGridSize,  keys::kHiddenDim,      keys::kDropout,
      keys::kSplineDegree, keys::kInputDim, keys::kSeed, keys::kInputBatchnorm};
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown model config field '" + key + "'");
    }
  }
  KmlpConfig c;
  try {
    c.kan_layers = j.value(keys::kKanLayers, c.kan_layers);
    c.mlp_layers = j.value(keys::kMlpLayers, c.mlp_layers);
    c.grid_size = j.value(keys::kGridSize, c.grid_size);
    c.hidden_dim = j.value(keys::kHiddenDim, c.hidden_dim);
    c.dropout = j.value(keys::kDropout, c.dropout);
    c.spline_degree = j.value(keys::kSplineDegree, c.spline_degree);
    c.input_dim = j.value(keys::kInputDim, c.input_dim);
    c.seed = j.value(keys::kSeed, c.seed);
    c.input_batchnorm = j.value(keys::kInputBatchnorm, c.input_batchnorm);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string KmlpConfig::to_text() const { return config_to_json(*this).dump(2) + "\n"; }

KmlpConfig KmlpConfig::from_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model config: ") + e.what(), e.byte);
  }
  return config_from_json(j);
}

// ----------------------------------------------------------------------------
// Initialization

namespace {

// Counter-based generator: draw k of a stream is a pure function of
// (seed, k), independent of the standard library's distributions.
class InitStream {
 public:
  explicit InitStream(std::uint64_t seed) : seed_(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

  double normal(double stddev) {
    const double u1 = 1.0 - next();  // (0, 1]
    const double u2 = next();
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class Derived>
  void fill_uniform(Eigen::DenseBase<Derived>& m, double bound) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(-bound, bound);
    }
  }

 private:
  double next() { return unit_interval(mix64(seed_, counter_++)); }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t layer_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return mix64(mix64(seed, tag), index);
}

constexpr std::uint64_t kKanTag = 0x4b414e;
constexpr std::uint64_t kGmlpTag = 0x474d4c50;
constexpr std::uint64_t kHeadTag = 0x48454144;
constexpr std::uint64_t kDropoutTag = 0x44524f50;

nn::LinearParams init_linear(Eigen::Index in, Eigen::Index out, InitStream& rng) {
  nn::LinearParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  p.weight.resize(in, out);
  p.bias.resize(out);
  rng.fill_uniform(p.weight, bound);
  rng.fill_uniform(p.bias, bound);
  return p;
}

nn::KanLayerParams init_kan(Eigen::Index in, Eigen::Index out, const KmlpConfig& c,
                            InitStream& rng) {
  nn::KanLayerParams p;
  p.knots = spline::KnotVector::uniform(c.grid_size, c.spline_degree);
  const Eigen::Index K = p.num_basis();
  p.base_weights.resize(out, in);
  rng.fill_uniform(p.base_weights, 1.0 / std::sqrt(static_cast<double>(in)));
  p.spline_weights = Matrix::Ones(out, in);
  p.spline_coeffs.resize(out, in * K);
  const double sd = 0.1 / std::sqrt(static_cast<double>(K));
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index k = 0; k < in * K; ++k) p.spline_coeffs(r, k) = rng.normal(sd);
  }
  return p;
}

nn::GmlpBlockParams init_gmlp(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                              double dropout, InitStream& rng) {
  nn::GmlpBlockParams p;
  p.norm = nn::BatchNormState::identity(in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  p.gate.resize(in, hidden);
  p.gate_bias.resize(hidden);
  p.value.resize(in, hidden);
  p.value_bias.resize(hidden);
  rng.fill_uniform(p.gate, bound);
  rng.fill_uniform(p.gate_bias, bound);
  rng.fill_uniform(p.value, bound);
  rng.fill_uniform(p.value_bias, bound);
  p.output = init_linear(hidden, out, rng);
  p.dropout_rate = dropout;
  return p;
}

}  // namespace

KmlpModel build(const KmlpConfig& config) {
  config.validate();
  KmlpModel m;
  m.config = config;
  const Eigen::Index hidden = config.hidden_dim;
  Eigen::Index width = config.input_dim;
  if (config.input_batchnorm) m.input_norm = nn::BatchNormState::identity(width);
  for (int l = 0; l < config.kan_layers; ++l) {
    InitStream rng(layer_seed(config.seed, kKanTag, static_cast<std::uint64_t>(l)));
    m.kan.push_back(init_kan(width, hidden, config, rng));
    width = hidden;
  }
  for (int b = 0; b < config.mlp_layers; ++b) {
    InitStream rng(layer_seed(config.seed, kGmlpTag, static_cast<std::uint64_t>(b)));
    m.gmlp.push_back(init_gmlp(width, hidden, hidden, config.dropout, rng));
    width = hidden;
  }
  InitStream rng(layer_seed(config.seed, kHeadTag, 0));
  m.head = init_linear(width, 1, rng);
  return m;
}

// ----------------------------------------------------------------------------
// Forward / backward

ForwardTape forward_tape(const KmlpModel& model, const Matrix& x, const PassOptions& options) {
  if (x.cols() != model.config.input_dim) {
    throw Error(ErrorCode::SchemaMismatch, "input has " + std::to_string(x.cols()) +
                                               " columns, model expects " +
                                               std::to_string(model.config.input_dim));
  }
  ForwardTape tape;
  tape.mode = options.mode;
  tape.input = x;
  Matrix h = x;
  if (model.input_norm) {
    tape.input_norm.emplace();
    h = nn::batchnorm_apply(h, *model.input_norm, options.mode, &*tape.input_norm);
  }
  tape.kan.resize(model.kan.size());
  for (std::size_t l = 0; l < model.kan.size(); ++l) {
    h = nn::kan_forward(h, model.kan[l], &tape.kan[l]);
  }
  tape.gmlp.resize(model.gmlp.size());
  for (std::size_t b = 0; b < model.gmlp.size(); ++b) {
    const std::uint64_t seed =
        mix64(layer_seed(model.config.seed, kDropoutTag, b), options.step);
    h = nn::gmlp_block_forward(h, model.gmlp[b], options.mode, seed, &tape.gmlp[b]);
  }
  tape.logits = nn::linear_forward(h, model.head).col(0);
  tape.head_input = std::move(h);
  tape.probabilities = tape.logits.unaryExpr([](double v) { return nn::sigmoid(v); });
  return tape;
}

Vector forward(const KmlpModel& model, const Matrix& x, Mode mode) {
  return forward_tape(model, x, {.mode = mode}).probabilities;
}

void commit_batch_statistics(KmlpModel& model, const ForwardTape& tape) {
  if (tape.mode != Mode::Train) return;
  if (model.input_norm && tape.input_norm) nn::batchnorm_commit(*model.input_norm, *tape.input_norm);
  for (std::size_t b = 0; b < model.gmlp.size(); ++b) {
    nn::batchnorm_commit(model.gmlp[b].norm, tape.gmlp[b].norm);
  }
}

ModelGradients backward(const KmlpModel& model, const ForwardTape& tape,
                        std::span<const int> labels, bool want_input_grad,
                        std::span<const double> row_weights) {
  const Eigen::Index n = tape.probabilities.size();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::ShapeError, "label count differs from batch size");
  }
  if (!row_weights.empty() && static_cast<Eigen::Index>(row_weights.size()) != n) {
    throw Error(ErrorCode::ShapeError, "row weight count differs from batch size");
  }
  constexpr double kClamp = 1e-12;
  ModelGradients g;
  Matrix d_logits(n, 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw Error(ErrorCode::LabelError, "label is not 0 or 1", i + 1);
    const double w = row_weights.empty() ? 1.0 : row_weights[static_cast<std::size_t>(i)];
    const double p = std::clamp(tape.probabilities(i), kClamp, 1.0 - kClamp);
    loss -= w * (y == 1 ? std::log(p) : std::log(1.0 - p));
    d_logits(i, 0) = w * (tape.probabilities(i) - y) / static_cast<double>(n);
  }
  g.loss = loss / static_cast<double>(n);

  g.head = nn::linear_backward(tape.head_input, model.head, d_logits);
  Matrix upstream = std::move(g.head.input);
  g.head.input.resize(0, 0);

  g.gmlp.resize(model.gmlp.size());
  for (std::size_t b = model.gmlp.size(); b-- > 0;) {
    g.gmlp[b] = nn::gmlp_block_backward(upstream, model.gmlp[b], tape.gmlp[b]);
    upstream = std::move(g.gmlp[b].input);
    g.gmlp[b].input.resize(0, 0);
  }
  g.kan.resize(model.kan.size());
  for (std::size_t l = model.kan.size(); l-- > 0;) {
    const bool need_input = l > 0 || model.input_norm.has_value() || want_input_grad;
    g.kan[l] = nn::kan_backward(tape.kan[l].input, model.kan[l], upstream, &tape.kan[l], need_input);
    upstream = std::move(g.kan[l].input);
    g.kan[l].input.resize(0, 0);
  }
  if (model.input_norm) {
    g.input_norm = nn::batchnorm_backward(upstream, *model.input_norm, *tape.input_norm);
    upstream = std::move(g.input_norm->input);
    g.input_norm->input.resize(0, 0);
  }
  if (want_input_grad) g.input = std::move(upstream);
  return g;
}

ModelGradients backward(const KmlpModel& model, const Matrix& x, std::span<const int> labels,
                        const PassOptions& options, bool want_input_grad) {
  const ForwardTape tape = forward_tape(model, x, options);
  return backward(model, tape, labels, want_input_grad);
}

// ----------------------------------------------------------------------------
// Parameter / gradient enumeration

namespace {

template <class Derived>
auto view(Eigen::PlainObjectBase<Derived>& m) {
  return std::span<typename Derived::Scalar>(m.data(), static_cast<std::size_t>(m.size()));
}

template <class Derived>
auto cview(const Eigen::PlainObjectBase<Derived>& m) {
  return std::span<const typename Derived::Scalar>(m.data(), static_cast<std::size_t>(m.size()));
}

template <class Grads, class Out, class ViewFn>
void collect_gradients(Grads& g, Out& out, ViewFn v) {
  if (g.input_norm) {
    out.push_back(v(g.input_norm->gamma));
    out.push_back(v(g.input_norm->beta));
  }
  for (auto& k : g.kan) {
    out.push_back(v(k.base_weights));
    out.push_back(v(k.spline_weights));
    out.push_back(v(k.spline_coeffs));
  }
  for (auto& b : g.gmlp) {
    out.push_back(v(b.gamma));
    out.push_back(v(b.beta));
    out.push_back(v(b.gate));
    out.push_back(v(b.gate_bias));
    out.push_back(v(b.value));
    out.push_back(v(b.value_bias));
    out.push_back(v(b.out_weight));
    out.push_back(v(b.out_bias));
  }
  out.push_back(v(g.head.weight));
  out.push_back(v(g.head.bias));
}

}  // namespace

std::vector<std::span<double>> parameter_views(KmlpModel& m) {
  std::vector<std::span<double>> out;
  if (m.input_norm) {
    out.push_back(view(m.input_norm->gamma));
    out.push_back(view(m.input_norm->beta));
  }
  for (auto& k : m.kan) {
    out.push_back(view(k.base_weights));
    out.push_back(view(k.spline_weights));
    out.push_back(view(k.spline_coeffs));
  }
  for (auto& b : m.gmlp) {
    out.push_back(view(b.norm.gamma));
    out.push_back(view(b.norm.beta));
    out.push_back(view(b.gate));
    out.push_back(view(b.gate_bias));
    out.push_back(view(b.value));
    out.push_back(view(b.value_bias));
    out.push_back(view(b.output.weight));
    out.push_back(view(b.output.bias));
  }
  out.push_back(view(m.head.weight));
  out.push_back(view(m.head.bias));
  return out;
}

std::vector<std::span<const double>> gradient_views(const ModelGradients& g) {
  std::vector<std::span<const double>> out;
  collect_gradients(g, out, [](const auto& m) { return cview(m); });
  return out;
}

std::vector<std::span<double>> gradient_views(ModelGradients& g) {
  std::vector<std::span<double>> out;
  collect_gradients(g, out, [](auto& m) { return view(m); });
  return out;
}

std::size_t parameter_count(const KmlpModel& model) {
  std::size_t n = 0;
  for (auto s : parameter_views(const_cast<KmlpModel&>(model))) n += s.size();
  return n;
}

// ----------------------------------------------------------------------------
// Serialization
//
//   "KMLPMODL" | u32 version | u64 header length | header JSON
//   | u32 tensor count | tensors... | u64 FNV-1a checksum of all prior bytes
//
// Each tensor is: u32 name length | name | u64 rows | u64 cols | rows*cols f64.

namespace {

constexpr std::string_view kMagic = "KMLPMODL";

struct TensorSlot {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  double* data;
};

template <class Derived>
TensorSlot slot(std::string name, Eigen::PlainObjectBase<Derived>& m) {
  return {std::move(name), m.rows(), m.cols(), m.data()};
}

// All stored tensors except knot vectors, which are written separately.
std::vector<TensorSlot> stored_tensors(KmlpModel& m) {
  std::vector<TensorSlot> out;
  auto add_norm = [&](const std::string& prefix, nn::BatchNormState& s) {
    out.push_back(slot(prefix + ".gamma", s.gamma));
    out.push_back(slot(prefix + ".beta", s.beta));
    out.push_back(slot(prefix + ".running_mean", s.running_mean));
    out.push_back(slot(prefix + ".running_var", s.running_var));
  };
  if (m.input_norm) add_norm("input_norm", *m.input_norm);
  for (std::size_t l = 0; l < m.kan.size(); ++l) {
    const std::string p = "kan." + std::to_string(l);
    out.push_back(slot(p + ".base_weights", m.kan[l].base_weights));
    out.push_back(slot(p + ".spline_weights", m.kan[l].spline_weights));
    out.push_back(slot(p + ".spline_coeffs", m.kan[l].spline_coeffs));
  }
  for (std::size_t b = 0; b < m.gmlp.size(); ++b) {
    const std::string p = "gmlp." + std::to_string(b);
    add_norm(p + ".norm", m.gmlp[b].norm);
    out.push_back(slot(p + ".gate", m.gmlp[b].gate));
    out.push_back(slot(p + ".gate_bias", m.gmlp[b].gate_bias));
    out.push_back(slot(p + ".value", m.gmlp[b].value));
    out.push_back(slot(p + ".value_bias", m.gmlp[b].value_bias));
    out.push_back(slot(p + ".out_weight", m.gmlp[b].output.weight));
    out.push_back(slot(p + ".out_bias", m.gmlp[b].output.bias));
  }
  out.push_back(slot("head.weight", m.head.weight));
  out.push_back(slot("head.bias", m.head.bias));
  return out;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void raw(std::string_view s) { bytes_.append(s); }
  void doubles(const double* d, std::size_t n) {
    bytes_.append(reinterpret_cast<const char*>(d), n * sizeof(double));
  }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* out, std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail(std::string("truncated ") + what);
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::size_t offset() const { return pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::FormatError, msg, pos_);
  }

 private:
  void need(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) fail(std::string("truncated ") + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                  const double* data) {
  w.pod(static_cast<std::uint32_t>(name.size()));
  w.raw(name);
  w.pod(static_cast<std::uint64_t>(rows));
  w.pod(static_cast<std::uint64_t>(cols));
  w.doubles(data, static_cast<std::size_t>(rows * cols));
}

// Reads one tensor whose name and shape must match the expected slot.
void read_tensor(Reader& r, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                 double* data) {
  const auto name_len = r.pod<std::uint32_t>("tensor name length");
  const std::string_view got = r.raw(name_len, "tensor name");
  if (got != name) r.fail("expected tensor '" + name + "', found '" + std::string(got) + "'");
  const auto got_rows = r.pod<std::uint64_t>("tensor rows");
  const auto got_cols = r.pod<std::uint64_t>("tensor cols");
  if (got_rows != static_cast<std::uint64_t>(rows) || got_cols != static_cast<std::uint64_t>(cols)) {
    r.fail("tensor '" + name + "' has shape " + std::to_string(got_rows) + "x" +
           std::to_string(got_cols) + ", config implies " + std::to_string(rows) + "x" +
           std::to_string(cols));
  }
  r.doubles(data, static_cast<std::size_t>(rows * cols), "tensor data");
}

}  // namespace

std::string serialize(const KmlpModel& model_in) {
  KmlpModel& model = const_cast<KmlpModel&>(model_in);  // slots are only read here
  json header;
  header["config"] = config_to_json(model.config);
  header["transform_id"] = model.transform_id;
  json norms = json::array();
  auto norm_meta = [](const nn::BatchNormState& s) {
    return json{{"momentum", s.momentum}, {"epsilon", s.epsilon}};
  };
  if (model.input_norm) norms.push_back(norm_meta(*model.input_norm));
  for (const auto& b : model.gmlp) norms.push_back(norm_meta(b.norm));
  header["batch_norm"] = std::move(norms);
  const std::string header_text = header.dump();

  Writer w;
  w.raw(kMagic);
  w.pod(kModelFormatVersion);
  w.pod(static_cast<std::uint64_t>(header_text.size()));
  w.raw(header_text);

  const auto slots = stored_tensors(model);
  w.pod(static_cast<std::uint32_t>(slots.size() + model.kan.size()));
  for (std::size_t l = 0; l < model.kan.size(); ++l) {
    const auto& knots = model.kan[l].knots.knots();
    write_tensor(w, "kan." + std::to_string(l) + ".knots", 1,
                 static_cast<Eigen::Index>(knots.size()), knots.data());
  }
  for (const TensorSlot& s : slots) write_tensor(w, s.name, s.rows, s.cols, s.data);
  w.pod(fnv1a64(w.bytes()));
  return std::move(w.bytes());
}

KmlpModel deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(kMagic.size(), "magic") != kMagic) {
    throw Error(ErrorCode::FormatError, "not a KMLP model file (bad magic)", 0);
  }
  const auto version = r.pod<std::uint32_t>("format version");
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::FormatError,
                "unsupported model format version " + std::to_string(version), kMagic.size());
  }
  const auto header_len = r.pod<std::uint64_t>("header length");
  const std::size_t header_offset = r.offset();
  const std::string_view header_text = r.raw(header_len, "header");

  KmlpModel model;
  json header;
  try {
    header = json::parse(header_text);
    KmlpConfig config = config_from_json(header.at("config"));
    model = build(config);
    model.transform_id = header.at("transform_id").get<std::string>();
    const json& norms = header.at("batch_norm");
    std::size_t k = 0;
    auto apply_meta = [&](nn::BatchNormState& s) {
      s.momentum = norms.at(k).at("momentum").get<double>();
      s.epsilon = norms.at(k).at("epsilon").get<double>();
      ++k;
    };
    if (model.input_norm) apply_meta(*model.input_norm);
    for (auto& b : model.gmlp) apply_meta(b.norm);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("model header: ") + e.what(), header_offset);
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("model header: ") + e.what(), header_offset);
  }

  auto slots = stored_tensors(model);
  const auto count = r.pod<std::uint32_t>("tensor count");
  if (count != slots.size() + model.kan.size()) {
    r.fail("tensor count " + std::to_string(count) + " does not match the model config");
  }
  for (std::size_t l = 0; l < model.kan.size(); ++l) {
    const auto K = static_cast<Eigen::Index>(model.kan[l].knots.knots().size());
    std::vector<double> knots(static_cast<std::size_t>(K));
    const std::size_t at = r.offset();
    read_tensor(r, "kan." + std::to_string(l) + ".knots", 1, K, knots.data());
    try {
      model.kan[l].knots = spline::KnotVector(std::move(knots), model.config.spline_degree);
    } catch (const Error& e) {
      throw Error(ErrorCode::FormatError, e.what(), at);
    }
  }
  for (const TensorSlot& s : slots) read_tensor(r, s.name, s.rows, s.cols, s.data);

  const std::size_t payload_end = r.offset();
  const auto checksum = r.pod<std::uint64_t>("checksum");
  if (checksum != fnv1a64(bytes.substr(0, payload_end))) {
    throw Error(ErrorCode::FormatError, "checksum mismatch", payload_end);
  }
  if (r.offset() != bytes.size()) r.fail("trailing bytes after checksum");
  return model;
}

}  // namespace kmlp
