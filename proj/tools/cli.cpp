#include "cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kmlp/data_io.hpp"
#include "kmlp/error.hpp"
#include "kmlp/metrics.hpp"
#include "kmlp/model.hpp"
#include "kmlp/preprocess.hpp"
#include "kmlp/training.hpp"
#include "kmlp/verify.hpp"

namespace kmlp::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::string data;
  std::string label_column;
  std::string positive_label;
  std::string benchmark;
  std::string out;
  std::uint64_t seed = 0;
  std::string preproc = "qtl";
  std::size_t bins = preprocess::kDefaultBins;
  double clr_offset = 0.0;
  std::string split = "uniform";
  int kan_layers = 1;
  int mlp_layers = 1;
  int hidden = 512;
  int grid_size = spline::kDefaultGridSize;
  int spline_degree = spline::kDefaultDegree;
  double dropout = 0.0;
  bool input_batchnorm = false;
  std::size_t batch = 4096;
  double lr = 1e-3;
  int epochs = 200;
  int patience = 20;
  bool class_weighting = false;
  std::string model;
  std::string transform;
  std::string fold = "test";
  std::size_t budget = 0;
  bool inspect = false;
  std::uint64_t inject_fault = 0;
  train::SearchSpace grid;
};

struct Field {
  std::string name;
  std::string scope;  // space-separated subcommands
  std::function<CLI::Option*(CLI::App&, RunConfig&)> bind;
  std::function<void(const json&, RunConfig&)> from_json;
  std::function<void(const RunConfig&, ordered_json&)> to_json;
  std::function<void(const RunConfig&, RunConfig&)> copy;

  bool applies_to(const std::string& command) const {
    std::istringstream in(scope);
    std::string word;
    while (in >> word) {
      if (word == command) return true;
    }
    return false;
  }
};

template <class T>
Field field(std::string name, T RunConfig::*member, std::string help, std::string scope) {
  Field f;
  f.name = name;
  f.scope = std::move(scope);
  f.bind = [name, member, help](CLI::App& app, RunConfig& cfg) -> CLI::Option* {
    if constexpr (std::is_same_v<T, bool>) {
      return app.add_flag("--" + name, cfg.*member, help);
    } else {
      return app.add_option("--" + name, cfg.*member, help);
    }
  };
  f.from_json = [name, member](const json& j, RunConfig& cfg) {
    try {
      cfg.*member = j.get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidConfig, "config field '" + name + "' has the wrong type");
    }
  };
  f.to_json = [name, member](const RunConfig& cfg, ordered_json& j) { j[name] = cfg.*member; };
  f.copy = [member](const RunConfig& src, RunConfig& dst) { dst.*member = src.*member; };
  return f;
}

const std::vector<Field>& fields() {
  static const std::string data_cmds = "preprocess fit eval predict sweep ablate";
  static const std::string train_cmds = "fit sweep ablate";
  static const std::vector<Field> list = {
      field("data", &RunConfig::data, "CSV file with a header row", data_cmds),
      field("label-column", &RunConfig::label_column, "label column name (default: last column)",
            data_cmds),
      field("positive-label", &RunConfig::positive_label,
            "label token mapped to 1; others map to 0 (default: labels must be 0/1)", data_cmds),
      field("benchmark", &RunConfig::benchmark,
            "benchmark abbreviation (CP, MT, CD, EG, HI, JA) to check the table shape against",
            data_cmds),
      field("out", &RunConfig::out, "output directory",
            "preprocess fit eval predict sweep ablate verify"),
      field("seed", &RunConfig::seed, "seed for splits, initialization, shuffling and dropout",
            "preprocess fit eval predict sweep ablate verify"),
      field("preproc", &RunConfig::preproc, "numerical preprocessing: qtl, quantile, ple, clr, zscore",
            "preprocess fit sweep ablate"),
      field("bins", &RunConfig::bins, "quantile bins per column", "preprocess fit sweep ablate"),
      field("clr-offset", &RunConfig::clr_offset, "offset added before the CLR logarithm",
            "preprocess fit sweep ablate"),
      field("split", &RunConfig::split, "70/10/20 split strategy: uniform, stratified, ordered",
            "preprocess fit eval predict sweep ablate"),
      field("kan-layers", &RunConfig::kan_layers, "number of KAN layers", train_cmds),
      field("mlp-layers", &RunConfig::mlp_layers, "number of gMLP blocks", train_cmds),
      field("hidden", &RunConfig::hidden, "hidden width", train_cmds),
      field("grid-size", &RunConfig::grid_size, "B-spline grid intervals", train_cmds),
      field("spline-degree", &RunConfig::spline_degree, "B-spline degree", train_cmds),
      field("dropout", &RunConfig::dropout, "gMLP dropout rate", train_cmds),
      field("input-batchnorm", &RunConfig::input_batchnorm, "batch norm ahead of the first KAN layer",
            train_cmds),
      field("batch", &RunConfig::batch, "mini-batch size", train_cmds),
      field("lr", &RunConfig::lr, "initial learning rate", train_cmds),
      field("epochs", &RunConfig::epochs, "maximum epochs", train_cmds),
      field("patience", &RunConfig::patience, "early-stopping patience on validation KS", train_cmds),
      field("class-weighting", &RunConfig::class_weighting, "balance the classes in the loss",
            train_cmds),
      field("model", &RunConfig::model, "model file", "eval predict"),
      field("transform", &RunConfig::transform, "fitted transform file", "eval predict"),
      field("fold", &RunConfig::fold, "rows to score: all, train, valid, test", "eval predict"),
      field("budget", &RunConfig::budget, "train a seeded subset of this many grid points", "sweep"),
      field("inspect", &RunConfig::inspect, "print a per-column summary", "preprocess"),
      field("inject-fault", &RunConfig::inject_fault,
            "perturb one analytic gradient element with this seed", "verify"),
  };
  return list;
}

// ---------------------------------------------------------------------------
// Config file

const char* const kGridKey = "grid";

train::SearchSpace grid_from_json(const json& j) {
  namespace keys = config_keys;
  train::SearchSpace s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == keys::kMlpLayers) {
        s.mlp_layers = value.get<std::vector<int>>();
      } else if (key == keys::kKanLayers) {
        s.kan_layers = value.get<std::vector<int>>();
      } else if (key == keys::kGridSize) {
        s.grid_size = value.get<std::vector<int>>();
      } else if (key == keys::kHiddenDim) {
        s.hidden_dim = value.get<std::vector<int>>();
      } else if (key == keys::kDropout) {
        s.dropout = value.get<std::vector<double>>();
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown grid field '" + key + "'");
      }
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidConfig, "grid field '" + key + "' must be a list of numbers");
    }
  }
  return s;
}

ordered_json grid_to_json(const train::SearchSpace& s) {
  namespace keys = config_keys;
  ordered_json j;
  j[keys::kMlpLayers] = s.mlp_layers;
  j[keys::kKanLayers] = s.kan_layers;
  j[keys::kGridSize] = s.grid_size;
  j[keys::kHiddenDim] = s.hidden_dim;
  j[keys::kDropout] = s.dropout;
  return j;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void apply_config_file(const fs::path& path, const std::string& command, RunConfig& cfg) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what(), e.byte);
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, path.string() + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "command") continue;
    if (key == kGridKey) {
      cfg.grid = grid_from_json(value);
      continue;
    }
    const auto& list = fields();
    const auto it = std::find_if(list.begin(), list.end(), [&](const Field& f) { return f.name == key; });
    if (it == list.end()) throw Error(ErrorCode::InvalidConfig, "unknown config field '" + key + "'");
    if (it->applies_to(command)) it->from_json(value, cfg);
  }
}

std::string echo_config(const std::string& command, const RunConfig& cfg) {
  ordered_json j;
  j["command"] = command;
  for (const Field& f : fields()) {
    if (f.applies_to(command)) f.to_json(cfg, j);
  }
  if (command == "sweep") j[kGridKey] = grid_to_json(cfg.grid);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Output directory with all-or-nothing commit

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) {
    if (dir.empty()) return;
    final_ = dir;
    created_ = !fs::exists(final_);
    std::error_code ec;
    fs::create_directories(final_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + final_.string() + "': " + ec.message());
    staging_ = final_ / (".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_, ec);
    fs::create_directories(staging_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + staging_.string() + "': " + ec.message());
  }

  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    if (final_.empty() || committed_) return;
    std::error_code ec;
    fs::remove_all(staging_, ec);
    if (created_ && fs::is_empty(final_, ec)) fs::remove(final_, ec);
  }

  bool enabled() const { return !final_.empty(); }

  void write(const std::string& name, std::string_view bytes) {
    if (!enabled()) return;
    const fs::path path = staging_ / name;
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    if (!f) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
    names_.push_back(name);
  }

  void commit() {
    if (!enabled()) return;
    for (const auto& name : names_) {
      const fs::path dst = final_ / name;
      fs::create_directories(dst.parent_path());
      fs::rename(staging_ / name, dst);
    }
    std::error_code ec;
    fs::remove_all(staging_, ec);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path staging_;
  bool created_ = false;
  bool committed_ = false;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Pipeline pieces

FeatureTable load_table(const RunConfig& cfg, std::ostream& err) {
  if (cfg.data.empty()) throw Error(ErrorCode::InvalidConfig, "--data is required");
  io::CsvOptions opt;
  if (!cfg.label_column.empty()) opt.label_column = cfg.label_column;
  if (!cfg.positive_label.empty()) opt.positive_label = cfg.positive_label;
  FeatureTable t = io::load_csv(cfg.data, opt);
  if (!cfg.benchmark.empty()) {
    const auto d = io::find_descriptor(cfg.benchmark);
    if (!d) throw Error(ErrorCode::InvalidConfig, "unknown benchmark '" + cfg.benchmark + "'");
    if (const auto warning = io::check_descriptor(*d, t)) err << "warning: " << *warning << "\n";
  }
  if (!t.labels) throw Error(ErrorCode::LabelError, "table has no label column");
  return t;
}

io::SplitSpec split_spec(const RunConfig& cfg) {
  io::SplitSpec s;
  s.seed = cfg.seed;
  s.strategy = io::parse_split_strategy(cfg.split);
  return s;
}

preprocess::TransformOptions transform_options(const RunConfig& cfg, preprocess::Operator op) {
  preprocess::TransformOptions o;
  o.op = op;
  o.bins = cfg.bins;
  o.clr_offset = cfg.clr_offset;
  o.seed = cfg.seed;
  return o;
}

KmlpConfig model_config(const RunConfig& cfg, int input_dim) {
  KmlpConfig c;
  c.kan_layers = cfg.kan_layers;
  c.mlp_layers = cfg.mlp_layers;
  c.hidden_dim = cfg.hidden;
  c.grid_size = cfg.grid_size;
  c.spline_degree = cfg.spline_degree;
  c.dropout = cfg.dropout;
  c.input_dim = input_dim;
  c.seed = cfg.seed;
  c.input_batchnorm = cfg.input_batchnorm;
  return c;
}

train::TrainSchedule schedule_of(const RunConfig& cfg) {
  train::TrainSchedule s;
  s.batch_size = cfg.batch;
  s.initial_lr = cfg.lr;
  s.max_epochs = cfg.epochs;
  s.patience = cfg.patience;
  s.seed = cfg.seed;
  s.class_weighting = cfg.class_weighting;
  s.validate();
  return s;
}

struct Prepared {
  preprocess::FittedTransform transform;
  train::Dataset train;
  train::Dataset valid;
  train::Dataset test;
};

train::Dataset encode(const FeatureTable& t, const preprocess::FittedTransform& tr) {
  return {preprocess::apply_transform(t, tr), *t.labels};
}

Prepared prepare(const io::Splits& s, const RunConfig& cfg, preprocess::Operator op) {
  Prepared p;
  p.transform = preprocess::fit_transform(s.train, transform_options(cfg, op));
  p.train = encode(s.train, p.transform);
  p.valid = encode(s.valid, p.transform);
  p.test = encode(s.test, p.transform);
  return p;
}

metrics::Summary score(const KmlpModel& m, const train::Dataset& d) {
  const Vector p = train::predict(m, d.x);
  return metrics::summarize(metrics::ScoredSet(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), d.y));
}

train::EpochCallback progress(std::ostream& err, const std::string& tag) {
  return [&err, tag](const train::EpochRecord& r) {
    err << tag << "epoch " << r.epoch << "  loss " << r.train_loss << "  valid KS "
        << metrics::percent(r.valid_ks) << "  AUC " << metrics::percent(r.valid_auc) << "\n";
  };
}

std::string metrics_table(const std::vector<std::pair<std::string, metrics::Summary>>& rows) {
  std::string s = "fold\tAUC\tKS\n";
  for (const auto& [fold, m] : rows) {
    s += fold + "\t" + metrics::percent(m.auc) + "\t" + metrics::percent(m.ks) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_preprocess(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const FeatureTable table = load_table(cfg, err);
  OutputDir dir(cfg.out);
  if (cfg.inspect) {
    const std::string summary = io::describe_tsv(io::describe(table));
    out << summary;
    dir.write("describe.tsv", summary);
  }
  if (dir.enabled()) {
    const auto splits = io::split(table, split_spec(cfg));
    const Prepared p = prepare(splits, cfg, preprocess::parse_operator(cfg.preproc));
    dir.write("transform.json", preprocess::serialize_transform(p.transform));
    for (const auto& [name, d] : {std::pair{"train", &p.train}, {"valid", &p.valid}, {"test", &p.test}}) {
      dir.write(std::string("encoded_") + name + ".csv", io::write_csv(make_numeric_table(d->x, d->y)));
    }
    const auto constant = p.transform.constant_columns();
    for (const auto& c : constant) err << "note: constant column '" << c << "' passes through as 0.5\n";
    dir.write("run_config.json", echo_config("preprocess", cfg));
    dir.commit();
  }
  return 0;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const FeatureTable table = load_table(cfg, err);
  const auto splits = io::split(table, split_spec(cfg));
  const Prepared p = prepare(splits, cfg, preprocess::parse_operator(cfg.preproc));
  const train::TrainSchedule schedule = schedule_of(cfg);
  KmlpModel model = build(model_config(cfg, static_cast<int>(p.transform.output_dim())));
  model.transform_id = p.transform.id();
  OutputDir dir(cfg.out);
  const train::FitResult fitted = train::fit(std::move(model), p.train, p.valid, schedule, progress(err, ""));
  const std::string table_text = metrics_table(
      {{"valid", score(fitted.model, p.valid)}, {"test", score(fitted.model, p.test)}});
  out << table_text;
  dir.write("model.kmlp", serialize(fitted.model));
  dir.write("transform.json", preprocess::serialize_transform(p.transform));
  dir.write("train_report.tsv", fitted.report.to_tsv());
  dir.write("train_summary.json", fitted.report.summary_json());
  dir.write("metrics.tsv", table_text);
  dir.write("run_config.json", echo_config("fit", cfg));
  dir.commit();
  return 0;
}

struct Artifacts {
  KmlpModel model;
  preprocess::FittedTransform transform;
};

Artifacts load_artifacts(const RunConfig& cfg) {
  if (cfg.model.empty()) throw Error(ErrorCode::InvalidConfig, "--model is required");
  if (cfg.transform.empty()) throw Error(ErrorCode::InvalidConfig, "--transform is required");
  Artifacts a{deserialize(read_file(cfg.model)), preprocess::parse_transform(read_file(cfg.transform))};
  if (!a.model.transform_id.empty() && a.model.transform_id != a.transform.id()) {
    throw Error(ErrorCode::SchemaMismatch, "model was trained behind transform " + a.model.transform_id +
                                               ", given transform is " + a.transform.id());
  }
  if (static_cast<int>(a.transform.output_dim()) != a.model.config.input_dim) {
    throw Error(ErrorCode::SchemaMismatch, "transform width differs from model input width");
  }
  return a;
}

FeatureTable select_fold(const FeatureTable& table, const RunConfig& cfg) {
  if (cfg.fold == "all") return table;
  const auto s = io::split(table, split_spec(cfg));
  if (cfg.fold == "train") return s.train;
  if (cfg.fold == "valid") return s.valid;
  if (cfg.fold == "test") return s.test;
  throw Error(ErrorCode::InvalidConfig, "--fold must be all, train, valid or test");
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Artifacts a = load_artifacts(cfg);
  const FeatureTable rows = select_fold(load_table(cfg, err), cfg);
  const std::string table_text = metrics_table({{cfg.fold, score(a.model, encode(rows, a.transform))}});
  out << table_text;
  OutputDir dir(cfg.out);
  dir.write("eval.tsv", table_text);
  dir.commit();
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Artifacts a = load_artifacts(cfg);
  if (cfg.data.empty()) throw Error(ErrorCode::InvalidConfig, "--data is required");
  // Without --label-column, a file one column wider than the transform is
  // taken to carry its label last.
  io::CsvOptions opt;
  opt.label_column = cfg.label_column;
  if (!cfg.positive_label.empty()) opt.positive_label = cfg.positive_label;
  FeatureTable table = io::load_csv(cfg.data, opt);
  if (cfg.label_column.empty() && table.cols() == a.transform.columns.size() + 1) {
    opt.label_column.reset();
    table = io::load_csv(cfg.data, opt);
  }
  if (cfg.fold != "all") {
    if (!table.labels) throw Error(ErrorCode::InvalidConfig, "--fold needs a labelled file; use --fold all");
    table = select_fold(table, cfg);
  }
  const Vector p = train::predict(a.model, preprocess::apply_transform(table, a.transform));
  std::string csv = "row,probability\n";
  char buf[64];
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(i), p(i));
    csv += buf;
  }
  OutputDir dir(cfg.out);
  if (dir.enabled()) {
    dir.write("predictions.csv", csv);
    dir.commit();
  } else {
    out << csv;
  }
  (void)err;
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const FeatureTable table = load_table(cfg, err);
  const auto splits = io::split(table, split_spec(cfg));
  const Prepared p = prepare(splits, cfg, preprocess::parse_operator(cfg.preproc));
  const KmlpConfig base = model_config(cfg, static_cast<int>(p.transform.output_dim()));
  OutputDir dir(cfg.out);
  auto on_entry = [&](const train::SearchEntry& e) {
    err << "grid point " << e.index << ": valid KS " << metrics::percent(e.valid_ks) << "  AUC "
        << metrics::percent(e.valid_auc) << "\n";
    dir.write("reports/grid_" + std::to_string(e.index) + ".tsv", e.report.to_tsv());
    dir.write("reports/grid_" + std::to_string(e.index) + ".config.json", e.config.to_text());
  };
  train::SearchResult result =
      train::grid_search(cfg.grid, base, p.train, p.valid, schedule_of(cfg), cfg.budget, on_entry);
  result.best_model.transform_id = p.transform.id();
  const std::string board = result.to_tsv();
  out << board;
  dir.write("leaderboard.tsv", board);
  dir.write("model.kmlp", serialize(result.best_model));
  dir.write("transform.json", preprocess::serialize_transform(p.transform));
  dir.write("run_config.json", echo_config("sweep", cfg));
  dir.commit();
  return 0;
}

std::string delta_cell(double value, double full) {
  const double d = 100.0 * (value - full);
  std::string s = metrics::percent(value);
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%s%.2f)", d < 0 ? "↓" : "↑", std::abs(d));
  return s + buf;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const FeatureTable table = load_table(cfg, err);
  const auto splits = io::split(table, split_spec(cfg));
  const train::TrainSchedule schedule = schedule_of(cfg);
  struct Variant {
    std::string name;
    preprocess::Operator op;
    int kan;
    int mlp;
  };
  const preprocess::Operator full_op = preprocess::parse_operator(cfg.preproc);
  const std::vector<Variant> variants = {
      {"KMLP (FULL)", full_op, cfg.kan_layers, cfg.mlp_layers},
      {"w.o. QTL", preprocess::Operator::ZScore, cfg.kan_layers, cfg.mlp_layers},
      {"w.o. gMLP", full_op, cfg.kan_layers, 0},
      {"w.o. KAN", full_op, 0, cfg.mlp_layers},
  };
  struct Row {
    metrics::Summary valid;
    metrics::Summary test;
  };
  std::vector<Row> rows;
  OutputDir dir(cfg.out);
  for (const Variant& v : variants) {
    const Prepared p = prepare(splits, cfg, v.op);
    RunConfig c = cfg;
    c.kan_layers = v.kan;
    c.mlp_layers = v.mlp;
    KmlpModel model = build(model_config(c, static_cast<int>(p.transform.output_dim())));
    const train::FitResult fitted =
        train::fit(std::move(model), p.train, p.valid, schedule, progress(err, v.name + ": "));
    rows.push_back({score(fitted.model, p.valid), score(fitted.model, p.test)});
    std::string slug = v.name;
    std::replace_if(slug.begin(), slug.end(), [](char ch) { return !std::isalnum(static_cast<unsigned char>(ch)); }, '_');
    dir.write("reports/" + slug + ".tsv", fitted.report.to_tsv());
  }
  std::string t = "# w.o. QTL feeds z-score standardized features; w.o. gMLP is KAN + head; w.o. KAN "
                  "is gMLP only\n";
  t += "variant\tvalid_AUC\tvalid_KS\ttest_AUC\ttest_KS\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    t += variants[i].name;
    if (i == 0) {
      t += "\t" + metrics::percent(rows[i].valid.auc) + "\t" + metrics::percent(rows[i].valid.ks) +
           "\t" + metrics::percent(rows[i].test.auc) + "\t" + metrics::percent(rows[i].test.ks);
    } else {
      t += "\t" + delta_cell(rows[i].valid.auc, rows[0].valid.auc) + "\t" +
           delta_cell(rows[i].valid.ks, rows[0].valid.ks) + "\t" +
           delta_cell(rows[i].test.auc, rows[0].test.auc) + "\t" +
           delta_cell(rows[i].test.ks, rows[0].test.ks);
    }
    t += "\n";
  }
  out << t;
  dir.write("ablation.tsv", t);
  dir.write("run_config.json", echo_config("ablate", cfg));
  dir.commit();
  return 0;
}

int cmd_verify(const RunConfig& cfg, bool inject, std::ostream& out) {
  verify::VerifyOptions opt;
  opt.seed = cfg.seed;
  if (inject) opt.gradient_fault_seed = cfg.inject_fault;
  const verify::VerifyReport report = verify::run_suite(opt);
  const std::string text = report.to_text();
  out << text;
  OutputDir dir(cfg.out);
  dir.write("verify.txt", text);
  dir.commit();
  return report.all_passed() ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"KMLP tabular classifier: preprocessing, training, evaluation"};
  app.name(args.empty() ? "kmlp" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"preprocess", "inspect a CSV and fit the numerical transform on its train fold"},
      {"fit", "train a model and write model, transform, report and metrics"},
      {"eval", "score a model on a CSV fold and print AUC/KS"},
      {"predict", "write per-row probabilities"},
      {"sweep", "grid search over the hyperparameter space"},
      {"ablate", "train the full model and its three ablations"},
      {"verify", "run the built-in oracle suite"},
  };
  RunConfig flags;
  std::string config_path;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    for (const Field& f : fields()) {
      if (f.applies_to(name)) f.bind(*sub, flags);
    }
    subs.emplace_back(name, sub);
  }

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  std::string command;
  CLI::App* sub = nullptr;
  for (const auto& [name, s] : subs) {
    if (s->parsed()) {
      command = name;
      sub = s;
    }
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(config_path, command, cfg);
    for (const Field& f : fields()) {
      if (f.applies_to(command) && sub->count("--" + f.name) > 0) f.copy(flags, cfg);
    }
    if (command != "verify" && command != "predict" && command != "eval") {
      err << "resolved config:\n" << echo_config(command, cfg);
    }
    if (command == "preprocess") return cmd_preprocess(cfg, out, err);
    if (command == "fit") return cmd_fit(cfg, out, err);
    if (command == "eval") return cmd_eval(cfg, out, err);
    if (command == "predict") return cmd_predict(cfg, out, err);
    if (command == "sweep") return cmd_sweep(cfg, out, err);
    if (command == "ablate") return cmd_ablate(cfg, out, err);
    if (command == "verify") return cmd_verify(cfg, sub->count("--inject-fault") > 0 ||
                                                        (!config_path.empty() && cfg.inject_fault != 0),
                                               out);
    err << "unknown command\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_user_error(e.code()) ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace kmlp::cli
