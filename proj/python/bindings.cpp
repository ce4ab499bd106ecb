#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kmlp/data_io.hpp"
#include "kmlp/error.hpp"
#include "kmlp/metrics.hpp"
#include "kmlp/model.hpp"
#include "kmlp/preprocess.hpp"
#include "kmlp/spline.hpp"
#include "kmlp/training.hpp"
#include "kmlp/verify.hpp"

namespace py = pybind11;
using namespace kmlp;

namespace {

// Leaked on purpose: destroying it after interpreter shutdown would crash.
py::object& error_type() {
  static auto* type = new py::object();
  return *type;
}

metrics::ScoredSet scored(const std::vector<double>& scores, const std::vector<int>& labels) {
  return metrics::ScoredSet(scores, labels);
}

std::vector<std::pair<double, double>> roc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : metrics::roc_points(scored(s, y))) out.emplace_back(p.fpr, p.tpr);
  return out;
}

py::list epochs_of(const train::TrainReport& r) {
  py::list out;
  for (const auto& e : r.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["train_loss"] = e.train_loss;
    d["valid_ks"] = e.valid_ks;
    d["valid_auc"] = e.valid_auc;
    d["lr"] = e.lr;
    out.append(d);
  }
  return out;
}

void bind_preprocess(py::module_& m) {
  py::enum_<ColumnKind>(m, "ColumnKind")
      .value("Numerical", ColumnKind::Numerical)
      .value("Categorical", ColumnKind::Categorical);

  py::class_<FeatureTable>(m, "FeatureTable")
      .def_static(
          "from_numpy",
          [](const Matrix& values, std::optional<std::vector<int>> labels,
             std::vector<std::string> names) {
            const MissingMask nan = values.array().isNaN();
            const Matrix clean = nan.select(0.0, values.array()).matrix();
            FeatureTable t = make_numeric_table(clean, labels, names);
            t.missing = nan;
            return t;
          },
          py::arg("values"), py::arg("labels") = py::none(),
          py::arg("names") = std::vector<std::string>{},
          "Numeric table; NaN cells are marked missing.")
      .def_readonly("column_names", &FeatureTable::column_names)
      .def_readonly("column_kinds", &FeatureTable::column_kinds)
      .def_readonly("values", &FeatureTable::values)
      .def_property_readonly("missing",
                             [](const FeatureTable& t) {
                               return Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>(t.missing);
                             })
      .def_readonly("categories", &FeatureTable::categories)
      .def_readonly("labels", &FeatureTable::labels)
      .def_property_readonly("shape", [](const FeatureTable& t) { return py::make_tuple(t.rows(), t.cols()); })
      .def("take_rows", [](const FeatureTable& t, const std::vector<std::size_t>& rows) {
        return take_rows(t, rows);
      });

  auto pp = m.def_submodule("preprocess", "numerical encoders and fitted transforms");
  py::class_<preprocess::QuantileBins>(pp, "QuantileBins")
      .def_readonly("boundaries", &preprocess::QuantileBins::boundaries)
      .def_readonly("requested_bins", &preprocess::QuantileBins::requested_bins)
      .def_property_readonly("effective_bins", &preprocess::QuantileBins::effective_bins);

  pp.def("fit_quantile_bins",
         [](const std::vector<double>& column, std::size_t n, std::size_t cap, std::uint64_t seed) {
           return preprocess::fit_quantile_bins(column, n, cap, seed);
         },
         py::arg("column"), py::arg("n") = preprocess::kDefaultBins,
         py::arg("sample_cap") = preprocess::kDefaultSampleCap, py::arg("seed") = 0);
  for (const auto& [name, fn] :
       {std::pair{"qtl_transform", &preprocess::qtl_transform},
        std::pair{"quantile_transform", &preprocess::quantile_transform}}) {
    pp.def(name, fn, py::arg("x"), py::arg("bins"));
    pp.def(name,
           [fn](const Eigen::ArrayXd& x, const preprocess::QuantileBins& b) {
             return Eigen::ArrayXd(x.unaryExpr([&](double v) { return fn(v, b); }));
           },
           py::arg("x"), py::arg("bins"));
  }
  pp.def("ple_encode", &preprocess::ple_encode, py::arg("x"), py::arg("bins"));
  pp.def("clr_transform",
         [](const std::vector<double>& row, double offset) { return preprocess::clr_transform(row, offset); },
         py::arg("row"), py::arg("offset") = 0.0);

  py::enum_<preprocess::Operator>(pp, "Operator")
      .value("QTL", preprocess::Operator::QTL)
      .value("Quantile", preprocess::Operator::Quantile)
      .value("PLE", preprocess::Operator::PLE)
      .value("CLR", preprocess::Operator::CLR)
      .value("ZScore", preprocess::Operator::ZScore);

  py::class_<preprocess::FittedTransform>(pp, "FittedTransform")
      .def_property_readonly("operator", [](const preprocess::FittedTransform& t) { return t.op; })
      .def_property_readonly("output_dim", &preprocess::FittedTransform::output_dim)
      .def_property_readonly("id", &preprocess::FittedTransform::id)
      .def("constant_columns", &preprocess::FittedTransform::constant_columns)
      .def("apply",
           [](const preprocess::FittedTransform& t, const FeatureTable& table) {
             return preprocess::apply_transform(table, t);
           },
           py::arg("table"))
      .def("to_json", &preprocess::serialize_transform)
      .def_static("from_json", &preprocess::parse_transform, py::arg("text"));

  pp.def("fit_transform",
         [](const FeatureTable& table, const std::string& op, std::size_t bins, double clr_offset,
            std::uint64_t seed) {
           preprocess::TransformOptions o;
           o.op = preprocess::parse_operator(op);
           o.bins = bins;
           o.clr_offset = clr_offset;
           o.seed = seed;
           return preprocess::fit_transform(table, o);
         },
         py::arg("table"), py::arg("op") = "qtl", py::arg("bins") = preprocess::kDefaultBins,
         py::arg("clr_offset") = 0.0, py::arg("seed") = 0);
}

void bind_spline(py::module_& m) {
  auto sp = m.def_submodule("spline", "B-spline basis evaluation");
  py::class_<spline::KnotVector>(sp, "KnotVector")
      .def(py::init<std::vector<double>, int>(), py::arg("knots"), py::arg("degree"))
      .def_static("uniform", &spline::KnotVector::uniform, py::arg("grid_size"),
                  py::arg("degree") = spline::kDefaultDegree, py::arg("lo") = 0.0, py::arg("hi") = 1.0)
      .def_property_readonly("knots", &spline::KnotVector::knots)
      .def_property_readonly("degree", &spline::KnotVector::degree)
      .def_property_readonly("grid_size", &spline::KnotVector::grid_size)
      .def_property_readonly("num_basis", &spline::KnotVector::num_basis);
  sp.def("basis", &spline::basis, py::arg("u"), py::arg("i"), py::arg("p"), py::arg("kv"));
  sp.def("basis_row", &spline::basis_row, py::arg("u"), py::arg("kv"));
  sp.def("basis_row_derivative", &spline::basis_row_derivative, py::arg("u"), py::arg("kv"));
}

void bind_model(py::module_& m) {
  py::enum_<Mode>(m, "Mode").value("Train", Mode::Train).value("Infer", Mode::Infer);

  py::class_<KmlpConfig>(m, "KmlpConfig")
      .def(py::init<>())
      .def(py::init([](int kan_layers, int mlp_layers, int hidden_dim, int grid_size, int spline_degree,
                       double dropout, int input_dim, std::uint64_t seed, bool input_batchnorm) {
             return KmlpConfig{kan_layers, mlp_layers, hidden_dim, grid_size, spline_degree,
                               dropout,    input_dim,  seed,       input_batchnorm};
           }),
           py::kw_only(), py::arg("kan_layers") = 1, py::arg("mlp_layers") = 1,
           py::arg("hidden_dim") = 512, py::arg("grid_size") = spline::kDefaultGridSize,
           py::arg("spline_degree") = spline::kDefaultDegree, py::arg("dropout") = 0.0,
           py::arg("input_dim") = 0, py::arg("seed") = 0, py::arg("input_batchnorm") = false)
      .def_readwrite("kan_layers", &KmlpConfig::kan_layers)
      .def_readwrite("mlp_layers", &KmlpConfig::mlp_layers)
      .def_readwrite("hidden_dim", &KmlpConfig::hidden_dim)
      .def_readwrite("grid_size", &KmlpConfig::grid_size)
      .def_readwrite("spline_degree", &KmlpConfig::spline_degree)
      .def_readwrite("dropout", &KmlpConfig::dropout)
      .def_readwrite("input_dim", &KmlpConfig::input_dim)
      .def_readwrite("seed", &KmlpConfig::seed)
      .def_readwrite("input_batchnorm", &KmlpConfig::input_batchnorm)
      .def("validate", &KmlpConfig::validate)
      .def("to_text", &KmlpConfig::to_text)
      .def_static("from_text", &KmlpConfig::from_text, py::arg("text"))
      .def(py::self == py::self)
      .def("__repr__", [](const KmlpConfig& c) { return "KmlpConfig(" + c.to_text() + ")"; });

  py::class_<KmlpModel>(m, "KmlpModel")
      .def_readonly("config", &KmlpModel::config)
      .def_readwrite("transform_id", &KmlpModel::transform_id)
      .def_property_readonly("parameter_count", [](const KmlpModel& mdl) { return parameter_count(mdl); })
      .def("forward", [](const KmlpModel& mdl, const Matrix& x) { return forward(mdl, x, Mode::Infer); },
           py::arg("x"), "Infer-mode probabilities, one per row.")
      .def("gradients",
           [](const KmlpModel& mdl, const Matrix& x, const std::vector<int>& y) {
             ModelGradients g = backward(mdl, x, y, {.mode = Mode::Infer});
             py::list out;
             for (auto v : gradient_views(g)) out.append(std::vector<double>(v.begin(), v.end()));
             return py::make_tuple(g.loss, out);
           },
           py::arg("x"), py::arg("y"),
           "Mean BCE and flattened gradients in parameter order, batch norm frozen.")
      .def("parameters",
           [](KmlpModel& mdl) {
             py::list out;
             for (auto v : parameter_views(mdl)) out.append(std::vector<double>(v.begin(), v.end()));
             return out;
           })
      .def("to_bytes", [](const KmlpModel& mdl) { return py::bytes(serialize(mdl)); })
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize(std::string(b)); });

  m.def("build", &build, py::arg("config"));
}

void bind_train(py::module_& m) {
  auto tr = m.def_submodule("train", "loss, optimizer, training loop and grid search");
  tr.def("bce_loss",
         [](const std::vector<double>& p, const std::vector<int>& y) { return train::bce_loss(p, y); },
         py::arg("p"), py::arg("y"));

  py::class_<train::TrainSchedule>(tr, "TrainSchedule")
      .def(py::init<>())
      .def(py::init([](std::size_t batch_size, double initial_lr, int max_epochs, int patience,
                       std::uint64_t seed, bool class_weighting) {
             train::TrainSchedule s;
             s.batch_size = batch_size;
             s.initial_lr = initial_lr;
             s.max_epochs = max_epochs;
             s.patience = patience;
             s.seed = seed;
             s.class_weighting = class_weighting;
             return s;
           }),
           py::kw_only(), py::arg("batch_size") = 4096, py::arg("initial_lr") = 1e-3,
           py::arg("max_epochs") = 200, py::arg("patience") = 20, py::arg("seed") = 0,
           py::arg("class_weighting") = false)
      .def_readwrite("batch_size", &train::TrainSchedule::batch_size)
      .def_readwrite("initial_lr", &train::TrainSchedule::initial_lr)
      .def_readwrite("decay_factor", &train::TrainSchedule::decay_factor)
      .def_readwrite("decay_every", &train::TrainSchedule::decay_every)
      .def_readwrite("max_epochs", &train::TrainSchedule::max_epochs)
      .def_readwrite("patience", &train::TrainSchedule::patience)
      .def_readwrite("seed", &train::TrainSchedule::seed)
      .def_readwrite("class_weighting", &train::TrainSchedule::class_weighting)
      .def("lr_at", &train::TrainSchedule::lr_at, py::arg("epoch"));

  py::class_<train::TrainReport>(tr, "TrainReport")
      .def_property_readonly("epochs", &epochs_of)
      .def_readonly("best_epoch", &train::TrainReport::best_epoch)
      .def_property_readonly("stop_epoch", &train::TrainReport::stop_epoch)
      .def_property_readonly("stop_reason",
                             [](const train::TrainReport& r) { return std::string(train::to_string(r.stop)); })
      .def_property_readonly("best_ks", &train::TrainReport::best_ks)
      .def_readonly("wall_seconds", &train::TrainReport::wall_seconds)
      .def("to_tsv", &train::TrainReport::to_tsv)
      .def("summary_json", &train::TrainReport::summary_json);

  tr.def("adam",
         [](std::vector<double> param, const std::vector<std::vector<double>>& grads, double lr) {
           std::vector<std::span<double>> params{param};
           train::AdamState state = train::AdamState::like(params);
           for (const auto& g : grads) {
             if (g.size() != param.size()) {
               throw Error(ErrorCode::ShapeError, "gradient length differs from parameter length");
             }
             std::vector<std::span<const double>> gs{g};
             train::adam_step(params, gs, state, lr);
           }
           return param;
         },
         py::arg("param"), py::arg("grads"), py::arg("lr") = 1e-3,
         "Apply one Adam step per gradient in `grads`, starting from zero moments.");

  tr.def("fit",
         [](KmlpModel model, const Matrix& x_train, std::vector<int> y_train, const Matrix& x_valid,
            std::vector<int> y_valid, const train::TrainSchedule& schedule,
            std::function<void(py::dict)> on_epoch) {
           train::EpochCallback cb;
           if (on_epoch) {
             cb = [&](const train::EpochRecord& e) {
               py::dict d;
               d["epoch"] = e.epoch;
               d["train_loss"] = e.train_loss;
               d["valid_ks"] = e.valid_ks;
               d["valid_auc"] = e.valid_auc;
               d["lr"] = e.lr;
               on_epoch(d);
             };
           }
           train::FitResult r = train::fit(std::move(model), {x_train, std::move(y_train)},
                                           {x_valid, std::move(y_valid)}, schedule, cb);
           return py::make_tuple(std::move(r.model), std::move(r.report));
         },
         py::arg("model"), py::arg("x_train"), py::arg("y_train"), py::arg("x_valid"),
         py::arg("y_valid"), py::arg("schedule") = train::TrainSchedule{},
         py::arg("on_epoch") = nullptr, "Train with early stopping; returns (best model, report).");

  tr.def("predict", [](const KmlpModel& mdl, const Matrix& x) { return train::predict(mdl, x); },
         py::arg("model"), py::arg("x"));

  py::class_<train::SearchSpace>(tr, "SearchSpace")
      .def(py::init<>())
      .def_readwrite("mlp_layers", &train::SearchSpace::mlp_layers)
      .def_readwrite("kan_layers", &train::SearchSpace::kan_layers)
      .def_readwrite("grid_size", &train::SearchSpace::grid_size)
      .def_readwrite("hidden_dim", &train::SearchSpace::hidden_dim)
      .def_readwrite("dropout", &train::SearchSpace::dropout)
      .def("size", &train::SearchSpace::size)
      .def("expand", &train::SearchSpace::expand, py::arg("base"));

  tr.def("grid_search",
         [](const train::SearchSpace& space, const KmlpConfig& base, const Matrix& x_train,
            std::vector<int> y_train, const Matrix& x_valid, std::vector<int> y_valid,
            const train::TrainSchedule& schedule, std::size_t budget) {
           train::SearchResult r = train::grid_search(space, base, {x_train, std::move(y_train)},
                                                      {x_valid, std::move(y_valid)}, schedule, budget);
           py::list ranked;
           for (const auto& e : r.ranked) {
             py::dict d;
             d["index"] = e.index;
             d["config"] = e.config;
             d["valid_ks"] = e.valid_ks;
             d["valid_auc"] = e.valid_auc;
             d["best_epoch"] = e.report.best_epoch;
             ranked.append(d);
           }
           return py::make_tuple(ranked, std::move(r.best_model), r.to_tsv());
         },
         py::arg("space"), py::arg("base"), py::arg("x_train"), py::arg("y_train"), py::arg("x_valid"),
         py::arg("y_valid"), py::arg("schedule") = train::TrainSchedule{}, py::arg("budget") = 0,
         "Returns (ranked entries, best model, leaderboard text).");
}

void bind_metrics(py::module_& m) {
  auto mt = m.def_submodule("metrics", "ROC, AUC and KS");
  mt.def("roc_points", &roc, py::arg("scores"), py::arg("labels"));
  mt.def("auc", [](const std::vector<double>& s, const std::vector<int>& y) { return metrics::auc(scored(s, y)); },
         py::arg("scores"), py::arg("labels"));
  mt.def("auc_rank_statistic",
         [](const std::vector<double>& s, const std::vector<int>& y) {
           return metrics::auc_rank_statistic(scored(s, y));
         },
         py::arg("scores"), py::arg("labels"));
  mt.def("ks", [](const std::vector<double>& s, const std::vector<int>& y) { return metrics::ks(scored(s, y)); },
         py::arg("scores"), py::arg("labels"));
  mt.def("percent", &metrics::percent, py::arg("fraction"));
}

void bind_io(py::module_& m) {
  auto io = m.def_submodule("io", "CSV loading, splitting and benchmark descriptors");
  auto options = [](std::optional<std::string> label_column, std::optional<std::string> positive_label,
                    std::optional<std::vector<std::string>> missing_tokens) {
    io::CsvOptions o;
    o.label_column = std::move(label_column);
    o.positive_label = std::move(positive_label);
    if (missing_tokens) o.missing_tokens = *missing_tokens;
    return o;
  };
  io.def("read_csv",
         [options](const std::string& text, std::optional<std::string> label_column,
                   std::optional<std::string> positive_label,
                   std::optional<std::vector<std::string>> missing_tokens) {
           return io::read_csv(text, options(label_column, positive_label, missing_tokens));
         },
         py::arg("text"), py::arg("label_column") = py::none(), py::arg("positive_label") = py::none(),
         py::arg("missing_tokens") = py::none(),
         "label_column=None takes the last column; \"\" means no label.");
  io.def("load_csv",
         [options](const std::filesystem::path& path, std::optional<std::string> label_column,
                   std::optional<std::string> positive_label,
                   std::optional<std::vector<std::string>> missing_tokens) {
           return io::load_csv(path, options(label_column, positive_label, missing_tokens));
         },
         py::arg("path"), py::arg("label_column") = py::none(), py::arg("positive_label") = py::none(),
         py::arg("missing_tokens") = py::none());
  io.def("write_csv", &io::write_csv, py::arg("table"), py::arg("label_name") = "label");
  io.def("split_indices",
         [](std::size_t n, std::uint64_t seed, const std::string& strategy,
            std::optional<std::vector<int>> labels) {
           io::SplitSpec spec;
           spec.seed = seed;
           spec.strategy = io::parse_split_strategy(strategy);
           const io::SplitIndices s = io::split_indices(n, spec, labels ? &*labels : nullptr);
           return py::make_tuple(s.train, s.valid, s.test);
         },
         py::arg("n"), py::arg("seed") = 0, py::arg("strategy") = "uniform", py::arg("labels") = py::none(),
         "70/10/20 row indices as (train, valid, test).");
  io.def("describe_tsv", [](const FeatureTable& t) { return io::describe_tsv(io::describe(t)); },
         py::arg("table"));
  io.def("benchmarks", [] {
    py::list out;
    for (const auto& d : io::builtin_descriptors()) {
      py::dict e;
      e["name"] = d.name;
      e["abbreviation"] = d.abbreviation;
      e["rows"] = d.rows;
      e["features"] = d.features;
      e["label_column"] = d.label_column;
      e["source_url"] = d.source_url;
      out.append(e);
    }
    return out;
  });
}

void bind_verify(py::module_& m) {
  m.def("verify",
        [](std::uint64_t seed, std::optional<std::uint64_t> fault) {
          verify::VerifyOptions o;
          o.seed = seed;
          o.gradient_fault_seed = fault;
          const verify::VerifyReport r = verify::run_suite(o);
          py::list out;
          for (const auto& p : r.results) {
            py::dict d;
            d["name"] = p.name;
            d["measured"] = p.measured;
            d["tolerance"] = p.tolerance;
            d["passed"] = p.passed;
            d["detail"] = p.detail;
            out.append(d);
          }
          return py::make_tuple(r.all_passed(), out);
        },
        py::arg("seed") = 0, py::arg("gradient_fault_seed") = py::none(),
        "Run the built-in oracle suite; returns (all_passed, results).");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "KMLP tabular classifier: QTL preprocessing, KAN + gMLP model, training and metrics";

  error_type() = py::reinterpret_borrow<py::object>(
      py::exception<Error>(m, "KmlpError", PyExc_RuntimeError));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type()(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("location") = e.location() ? py::cast(*e.location()) : py::none();
      PyErr_SetObject(error_type().ptr(), exc.ptr());
    }
  });

  bind_preprocess(m);
  bind_spline(m);
  bind_model(m);
  bind_train(m);
  bind_metrics(m);
  bind_io(m);
  bind_verify(m);
}
