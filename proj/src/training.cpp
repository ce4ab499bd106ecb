#include "kmlp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"
#include "kmlp/metrics.hpp"

namespace kmlp::train {

double bce_loss(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw Error(ErrorCode::ShapeError, "probabilities and labels differ in length");
  if (p.empty()) return 0.0;
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw Error(ErrorCode::LabelError, "label is not 0 or 1", i + 1);
    const double q = std::clamp(p[i], kClamp, 1.0 - kClamp);
    total -= y[i] == 1 ? std::log(q) : std::log(1.0 - q);
  }
  return total / static_cast<double>(p.size());
}

double TrainSchedule::lr_at(int epoch) const {
  return initial_lr * std::pow(decay_factor, epoch / decay_every);
}

void TrainSchedule::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (batch_size < 2) fail("batch size must be at least 2");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) fail("learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail("decay factor must lie in (0, 1]");
  if (decay_every < 1) fail("decay interval must be at least 1 epoch");
  if (max_epochs < 1) fail("max epochs must be at least 1");
  if (patience < 1) fail("patience must be at least 1");
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::like(std::span<const std::span<double>> params) {
  AdamState s;
  for (auto p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double lr) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeError, "parameter and gradient lists differ in length");
  }
  if (state.m.empty() && state.t == 0) {
    const AdamState fresh = AdamState::like(params);
    state.m = fresh.m;
    state.v = fresh.v;
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeError, "optimizer state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].size() || state.m[k].size() != params[k].size()) {
      throw Error(ErrorCode::ShapeError, "gradient " + std::to_string(k) + " has the wrong size");
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Reports

std::string_view to_string(StopReason r) {
  return r == StopReason::Patience ? "patience" : "max_epochs";
}

double TrainReport::best_ks() const {
  for (const auto& e : epochs) {
    if (e.epoch == best_epoch) return e.valid_ks;
  }
  return 0.0;
}

std::string TrainReport::to_tsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "# kmlp-train-report v" << kFormatVersion << "\n";
  out << "epoch\tloss\tvalid_ks\tvalid_auc\tlr\n";
  for (const auto& e : epochs) {
    out << e.epoch << '\t' << e.train_loss << '\t' << e.valid_ks << '\t' << e.valid_auc << '\t'
        << e.lr << '\n';
  }
  return out.str();
}

std::string TrainReport::summary_json() const {
  nlohmann::json j;
  j["format"] = "kmlp-train-summary";
  j["format_version"] = kFormatVersion;
  j["epochs_run"] = epochs.size();
  j["best_epoch"] = best_epoch;
  j["stop_epoch"] = stop_epoch();
  j["stop_reason"] = std::string(to_string(stop));
  for (const auto& e : epochs) {
    if (e.epoch == best_epoch) {
      j["best_valid_ks"] = e.valid_ks;
      j["best_valid_auc"] = e.valid_auc;
    }
  }
  j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> bounds{0};
  for (std::size_t start = batch; start < n; start += batch) bounds.push_back(start);
  bounds.push_back(n);
  if (bounds.size() > 2 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] == 1) {
    bounds.erase(bounds.end() - 2);
  }
  return bounds;
}

void check_dataset(const Dataset& d, Eigen::Index width, const char* which) {
  if (d.rows() == 0) throw Error(ErrorCode::EmptyDataset, std::string(which) + " split is empty");
  if (static_cast<std::size_t>(d.x.rows()) != d.rows()) {
    throw Error(ErrorCode::ShapeError, std::string(which) + " features and labels differ in rows");
  }
  if (d.x.cols() != width) {
    throw Error(ErrorCode::SchemaMismatch, std::string(which) + " split has " +
                                               std::to_string(d.x.cols()) +
                                               " columns, model expects " + std::to_string(width));
  }
}

bool all_finite(const ModelGradients& g) {
  if (!std::isfinite(g.loss)) return false;
  for (auto s : gradient_views(g)) {
    for (double v : s) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

Vector predict(const KmlpModel& model, const Matrix& x, std::size_t chunk) {
  Vector out(x.rows());
  chunk = std::max<std::size_t>(chunk, 1);
  for (Eigen::Index start = 0; start < x.rows(); start += static_cast<Eigen::Index>(chunk)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), x.rows() - start);
    out.segment(start, len) = forward(model, x.middleRows(start, len), Mode::Infer);
  }
  return out;
}

FitResult fit(KmlpModel model, const Dataset& train, const Dataset& valid,
              const TrainSchedule& schedule, const EpochCallback& on_epoch) {
  schedule.validate();
  check_dataset(train, model.config.input_dim, "train");
  check_dataset(valid, model.config.input_dim, "validation");
  if (train.rows() < 2) throw Error(ErrorCode::EmptyDataset, "train split needs at least 2 rows");
  const auto started = std::chrono::steady_clock::now();

  const std::size_t n = train.rows();
  std::vector<double> class_weight{1.0, 1.0};
  if (schedule.class_weighting) {
    const auto pos = static_cast<std::size_t>(std::count(train.y.begin(), train.y.end(), 1));
    if (pos == 0 || pos == n) throw Error(ErrorCode::DegenerateLabels, "class weighting needs both classes");
    class_weight[0] = static_cast<double>(n) / (2.0 * static_cast<double>(n - pos));
    class_weight[1] = static_cast<double>(n) / (2.0 * static_cast<double>(pos));
  }

  FitResult result;
  TrainReport& report = result.report;
  KmlpModel best = model;
  double best_ks = -1.0;
  AdamState adam;
  std::uint64_t step = 0;
  std::vector<std::size_t> order(n);
  const auto bounds = batch_bounds(n, schedule.batch_size);
  Matrix xb;
  std::vector<int> yb;
  std::vector<double> wb;

  for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, mix64(schedule.seed, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::size_t lo = bounds[b];
      const std::size_t len = bounds[b + 1] - lo;
      xb.resize(static_cast<Eigen::Index>(len), train.x.cols());
      yb.resize(len);
      wb.resize(schedule.class_weighting ? len : 0);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t r = order[lo + i];
        xb.row(static_cast<Eigen::Index>(i)) = train.x.row(static_cast<Eigen::Index>(r));
        yb[i] = train.y[r];
        if (schedule.class_weighting) wb[i] = class_weight[static_cast<std::size_t>(train.y[r])];
      }
      const ForwardTape tape = forward_tape(model, xb, {.mode = Mode::Train, .step = step});
      const ModelGradients grads = backward(model, tape, yb, false, wb);
      if (!all_finite(grads)) {
        throw Error(ErrorCode::NumericalError, "non-finite loss or gradient at epoch " +
                                                   std::to_string(epoch) + ", batch " +
                                                   std::to_string(b));
      }
      commit_batch_statistics(model, tape);
      const auto params = parameter_views(model);
      const auto gviews = gradient_views(grads);
      adam_step(params, gviews, adam, lr);
      loss_sum += grads.loss * static_cast<double>(len);
      ++step;
    }

    const Vector scores = predict(model, valid.x);
    const metrics::ScoredSet scored(std::span<const double>(scores.data(), scores.size()), valid.y);
    const metrics::Summary summary = metrics::summarize(scored);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n), summary.ks, summary.auc, lr};
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (summary.ks > best_ks) {
      best_ks = summary.ks;
      report.best_epoch = epoch;
      best = model;
    }
    if (epoch - report.best_epoch >= schedule.patience) {
      report.stop = StopReason::Patience;
      break;
    }
  }
  if (report.epochs.size() == static_cast<std::size_t>(schedule.max_epochs) &&
      report.stop != StopReason::Patience) {
    report.stop = StopReason::MaxEpochs;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Grid search

std::size_t SearchSpace::size() const {
  return mlp_layers.size() * kan_layers.size() * grid_size.size() * hidden_dim.size() *
         dropout.size();
}

std::vector<KmlpConfig> SearchSpace::expand(const KmlpConfig& base) const {
  std::vector<KmlpConfig> out;
  out.reserve(size());
  for (int m : mlp_layers) {
    for (int k : kan_layers) {
      for (int g : grid_size) {
        for (int h : hidden_dim) {
          for (double d : dropout) {
            KmlpConfig c = base;
            c.mlp_layers = m;
            c.kan_layers = k;
            c.grid_size = g;
            c.hidden_dim = h;
            c.dropout = d;
            out.push_back(c);
          }
        }
      }
    }
  }
  return out;
}

std::string SearchResult::to_tsv() const {
  std::ostringstream out;
  out << "# kmlp-sweep v1\n";
  out << "rank\tgrid_index\t# MLP Layers\t# KAN Layers\tgrid size\thidden dim\tDropout\tbest_epoch\t"
         "valid_ks\tvalid_auc\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& e = ranked[r];
    out << r + 1 << '\t' << e.index << '\t' << e.config.mlp_layers << '\t' << e.config.kan_layers
        << '\t' << e.config.grid_size << '\t' << e.config.hidden_dim << '\t' << e.config.dropout
        << '\t' << e.report.best_epoch << '\t' << metrics::percent(e.valid_ks) << '\t'
        << metrics::percent(e.valid_auc) << '\n';
  }
  return out.str();
}

SearchResult grid_search(const SearchSpace& space, const KmlpConfig& base, const Dataset& train,
                         const Dataset& valid, const TrainSchedule& schedule, std::size_t budget,
                         const std::function<void(const SearchEntry&)>& on_entry) {
  const auto grid = space.expand(base);
  if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "search space is empty");
  for (const auto& c : grid) c.validate();

  std::vector<std::size_t> chosen(grid.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (budget > 0 && budget < grid.size()) {
    seeded_shuffle(chosen, mix64(schedule.seed, 0x53574545ULL));
    chosen.resize(budget);
    std::sort(chosen.begin(), chosen.end());
  }

  SearchResult result;
  double lead_ks = -1.0;
  double lead_auc = -1.0;
  for (std::size_t idx : chosen) {
    FitResult fitted = fit(build(grid[idx]), train, valid, schedule);
    SearchEntry entry;
    entry.index = idx;
    entry.config = grid[idx];
    entry.report = std::move(fitted.report);
    entry.valid_ks = entry.report.best_ks();
    for (const auto& e : entry.report.epochs) {
      if (e.epoch == entry.report.best_epoch) entry.valid_auc = e.valid_auc;
    }
    if (on_entry) on_entry(entry);
    if (entry.valid_ks > lead_ks || (entry.valid_ks == lead_ks && entry.valid_auc > lead_auc)) {
      lead_ks = entry.valid_ks;
      lead_auc = entry.valid_auc;
      result.best_model = std::move(fitted.model);
    }
    result.ranked.push_back(std::move(entry));
  }
  std::vector<std::size_t> rank(result.ranked.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = result.ranked[a];
    const auto& eb = result.ranked[b];
    if (ea.valid_ks != eb.valid_ks) return ea.valid_ks > eb.valid_ks;
    return ea.valid_auc > eb.valid_auc;
  });
  std::vector<SearchEntry> sorted;
  for (std::size_t r : rank) sorted.push_back(result.ranked[r]);
  result.ranked = std::move(sorted);
  return result;
}

}  // namespace kmlp::train
