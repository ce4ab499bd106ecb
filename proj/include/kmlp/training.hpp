#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kmlp/model.hpp"
#include "kmlp/tensor.hpp"

namespace kmlp::train {

// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> p, std::span<const int> y);

struct TrainSchedule {
  std::size_t batch_size = 4096;
  double initial_lr = 1e-3;
  double decay_factor = 0.9;
  int decay_every = 20;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  // Weight rows so both classes contribute equally to the loss. Off by default.
  bool class_weighting = false;

  // Epochs are numbered from 0.
  double lr_at(int epoch) const;
  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  // Zero moments shaped like `params`.
  static AdamState like(std::span<const std::span<double>> params);
};

// One bias-corrected Adam update. An empty state is shaped on first use.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_ks = 0.0;
  double valid_auc = 0.0;
  double lr = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class StopReason { Patience, MaxEpochs };
std::string_view to_string(StopReason r);

struct TrainReport {
  static constexpr int kFormatVersion = 1;

  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  StopReason stop = StopReason::MaxEpochs;
  double wall_seconds = 0.0;

  double best_ks() const;
  int stop_epoch() const { return epochs.empty() ? -1 : epochs.back().epoch; }

  // Tab-separated: a version comment line, a header, one row per epoch.
  std::string to_tsv() const;
  // JSON summary: version, best epoch and metrics, stop reason, wall time.
  std::string summary_json() const;
};

struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::size_t rows() const { return y.size(); }
};

struct FitResult {
  KmlpModel model;  // best-KS snapshot
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training with per-epoch validation KS monitoring. A trailing
// batch of a single row is folded into the previous batch, since batch norm
// cannot normalize one row.
FitResult fit(KmlpModel model, const Dataset& train, const Dataset& valid,
              const TrainSchedule& schedule, const EpochCallback& on_epoch = {});

// Probabilities in inference mode, evaluated in chunks.
Vector predict(const KmlpModel& model, const Matrix& x, std::size_t chunk = 8192);

// ---------------------------------------------------------------------------
// Grid search

struct SearchSpace {
  std::vector<int> mlp_layers{1, 2};
  std::vector<int> kan_layers{1, 2};
  std::vector<int> grid_size{5, 10};
  std::vector<int> hidden_dim{512, 1024, 2048};
  std::vector<double> dropout{0.0, 0.3, 0.5, 0.7};

  std::size_t size() const;
  // Cartesian product in a fixed order; `base` supplies the other fields.
  std::vector<KmlpConfig> expand(const KmlpConfig& base) const;
};

struct SearchEntry {
  std::size_t index = 0;  // position in the expanded grid
  KmlpConfig config;
  TrainReport report;
  double valid_ks = 0.0;
  double valid_auc = 0.0;
};

struct SearchResult {
  std::vector<SearchEntry> ranked;  // by validation KS, descending
  KmlpModel best_model;
  std::string to_tsv() const;
};

// Trains every grid point, or a seeded subset of `budget` points when budget
// is nonzero and smaller than the grid.
SearchResult grid_search(const SearchSpace& space, const KmlpConfig& base, const Dataset& train,
                         const Dataset& valid, const TrainSchedule& schedule,
                         std::size_t budget = 0,
                         const std::function<void(const SearchEntry&)>& on_entry = {});

}  // namespace kmlp::train
