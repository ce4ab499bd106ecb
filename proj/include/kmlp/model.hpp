#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmlp/layers.hpp"
#include "kmlp/tensor.hpp"

namespace kmlp {

// Architecture hyperparameters. The text form is a JSON object keyed by the
// hyperparameter names of the KMLP search space ("# KAN Layers", "# MLP Layers",
// "grid size", "hidden dim", "Dropout") plus the non-searched fields.
struct KmlpConfig {
  int kan_layers = 1;  // 0 only for ablation
  int mlp_layers = 1;  // 0 only for ablation
  int hidden_dim = 512;
  int grid_size = spline::kDefaultGridSize;
  int spline_degree = spline::kDefaultDegree;
  double dropout = 0.0;
  int input_dim = 0;
  std::uint64_t seed = 0;
  // Batch norm ahead of the first KAN layer; off by default.
  bool input_batchnorm = false;

  void validate() const;
  std::string to_text() const;
  static KmlpConfig from_text(std::string_view text);

  friend bool operator==(const KmlpConfig&, const KmlpConfig&) = default;
};

namespace config_keys {
inline constexpr const char* kKanLayers = "# KAN Layers";
inline constexpr const char* kMlpLayers = "# MLP Layers";
inline constexpr const char* kGridSize = "grid size";
inline constexpr const char* kHiddenDim = "hidden dim";
inline constexpr const char* kDropout = "Dropout";
inline constexpr const char* kSplineDegree = "spline degree";
inline constexpr const char* kInputDim = "input dim";
inline constexpr const char* kSeed = "seed";
inline constexpr const char* kInputBatchnorm = "input batch norm";
}  // namespace config_keys

// QTL-encoded input -> KAN layers -> gMLP blocks -> linear unit -> sigmoid.
struct KmlpModel {
  KmlpConfig config;
  std::optional<nn::BatchNormState> input_norm;
  std::vector<nn::KanLayerParams> kan;
  std::vector<nn::GmlpBlockParams> gmlp;
  nn::LinearParams head;
  // id() of the FittedTransform the model was trained behind; empty if none.
  std::string transform_id;
};

KmlpModel build(const KmlpConfig& config);

struct PassOptions {
  Mode mode = Mode::Infer;
  // Optimizer step; selects the dropout stream in train mode.
  std::uint64_t step = 0;
};

// Everything the backward pass needs from one forward evaluation.
struct ForwardTape {
  Mode mode = Mode::Infer;
  Matrix input;
  std::optional<nn::BatchNormCache> input_norm;
  std::vector<nn::KanCache> kan;
  std::vector<nn::GmlpCache> gmlp;
  Matrix head_input;
  Vector logits;
  Vector probabilities;
};

// Pure in both modes: train-mode batch statistics are recorded on the tape,
// not written back (see commit_batch_statistics).
ForwardTape forward_tape(const KmlpModel& model, const Matrix& x, const PassOptions& options = {});

// Per-row probabilities.
Vector forward(const KmlpModel& model, const Matrix& x, Mode mode = Mode::Infer);

void commit_batch_statistics(KmlpModel& model, const ForwardTape& tape);

struct ModelGradients {
  std::optional<nn::BatchNormGradients> input_norm;
  std::vector<nn::KanGradients> kan;
  std::vector<nn::GmlpGradients> gmlp;
  nn::LinearGradients head;
  Matrix input;  // empty unless requested
  double loss = 0.0;
};

// Gradients of the mean binary cross-entropy over the taped batch. Optional
// per-row weights scale each row's loss term.
ModelGradients backward(const KmlpModel& model, const ForwardTape& tape,
                        std::span<const int> labels, bool want_input_grad = false,
                        std::span<const double> row_weights = {});

// forward_tape + backward in one call.
ModelGradients backward(const KmlpModel& model, const Matrix& x, std::span<const int> labels,
                        const PassOptions& options = {.mode = Mode::Train},
                        bool want_input_grad = false);

// Trainable tensors in a fixed order; gradient_views lists the matching
// gradients in the same order. Batch-norm running statistics are not
// trainable and are excluded.
std::vector<std::span<double>> parameter_views(KmlpModel& model);
std::vector<std::span<const double>> gradient_views(const ModelGradients& grads);
std::vector<std::span<double>> gradient_views(ModelGradients& grads);
std::size_t parameter_count(const KmlpModel& model);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize(const KmlpModel& model);
// Throws FormatError (with the byte offset) on truncation, bad magic, version
// mismatch, checksum failure or inconsistent shapes.
KmlpModel deserialize(std::string_view bytes);

}  // namespace kmlp
