#pragma once

#include <cstddef>
#include <cstdint>

#include "kmlp/spline.hpp"
#include "kmlp/tensor.hpp"

namespace kmlp::nn {

double sigmoid(double x);
double silu(double x);
// d/dx silu(x) = s(x) (1 + x (1 - s(x)))
double silu_grad(double x);

// ---------------------------------------------------------------------------
// KAN layer
//
// Every (output q, input p) edge carries
//   phi_{q,p}(x) = w_b[q,p] * silu(x) + w_s[q,p] * sum_i c[q,p,i] B_i(x)
// and output q sums its incoming edges. The spline coefficients are stored as
// an h x (d*K) matrix with c[q,p,i] at column p*K + i, K = num_basis().
// ---------------------------------------------------------------------------

struct KanLayerParams {
  spline::KnotVector knots = spline::KnotVector::uniform(spline::kDefaultGridSize);
  Matrix base_weights;    // h x d
  Matrix spline_weights;  // h x d
  Matrix spline_coeffs;   // h x (d*K)

  Eigen::Index in_dim() const { return base_weights.cols(); }
  Eigen::Index out_dim() const { return base_weights.rows(); }
  Eigen::Index num_basis() const { return static_cast<Eigen::Index>(knots.num_basis()); }
  void validate() const;
};

struct KanCache {
  Matrix input;
  Matrix silu_input;
  Matrix basis;  // batch x (d*K)
};

struct KanGradients {
  Matrix base_weights;
  Matrix spline_weights;
  Matrix spline_coeffs;
  Matrix input;
};

Matrix kan_forward(const Matrix& x, const KanLayerParams& params, KanCache* cache = nullptr);

// Uses `cache` from the matching forward when given; recomputes otherwise.
// The input gradient is skipped (left empty) when `want_input_grad` is false.
KanGradients kan_backward(const Matrix& x, const KanLayerParams& params, const Matrix& upstream,
                          const KanCache* cache = nullptr, bool want_input_grad = true);

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

struct BatchNormState {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormState identity(Eigen::Index features);
  Eigen::Index features() const { return gamma.size(); }
  void validate() const;
};

struct BatchNormCache {
  Mode mode = Mode::Infer;
  Matrix normalized;
  Vector inv_std;
  Vector batch_mean;
  Vector batch_var;  // biased, as used for normalization
};

struct BatchNormGradients {
  Vector gamma;
  Vector beta;
  Matrix input;
};

// Pure: train mode normalizes by batch statistics, infer mode by running ones.
Matrix batchnorm_apply(const Matrix& x, const BatchNormState& state, Mode mode,
                       BatchNormCache* cache = nullptr);
// Folds a train-mode batch's statistics into the running averages; the
// running variance takes the unbiased batch variance.
void batchnorm_commit(BatchNormState& state, const BatchNormCache& cache);
// apply + commit.
Matrix batchnorm_forward(const Matrix& x, BatchNormState& state, Mode mode);
BatchNormGradients batchnorm_backward(const Matrix& upstream, const BatchNormState& state,
                                      const BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Dropout (inverted). The keep/drop decision of element j is a pure function
// of (seed, j), so a backward pass regenerates the mask instead of storing it.
// ---------------------------------------------------------------------------

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed);
Matrix dropout(const Matrix& x, double rate, Mode mode, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dense layer, y = x W + b with W stored in x out.
// ---------------------------------------------------------------------------

struct LinearParams {
  Matrix weight;
  Vector bias;

  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
};

struct LinearGradients {
  Matrix weight;
  Vector bias;
  Matrix input;
};

Matrix linear_forward(const Matrix& x, const LinearParams& params);
LinearGradients linear_backward(const Matrix& x, const LinearParams& params,
                                const Matrix& upstream);

// ---------------------------------------------------------------------------
// gMLP block: batch norm -> SwiGLU with output projection -> dropout.
//   SwiGLU(x) = (silu(x V + b_1) * (x U + b_2)) W_o + b_o
// ---------------------------------------------------------------------------

struct GmlpBlockParams {
  BatchNormState norm;
  Matrix gate;        // V, d_in x d_hidden
  Vector gate_bias;   // b_1
  Matrix value;       // U, d_in x d_hidden
  Vector value_bias;  // b_2
  LinearParams output;
  double dropout_rate = 0.0;

  Eigen::Index in_dim() const { return gate.rows(); }
  Eigen::Index hidden_dim() const { return gate.cols(); }
  Eigen::Index out_dim() const { return output.out_dim(); }
  void validate() const;
};

struct GmlpCache {
  BatchNormCache norm;
  Matrix normalized;
  Matrix gate_pre;   // x V + b_1
  Matrix value_pre;  // x U + b_2
  Matrix gated;      // silu(gate_pre) * value_pre
  Mode mode = Mode::Infer;
  std::uint64_t dropout_seed = 0;
};

struct GmlpGradients {
  Vector gamma;
  Vector beta;
  Matrix gate;
  Vector gate_bias;
  Matrix value;
  Vector value_bias;
  Matrix out_weight;
  Vector out_bias;
  Matrix input;
};

Matrix swiglu_forward(const Matrix& x, const GmlpBlockParams& params);

Matrix gmlp_block_forward(const Matrix& x, const GmlpBlockParams& params, Mode mode,
                          std::uint64_t dropout_seed, GmlpCache* cache = nullptr);
GmlpGradients gmlp_block_backward(const Matrix& upstream, const GmlpBlockParams& params,
                                  const GmlpCache& cache);

// Elementwise logistic, stable for large |logit|.
Matrix sigmoid_head_forward(const Matrix& logits);

}  // namespace kmlp::nn
