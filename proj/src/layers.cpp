#include "kmlp/layers.hpp"

#include <cmath>
#include <span>
#include <vector>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"

namespace kmlp::nn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeError, what);
}

Vector column_sums(const Matrix& m) { return m.colwise().sum().transpose(); }

}  // namespace

// ----------------------------------------------------------------------------
// KAN

void KanLayerParams::validate() const {
  const Eigen::Index h = base_weights.rows();
  const Eigen::Index d = base_weights.cols();
  require(h > 0 && d > 0, "KAN layer dimensions must be positive");
  require(spline_weights.rows() == h && spline_weights.cols() == d,
          "KAN spline_weights shape differs from base_weights");
  require(spline_coeffs.rows() == h && spline_coeffs.cols() == d * num_basis(),
          "KAN spline_coeffs must be out_dim x (in_dim * num_basis)");
}

namespace {

Matrix effective_spline_weights(const KanLayerParams& p) {
  const Eigen::Index K = p.num_basis();
  Matrix w = p.spline_coeffs;
  for (Eigen::Index q = 0; q < w.rows(); ++q) {
    for (Eigen::Index j = 0; j < p.in_dim(); ++j) {
      w.block(q, j * K, 1, K) *= p.spline_weights(q, j);
    }
  }
  return w;
}

Matrix basis_matrix(const Matrix& x, const spline::KnotVector& kv) {
  const auto K = static_cast<Eigen::Index>(kv.num_basis());
  Matrix basis(x.rows(), x.cols() * K);
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      spline::basis_row_into(x(b, j), kv,
                             std::span<double>(&basis(b, j * K), static_cast<std::size_t>(K)));
    }
  }
  return basis;
}

}  // namespace

Matrix kan_forward(const Matrix& x, const KanLayerParams& params, KanCache* cache) {
  params.validate();
  require(x.cols() == params.in_dim(), "KAN input width differs from in_dim");
  Matrix s = x.unaryExpr([](double v) { return silu(v); });
  Matrix basis = basis_matrix(x, params.knots);
  Matrix out(x.rows(), params.out_dim());
  out.noalias() = s * params.base_weights.transpose();
  out.noalias() += basis * effective_spline_weights(params).transpose();
  if (cache) {
    cache->input = x;
    cache->silu_input = std::move(s);
    cache->basis = std::move(basis);
  }
  return out;
}

KanGradients kan_backward(const Matrix& x, const KanLayerParams& params, const Matrix& upstream,
                          const KanCache* cache, bool want_input_grad) {
  params.validate();
  require(x.cols() == params.in_dim(), "KAN input width differs from in_dim");
  require(upstream.rows() == x.rows() && upstream.cols() == params.out_dim(),
          "KAN upstream gradient shape differs from forward output");

  KanCache local;
  if (!cache) {
    local.silu_input = x.unaryExpr([](double v) { return silu(v); });
    local.basis = basis_matrix(x, params.knots);
    cache = &local;
  }

  const Eigen::Index K = params.num_basis();
  const Eigen::Index d = params.in_dim();
  KanGradients g;
  g.base_weights.noalias() = upstream.transpose() * cache->silu_input;
  Matrix g_eff(params.out_dim(), d * K);
  g_eff.noalias() = upstream.transpose() * cache->basis;
  g.spline_coeffs = g_eff;
  g.spline_weights.resize(params.out_dim(), d);
  for (Eigen::Index q = 0; q < params.out_dim(); ++q) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto eff = g_eff.block(q, j * K, 1, K);
      g.spline_weights(q, j) = eff.cwiseProduct(params.spline_coeffs.block(q, j * K, 1, K)).sum();
      g.spline_coeffs.block(q, j * K, 1, K) *= params.spline_weights(q, j);
    }
  }

  if (want_input_grad) {
    g.input.noalias() = upstream * params.base_weights;
    g.input.array() *= x.unaryExpr([](double v) { return silu_grad(v); }).array();
    Matrix through_spline(x.rows(), d * K);
    through_spline.noalias() = upstream * effective_spline_weights(params);
    std::vector<double> dbasis(static_cast<std::size_t>(K));
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      for (Eigen::Index j = 0; j < d; ++j) {
        spline::basis_row_derivative_into(x(b, j), params.knots, dbasis);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < K; ++i) {
          acc += dbasis[static_cast<std::size_t>(i)] * through_spline(b, j * K + i);
        }
        g.input(b, j) += acc;
      }
    }
  }
  return g;
}

// ----------------------------------------------------------------------------
// Batch norm

BatchNormState BatchNormState::identity(Eigen::Index features) {
  BatchNormState s;
  s.gamma = Vector::Ones(features);
  s.beta = Vector::Zero(features);
  s.running_mean = Vector::Zero(features);
  s.running_var = Vector::Ones(features);
  return s;
}

void BatchNormState::validate() const {
  const Eigen::Index n = gamma.size();
  require(beta.size() == n && running_mean.size() == n && running_var.size() == n,
          "batch norm state vectors differ in length");
  if (!(epsilon > 0.0) || !(momentum > 0.0 && momentum < 1.0) ||
      (running_var.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidConfig,
                "batch norm requires epsilon > 0, momentum in (0,1), running_var >= 0");
  }
}

Matrix batchnorm_apply(const Matrix& x, const BatchNormState& state, Mode mode,
                       BatchNormCache* cache) {
  state.validate();
  require(x.cols() == state.features(), "batch norm input width differs from state");
  Vector mean;
  Vector var;
  if (mode == Mode::Train) {
    if (x.rows() < 2) {
      throw Error(ErrorCode::DegenerateBatch, "train-mode batch norm needs at least 2 rows");
    }
    mean = x.colwise().mean().transpose();
    var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  const Vector inv_std = (var.array() + state.epsilon).rsqrt();
  Matrix normalized =
      ((x.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array()).matrix();
  Matrix out = (normalized.array().rowwise() * state.gamma.transpose().array()).rowwise() +
               state.beta.transpose().array();
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
  }
  return out;
}

void batchnorm_commit(BatchNormState& state, const BatchNormCache& cache) {
  if (cache.mode != Mode::Train) return;
  const auto n = static_cast<double>(cache.normalized.rows());
  const double m = state.momentum;
  state.running_mean = (1.0 - m) * state.running_mean + m * cache.batch_mean;
  state.running_var = (1.0 - m) * state.running_var + m * cache.batch_var * (n / (n - 1.0));
}

Matrix batchnorm_forward(const Matrix& x, BatchNormState& state, Mode mode) {
  BatchNormCache cache;
  Matrix out = batchnorm_apply(x, state, mode, &cache);
  batchnorm_commit(state, cache);
  return out;
}

BatchNormGradients batchnorm_backward(const Matrix& upstream, const BatchNormState& state,
                                      const BatchNormCache& cache) {
  require(upstream.rows() == cache.normalized.rows() &&
              upstream.cols() == cache.normalized.cols(),
          "batch norm upstream gradient shape differs from forward output");
  BatchNormGradients g;
  g.gamma = (upstream.array() * cache.normalized.array()).colwise().sum().transpose();
  g.beta = column_sums(upstream);
  const Matrix d_norm = upstream.array().rowwise() * state.gamma.transpose().array();
  if (cache.mode == Mode::Infer) {
    g.input = d_norm.array().rowwise() * cache.inv_std.transpose().array();
    return g;
  }
  const auto n = static_cast<double>(upstream.rows());
  const Eigen::RowVectorXd sum_d = d_norm.colwise().sum();
  const Eigen::RowVectorXd sum_dx =
      (d_norm.array() * cache.normalized.array()).colwise().sum().matrix();
  Eigen::ArrayXXd centered = (n * d_norm.array()).rowwise() - sum_d.array();
  centered -= cache.normalized.array().rowwise() * sum_dx.array();
  g.input = (centered.rowwise() * (cache.inv_std.transpose().array() / n)).matrix();
  return g;
}

// ----------------------------------------------------------------------------
// Dropout

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  double* data = mask.data();
  const Eigen::Index n = rows * cols;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double u = unit_interval(mix64(seed, static_cast<std::uint64_t>(j)));
    data[j] = u < rate ? 0.0 : keep_scale;
  }
  return mask;
}

Matrix dropout(const Matrix& x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
  if (mode == Mode::Infer || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), rate, seed));
}

// ----------------------------------------------------------------------------
// Linear

Matrix linear_forward(const Matrix& x, const LinearParams& params) {
  require(x.cols() == params.in_dim(), "linear input width differs from in_dim");
  require(params.bias.size() == params.out_dim(), "linear bias length differs from out_dim");
  Matrix out(x.rows(), params.out_dim());
  out.noalias() = x * params.weight;
  out.rowwise() += params.bias.transpose();
  return out;
}

LinearGradients linear_backward(const Matrix& x, const LinearParams& params,
                                const Matrix& upstream) {
  require(upstream.rows() == x.rows() && upstream.cols() == params.out_dim(),
          "linear upstream gradient shape differs from forward output");
  LinearGradients g;
  g.weight.noalias() = x.transpose() * upstream;
  g.bias = column_sums(upstream);
  g.input.noalias() = upstream * params.weight.transpose();
  return g;
}

// ----------------------------------------------------------------------------
// gMLP block

void GmlpBlockParams::validate() const {
  require(gate.rows() > 0 && gate.cols() > 0, "gMLP dimensions must be positive");
  require(value.rows() == gate.rows() && value.cols() == gate.cols(),
          "gMLP gate and value projections differ in shape");
  require(gate_bias.size() == gate.cols() && value_bias.size() == gate.cols(),
          "gMLP bias length differs from hidden width");
  require(output.weight.rows() == gate.cols() && output.bias.size() == output.weight.cols(),
          "gMLP output projection shape mismatch");
  require(norm.features() == gate.rows(), "gMLP batch norm width differs from input width");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
}

namespace {

struct SwigluParts {
  Matrix gate_pre;
  Matrix value_pre;
  Matrix gated;
};

SwigluParts swiglu_parts(const Matrix& x, const GmlpBlockParams& p) {
  SwigluParts s;
  s.gate_pre.noalias() = x * p.gate;
  s.gate_pre.rowwise() += p.gate_bias.transpose();
  s.value_pre.noalias() = x * p.value;
  s.value_pre.rowwise() += p.value_bias.transpose();
  s.gated = s.gate_pre.unaryExpr([](double v) { return silu(v); }).cwiseProduct(s.value_pre);
  return s;
}

}  // namespace

Matrix swiglu_forward(const Matrix& x, const GmlpBlockParams& params) {
  params.validate();
  require(x.cols() == params.in_dim(), "SwiGLU input width differs from in_dim");
  return linear_forward(swiglu_parts(x, params).gated, params.output);
}

Matrix gmlp_block_forward(const Matrix& x, const GmlpBlockParams& params, Mode mode,
                          std::uint64_t dropout_seed, GmlpCache* cache) {
  params.validate();
  require(x.cols() == params.in_dim(), "gMLP input width differs from in_dim");
  BatchNormCache norm_cache;
  Matrix normalized = batchnorm_apply(x, params.norm, mode, &norm_cache);
  SwigluParts parts = swiglu_parts(normalized, params);
  Matrix out = dropout(linear_forward(parts.gated, params.output), params.dropout_rate, mode,
                       dropout_seed);
  if (cache) {
    cache->norm = std::move(norm_cache);
    cache->normalized = std::move(normalized);
    cache->gate_pre = std::move(parts.gate_pre);
    cache->value_pre = std::move(parts.value_pre);
    cache->gated = std::move(parts.gated);
    cache->mode = mode;
    cache->dropout_seed = dropout_seed;
  }
  return out;
}

GmlpGradients gmlp_block_backward(const Matrix& upstream, const GmlpBlockParams& params,
                                  const GmlpCache& cache) {
  require(upstream.rows() == cache.gated.rows() && upstream.cols() == params.out_dim(),
          "gMLP upstream gradient shape differs from forward output");
  GmlpGradients g;
  Matrix d_proj = upstream;
  if (cache.mode == Mode::Train && params.dropout_rate > 0.0) {
    d_proj.array() *= dropout_mask(upstream.rows(), upstream.cols(), params.dropout_rate,
                                   cache.dropout_seed)
                          .array();
  }
  LinearGradients out = linear_backward(cache.gated, params.output, d_proj);
  g.out_weight = std::move(out.weight);
  g.out_bias = std::move(out.bias);

  const Matrix& d_gated = out.input;
  Matrix d_gate = d_gated.cwiseProduct(cache.value_pre)
                      .cwiseProduct(cache.gate_pre.unaryExpr([](double v) { return silu_grad(v); }));
  Matrix d_value = d_gated.cwiseProduct(cache.gate_pre.unaryExpr([](double v) { return silu(v); }));

  g.gate.noalias() = cache.normalized.transpose() * d_gate;
  g.gate_bias = column_sums(d_gate);
  g.value.noalias() = cache.normalized.transpose() * d_value;
  g.value_bias = column_sums(d_value);

  Matrix d_norm(d_gate.rows(), params.in_dim());
  d_norm.noalias() = d_gate * params.gate.transpose();
  d_norm.noalias() += d_value * params.value.transpose();
  BatchNormGradients bn = batchnorm_backward(d_norm, params.norm, cache.norm);
  g.gamma = std::move(bn.gamma);
  g.beta = std::move(bn.beta);
  g.input = std::move(bn.input);
  return g;
}

Matrix sigmoid_head_forward(const Matrix& logits) {
  return logits.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace kmlp::nn
