#pragma once

// Differentiable dense-layer primitives with hand-written backward passes.
//
// Forward functions return the quantities their backward counterpart needs;
// nothing is cached behind the caller's back, so every primitive is a pure
// function of its arguments (batch-norm running statistics excepted, which
// the caller passes in explicitly).

#include <algorithm>
#include <cmath>

#include "atta/numerics/matrix.hpp"

namespace atta {

/// How batch normalization obtains its statistics.
enum class Mode {
  kTrain,       ///< batch statistics, running statistics updated
  kEval,        ///< running statistics, nothing updated
  kBatchStats,  ///< batch statistics, running statistics left untouched
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kLogClamp = 1e-12;

// ---------------------------------------------------------------------------
// Linear

/// out = x·W + b, with the 1×dout bias broadcast over rows.
inline Matrix linear_forward(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  if (x.cols() != weight.rows()) {
    throw DimensionError("linear_forward: input " + shape_str(x) + " vs weight " +
                         shape_str(weight));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw DimensionError("linear_forward: bias " + shape_str(bias) + " vs weight " +
                         shape_str(weight));
  }
  Matrix out(x.rows(), weight.cols());
  out.noalias() = x * weight;
  out.rowwise() += bias.row(0);
  return out;
}

struct LinearGrads {
  Matrix input;  ///< empty unless requested
  Matrix weight;
  Matrix bias;
};

inline LinearGrads linear_backward(const Matrix& upstream, const Matrix& input,
                                   const Matrix& weight, bool want_input_grad = true) {
  if (upstream.rows() != input.rows() || upstream.cols() != weight.cols() ||
      input.cols() != weight.rows()) {
    throw DimensionError("linear_backward: upstream " + shape_str(upstream) + ", input " +
                         shape_str(input) + ", weight " + shape_str(weight));
  }
  LinearGrads g;
  g.weight.noalias() = input.transpose() * upstream;
  g.bias = upstream.colwise().sum();
  if (want_input_grad) g.input.noalias() = upstream * weight.transpose();
  return g;
}

/// linear_backward that writes the weight and bias gradients into `gw`, `gb`:
/// assigned when empty, accumulated otherwise. Returns the input gradient
/// (empty unless requested).
inline Matrix linear_backward_into(const Matrix& upstream, const Matrix& input, const Matrix& weight,
                                   Matrix& gw, Matrix& gb, bool want_input_grad = true) {
  if (upstream.rows() != input.rows() || upstream.cols() != weight.cols() ||
      input.cols() != weight.rows()) {
    throw DimensionError("linear_backward: upstream " + shape_str(upstream) + ", input " +
                         shape_str(input) + ", weight " + shape_str(weight));
  }
  if (gw.size() == 0) {
    gw.noalias() = input.transpose() * upstream;
    gb = upstream.colwise().sum();
  } else {
    if (gw.rows() != weight.rows() || gw.cols() != weight.cols() || gb.cols() != weight.cols()) {
      throw DimensionError("linear_backward: gradient buffer " + shape_str(gw) + " vs weight " +
                           shape_str(weight));
    }
    gw.noalias() += input.transpose() * upstream;
    gb += upstream.colwise().sum();
  }
  Matrix in;
  if (want_input_grad) in.noalias() = upstream * weight.transpose();
  return in;
}

// ---------------------------------------------------------------------------
// Batch normalization (per column)

struct BatchNormStats {
  Matrix running_mean;  // 1×d
  Matrix running_var;   // 1×d

  static BatchNormStats fresh(Eigen::Index dim) {
    return {Matrix::Zero(1, dim), Matrix::Ones(1, dim)};
  }
};

struct BatchNormCache {
  Matrix normalized;  // x̂
  Matrix inv_std;     // 1×d, 1/sqrt(var + eps) of whichever statistics were used
  bool batch_statistics = false;
};

inline Matrix batchnorm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                                BatchNormStats& stats, Mode mode, BatchNormCache& cache) {
  const Eigen::Index d = x.cols();
  if (gamma.cols() != d || beta.cols() != d || stats.running_mean.cols() != d ||
      stats.running_var.cols() != d) {
    throw DimensionError("batchnorm_forward: feature width " + std::to_string(d) +
                         " does not match parameters " + shape_str(gamma));
  }
  const bool use_batch = mode != Mode::kEval;
  if (use_batch && x.rows() < 2) {
    throw BatchSizeError("batchnorm_forward: batch statistics need at least 2 rows, got " +
                         std::to_string(x.rows()));
  }

  RowVector mean;
  RowVector var;
  if (use_batch) {
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean();
    if (mode == Mode::kTrain) {
      const double n = static_cast<double>(x.rows());
      RowVector unbiased = var * (n / (n - 1.0));
      stats.running_mean = (1.0 - kBatchNormMomentum) * stats.running_mean +
                           kBatchNormMomentum * Matrix(mean);
      stats.running_var = (1.0 - kBatchNormMomentum) * stats.running_var +
                          kBatchNormMomentum * Matrix(unbiased);
    }
  } else {
    mean = stats.running_mean.row(0);
    var = stats.running_var.row(0);
  }

  cache.batch_statistics = use_batch;
  cache.inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
  cache.normalized = (x.rowwise() - mean).array().rowwise() * cache.inv_std.row(0).array();
  Matrix out = cache.normalized.array().rowwise() * gamma.row(0).array();
  out.rowwise() += beta.row(0);
  return out;
}

/// Eval-mode forward without a cache.
inline Matrix batchnorm_infer(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                              const BatchNormStats& stats) {
  BatchNormStats copy = stats;
  BatchNormCache cache;
  return batchnorm_forward(x, gamma, beta, copy, Mode::kEval, cache);
}

struct BatchNormGrads {
  Matrix input;
  Matrix gamma;
  Matrix beta;
};

inline BatchNormGrads batchnorm_backward(const Matrix& upstream, const Matrix& gamma,
                                         const BatchNormCache& cache) {
  require_same_shape(upstream, cache.normalized, "batchnorm_backward");
  BatchNormGrads g;
  g.beta = upstream.colwise().sum();
  g.gamma = upstream.cwiseProduct(cache.normalized).colwise().sum();
  Matrix dxhat = upstream.array().rowwise() * gamma.row(0).array();
  if (!cache.batch_statistics) {
    // Running statistics are constants: the transform is affine.
    g.input = dxhat.array().rowwise() * cache.inv_std.row(0).array();
    return g;
  }
  const double n = static_cast<double>(upstream.rows());
  RowVector sum_dxhat = dxhat.colwise().sum();
  RowVector sum_dxhat_xhat = dxhat.cwiseProduct(cache.normalized).colwise().sum();
  Matrix centered = (n * dxhat).rowwise() - sum_dxhat;
  centered.array() -= cache.normalized.array().rowwise() * sum_dxhat_xhat.array();
  g.input = (centered.array().rowwise() * cache.inv_std.row(0).array()) / n;
  return g;
}

// ---------------------------------------------------------------------------
// ReLU

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

/// Subgradient at exactly 0 is 0.
inline Matrix relu_backward(const Matrix& upstream, const Matrix& input) {
  require_same_shape(upstream, input, "relu_backward");
  return (input.array() > 0.0).select(upstream, 0.0);
}

// ---------------------------------------------------------------------------
// Softmax and soft-target cross-entropy

inline Matrix softmax(const Matrix& logits) {
  if (logits.cols() < 2) throw DimensionError("softmax: need at least 2 classes");
  Matrix out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

inline void require_distribution_rows(const Matrix& q, double tol, const char* what) {
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const double s = q.row(r).sum();
    if (!(std::abs(s - 1.0) <= tol) || (q.row(r).array() < 0.0).any()) {
      throw DistributionError(std::string(what) + ": row " + std::to_string(r) +
                              " is not a distribution (sum " + std::to_string(s) + ")");
    }
  }
}

/// −(1/B) Σ_b Σ_k q_bk log max(p_bk, 1e-12). Targets are constants.
inline double cross_entropy_soft(const Matrix& targets, const Matrix& probs) {
  require_same_shape(targets, probs, "cross_entropy_soft");
  if (targets.rows() == 0) throw DimensionError("cross_entropy_soft: empty batch");
  require_distribution_rows(targets, 1e-6, "cross_entropy_soft");
  const Matrix logp = probs.cwiseMax(kLogClamp).array().log();
  return -(targets.cwiseProduct(logp)).sum() / static_cast<double>(targets.rows());
}

/// d/dlogits of cross_entropy_soft(targets, softmax(logits)) = (p − q)/B.
inline Matrix softmax_cross_entropy_grad(const Matrix& targets, const Matrix& probs) {
  require_same_shape(targets, probs, "softmax_cross_entropy_grad");
  return (probs - targets) / static_cast<double>(targets.rows());
}

inline Matrix one_hot(const std::vector<int>& labels, Eigen::Index classes) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DimensionError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient reversal

inline const Matrix& grad_reverse_forward(const Matrix& x) { return x; }

inline Matrix grad_reverse_backward(const Matrix& upstream, double lambda) {
  return -lambda * upstream;
}

}  // namespace atta
