#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "atta/numerics/layers.hpp"

namespace atta {

/// One fully connected transform, optionally followed by batch norm and ReLU
/// (in that order).
struct DenseLayer {
  Matrix weight;  // din×dout
  Matrix bias;    // 1×dout
  bool batch_norm = false;
  Matrix gamma;  // 1×dout when batch_norm
  Matrix beta;
  BatchNormStats stats;
  bool relu = false;

  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
};

struct LayerStyle {
  bool batch_norm = false;
  bool relu = false;
};

/// Per-layer forward intermediates for one forward call.
struct LayerTape {
  Matrix input;
  BatchNormCache bn;
  Matrix pre_relu;
};

struct MlpTape {
  std::vector<LayerTape> layers;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  /// Kaiming-uniform (fan-in) weights, zero biases, γ=1, β=0, fresh BN stats.
  static Mlp create(const std::vector<std::size_t>& widths, const std::vector<LayerStyle>& styles,
                    std::mt19937_64& rng) {
    if (widths.size() < 2 || styles.size() != widths.size() - 1) {
      throw ConfigError("Mlp::create: need n+1 widths for n layer styles");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const auto din = static_cast<Eigen::Index>(widths[i]);
      const auto dout = static_cast<Eigen::Index>(widths[i + 1]);
      if (din <= 0 || dout <= 0) throw ConfigError("Mlp::create: widths must be positive");
      DenseLayer l;
      const double bound = std::sqrt(6.0 / static_cast<double>(din));
      std::uniform_real_distribution<double> dist(-bound, bound);
      l.weight.resize(din, dout);
      for (Eigen::Index r = 0; r < din; ++r)
        for (Eigen::Index c = 0; c < dout; ++c) l.weight(r, c) = dist(rng);
      l.bias = Matrix::Zero(1, dout);
      l.batch_norm = styles[i].batch_norm;
      if (l.batch_norm) {
        l.gamma = Matrix::Ones(1, dout);
        l.beta = Matrix::Zero(1, dout);
        l.stats = BatchNormStats::fresh(dout);
      }
      l.relu = styles[i].relu;
      layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }
  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }

  /// Forward pass recording a tape for backward. kTrain updates BN running
  /// statistics; the other modes leave the network untouched.
  Matrix forward(const Matrix& x, Mode mode, MlpTape& tape) {
    require_cols(x, input_dim(), "Mlp::forward");
    tape.layers.assign(layers_.size(), {});
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      DenseLayer& l = layers_[i];
      LayerTape& lt = tape.layers[i];
      Matrix a = linear_forward(h, l.weight, l.bias);
      lt.input = std::move(h);
      if (l.batch_norm) a = batchnorm_forward(a, l.gamma, l.beta, l.stats, mode, lt.bn);
      if (l.relu) {
        lt.pre_relu = a;
        a = relu(a);
      }
      h = std::move(a);
    }
    return h;
  }

  /// Eval-mode forward: running statistics, no tape. Pure in (x, params).
  Matrix infer(const Matrix& x) const {
    require_cols(x, input_dim(), "Mlp::infer");
    Matrix h = x;
    for (const DenseLayer& l : layers_) {
      h = linear_forward(h, l.weight, l.bias);
      if (l.batch_norm) h = batchnorm_infer(h, l.gamma, l.beta, l.stats);
      if (l.relu) h = relu(h);
    }
    return h;
  }

  /// Backpropagates `upstream` (gradient w.r.t. the output) through the tape
  /// of the matching forward call, accumulating into `grads` (ordered as
  /// parameters()). Empty entries are assigned rather than accumulated.
  /// Returns the input gradient when requested.
  static void accumulate(Matrix& into, const Matrix& g) {
    if (into.size() == 0) into = g;
    else into += g;
  }

  Matrix backward(const Matrix& upstream, const MlpTape& tape, Gradients& grads,
                  bool want_input_grad) const {
    if (tape.layers.size() != layers_.size()) {
      throw DimensionError("Mlp::backward: tape does not belong to this network");
    }
    if (grads.size() != parameter_count()) {
      throw DimensionError("Mlp::backward: gradient list has the wrong length");
    }
    Matrix g = upstream;
    std::size_t slot = parameter_count();
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const DenseLayer& l = layers_[i];
      const LayerTape& lt = tape.layers[i];
      if (l.relu) g = relu_backward(g, lt.pre_relu);
      if (l.batch_norm) {
        BatchNormGrads bg = batchnorm_backward(g, l.gamma, lt.bn);
        slot -= 2;
        accumulate(grads[slot], bg.gamma);
        accumulate(grads[slot + 1], bg.beta);
        g = std::move(bg.input);
      }
      const bool need_input = want_input_grad || i > 0;
      slot -= 2;
      g = linear_backward_into(g, lt.input, l.weight, grads[slot], grads[slot + 1], need_input);
    }
    return g;
  }

  /// Trainable tensors in a fixed order: per layer weight, bias[, γ, β].
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (DenseLayer& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
      if (l.batch_norm) {
        out.push_back(&l.gamma);
        out.push_back(&l.beta);
      }
    }
    return out;
  }

  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> out;
    for (const DenseLayer& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
      if (l.batch_norm) {
        out.push_back(&l.gamma);
        out.push_back(&l.beta);
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& l : layers_) n += l.batch_norm ? 4 : 2;
    return n;
  }

  /// Unallocated gradient slots for backward to fill.
  Gradients empty_grads() const { return Gradients(parameter_count()); }

  Gradients zero_grads() const { return zeros_like(parameters()); }

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace atta
