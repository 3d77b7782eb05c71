#pragma once

// Classifier and prototype-geometry distributions, and the online loss
// CE(q_geo, p_cls) with q_geo held constant.

#include <atomic>
#include <functional>

#include "atta/model/network.hpp"
#include "atta/offline/prototypes.hpp"

namespace atta {

/// Number of times prototype state was read. Lets tests prove an adapter
/// never touches it.
inline std::atomic<std::uint64_t>& prototype_access_count() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}

inline void require_prototypes(const PrototypeSet& protos, std::size_t latent_dim) {
  prototype_access_count().fetch_add(1, std::memory_order_relaxed);
  if (protos.mu_bar.cols() != static_cast<Eigen::Index>(latent_dim)) {
    throw DimensionError("prototypes have dimension " + std::to_string(protos.mu_bar.cols()) +
                         ", latent space has " + std::to_string(latent_dim));
  }
  for (Eigen::Index k = 0; k < protos.mu_bar.rows(); ++k) {
    const double n = protos.mu_bar.row(k).norm();
    if (!(std::abs(n - 1.0) <= 1e-9)) {
      throw DegeneratePrototypeError("prototype of class " + std::to_string(k) +
                                         " is not a unit vector (norm " + std::to_string(n) + ")",
                                     static_cast<int>(k));
    }
  }
}

/// p_cls = softmax(G_y(G_f(x))), eval mode.
inline Matrix classifier_distribution(const Matrix& x, const NetworkParams& params) {
  return softmax(classify(extract_features(x, params), params));
}

/// s_k = ⟨z̄, μ̄_k⟩ for every row of z.
inline Matrix prototype_similarity(const Matrix& z, const PrototypeSet& protos) {
  require_prototypes(protos, static_cast<std::size_t>(z.cols()));
  return normalize_rows(z) * protos.mu_bar.transpose();
}

inline Matrix geometric_from_latent(const Matrix& z, const PrototypeSet& protos, double tau) {
  if (!(tau > 0.0)) throw ConfigError("geometric distribution: tau must be > 0");
  return softmax(prototype_similarity(z, protos) / tau);
}

/// q_geo(k|x) = softmax_k(⟨z̄, μ̄_k⟩ / τ), eval mode.
inline Matrix geometric_distribution(const Matrix& x, const NetworkParams& params,
                                     const PrototypeSet& protos, double tau) {
  return geometric_from_latent(extract_features(x, params), protos, tau);
}

/// ŷ_geo: argmax with ties to the smallest class id.
inline int geo_pseudo_label(const Matrix& q_row) { return row_argmax(q_row, 0); }
/// ŷ_cls: argmax with ties to the smallest class id.
inline int cls_prediction(const Matrix& p_row) { return row_argmax(p_row, 0); }

struct OnlineLoss {
  double loss = 0.0;
  Matrix p_cls;
  Matrix q_geo;
  Gradients extractor;
  Gradients classifier;
};

/// Builds the training target of a block from its latents and p_cls.
using TargetFn = std::function<Matrix(const Matrix& z, const Matrix& p_cls)>;

/// Evaluates a block under the given BN mode (kEval reads running statistics,
/// kBatchStats the block's own) and backpropagates CE(target(z, p_cls), p_cls).
/// The target is held fixed during backpropagation.
inline OnlineLoss online_loss_with(const Matrix& x, NetworkParams& params, Mode mode,
                                   const TargetFn& target) {
  if (x.rows() == 0) throw DimensionError("online_loss: empty block");
  if (mode == Mode::kTrain) throw ConfigError("online_loss: online forwards never update BN statistics");
  OnlineLoss out;
  MlpTape ext_tape;
  MlpTape cls_tape;
  const Matrix z = extract_features(x, params, mode, ext_tape);
  out.p_cls = softmax(params.classifier.forward(z, mode, cls_tape));
  out.q_geo = target(z, out.p_cls);
  out.loss = cross_entropy_soft(out.q_geo, out.p_cls);

  out.extractor = params.extractor.empty_grads();
  out.classifier = params.classifier.empty_grads();
  const Matrix dz = params.classifier.backward(softmax_cross_entropy_grad(out.q_geo, out.p_cls),
                                               cls_tape, out.classifier, true);
  params.extractor.backward(dz, ext_tape, out.extractor, false);
  return out;
}

/// online_loss_with whose target is q_geo from the same forward pass, or
/// `fixed_target` when supplied.
inline OnlineLoss online_loss(const Matrix& x, NetworkParams& params, const PrototypeSet* protos,
                              double tau, Mode mode, const Matrix* fixed_target = nullptr) {
  if (!fixed_target && !protos) throw ConfigError("online_loss: no prototypes and no target");
  return online_loss_with(x, params, mode, [&](const Matrix& z, const Matrix&) {
    return fixed_target ? *fixed_target : geometric_from_latent(z, *protos, tau);
  });
}

}  // namespace atta
