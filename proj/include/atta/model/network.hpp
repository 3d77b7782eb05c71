#pragma once

// Feature extractor, fault classifier and condition discriminator.

#include <atomic>
#include <optional>
#include <random>
#include <vector>

#include "atta/model/mlp.hpp"

namespace atta {

struct NetworkSpec {
  std::size_t input_dim = 6144;
  std::vector<std::size_t> extractor_widths{6144, 1024, 512, 256, 64};
  std::size_t classifier_hidden = 32;
  std::vector<std::size_t> discriminator_hidden{128, 128, 64};
  /// Zero-based index of the discriminator layer followed by batch norm.
  std::size_t discriminator_bn_layer = 2;
  std::size_t num_classes = 2;     // K
  std::size_t num_conditions = 2;  // M

  std::size_t latent_dim() const { return extractor_widths.back(); }

  std::vector<std::size_t> classifier_widths() const {
    return {latent_dim(), classifier_hidden, num_classes};
  }

  std::vector<std::size_t> discriminator_widths() const {
    std::vector<std::size_t> w{latent_dim()};
    w.insert(w.end(), discriminator_hidden.begin(), discriminator_hidden.end());
    w.push_back(num_conditions);
    return w;
  }

  void validate() const {
    if (num_classes < 2) throw ConfigError("NetworkSpec: need at least 2 fault classes");
    if (num_conditions < 2) throw ConfigError("NetworkSpec: need at least 2 source conditions");
    if (extractor_widths.size() < 2 || extractor_widths.front() != input_dim) {
      throw ConfigError("NetworkSpec: extractor widths must start at the input dimension");
    }
    if (discriminator_bn_layer > discriminator_hidden.size()) {
      throw ConfigError("NetworkSpec: discriminator BN layer out of range");
    }
  }

  bool operator==(const NetworkSpec&) const = default;
};

/// θ_f, θ_y and (during offline training only) θ_d.
struct NetworkParams {
  NetworkSpec spec;
  Mlp extractor;
  Mlp classifier;
  std::optional<Mlp> discriminator;

  /// The deployable pair (θ_f, θ_y).
  NetworkParams deployment() const {
    NetworkParams out{spec, extractor, classifier, std::nullopt};
    return out;
  }
};

inline NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  NetworkParams p;
  p.spec = spec;

  // Every extractor layer, including the 64-wide output, is Linear→BN→ReLU.
  std::vector<LayerStyle> ext(spec.extractor_widths.size() - 1, LayerStyle{true, true});
  p.extractor = Mlp::create(spec.extractor_widths, ext, rng);

  p.classifier = Mlp::create(spec.classifier_widths(),
                             {LayerStyle{false, true}, LayerStyle{false, false}}, rng);

  const auto dw = spec.discriminator_widths();
  std::vector<LayerStyle> disc(dw.size() - 1, LayerStyle{false, true});
  disc.back().relu = false;
  disc[spec.discriminator_bn_layer].batch_norm = true;
  p.discriminator = Mlp::create(dw, disc, rng);
  return p;
}

inline Matrix extract_features(const Matrix& x, const NetworkParams& params) {
  require_cols(x, static_cast<Eigen::Index>(params.spec.input_dim), "extract_features");
  return params.extractor.infer(x);
}

inline Matrix extract_features(const Matrix& x, NetworkParams& params, Mode mode, MlpTape& tape) {
  require_cols(x, static_cast<Eigen::Index>(params.spec.input_dim), "extract_features");
  return params.extractor.forward(x, mode, tape);
}

/// Raw logits; softmax is the caller's business.
inline Matrix classify(const Matrix& z, const NetworkParams& params) {
  require_cols(z, static_cast<Eigen::Index>(params.spec.latent_dim()), "classify");
  return params.classifier.infer(z);
}

/// Discriminator logits. The forward pass sees the latent unchanged; λ only
/// matters on the way back, see discriminator_input_grad.
inline Matrix discriminate(const Matrix& z, NetworkParams& params, Mode mode, MlpTape& tape) {
  if (!params.discriminator) throw ConfigError("discriminate: network has no discriminator");
  require_cols(z, static_cast<Eigen::Index>(params.spec.latent_dim()), "discriminate");
  return params.discriminator->forward(grad_reverse_forward(z), mode, tape);
}

/// Backward through the discriminator and the reversal layer in front of it:
/// accumulates θ_d gradients and returns −λ·∂CE_d/∂z.
inline Matrix discriminator_input_grad(const Matrix& upstream, const NetworkParams& params,
                                       const MlpTape& tape, double lambda, Gradients& grads) {
  if (!params.discriminator) throw ConfigError("discriminate: network has no discriminator");
  if (lambda < 0.0) throw ConfigError("discriminate: lambda must be non-negative");
  Matrix dz = params.discriminator->backward(upstream, tape, grads, true);
  return grad_reverse_backward(dz, lambda);
}

// ---------------------------------------------------------------------------
// Latent normalization

inline constexpr double kDegenerateNorm = 1e-12;

/// Count of near-zero latents seen by normalize_latent / normalize_rows.
inline std::atomic<std::uint64_t>& degenerate_latent_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

struct NormalizedLatent {
  Matrix unit;  // 1×d
  bool degenerate = false;
};

/// z / max(‖z‖₂, 1e-12). A near-zero z comes back unchanged and is flagged.
inline NormalizedLatent normalize_latent(const Matrix& z) {
  if (z.rows() != 1) throw DimensionError("normalize_latent: expected a single row");
  const double norm = z.norm();
  if (norm < kDegenerateNorm) {
    degenerate_latent_counter().fetch_add(1, std::memory_order_relaxed);
    return {z, true};
  }
  return {z / norm, false};
}

inline Matrix normalize_rows(const Matrix& z) {
  Matrix out = z;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double norm = z.row(r).norm();
    if (norm < kDegenerateNorm) {
      degenerate_latent_counter().fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    out.row(r) /= norm;
  }
  return out;
}

}  // namespace atta
