#pragma once

// Domain-adversarial offline training.
//
//   L = CE(G_y(G_f(x)), y) − λ·CE(G_d(G_f(x)), c)
//
// The classifier and extractor descend the class term; the discriminator
// descends the condition term on its own; the extractor receives the
// condition gradient reversed and scaled by λ. All three groups take one
// Adam step per mini-batch.

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "atta/datagen/window.hpp"
#include "atta/model/network.hpp"
#include "atta/numerics/optim.hpp"
#include "atta/offline/config.hpp"

namespace atta {

struct OfflineGradients {
  double class_ce = 0.0;
  double domain_ce = 0.0;
  double loss = 0.0;  ///< class_ce − λ·domain_ce
  Gradients extractor;
  Gradients classifier;
  Gradients discriminator;  ///< of +domain_ce
  Matrix class_probs;
  Matrix domain_probs;
};

/// One forward/backward of the adversarial objective on a batch. `mode`
/// selects batch-norm behaviour (kTrain also advances running statistics).
inline OfflineGradients offline_gradients(NetworkParams& params, const Matrix& x,
                                          const std::vector<int>& labels,
                                          const std::vector<int>& conditions, double lambda,
                                          Mode mode = Mode::kTrain) {
  if (!params.discriminator) throw ConfigError("offline_gradients: network has no discriminator");
  if (labels.size() != static_cast<std::size_t>(x.rows()) || conditions.size() != labels.size()) {
    throw DimensionError("offline_gradients: labels do not match batch size");
  }
  OfflineGradients out;
  MlpTape ext_tape;
  MlpTape cls_tape;
  MlpTape dom_tape;
  const Matrix z = extract_features(x, params, mode, ext_tape);

  const Matrix class_logits = params.classifier.forward(z, mode, cls_tape);
  out.class_probs = softmax(class_logits);
  const Matrix y = one_hot(labels, static_cast<Eigen::Index>(params.spec.num_classes));
  out.class_ce = cross_entropy_soft(y, out.class_probs);

  const Matrix domain_logits = discriminate(z, params, mode, dom_tape);
  out.domain_probs = softmax(domain_logits);
  const Matrix c = one_hot(conditions, static_cast<Eigen::Index>(params.spec.num_conditions));
  out.domain_ce = cross_entropy_soft(c, out.domain_probs);
  out.loss = out.class_ce - lambda * out.domain_ce;

  out.classifier = params.classifier.empty_grads();
  out.discriminator = params.discriminator->empty_grads();
  out.extractor = params.extractor.empty_grads();

  Matrix dz = params.classifier.backward(softmax_cross_entropy_grad(y, out.class_probs), cls_tape,
                                         out.classifier, true);
  dz += discriminator_input_grad(softmax_cross_entropy_grad(c, out.domain_probs), params,
                                 dom_tape, lambda, out.discriminator);
  params.extractor.backward(dz, ext_tape, out.extractor, false);
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double class_ce = 0.0;
  double domain_ce = 0.0;
  double class_accuracy = 0.0;
  double domain_accuracy = 0.0;
};

struct OfflineResult {
  NetworkParams deployment;  ///< (θ_f, θ_y) only
  Mlp discriminator;         ///< θ_d, kept for diagnostics
  std::vector<EpochLog> history;

  /// Deployment params with the discriminator re-attached.
  NetworkParams full() const {
    NetworkParams p = deployment;
    p.discriminator = discriminator;
    return p;
  }
};

/// Mini-batches for one epoch. Each condition's rows are shuffled, then the
/// conditions are interleaved in proportion to their sizes so every batch
/// carries all of them. A trailing batch of one row is folded into its
/// predecessor (batch norm needs two).
inline std::vector<std::vector<std::size_t>> stratified_batches(const std::vector<int>& conditions,
                                                                std::size_t batch_size,
                                                                std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> by_cond;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto c = static_cast<std::size_t>(conditions[i]);
    if (c >= by_cond.size()) by_cond.resize(c + 1);
    by_cond[c].push_back(i);
  }
  struct Keyed {
    double key;
    std::size_t cond;
    std::size_t row;
  };
  std::vector<Keyed> order;
  order.reserve(conditions.size());
  for (std::size_t c = 0; c < by_cond.size(); ++c) {
    auto& rows = by_cond[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      order.push_back({(static_cast<double>(j) + 0.5) / static_cast<double>(rows.size()), c, rows[j]});
    }
  }
  std::sort(order.begin(), order.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cond < b.cond;
  });

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    std::vector<std::size_t> b;
    for (std::size_t i = begin; i < end; ++i) b.push_back(order[i].row);
    batches.push_back(std::move(b));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

namespace detail {
inline void check_offline_set(const SampleSet& d0, const NetworkSpec& spec) {
  if (d0.empty()) throw DataError("train_offline: offline set is empty");
  if (d0.size() < 2) throw BatchSizeError("train_offline: need at least 2 samples");
  require_cols(d0.x, static_cast<Eigen::Index>(spec.input_dim), "train_offline");
  std::set<int> classes;
  std::set<int> conds;
  for (std::size_t i = 0; i < d0.size(); ++i) {
    if (d0.labels[i] < 0 || static_cast<std::size_t>(d0.labels[i]) >= spec.num_classes) {
      throw DataError("train_offline: label " + std::to_string(d0.labels[i]) + " out of range");
    }
    if (d0.conditions[i] < 0 || static_cast<std::size_t>(d0.conditions[i]) >= spec.num_conditions) {
      throw DataError("train_offline: condition " + std::to_string(d0.conditions[i]) +
                      " out of range");
    }
    classes.insert(d0.labels[i]);
    conds.insert(d0.conditions[i]);
  }
  if (conds.size() < 2) {
    throw ConfigError("train_offline: offline data covers a single condition; the adversarial "
                      "term needs at least two");
  }
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    if (!classes.count(static_cast<int>(k))) {
      throw DataError("train_offline: class " + std::to_string(k) + " is absent from the offline set");
    }
  }
}
}  // namespace detail

using EpochCallback = std::function<void(const EpochLog&)>;

inline OfflineResult train_offline(const SampleSet& d0, const NetworkSpec& spec,
                                   const OfflineConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  spec.validate();
  detail::check_offline_set(d0, spec);

  NetworkParams params = init_network(spec, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedba7c4e5ULL);
  AdamState adam_f;
  AdamState adam_y;
  AdamState adam_d;

  const std::size_t batches_per_epoch =
      stratified_batches(d0.conditions, cfg.batch_size, rng).size();
  rng.seed(cfg.seed ^ 0x5eedba7c4e5ULL);
  const double total_steps = static_cast<double>(cfg.epochs * batches_per_epoch);

  OfflineResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch + 1;
    double seen = 0.0;
    for (const auto& rows : stratified_batches(d0.conditions, cfg.batch_size, rng)) {
      const double lambda = cfg.lambda.at(static_cast<double>(step) / total_steps);
      std::vector<int> y;
      std::vector<int> c;
      for (std::size_t r : rows) {
        y.push_back(d0.labels[r]);
        c.push_back(d0.conditions[r]);
      }
      OfflineGradients g = offline_gradients(params, gather_rows(d0.x, rows), y, c, lambda);

      adam_update(params.extractor.parameters(), g.extractor, adam_f, cfg.lr);
      adam_update(params.classifier.parameters(), g.classifier, adam_y, cfg.lr);
      adam_update(params.discriminator->parameters(), g.discriminator, adam_d, cfg.lr);
      ++step;

      const double b = static_cast<double>(rows.size());
      const auto yhat = argmax_rows(g.class_probs);
      const auto chat = argmax_rows(g.domain_probs);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        log.class_accuracy += yhat[i] == y[i];
        log.domain_accuracy += chat[i] == c[i];
      }
      log.class_ce += g.class_ce * b;
      log.domain_ce += g.domain_ce * b;
      log.lambda = lambda;
      seen += b;
    }
    log.class_ce /= seen;
    log.domain_ce /= seen;
    log.class_accuracy /= seen;
    log.domain_accuracy /= seen;
    if (!params.extractor.layers().empty() && !all_finite(params.extractor.layers()[0].weight)) {
      throw StateCorruptionError("train_offline: non-finite weights after epoch " +
                                 std::to_string(epoch + 1));
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  result.discriminator = *params.discriminator;
  result.deployment = params.deployment();
  return result;
}

/// Eval-mode accuracy of the class head on a labelled set.
inline double class_accuracy(const NetworkParams& params, const SampleSet& set) {
  if (set.empty()) throw DataError("class_accuracy: empty set");
  const auto pred = argmax_rows(classify(extract_features(set.x, params), params));
  double hits = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) hits += pred[i] == set.labels[i];
  return hits / static_cast<double>(set.size());
}

/// Eval-mode accuracy of the discriminator on the condition ids of a set.
inline double domain_accuracy(const NetworkParams& params, const SampleSet& set) {
  if (!params.discriminator) throw ConfigError("domain_accuracy: network has no discriminator");
  if (set.empty()) throw DataError("domain_accuracy: empty set");
  const auto pred = argmax_rows(params.discriminator->infer(extract_features(set.x, params)));
  double hits = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) hits += pred[i] == set.conditions[i];
  return hits / static_cast<double>(set.size());
}

}  // namespace atta
