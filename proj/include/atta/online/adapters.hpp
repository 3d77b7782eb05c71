#pragma once

// Streaming adapters. Each block is scored before it is used for any update.
//
//   Proposed  CE(q_geo, p_cls), η_f on θ_f and η_y on θ_y, n steps per
//             block, prototypes re-projected every N_f blocks (or steps)
//   Naive     CE(one_hot(ŷ_cls), p_cls), η_y on both groups, n steps
//   Baseline  frozen inference

#include <chrono>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "atta/datagen/stream.hpp"
#include "atta/numerics/optim.hpp"
#include "atta/online/config.hpp"
#include "atta/online/objective.hpp"

namespace atta {

struct BlockResult {
  std::size_t block_index = 0;
  Matrix p_cls;
  Matrix q_geo;  ///< empty for adapters without prototypes
  std::vector<int> y_cls;
  std::vector<int> y_geo;
  std::vector<int> predictions;  ///< what the adapter reports for scoring
  std::vector<double> losses;    ///< one per inner step
  std::uint64_t prototype_version = 0;
  double wall_ms = 0.0;
};

/// Mutable state of the Proposed adapter. The anchor bank is shared and
/// read-only.
struct AdapterState {
  NetworkParams params;
  PrototypeSet prototypes;
  std::shared_ptr<const AnchorBank> bank;
  AdamState adam_f;
  AdamState adam_y;
  std::size_t blocks_seen = 0;  ///< t
  std::size_t steps_taken = 0;
  std::size_t last_block_index = 0;
};

inline AdapterState make_adapter_state(NetworkParams params, PrototypeSet prototypes,
                                       std::shared_ptr<const AnchorBank> bank) {
  if (params.discriminator) params = params.deployment();
  if (!bank) throw ConfigError("adapter: no anchor bank");
  return {std::move(params), std::move(prototypes), std::move(bank), {}, {}, 0, 0, 0};
}

/// μ^(t) from the current extractor; version + 1.
inline PrototypeSet reproject_prototypes(const AdapterState& state) {
  prototype_access_count().fetch_add(1, std::memory_order_relaxed);
  return compute_prototypes(*state.bank, state.params, state.prototypes.version + 1);
}

namespace detail {

inline Mode online_mode(BnPolicy policy, Eigen::Index rows) {
  // a single-row block has no batch statistics; it falls back to running ones
  return policy == BnPolicy::kBatch && rows >= 2 ? Mode::kBatchStats : Mode::kEval;
}

inline void apply_update(NetworkParams& params, const Gradients& gf, const Gradients& gy,
                         double eta_f, double eta_y, UpdateRule rule, AdamState& adam_f,
                         AdamState& adam_y) {
  if (rule == UpdateRule::kSgd) {
    sgd_update(params.extractor.parameters(), gf, eta_f);
    sgd_update(params.classifier.parameters(), gy, eta_y);
  } else {
    adam_update(params.extractor.parameters(), gf, adam_f, eta_f);
    adam_update(params.classifier.parameters(), gy, adam_y, eta_y);
  }
}

inline void check_finite(const NetworkParams& params, const BlockResult& r, const char* who) {
  auto scan = [&](const Mlp& mlp, const char* group) {
    const auto ps = mlp.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!all_finite(*ps[i])) {
        std::ostringstream msg;
        msg << who << ": non-finite parameters after block " << r.block_index << " (" << group
            << " tensor " << i << ", shape " << shape_str(*ps[i]) << "); inner losses:";
        for (double l : r.losses) msg << ' ' << l;
        throw StateCorruptionError(msg.str());
      }
    }
  };
  scan(params.extractor, "extractor");
  scan(params.classifier, "classifier");
}

inline void check_block(const StreamBlock& block, std::size_t& last, const char* who) {
  if (block.size() == 0) throw DimensionError(std::string(who) + ": empty block");
  if (block.index() <= last) {
    throw ConfigError(std::string(who) + ": block " + std::to_string(block.index()) +
                      " arrived after block " + std::to_string(last));
  }
  last = block.index();
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// One block of the Proposed adapter.
inline BlockResult adapt_block(AdapterState& state, const StreamBlock& block, const OnlineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  detail::check_block(block, state.last_block_index, "adapt_block");
  const Matrix& x = block.samples();
  const Mode mode = detail::online_mode(cfg.bn_policy, x.rows());

  BlockResult r;
  r.block_index = block.index();
  if (cfg.steps == 0) {
    NetworkParams probe = state.params;
    const OnlineLoss l = online_loss(x, probe, &state.prototypes, cfg.tau, mode);
    r.p_cls = l.p_cls;
    r.q_geo = l.q_geo;
  }

  ++state.blocks_seen;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const OnlineLoss l = online_loss(x, state.params, &state.prototypes, cfg.tau, mode);
    if (step == 0) {
      // the first step's forward runs on the pre-update state: it is the prediction
      r.p_cls = l.p_cls;
      r.q_geo = l.q_geo;
    }
    r.losses.push_back(l.loss);
    detail::apply_update(state.params, l.extractor, l.classifier, cfg.eta_f, cfg.eta_y,
                         cfg.update_rule, state.adam_f, state.adam_y);
    detail::check_finite(state.params, r, "adapt_block");
    ++state.steps_taken;
    if (cfg.refresh_unit == RefreshUnit::kSteps && state.steps_taken % cfg.refresh_period == 0) {
      state.prototypes = reproject_prototypes(state);
    }
  }
  r.y_cls = argmax_rows(r.p_cls);
  r.y_geo = argmax_rows(r.q_geo);
  r.predictions = r.y_cls;
  if (cfg.refresh_unit == RefreshUnit::kBlocks && state.blocks_seen % cfg.refresh_period == 0) {
    state.prototypes = reproject_prototypes(state);
  }
  r.prototype_version = state.prototypes.version;
  r.wall_ms = detail::elapsed_ms(start);
  return r;
}

struct NaiveState {
  NetworkParams params;
  AdamState adam_f;
  AdamState adam_y;
  std::size_t last_block_index = 0;
};

/// One block of hard self-labelling: both groups step at η_y.
inline BlockResult naive_adapt_block(NaiveState& state, const StreamBlock& block,
                                     const OnlineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  detail::check_block(block, state.last_block_index, "naive_adapt_block");
  const Matrix& x = block.samples();
  const Mode mode = detail::online_mode(cfg.bn_policy, x.rows());
  const auto classes = static_cast<Eigen::Index>(state.params.spec.num_classes);

  BlockResult r;
  r.block_index = block.index();
  if (cfg.steps == 0) {
    NetworkParams probe = state.params;
    MlpTape te;
    MlpTape tc;
    r.p_cls = softmax(probe.classifier.forward(probe.extractor.forward(x, mode, te), mode, tc));
  }
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // pseudo-labels from the current classifier, refreshed every step
    const OnlineLoss l = online_loss_with(x, state.params, mode, [&](const Matrix&, const Matrix& p) {
      return one_hot(argmax_rows(p), classes);
    });
    if (step == 0) r.p_cls = l.p_cls;
    r.losses.push_back(l.loss);
    detail::apply_update(state.params, l.extractor, l.classifier, cfg.eta_y, cfg.eta_y,
                         cfg.update_rule, state.adam_f, state.adam_y);
    detail::check_finite(state.params, r, "naive_adapt_block");
  }
  r.y_cls = argmax_rows(r.p_cls);
  r.predictions = r.y_cls;
  r.wall_ms = detail::elapsed_ms(start);
  return r;
}

/// Frozen inference with offline parameters and running statistics.
inline BlockResult baseline_predict(const NetworkParams& params, const StreamBlock& block) {
  const auto start = std::chrono::steady_clock::now();
  BlockResult r;
  r.block_index = block.index();
  r.p_cls = classifier_distribution(block.samples(), params);
  r.y_cls = argmax_rows(r.p_cls);
  r.predictions = r.y_cls;
  r.wall_ms = detail::elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Uniform adapter interface for the harness

class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::string name() const = 0;
  virtual BlockResult process(const StreamBlock& block) = 0;
  virtual const NetworkParams& params() const = 0;
};

class BaselineAdapter final : public Adapter {
 public:
  explicit BaselineAdapter(NetworkParams params) : params_(std::move(params)) {}
  std::string name() const override { return "Baseline"; }
  BlockResult process(const StreamBlock& block) override { return baseline_predict(params_, block); }
  const NetworkParams& params() const override { return params_; }

 private:
  NetworkParams params_;
};

class NaiveAdapter final : public Adapter {
 public:
  NaiveAdapter(NetworkParams params, OnlineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    state_.params = params.discriminator ? params.deployment() : std::move(params);
  }
  std::string name() const override { return "Naive"; }
  BlockResult process(const StreamBlock& block) override {
    return naive_adapt_block(state_, block, cfg_);
  }
  const NetworkParams& params() const override { return state_.params; }

 private:
  OnlineConfig cfg_;
  NaiveState state_;
};

class ProposedAdapter final : public Adapter {
 public:
  ProposedAdapter(NetworkParams params, PrototypeSet prototypes,
                  std::shared_ptr<const AnchorBank> bank, OnlineConfig cfg)
      : cfg_(std::move(cfg)),
        state_(make_adapter_state(std::move(params), std::move(prototypes), std::move(bank))) {
    cfg_.validate();
  }
  std::string name() const override { return "Proposed"; }
  BlockResult process(const StreamBlock& block) override { return adapt_block(state_, block, cfg_); }
  const NetworkParams& params() const override { return state_.params; }
  const AdapterState& state() const { return state_; }

 private:
  OnlineConfig cfg_;
  AdapterState state_;
};

/// One JSON-lines trace record.
inline nlohmann::json trace_record(const std::string& adapter, const BlockResult& r,
                                   std::size_t num_classes) {
  std::vector<int> hist(num_classes, 0);
  for (int y : r.predictions)
    if (y >= 0 && static_cast<std::size_t>(y) < num_classes) ++hist[static_cast<std::size_t>(y)];
  nlohmann::json j;
  j["adapter"] = adapter;
  j["block"] = r.block_index;
  j["size"] = r.predictions.size();
  j["losses"] = r.losses;
  j["prototype_version"] = r.prototype_version;
  j["histogram"] = hist;
  j["wall_ms"] = r.wall_ms;
  return j;
}

}  // namespace atta
