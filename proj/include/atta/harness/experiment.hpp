#pragma once

// datagen → offline → three adapters over one stream per fault → metrics.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "atta/datagen/scenario.hpp"
#include "atta/datagen/stream.hpp"
#include "atta/harness/metrics.hpp"
#include "atta/offline/artifact.hpp"
#include "atta/online/adapters.hpp"

namespace atta {

inline const std::vector<std::string>& adapter_names() {
  static const std::vector<std::string> names{"Proposed", "Baseline", "Naive"};
  return names;
}

struct ExperimentConfig {
  ScenarioSpec scenario = scenario_one();
  std::vector<std::string> faults;  ///< empty: every non-healthy class of the scenario
  std::vector<std::uint64_t> seeds{0};
  OfflineConfig offline;
  OnlineConfig online;
  std::size_t block_size = 64;
  std::string out_dir = "out";
  bool trace = false;  ///< write per-block JSON-lines traces

  std::vector<std::string> fault_list() const {
    if (!faults.empty()) return faults;
    std::vector<std::string> out;
    for (std::size_t k = 1; k < scenario.classes.size(); ++k)
      out.emplace_back(fault_name(scenario.classes[k]));
    return out;
  }

  void validate() const {
    scenario.validate();
    if (seeds.empty()) throw ConfigError("experiment: need at least one seed");
    if (block_size == 0) throw ConfigError("experiment: block size must be positive");
    for (const auto& f : fault_list()) {
      const int k = scenario.class_of(fault_from_name(f));
      if (k == 0) throw ConfigError("experiment: the healthy class cannot be the fault under test");
    }
    offline.validate();
    online.validate();
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["scenario"] = to_json(c.scenario);
  j["faults"] = c.faults;
  j["seeds"] = c.seeds;
  j["offline"] = to_json(c.offline);
  j["online"] = to_json(c.online);
  j["block_size"] = c.block_size;
  j["out_dir"] = c.out_dir;
  j["trace"] = c.trace;
  return j;
}

/// Fields present in `j` override `base`. "scenario" may be a full object or
/// the string "I" / "II".
inline ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
  try {
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      if (s.is_string()) {
        const auto id = s.get<std::string>();
        if (id == "I") base.scenario = scenario_one();
        else if (id == "II") base.scenario = scenario_two();
        else throw ConfigError("experiment: unknown scenario id '" + id + "'");
      } else {
        base.scenario = scenario_from_json(s);
      }
    }
    if (j.contains("faults")) base.faults = j.at("faults").get<std::vector<std::string>>();
    if (j.contains("seeds")) base.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("offline")) base.offline = offline_config_from_json(j.at("offline"), base.offline);
    if (j.contains("online")) base.online = online_config_from_json(j.at("online"), base.online);
    if (j.contains("block_size")) base.block_size = j.at("block_size").get<std::size_t>();
    if (j.contains("out_dir")) base.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("trace")) base.trace = j.at("trace").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  base.validate();
  return base;
}

inline NetworkSpec network_spec_for(const ScenarioSpec& s) {
  NetworkSpec n;
  n.input_dim = s.input_dim();
  n.extractor_widths.front() = n.input_dim;
  n.num_classes = s.num_classes();
  n.num_conditions = s.num_conditions();
  return n;
}

/// Runs `fn`, rethrowing any failure tagged with `stage`.
template <typename F>
auto staged(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

using ProgressFn = std::function<void(const std::string&)>;

/// Offline artefacts for one seed.
struct SeedModel {
  std::uint64_t seed = 0;
  OfflineArtifact artifact;
  std::shared_ptr<const AnchorBank> bank;
};

inline OfflineConfig seeded(OfflineConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

inline SeedModel train_seed(const ExperimentConfig& cfg, const ScenarioData& data, std::uint64_t seed,
                            const ProgressFn& progress = {}) {
  return staged("offline", [&] {
    const OfflineConfig oc = seeded(cfg.offline, seed);
    OfflineStage st = run_offline_stage(data.offline, network_spec_for(cfg.scenario), oc,
                                        [&](const EpochLog& e) {
                                          if (!progress) return;
                                          char buf[160];
                                          std::snprintf(buf, sizeof(buf),
                                                        "seed %llu epoch %zu: lambda %.3f class acc %.3f "
                                                        "domain acc %.3f",
                                                        static_cast<unsigned long long>(seed), e.epoch,
                                                        e.lambda, e.class_accuracy, e.domain_accuracy);
                                          progress(buf);
                                        });
    nlohmann::json conf{{"scenario", to_json(cfg.scenario)}, {"offline", to_json(oc)}};
    SeedModel m;
    m.seed = seed;
    m.artifact = {st.training.deployment, st.prototypes, st.bank.indices(), conf};
    m.bank = std::make_shared<const AnchorBank>(std::move(st.bank));
    return m;
  });
}

/// Restores a seed's model from a checkpoint written by `train`.
inline SeedModel load_seed(const Checkpoint& ckpt, const ScenarioData& data) {
  return staged("checkpoint", [&] {
    SeedModel m;
    m.artifact = artifact_from_checkpoint(ckpt);
    m.seed = m.artifact.config.at("offline").at("seed").get<std::uint64_t>();
    m.bank = std::make_shared<const AnchorBank>(
        anchor_bank_from_indices(data.offline, m.artifact.anchor_indices));
    return m;
  });
}

inline std::string checkpoint_name(const std::string& scenario, std::uint64_t seed) {
  return "model_" + scenario + "_seed" + std::to_string(seed) + ".ckpt";
}

inline std::unique_ptr<Adapter> make_adapter(const std::string& name, const SeedModel& m,
                                             const OnlineConfig& online) {
  if (name == "Proposed") {
    return std::make_unique<ProposedAdapter>(m.artifact.params, m.artifact.prototypes, m.bank, online);
  }
  if (name == "Baseline") return std::make_unique<BaselineAdapter>(m.artifact.params);
  if (name == "Naive") return std::make_unique<NaiveAdapter>(m.artifact.params, online);
  throw ConfigError("unknown adapter '" + name + "'");
}

/// Streams one fault's blocks through every adapter and scores them.
inline std::vector<RunMetrics> run_fault(const ExperimentConfig& cfg, const ScenarioData& data,
                                         const SeedModel& model, const std::string& fault,
                                         const ProgressFn& progress = {}) {
  const int fault_class = cfg.scenario.class_of(fault_from_name(fault));
  const Stream stream =
      staged("datagen", [&] { return build_stream(data.online, fault_class, cfg.block_size); });

  // scorer side: hidden labels and segment tags, one per sample
  std::vector<int> truth;
  for (const auto& b : stream.blocks) {
    const auto& l = HiddenTruth::labels(b);
    truth.insert(truth.end(), l.begin(), l.end());
  }
  std::vector<std::string> tags;
  for (int s : stream.segment_of_sample()) tags.push_back(stream.segments[static_cast<std::size_t>(s)].tag);

  std::vector<RunMetrics> out;
  for (const auto& name : adapter_names()) {
    std::unique_ptr<Adapter> adapter = staged("online", [&] { return make_adapter(name, model, cfg.online); });
    std::ofstream trace;
    if (cfg.trace) {
      std::filesystem::create_directories(cfg.out_dir);
      trace.open(std::filesystem::path(cfg.out_dir) /
                 ("trace_" + cfg.scenario.name + "_" + fault + "_" + name + "_seed" +
                  std::to_string(model.seed) + ".jsonl"));
    }
    std::vector<int> predictions;
    predictions.reserve(stream.total);
    staged("online", [&] {
      for (const auto& block : stream.blocks) {
        const BlockResult r = adapter->process(block);
        predictions.insert(predictions.end(), r.predictions.begin(), r.predictions.end());
        if (trace.is_open()) trace << trace_record(name, r, cfg.scenario.num_classes()).dump() << '\n';
      }
    });
    out.push_back(staged("harness", [&] {
      return score_run(cfg.scenario.name, fault, name, model.seed, predictions, truth, tags);
    }));
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "seed %llu %s %s: final cumulative accuracy %.4f",
                    static_cast<unsigned long long>(model.seed), fault.c_str(), name.c_str(),
                    out.back().final_accuracy());
      progress(buf);
    }
  }
  return out;
}

inline ScenarioData materialize_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  return staged("datagen", [&] { return materialize(cfg.scenario, seed); });
}

/// The full pipeline for every seed and fault.
inline std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  staged("config", [&] { cfg.validate(); });
  std::vector<RunMetrics> all;
  for (std::uint64_t seed : cfg.seeds) {
    const ScenarioData data = materialize_for(cfg, seed);
    const SeedModel model = train_seed(cfg, data, seed, progress);
    for (const auto& fault : cfg.fault_list()) {
      auto runs = run_fault(cfg, data, model, fault, progress);
      all.insert(all.end(), std::make_move_iterator(runs.begin()), std::make_move_iterator(runs.end()));
    }
  }
  return all;
}

}  // namespace atta
