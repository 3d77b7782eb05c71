#pragma once

// The offline stage's deliverable: deployment params, prototypes and the
// anchor indices, packed into one checkpoint.

#include "atta/model/checkpoint.hpp"
#include "atta/offline/config.hpp"
#include "atta/offline/prototypes.hpp"
#include "atta/offline/trainer.hpp"

namespace atta {

struct OfflineArtifact {
  NetworkParams params;  ///< deployment set
  PrototypeSet prototypes;
  std::vector<std::vector<std::size_t>> anchor_indices;
  nlohmann::json config;  ///< whatever produced it; hashed into the header
};

inline Checkpoint to_checkpoint(const OfflineArtifact& a) {
  if (a.params.discriminator) throw ConfigError("offline artifact must hold deployment params");
  Checkpoint c;
  c.header["network"] = spec_to_json(a.params.spec);
  c.header["config"] = a.config;
  c.header["config_hash"] = hex64(fnv1a(a.config.dump()));
  c.header["anchor_indices"] = a.anchor_indices;
  c.header["prototype_version"] = a.prototypes.version;
  c.tensors = named_tensors(a.params);
  c.tensors.push_back({"prototypes.mu", a.prototypes.mu});
  c.tensors.push_back({"prototypes.mu_bar", a.prototypes.mu_bar});
  return c;
}

inline OfflineArtifact artifact_from_checkpoint(const Checkpoint& c) {
  OfflineArtifact a;
  a.params = params_from_checkpoint(c);
  if (a.params.discriminator) throw SchemaError("offline artifact carries discriminator tensors");
  if (!c.has_tensor("prototypes.mu") || !c.has_tensor("prototypes.mu_bar")) {
    throw SchemaError("checkpoint has no prototypes");
  }
  a.prototypes.mu = c.tensor("prototypes.mu");
  a.prototypes.mu_bar = c.tensor("prototypes.mu_bar");
  try {
    a.prototypes.version = c.header.at("prototype_version").get<std::uint64_t>();
    a.anchor_indices = c.header.at("anchor_indices").get<std::vector<std::vector<std::size_t>>>();
    a.config = c.header.at("config");
    if (c.header.at("config_hash").get<std::string>() != hex64(fnv1a(a.config.dump()))) {
      throw SchemaError("checkpoint config hash mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  if (a.prototypes.mu.rows() != static_cast<Eigen::Index>(a.params.spec.num_classes) ||
      a.anchor_indices.size() != a.params.spec.num_classes) {
    throw SchemaError("checkpoint prototypes do not match the class count");
  }
  return a;
}

/// train_offline → anchor bank → prototypes, in one call.
struct OfflineStage {
  OfflineResult training;
  AnchorBank bank;
  PrototypeSet prototypes;
};

inline OfflineStage run_offline_stage(const SampleSet& d0, const NetworkSpec& spec,
                                      const OfflineConfig& cfg, const EpochCallback& on_epoch = {}) {
  OfflineResult r = train_offline(d0, spec, cfg, on_epoch);
  AnchorBank bank = build_anchor_bank(d0, spec.num_classes, cfg.anchors_per_class, cfg.seed);
  PrototypeSet protos = compute_prototypes(bank, r.deployment);
  return {std::move(r), std::move(bank), std::move(protos)};
}

}  // namespace atta
