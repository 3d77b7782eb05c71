#pragma once

#include <string>

#include <json.hpp>

#include "atta/errors.hpp"

namespace atta {

enum class BnPolicy { kFrozen, kBatch };
enum class UpdateRule { kSgd, kAdam };
enum class RefreshUnit { kBlocks, kSteps };

inline const char* to_string(BnPolicy p) { return p == BnPolicy::kFrozen ? "frozen" : "batch"; }
inline const char* to_string(UpdateRule r) { return r == UpdateRule::kSgd ? "sgd" : "adam"; }
inline const char* to_string(RefreshUnit u) { return u == RefreshUnit::kBlocks ? "blocks" : "steps"; }

inline BnPolicy bn_policy_from(const std::string& s) {
  if (s == "frozen") return BnPolicy::kFrozen;
  if (s == "batch") return BnPolicy::kBatch;
  throw ConfigError("bn_policy must be 'frozen' or 'batch', got '" + s + "'");
}
inline UpdateRule update_rule_from(const std::string& s) {
  if (s == "sgd") return UpdateRule::kSgd;
  if (s == "adam") return UpdateRule::kAdam;
  throw ConfigError("update_rule must be 'sgd' or 'adam', got '" + s + "'");
}
inline RefreshUnit refresh_unit_from(const std::string& s) {
  if (s == "blocks") return RefreshUnit::kBlocks;
  if (s == "steps") return RefreshUnit::kSteps;
  throw ConfigError("refresh_unit must be 'blocks' or 'steps', got '" + s + "'");
}

struct OnlineConfig {
  double tau = 0.1;
  double eta_f = 1e-5;  ///< extractor step size
  double eta_y = 1e-4;  ///< classifier step size (also Naive's single rate)
  std::size_t steps = 3;           ///< inner-loop iterations per block
  std::size_t refresh_period = 10;  ///< N_f
  BnPolicy bn_policy = BnPolicy::kFrozen;
  UpdateRule update_rule = UpdateRule::kSgd;
  RefreshUnit refresh_unit = RefreshUnit::kBlocks;

  /// η_f < η_y is required. Both rates at zero (a frozen adapter) is the
  /// one exception.
  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("online: tau must be > 0");
    if (!(eta_f >= 0.0) || !(eta_y >= 0.0)) throw ConfigError("online: step sizes must be >= 0");
    const bool frozen = eta_f == 0.0 && eta_y == 0.0;
    if (!frozen && !(eta_f < eta_y)) {
      throw ConfigError("online: extractor step size must be smaller than the classifier's (eta_f < eta_y)");
    }
    if (steps < 1) throw ConfigError("online: inner steps must be >= 1");
    if (refresh_period < 1) throw ConfigError("online: refresh period must be >= 1");
  }
};

inline nlohmann::json to_json(const OnlineConfig& c) {
  return {{"tau", c.tau},
          {"eta_f", c.eta_f},
          {"eta_y", c.eta_y},
          {"steps", c.steps},
          {"refresh_period", c.refresh_period},
          {"bn_policy", to_string(c.bn_policy)},
          {"update_rule", to_string(c.update_rule)},
          {"refresh_unit", to_string(c.refresh_unit)}};
}

inline OnlineConfig online_config_from_json(const nlohmann::json& j, OnlineConfig c = {}) {
  try {
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("eta_f")) c.eta_f = j.at("eta_f").get<double>();
    if (j.contains("eta_y")) c.eta_y = j.at("eta_y").get<double>();
    if (j.contains("steps")) c.steps = j.at("steps").get<std::size_t>();
    if (j.contains("refresh_period")) c.refresh_period = j.at("refresh_period").get<std::size_t>();
    if (j.contains("bn_policy")) c.bn_policy = bn_policy_from(j.at("bn_policy").get<std::string>());
    if (j.contains("update_rule"))
      c.update_rule = update_rule_from(j.at("update_rule").get<std::string>());
    if (j.contains("refresh_unit"))
      c.refresh_unit = refresh_unit_from(j.at("refresh_unit").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("online config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace atta
