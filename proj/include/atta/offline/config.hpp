#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "atta/errors.hpp"

namespace atta {

/// Weight of the reversed domain gradient as training progresses: a linear
/// ramp 0 → 1 over the first `warmup_fraction` of training, then 1. A set
/// `constant` replaces the ramp.
struct LambdaSchedule {
  double warmup_fraction = 1.0 / 3.0;
  std::optional<double> constant;

  /// `progress` is the fraction of optimizer steps already taken, in [0, 1].
  double at(double progress) const {
    if (constant) return *constant;
    if (warmup_fraction <= 0.0) return 1.0;
    return std::min(1.0, std::max(0.0, progress / warmup_fraction));
  }

  void validate() const {
    if (constant && !(*constant >= 0.0)) throw ConfigError("lambda: constant must be >= 0");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
      throw ConfigError("lambda: warm-up fraction must lie in [0, 1]");
    }
  }
};

struct OfflineConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  LambdaSchedule lambda;
  std::size_t anchors_per_class = 128;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("offline: epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("offline: batch size must be >= 2 (batch norm)");
    if (!(lr >= 0.0)) throw ConfigError("offline: learning rate must be >= 0");
    if (anchors_per_class < 1) throw ConfigError("offline: anchors per class must be >= 1");
    lambda.validate();
  }
};

inline nlohmann::json to_json(const OfflineConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lambda_warmup"] = c.lambda.warmup_fraction;
  j["lambda_constant"] = c.lambda.constant ? nlohmann::json(*c.lambda.constant) : nlohmann::json();
  j["anchors_per_class"] = c.anchors_per_class;
  j["seed"] = c.seed;
  return j;
}

inline OfflineConfig offline_config_from_json(const nlohmann::json& j, OfflineConfig c = {}) {
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("lambda_warmup")) c.lambda.warmup_fraction = j.at("lambda_warmup").get<double>();
    if (j.contains("lambda_constant")) {
      const auto& v = j.at("lambda_constant");
      c.lambda.constant = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
    if (j.contains("anchors_per_class"))
      c.anchors_per_class = j.at("anchors_per_class").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("offline config: ") + e.what());
  }
  c.validate();
  return c;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace atta
