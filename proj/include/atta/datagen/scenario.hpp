#pragma once

// Scenario descriptions and their materialization into offline/online data.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atta/datagen/csv.hpp"
#include "atta/datagen/stream.hpp"
#include "atta/datagen/synth.hpp"
#include "atta/datagen/window.hpp"

namespace atta {

/// One condition segment of the online stream. Either the held-out remainder
/// of an offline steady condition or a dedicated (usually ramped) recording.
struct OnlineSegmentSpec {
  std::string tag;
  std::optional<std::size_t> steady_source;
  std::optional<ConditionProfile> profile;
};

struct ScenarioSpec {
  std::string name = "custom";
  std::vector<FaultType> classes{FaultType::kHealthy, FaultType::kGearWear,
                                 FaultType::kTeethCrack, FaultType::kGearPitting};
  std::vector<ConditionProfile> offline_conditions;
  std::vector<OnlineSegmentSpec> online_segments;
  double offline_fraction = 0.1;
  std::size_t window_length = kWindowLength;
  std::size_t window_stride = kWindowStride;
  SynthConfig synth;
  /// Recordings to load instead of synthesizing. Keys are
  /// "<fault>@offline:<i>" for offline condition i, or "<fault>@<segment tag>"
  /// for a dedicated online segment recording.
  std::map<std::string, std::string> csv_sources;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t num_conditions() const { return offline_conditions.size(); }
  std::size_t input_dim() const { return kChannels * window_length; }

  int class_of(FaultType f) const {
    for (std::size_t k = 0; k < classes.size(); ++k)
      if (classes[k] == f) return static_cast<int>(k);
    throw ConfigError("scenario '" + name + "' has no class '" + std::string(fault_name(f)) + "'");
  }

  void validate() const {
    if (classes.size() < 2) throw ConfigError("scenario: need at least two classes");
    if (classes.front() != FaultType::kHealthy) {
      throw ConfigError("scenario: class 0 must be 'healthy'");
    }
    if (offline_conditions.size() < 2) {
      throw ConfigError("scenario: need at least two offline conditions");
    }
    for (const auto& c : offline_conditions) {
      c.validate();
      if (c.kind() != ConditionKind::kSteady) {
        throw ConfigError("scenario: offline conditions must be steady");
      }
    }
    if (online_segments.empty()) throw ConfigError("scenario: no online segments");
    for (const auto& s : online_segments) {
      if (s.steady_source.has_value() == s.profile.has_value()) {
        throw ConfigError("scenario: segment '" + s.tag +
                          "' needs exactly one of steady_source / profile");
      }
      if (s.steady_source && *s.steady_source >= offline_conditions.size()) {
        throw ConfigError("scenario: segment '" + s.tag + "' refers to a missing condition");
      }
      if (s.profile) s.profile->validate();
    }
    if (!(offline_fraction > 0.0 && offline_fraction < 1.0)) {
      throw ConfigError("scenario: offline fraction must lie in (0, 1)");
    }
  }
};

/// Load-ramp scenario: 1000 rpm at 10/15/20 Nm offline; online
/// 20 Nm steady → 20→15 Nm ramp → 15 Nm steady.
inline ScenarioSpec scenario_one(double steady_s = 1.0, double ramp_s = 0.5) {
  ScenarioSpec s;
  s.name = "I";
  s.offline_conditions = {ConditionProfile::steady(1000, 10, steady_s),
                          ConditionProfile::steady(1000, 15, steady_s),
                          ConditionProfile::steady(1000, 20, steady_s)};
  s.online_segments = {
      {"steady-1", 2, std::nullopt},
      {"transitional", std::nullopt,
       ConditionProfile{Ramp::constant(1000), Ramp{20, 15}, ramp_s, kSampleRateHz}},
      {"steady-2", 1, std::nullopt}};
  return s;
}

/// Speed-ramp scenario: 20 Nm at 1000/1500/2000 rpm offline; online
/// 2000 rpm steady → 2000→1500 rpm ramp → 1500 rpm steady.
inline ScenarioSpec scenario_two(double steady_s = 1.0, double ramp_s = 0.9) {
  ScenarioSpec s;
  s.name = "II";
  s.offline_conditions = {ConditionProfile::steady(1000, 20, steady_s),
                          ConditionProfile::steady(1500, 20, steady_s),
                          ConditionProfile::steady(2000, 20, steady_s)};
  s.online_segments = {
      {"steady-1", 2, std::nullopt},
      {"transitional", std::nullopt,
       ConditionProfile{Ramp{2000, 1500}, Ramp::constant(20), ramp_s, kSampleRateHz}},
      {"steady-2", 1, std::nullopt}};
  return s;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ConditionProfile& p) {
  return {{"speed_rpm", {p.speed_rpm.start, p.speed_rpm.end}},
          {"torque_nm", {p.torque_nm.start, p.torque_nm.end}},
          {"duration_s", p.duration_s},
          {"sample_rate_hz", p.sample_rate_hz}};
}

inline Ramp ramp_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Ramp::constant(j.get<double>());
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("scenario: ramp must be a number or [start, end]");
}

inline ConditionProfile profile_from_json(const nlohmann::json& j) {
  ConditionProfile p;
  p.speed_rpm = ramp_from_json(j.at("speed_rpm"));
  p.torque_nm = ramp_from_json(j.at("torque_nm"));
  p.duration_s = j.at("duration_s").get<double>();
  p.sample_rate_hz = j.value("sample_rate_hz", kSampleRateHz);
  return p;
}

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"rig_seed", c.rig_seed},
          {"snr_db", c.snr_db},
          {"mesh_teeth", c.mesh_teeth},
          {"fault_severity", c.fault_severity},
          {"transition_disturbance", c.transition_disturbance},
          {"reference_rpm", c.reference_rpm},
          {"reference_torque", c.reference_torque}};
}

inline SynthConfig synth_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.rig_seed = j.value("rig_seed", c.rig_seed);
  c.snr_db = j.value("snr_db", c.snr_db);
  c.mesh_teeth = j.value("mesh_teeth", c.mesh_teeth);
  c.fault_severity = j.value("fault_severity", c.fault_severity);
  c.transition_disturbance = j.value("transition_disturbance", c.transition_disturbance);
  c.reference_rpm = j.value("reference_rpm", c.reference_rpm);
  c.reference_torque = j.value("reference_torque", c.reference_torque);
  return c;
}

inline nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["classes"] = nlohmann::json::array();
  for (FaultType f : s.classes) j["classes"].push_back(std::string(fault_name(f)));
  j["offline_conditions"] = nlohmann::json::array();
  for (const auto& c : s.offline_conditions) j["offline_conditions"].push_back(to_json(c));
  j["online_segments"] = nlohmann::json::array();
  for (const auto& seg : s.online_segments) {
    nlohmann::json sj{{"tag", seg.tag}};
    if (seg.steady_source) sj["steady_source"] = *seg.steady_source;
    if (seg.profile) sj["profile"] = to_json(*seg.profile);
    j["online_segments"].push_back(sj);
  }
  j["offline_fraction"] = s.offline_fraction;
  j["window_length"] = s.window_length;
  j["window_stride"] = s.window_stride;
  j["synth"] = to_json(s.synth);
  j["csv_sources"] = s.csv_sources;
  return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.name = j.value("name", std::string("custom"));
    if (j.contains("classes")) {
      s.classes.clear();
      for (const auto& c : j.at("classes")) s.classes.push_back(fault_from_name(c.get<std::string>()));
    }
    for (const auto& c : j.at("offline_conditions")) s.offline_conditions.push_back(profile_from_json(c));
    for (const auto& sj : j.at("online_segments")) {
      OnlineSegmentSpec seg;
      seg.tag = sj.at("tag").get<std::string>();
      if (sj.contains("steady_source")) seg.steady_source = sj.at("steady_source").get<std::size_t>();
      if (sj.contains("profile")) seg.profile = profile_from_json(sj.at("profile"));
      s.online_segments.push_back(seg);
    }
    s.offline_fraction = j.value("offline_fraction", s.offline_fraction);
    s.window_length = j.value("window_length", s.window_length);
    s.window_stride = j.value("window_stride", s.window_stride);
    if (j.contains("synth")) s.synth = synth_from_json(j.at("synth"));
    if (j.contains("csv_sources")) {
      s.csv_sources = j.at("csv_sources").get<std::map<std::string, std::string>>();
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Materialization

struct ScenarioData {
  SampleSet offline;                  ///< labels are class ids, conditions 0..M-1
  std::vector<SegmentPools> online;   ///< one per online segment, pools per class
};

inline std::uint64_t recording_seed(std::uint64_t seed, std::size_t cls, std::size_t slot) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL;
  h ^= (cls + 1) * 0xBF58476D1CE4E5B9ULL;
  h ^= (slot + 1) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

namespace detail {
inline RawRecording obtain_recording(const ScenarioSpec& spec, std::size_t cls,
                                     const std::string& slot_key, std::size_t slot,
                                     const ConditionProfile& profile, int condition,
                                     std::uint64_t seed) {
  const std::string key = std::string(fault_name(spec.classes[cls])) + "@" + slot_key;
  RawRecording rec;
  if (auto it = spec.csv_sources.find(key); it != spec.csv_sources.end()) {
    rec = load_csv(it->second, static_cast<int>(cls), condition);
  } else {
    rec = synth_generate(profile, static_cast<int>(spec.classes[cls]),
                         recording_seed(seed, cls, slot), spec.synth, condition);
  }
  rec.fault_label = static_cast<int>(cls);
  if (profile.kind() == ConditionKind::kTransitional) {
    rec.condition_trace.assign(rec.length(), kTransitionalCondition);
  }
  return rec;
}
}  // namespace detail

/// Generates (or loads) every recording, windows it, splits steady groups
/// into offline/online parts and collects the online pools per segment.
inline ScenarioData materialize(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t k_classes = spec.num_classes();
  const std::size_t m = spec.num_conditions();

  std::vector<bool> held_out_needed(m, false);
  for (const auto& seg : spec.online_segments)
    if (seg.steady_source) held_out_needed[*seg.steady_source] = true;

  ScenarioData data;
  // remainders[i][k]: online part of (class k, condition i)
  std::vector<std::vector<SampleSet>> remainders(m, std::vector<SampleSet>(k_classes));
  for (std::size_t k = 0; k < k_classes; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      RawRecording rec = detail::obtain_recording(spec, k, "offline:" + std::to_string(i), i,
                                                  spec.offline_conditions[i],
                                                  static_cast<int>(i), seed);
      SampleSet windows = window_set(rec, spec.window_length, spec.window_stride);
      OfflineOnlineSplit split = split_offline_online({windows}, spec.offline_fraction);
      data.offline.append(split.offline);
      if (held_out_needed[i]) remainders[i][k] = std::move(split.online[0]);
    }
  }

  for (std::size_t s = 0; s < spec.online_segments.size(); ++s) {
    const OnlineSegmentSpec& seg = spec.online_segments[s];
    SegmentPools pools;
    pools.tag = seg.tag;
    pools.by_class.resize(k_classes);
    for (std::size_t k = 0; k < k_classes; ++k) {
      if (seg.steady_source) {
        pools.by_class[k] = remainders[*seg.steady_source][k];
      } else {
        RawRecording rec = detail::obtain_recording(spec, k, seg.tag, m + s, *seg.profile,
                                                    kTransitionalCondition, seed);
        pools.by_class[k] = window_set(rec, spec.window_length, spec.window_stride);
      }
    }
    data.online.push_back(std::move(pools));
  }
  return data;
}

}  // namespace atta
