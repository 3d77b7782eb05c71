#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atta/numerics/matrix.hpp"

namespace atta {

inline constexpr std::size_t kChannels = 6;
inline constexpr double kSampleRateHz = 12800.0;
/// Condition index carried by samples recorded during a ramp.
inline constexpr int kTransitionalCondition = -1;

/// Gear/bearing health states the synthesizer can produce.
enum class FaultType : int {
  kHealthy = 0,
  kGearWear = 1,
  kTeethCrack = 2,
  kTeethBreak = 3,
  kGearPitting = 4,
  kMissingTeeth = 5,
};

inline constexpr std::array<std::string_view, 6> kFaultNames{
    "healthy", "gear_wear", "teeth_crack", "teeth_break", "gear_pitting", "missing_teeth"};

inline FaultType fault_from_id(int id) {
  if (id < 0 || id >= static_cast<int>(kFaultNames.size())) {
    throw ConfigError("unknown fault id " + std::to_string(id));
  }
  return static_cast<FaultType>(id);
}

inline FaultType fault_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFaultNames.size(); ++i)
    if (kFaultNames[i] == name) return static_cast<FaultType>(i);
  throw ConfigError("unknown fault type '" + std::string(name) + "'");
}

inline std::string_view fault_name(FaultType f) { return kFaultNames[static_cast<int>(f)]; }

/// A linearly interpolated parameter; start == end is a steady value.
struct Ramp {
  double start = 0.0;
  double end = 0.0;

  static Ramp constant(double v) { return {v, v}; }
  bool ramps() const { return start != end; }
  double at(double frac) const { return start + (end - start) * frac; }
  bool operator==(const Ramp&) const = default;
};

enum class ConditionKind { kSteady, kTransitional };

struct ConditionProfile {
  Ramp speed_rpm;
  Ramp torque_nm;
  double duration_s = 1.0;
  double sample_rate_hz = kSampleRateHz;

  static ConditionProfile steady(double rpm, double torque, double duration) {
    return {Ramp::constant(rpm), Ramp::constant(torque), duration, kSampleRateHz};
  }

  ConditionKind kind() const {
    return speed_rpm.ramps() || torque_nm.ramps() ? ConditionKind::kTransitional
                                                  : ConditionKind::kSteady;
  }

  std::size_t num_samples() const {
    return static_cast<std::size_t>(duration_s * sample_rate_hz);
  }

  void validate() const {
    if (!(speed_rpm.start > 0 && speed_rpm.end > 0 && torque_nm.start > 0 && torque_nm.end > 0)) {
      throw ConfigError("ConditionProfile: speed and torque must be positive");
    }
    if (!(duration_s > 0) || !(sample_rate_hz > 0)) {
      throw ConfigError("ConditionProfile: duration and sample rate must be positive");
    }
  }

  bool operator==(const ConditionProfile&) const = default;
};

/// Six equal-length vibration channels with their fault label.
struct RawRecording {
  Matrix channels;  ///< kChannels × length, one channel per row
  int fault_label = -1;
  std::vector<int> condition_trace;  ///< per-sample condition index
  std::vector<double> rpm;           ///< optional per-sample speed
  std::vector<double> torque;        ///< optional per-sample torque

  std::size_t length() const { return static_cast<std::size_t>(channels.cols()); }

  void validate(std::size_t min_length) const {
    if (channels.rows() != static_cast<Eigen::Index>(kChannels)) {
      throw SchemaError("RawRecording: expected 6 channels, got " +
                        std::to_string(channels.rows()));
    }
    if (length() < min_length) {
      throw DataError("RawRecording: length " + std::to_string(length()) +
                      " is shorter than one window (" + std::to_string(min_length) + ")");
    }
    if (!condition_trace.empty() && condition_trace.size() != length()) {
      throw SchemaError("RawRecording: condition trace length mismatch");
    }
  }
};

}  // namespace atta
