#pragma once

// Synthetic two-stage gearbox vibration generator.
//
// Each channel is a sum of
//   shaft harmonics      Σ_h a_h sin(h·θ(t) + φ_h),   θ' = 2π·rpm(t)/60
//   gear mesh            A_mesh(load, speed)·(1 + AM(t))·sin(Z·θ(t) + φ_m) + 2nd harmonic
//   fault signature      see table below
//   Gaussian noise       per-channel, at the configured SNR of the clean signal
// with Z = 36 teeth, so the mesh tone of a steady 1000 rpm recording sits at
// 36·1000/60 = 600 Hz. Ramped profiles integrate rpm(t) into θ(t), sweeping
// every component continuously.
//
// Fault signatures (severity s = SynthConfig::fault_severity):
//   healthy        none
//   gear_wear      mesh ×(1 + 0.5s), 2nd mesh harmonic ×(1 + 2s), 3rd mesh
//                  harmonic at 0.3s, mesh amplitude jitter
//   teeth_crack    one decaying resonance burst per shaft revolution
//   teeth_break    burst per revolution at 2.5× crack energy, mesh dip
//   gear_pitting   mesh amplitude modulation at f_r and 2·f_r
//                  (sidebands at mesh ± f_r, mesh ± 2f_r)
//   missing_teeth  mesh silenced for one tooth per revolution, strong burst
//
// Ramps additionally excite transient dynamics absent from steady running:
// a slowly wandering mesh gain, a torsional oscillation and extra broadband
// noise, all scaled by SynthConfig::transition_disturbance and by how far
// the operating point is from the ramp's start.
//
// Channel gains, phases and resonance frequencies are fixed per rig seed, so
// recordings that share a rig seed look like the same machine.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "atta/datagen/recording.hpp"

namespace atta {

struct SynthConfig {
  std::uint64_t rig_seed = 2024;
  double snr_db = 6.0;
  int mesh_teeth = 36;
  double fault_severity = 1.0;
  double transition_disturbance = 1.0;
  /// Reference operating point used to scale load/speed effects.
  double reference_rpm = 1000.0;
  double reference_torque = 20.0;

  bool operator==(const SynthConfig&) const = default;
};

namespace detail {

struct RigChannels {
  std::array<double, kChannels> gain{};
  std::array<double, kChannels> shaft_weight{};
  std::array<double, kChannels> mesh_weight{};
  std::array<std::array<double, 3>, kChannels> shaft_phase{};
  std::array<double, kChannels> mesh_phase{};
  std::array<double, kChannels> mesh2_phase{};
  std::array<double, kChannels> resonance_hz{};
  std::array<double, kChannels> impulse_gain{};
  double impulse_angle = 0.0;
  double modulation_phase = 0.0;
};

inline RigChannels make_rig(std::uint64_t rig_seed) {
  std::mt19937_64 rng(rig_seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  RigChannels rig;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const bool motor_side = c < 3;
    rig.gain[c] = 0.7 + 0.6 * unit(rng);
    rig.shaft_weight[c] = motor_side ? 1.0 : 0.5;
    rig.mesh_weight[c] = motor_side ? 0.5 : 1.0;
    for (double& p : rig.shaft_phase[c]) p = two_pi * unit(rng);
    rig.mesh_phase[c] = two_pi * unit(rng);
    rig.mesh2_phase[c] = two_pi * unit(rng);
    rig.resonance_hz[c] = 2500.0 + 1500.0 * unit(rng);
    rig.impulse_gain[c] = (motor_side ? 0.4 : 1.0) * (0.8 + 0.4 * unit(rng));
  }
  rig.impulse_angle = two_pi * unit(rng);
  rig.modulation_phase = two_pi * unit(rng);
  return rig;
}

}  // namespace detail

/// Generates one six-channel recording. Pure in (profile, fault, seed, cfg).
inline RawRecording synth_generate(const ConditionProfile& profile, int fault_id,
                                   std::uint64_t seed, const SynthConfig& cfg = {},
                                   int condition_index = 0) {
  profile.validate();
  const FaultType fault = fault_from_id(fault_id);
  const detail::RigChannels rig = detail::make_rig(cfg.rig_seed);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const std::size_t n = profile.num_samples();
  const double fs = profile.sample_rate_hz;
  const double duration = static_cast<double>(n) / fs;
  const double z = cfg.mesh_teeth;
  const double s = cfg.fault_severity;
  const bool transitional = profile.kind() == ConditionKind::kTransitional;

  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + static_cast<std::uint64_t>(fault_id) + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Per-recording start angle so recordings are not phase-locked.
  const double theta0 = two_pi * unit(rng);

  RawRecording rec;
  rec.fault_label = fault_id;
  rec.channels = Matrix::Zero(static_cast<Eigen::Index>(kChannels), static_cast<Eigen::Index>(n));
  rec.condition_trace.assign(n, transitional ? kTransitionalCondition : condition_index);
  rec.rpm.resize(n);
  rec.torque.resize(n);

  // Slow random gain wander (mesh amplitude jitter) as a 1st-order low-pass of
  // white noise; used by wear and by ramp dynamics.
  std::vector<double> wander(n, 0.0);
  {
    const double alpha = std::exp(-two_pi * 15.0 / fs);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      state = alpha * state + std::sqrt(1.0 - alpha * alpha) * gauss(rng);
      wander[i] = state;
    }
  }

  std::vector<double> theta(n);
  std::vector<double> mesh_amp(n);
  std::vector<double> load(n);
  std::vector<double> speed(n);
  std::vector<double> ramp_progress(n);
  {
    const double f0 = profile.speed_rpm.start / 60.0;
    const double f1 = profile.speed_rpm.end / 60.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double frac = duration > 0 ? t / duration : 0.0;
      theta[i] = theta0 + two_pi * (f0 * t + (f1 - f0) * t * t / (2.0 * duration));
      rec.rpm[i] = profile.speed_rpm.at(frac);
      rec.torque[i] = profile.torque_nm.at(frac);
      load[i] = rec.torque[i] / cfg.reference_torque;
      speed[i] = rec.rpm[i] / cfg.reference_rpm;
      ramp_progress[i] = transitional ? frac : 0.0;
      mesh_amp[i] = (0.4 + 0.6 * load[i]) * std::pow(speed[i], 0.8);
    }
  }

  // Impulse trains for crack/break/missing teeth: one burst per revolution.
  std::vector<std::size_t> burst_starts;
  double burst_scale = 0.0;
  if (fault == FaultType::kTeethCrack) burst_scale = 1.6 * s;
  if (fault == FaultType::kTeethBreak) burst_scale = 4.0 * s;
  if (fault == FaultType::kMissingTeeth) burst_scale = 3.0 * s;
  if (burst_scale > 0.0) {
    double prev = std::floor((theta[0] - rig.impulse_angle) / two_pi);
    for (std::size_t i = 1; i < n; ++i) {
      const double rev = std::floor((theta[i] - rig.impulse_angle) / two_pi);
      if (rev != prev) burst_starts.push_back(i);
      prev = rev;
    }
  }
  const double burst_decay = 900.0;  // 1/s
  const auto burst_len = static_cast<std::size_t>(6.0 / burst_decay * fs);

  for (std::size_t c = 0; c < kChannels; ++c) {
    auto row = rec.channels.row(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i) {
      const double th = theta[i];
      double shaft = 0.0;
      for (int h = 1; h <= 3; ++h) {
        shaft += (0.6 / h) * speed[i] * std::sin(h * th + rig.shaft_phase[c][h - 1]);
      }
      shaft *= rig.shaft_weight[c];

      double amp = mesh_amp[i] * rig.mesh_weight[c];
      double am = 0.0;
      double amp2 = 0.4 * amp;
      double amp3 = 0.0;
      switch (fault) {
        case FaultType::kGearWear:
          amp *= 1.0 + 0.5 * s;
          amp2 *= 1.0 + 2.0 * s;
          amp3 = 0.3 * s * mesh_amp[i] * rig.mesh_weight[c];
          am = 0.15 * s * wander[i];
          break;
        case FaultType::kGearPitting:
          am = 0.5 * s * std::sin(th + rig.modulation_phase) +
               0.25 * s * std::sin(2.0 * th + 2.0 * rig.modulation_phase);
          break;
        case FaultType::kTeethBreak:
        case FaultType::kMissingTeeth: {
          // One tooth out of Z is damaged: mesh dips while it engages.
          const double rel = std::fmod(th - rig.impulse_angle, two_pi);
          const double pos = rel < 0 ? rel + two_pi : rel;
          if (pos < two_pi / z) am = fault == FaultType::kMissingTeeth ? -1.0 : -0.6;
          break;
        }
        default:
          break;
      }
      if (transitional) {
        const double d = cfg.transition_disturbance * ramp_progress[i] * (1.0 - ramp_progress[i]) * 4.0;
        am += 0.35 * d * wander[i];
      }
      double mesh = amp * (1.0 + am) * std::sin(z * th + rig.mesh_phase[c]) +
                    amp2 * std::sin(2.0 * z * th + rig.mesh2_phase[c]);
      if (amp3 != 0.0) mesh += amp3 * std::sin(3.0 * z * th + rig.mesh_phase[c]);

      double torsion = 0.0;
      if (transitional) {
        const double d = cfg.transition_disturbance * ramp_progress[i] * (1.0 - ramp_progress[i]) * 4.0;
        torsion = 0.5 * d * std::sin(two_pi * 45.0 * static_cast<double>(i) / fs +
                                     rig.shaft_phase[c][0]);
      }
      row(static_cast<Eigen::Index>(i)) = rig.gain[c] * (shaft + mesh + torsion);
    }

    for (std::size_t start : burst_starts) {
      const double a = burst_scale * rig.impulse_gain[c] * rig.gain[c] * (0.5 + 0.5 * load[start]) *
                       speed[start];
      const std::size_t end = std::min(n, start + burst_len);
      for (std::size_t i = start; i < end; ++i) {
        const double tau = static_cast<double>(i - start) / fs;
        row(static_cast<Eigen::Index>(i)) +=
            a * std::exp(-burst_decay * tau) * std::sin(two_pi * rig.resonance_hz[c] * tau);
      }
    }
  }

  // Additive noise at the requested SNR of each clean channel, plus extra
  // broadband content while the operating point is moving.
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto row = rec.channels.row(static_cast<Eigen::Index>(c));
    const double rms = std::sqrt(row.squaredNorm() / static_cast<double>(n));
    const double sigma = rms / std::pow(10.0, cfg.snr_db / 20.0);
    for (std::size_t i = 0; i < n; ++i) {
      double extra = 0.0;
      if (transitional) {
        extra = cfg.transition_disturbance * ramp_progress[i] * (1.0 - ramp_progress[i]) * 4.0 *
                0.5 * sigma;
      }
      row(static_cast<Eigen::Index>(i)) += (sigma + extra) * gauss(rng);
    }
  }
  return rec;
}

}  // namespace atta
