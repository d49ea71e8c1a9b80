// Copyright 2026 The GaitForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central pattern generator for a six-legged walker.
//
// Twelve phase oscillators, one per motor. Oscillator k (0..5) drives the
// vertical motor of leg k and oscillator 6+k its horizontal motor. Legs 0-2
// are the left side front to back, legs 3-5 the right side front to back.
//
// Each oscillator follows
//
//   dphi_i/dt = w + sum_j w_ij r_j sin(phi_j - phi_i - b_ij)
//   r_i''     = a_r (a_r/4 (R_i - r_i) - r_i')
//   x_i''     = a_x (a_x/4 (X_i - x_i) - x_i')
//
// so in the locked state phi_j - phi_i = b_ij. The six vertical oscillators
// are all-to-all coupled with weight 4; each horizontal oscillator is coupled
// only to the vertical oscillator of its own leg and lags it by the
// vertical/horizontal phase difference.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gaitforge/common.hpp"

namespace gaitforge::cpg {

inline constexpr int kLegs = 6;
inline constexpr int kOscillators = 12;
inline constexpr double kVerticalCoupling = 4.0;

constexpr int vertical_index(int leg) { return leg; }
constexpr int horizontal_index(int leg) { return kLegs + leg; }
constexpr bool is_left(int leg) { return leg < 3; }
constexpr int leg_of(int osc) { return osc % kLegs; }
constexpr bool is_vertical(int osc) { return osc < kLegs; }

class CpgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the integrator produces a non-finite state.
class IntegrationFault : public CpgError {
 public:
  using CpgError::CpgError;
};

struct OscillatorState {
  double phase = 0.0;           // rad, kept in [0, 2π)
  double amplitude = 0.0;       // r
  double amplitude_rate = 0.0;  // r'
  double offset = 0.0;          // x
  double offset_rate = 0.0;     // x'
};

enum class GaitName { Tripod, Ripple, Wave, FourTwo, Custom };

struct GaitSpec {
  GaitName name = GaitName::Custom;
  /// Phase of each leg's vertical oscillator relative to leg 0.
  std::array<double, kLegs> leg_phase_offsets{};
};

/// The four optimized controller parameters.
struct ControlParams {
  double frequency = 8.0 * kPi;  // rad/s
  double vh_phase_diff = kPi / 2.0;
  double amp_left = 1.0;
  double amp_right = 1.0;

  std::array<double, 4> to_array() const {
    return {frequency, vh_phase_diff, amp_left, amp_right};
  }
  static ControlParams from_span(std::span<const double> v) {
    if (v.size() != 4) throw std::invalid_argument("ControlParams needs 4 values");
    return {v[0], v[1], v[2], v[3]};
  }
};

struct ParamBounds {
  static constexpr double kFrequencyMin = kPi;
  static constexpr double kFrequencyMax = 16.0 * kPi;
  static constexpr double kPhaseDiffMin = 0.0;
  static constexpr double kPhaseDiffMax = kPi;
  static constexpr double kAmpMin = 0.0;
  static constexpr double kAmpMax = 1.0;
};

struct Gains {
  double a_r = 20.0;
  double a_x = 20.0;
};

inline constexpr double kDefaultDt = 1e-3;
inline constexpr double kMaxDt = 5e-3;

using Matrix12 = std::array<std::array<double, kOscillators>, kOscillators>;

struct CpgConfig {
  int n_oscillators = kOscillators;
  Matrix12 coupling_weights{};
  Matrix12 phase_biases{};
  double target_frequency = 0.0;
  std::array<double, kOscillators> target_amplitudes{};
  std::array<double, kOscillators> target_offsets{};
  Gains gains;
};

/// Normalized motor command for one leg. Both fields are stroke fractions in
/// [0, 1]; 0.5 is the rest posture.
struct MotorCommand {
  double vertical = 0.5;
  double horizontal = 0.5;
};

/// Output of the vertical/horizontal pair before normalization.
struct RawLegOutput {
  double vertical = 0.0;
  double horizontal = 0.0;
};

inline bool params_in_bounds(const ControlParams& p) {
  auto in = [](double v, double lo, double hi) {
    return std::isfinite(v) && v >= lo && v <= hi;
  };
  return in(p.frequency, ParamBounds::kFrequencyMin, ParamBounds::kFrequencyMax) &&
         in(p.vh_phase_diff, ParamBounds::kPhaseDiffMin, ParamBounds::kPhaseDiffMax) &&
         in(p.amp_left, ParamBounds::kAmpMin, ParamBounds::kAmpMax) &&
         in(p.amp_right, ParamBounds::kAmpMin, ParamBounds::kAmpMax);
}

inline bool gait_is_canonical(const GaitSpec& g) {
  if (g.leg_phase_offsets[0] != 0.0) return false;
  return std::all_of(g.leg_phase_offsets.begin(), g.leg_phase_offsets.end(),
                     [](double o) { return std::isfinite(o) && o >= 0.0 && o < kTwoPi; });
}

// ---------------------------------------------------------------------------
// Gait catalog

inline std::string_view gait_label(GaitName n) {
  switch (n) {
    case GaitName::Tripod: return "tripod";
    case GaitName::Ripple: return "ripple";
    case GaitName::Wave: return "wave";
    case GaitName::FourTwo: return "four-two";
    case GaitName::Custom: return "custom";
  }
  return "custom";
}

inline GaitSpec gait_from_name(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '_' || c == '-' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  constexpr double p = kPi;
  if (key == "tripod" || key == "dualtripod") {
    return {GaitName::Tripod, {0.0, p, 0.0, p, 0.0, p}};
  }
  if (key == "wave") {
    return {GaitName::Wave,
            {0.0, p / 3.0, 2.0 * p / 3.0, p, 4.0 * p / 3.0, 5.0 * p / 3.0}};
  }
  if (key == "ripple") {
    // Left side spaced by 2π/3, right side the same sequence shifted by π.
    return {GaitName::Ripple,
            {0.0, 2.0 * p / 3.0, 4.0 * p / 3.0, p, 5.0 * p / 3.0, p / 3.0}};
  }
  if (key == "fourtwo") {
    // Front and hind pairs together, middle pair half a cycle later.
    return {GaitName::FourTwo, {0.0, p, 0.0, 0.0, p, 0.0}};
  }
  throw std::invalid_argument("unknown gait name: " + std::string(name));
}

/// Gait from per-leg step-start fractions of a cycle. Discovery runs always use
/// full amplitude on both sides.
inline std::pair<GaitSpec, ControlParams> gait_from_schedule(
    std::span<const double> step_starts, double frequency, double vh_phase_diff) {
  if (step_starts.size() != kLegs) {
    throw std::invalid_argument("gait schedule needs 6 step-start fractions");
  }
  for (double f : step_starts) {
    if (!std::isfinite(f) || f < 0.0 || f >= 1.0) {
      throw std::invalid_argument("step-start fraction outside [0, 1)");
    }
  }
  GaitSpec g{GaitName::Custom, {}};
  for (int leg = 0; leg < kLegs; ++leg) {
    g.leg_phase_offsets[leg] = wrap_phase(kTwoPi * (step_starts[leg] - step_starts[0]));
  }
  g.leg_phase_offsets[0] = 0.0;
  ControlParams params{frequency, vh_phase_diff, 1.0, 1.0};
  return {g, params};
}

// ---------------------------------------------------------------------------
// Network

class CpgNetwork {
 public:
  using State = std::array<OscillatorState, kOscillators>;

  CpgNetwork(CpgConfig config, State state) : config_(config), state_(state) {
    for (int i = 0; i < kOscillators; ++i) {
      // Neighbour order: own-leg partner, same side front to back, other side
      // front to back. Mirrored configurations therefore accumulate the
      // coupling sums in the same order and integrate bit-identically.
      const int leg = leg_of(i);
      auto add = [&](int j) {
        auto& list = neighbours_[i];
        if (j != i && config_.coupling_weights[i][j] != 0.0 &&
            std::find(list.begin(), list.end(), j) == list.end()) {
          list.push_back(j);
        }
      };
      add(is_vertical(i) ? horizontal_index(leg) : vertical_index(leg));
      const int same = is_left(leg) ? 0 : 3;
      const int other = is_left(leg) ? 3 : 0;
      for (int k = 0; k < 3; ++k) add(vertical_index(same + k));
      for (int k = 0; k < 3; ++k) add(vertical_index(other + k));
      for (int k = 0; k < 3; ++k) add(horizontal_index(same + k));
      for (int k = 0; k < 3; ++k) add(horizontal_index(other + k));
    }
  }

  const CpgConfig& config() const { return config_; }
  const State& state() const { return state_; }
  State& mutable_state() { return state_; }
  double time() const { return time_; }

  /// One classical RK4 step.
  void step(double dt) {
    if (!(dt > 0.0) || dt > kMaxDt) {
      throw std::invalid_argument("step size must be in (0, 5 ms]");
    }
    Flat y = flatten();
    Flat k1 = derivative(y);
    Flat k2 = derivative(axpy(y, 0.5 * dt, k1));
    Flat k3 = derivative(axpy(y, 0.5 * dt, k2));
    Flat k4 = derivative(axpy(y, dt, k3));
    for (std::size_t n = 0; n < y.size(); ++n) {
      y[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw IntegrationFault("non-finite oscillator state");
    }
    unflatten(y);
    time_ += dt;
  }

 private:
  static constexpr int kVars = 5;
  using Flat = std::array<double, kOscillators * kVars>;

  Flat flatten() const {
    Flat y{};
    for (int i = 0; i < kOscillators; ++i) {
      const auto& s = state_[i];
      y[kVars * i + 0] = s.phase;
      y[kVars * i + 1] = s.amplitude;
      y[kVars * i + 2] = s.amplitude_rate;
      y[kVars * i + 3] = s.offset;
      y[kVars * i + 4] = s.offset_rate;
    }
    return y;
  }

  void unflatten(const Flat& y) {
    for (int i = 0; i < kOscillators; ++i) {
      auto& s = state_[i];
      s.phase = wrap_phase(y[kVars * i + 0]);
      s.amplitude = y[kVars * i + 1];
      s.amplitude_rate = y[kVars * i + 2];
      s.offset = y[kVars * i + 3];
      s.offset_rate = y[kVars * i + 4];
    }
  }

  static Flat axpy(const Flat& y, double a, const Flat& k) {
    Flat out;
    for (std::size_t n = 0; n < y.size(); ++n) out[n] = y[n] + a * k[n];
    return out;
  }

  Flat derivative(const Flat& y) const {
    Flat d{};
    const double a_r = config_.gains.a_r;
    const double a_x = config_.gains.a_x;
    for (int i = 0; i < kOscillators; ++i) {
      const double phi_i = y[kVars * i];
      double coupling = 0.0;
      for (int j : neighbours_[i]) {
        coupling += config_.coupling_weights[i][j] * y[kVars * j + 1] *
                    std::sin(y[kVars * j] - phi_i - config_.phase_biases[i][j]);
      }
      d[kVars * i + 0] = config_.target_frequency + coupling;
      d[kVars * i + 1] = y[kVars * i + 2];
      d[kVars * i + 2] =
          a_r * (a_r / 4.0 * (config_.target_amplitudes[i] - y[kVars * i + 1]) - y[kVars * i + 2]);
      d[kVars * i + 3] = y[kVars * i + 4];
      d[kVars * i + 4] =
          a_x * (a_x / 4.0 * (config_.target_offsets[i] - y[kVars * i + 3]) - y[kVars * i + 4]);
    }
    return d;
  }

  CpgConfig config_;
  State state_;
  std::array<std::vector<int>, kOscillators> neighbours_;
  double time_ = 0.0;
};

/// Functional form of CpgNetwork::step.
inline CpgNetwork step(CpgNetwork network, double dt) {
  network.step(dt);
  return network;
}

/// Builds the 12-oscillator network for a gait. The network starts at rest
/// (r = r' = x = x' = 0) with phases already at their locked offsets: vertical
/// oscillators at the gait offsets, horizontal ones lagging by vh_phase_diff.
inline CpgNetwork build_network(const GaitSpec& gait, const ControlParams& params,
                                Gains gains = {}) {
  if (!gait_is_canonical(gait)) {
    throw std::invalid_argument("gait offsets must lie in [0, 2π) with leg 0 at 0");
  }
  if (!params_in_bounds(params)) {
    throw std::invalid_argument("control parameters outside search bounds");
  }
  if (!(gains.a_r > 0.0) || !(gains.a_x > 0.0)) {
    throw std::invalid_argument("oscillator gains must be positive");
  }
  CpgConfig cfg;
  cfg.gains = gains;
  cfg.target_frequency = params.frequency;
  const auto& off = gait.leg_phase_offsets;
  for (int a = 0; a < kLegs; ++a) {
    for (int b = 0; b < kLegs; ++b) {
      if (a == b) continue;
      cfg.coupling_weights[a][b] = kVerticalCoupling;
      cfg.phase_biases[a][b] = off[b] - off[a];
    }
    const int v = vertical_index(a);
    const int h = horizontal_index(a);
    cfg.coupling_weights[v][h] = kVerticalCoupling;
    cfg.coupling_weights[h][v] = kVerticalCoupling;
    // Locked state: phi_h = phi_v - vh_phase_diff.
    cfg.phase_biases[h][v] = params.vh_phase_diff;
    cfg.phase_biases[v][h] = -params.vh_phase_diff;
    const double amp = is_left(a) ? params.amp_left : params.amp_right;
    cfg.target_amplitudes[v] = amp;
    cfg.target_amplitudes[h] = amp;
  }
  CpgNetwork::State st{};
  for (int leg = 0; leg < kLegs; ++leg) {
    st[vertical_index(leg)].phase = off[leg];
    st[horizontal_index(leg)].phase = wrap_phase(off[leg] - params.vh_phase_diff);
  }
  return CpgNetwork(cfg, st);
}

// ---------------------------------------------------------------------------
// Motor output

/// Piecewise map from one vertical (i) / horizontal (j) oscillator pair to raw
/// motor positions. The vertical motor holds full extension for the first half
/// of its cycle and follows x + r cos(phi) in the second; the horizontal motor
/// follows its cosine only in its own second half and otherwise holds full
/// extension while the leg is down or snaps back to full retraction while the
/// leg is lifted.
inline RawLegOutput raw_leg_output(const OscillatorState& v, const OscillatorState& h) {
  const bool v_active = v.phase > kPi;
  const bool h_active = h.phase > kPi;
  RawLegOutput out;
  out.vertical = v_active ? v.offset + v.amplitude * std::cos(v.phase) : v.offset + v.amplitude;
  if (h_active) {
    out.horizontal = h.offset + h.amplitude * std::cos(h.phase);
  } else {
    out.horizontal = v_active ? h.offset - h.amplitude : h.offset + h.amplitude;
  }
  return out;
}

inline double normalize_stroke(double raw) {
  return std::clamp(0.5 * (raw + 1.0), 0.0, 1.0);
}

inline std::array<MotorCommand, kLegs> motor_output(const CpgNetwork& network) {
  std::array<MotorCommand, kLegs> cmds;
  const auto& s = network.state();
  for (int leg = 0; leg < kLegs; ++leg) {
    auto raw = raw_leg_output(s[vertical_index(leg)], s[horizontal_index(leg)]);
    cmds[leg] = {normalize_stroke(raw.vertical), normalize_stroke(raw.horizontal)};
  }
  return cmds;
}

// ---------------------------------------------------------------------------
// Trajectory dump and configuration text

inline void write_trajectory_header(std::ostream& os) { os << "t,osc_id,phi,r,x,output\n"; }

inline void write_trajectory_rows(std::ostream& os, const CpgNetwork& network) {
  const auto& s = network.state();
  for (int i = 0; i < kOscillators; ++i) {
    const int leg = leg_of(i);
    auto raw = raw_leg_output(s[vertical_index(leg)], s[horizontal_index(leg)]);
    os << format_double(network.time()) << ',' << i << ',' << format_double(s[i].phase) << ','
       << format_double(s[i].amplitude) << ',' << format_double(s[i].offset) << ','
       << format_double(is_vertical(i) ? raw.vertical : raw.horizontal) << '\n';
  }
}

}  // namespace gaitforge::cpg
