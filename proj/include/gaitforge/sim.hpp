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

// Planar surrogate for the hexapod walker.
//
// The model is kinematic. Every control step the CPG is advanced and each
// leg's motor command converted to millimetres. A leg is in stance while its
// vertical extension is at or above the contact threshold. Feet grip only
// while pushing rearward (horizontal extension) and slide when a loaded foot
// moves forward. The body velocity is the mean rearward foot velocity over
// stance legs (scaled by a traction constant) and the yaw rate is the
// right-minus-left share of that push over the half body width. On a slope the
// push is scaled by cos(incline) and the body slides downhill at
// slip_gain * sin(incline) * (fraction of legs lifted). Energy is the work of
// a constant motor force over extension strokes only.
//
// All outputs use the real robot's units: mm, rad, µJ.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "gaitforge/common.hpp"
#include "gaitforge/cpg.hpp"

namespace gaitforge::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct RobotGeometry {
  double body_length = 13.0;  // mm
  double body_width = 9.6;    // mm
  double mass = 200.0;        // mg
  double vertical_stroke = 0.6;
  double horizontal_stroke = 2.0;

  double half_width() const { return 0.5 * body_width; }

  /// Leg anchors, legs 0-2 left front to back, 3-5 right front to back.
  std::array<Vec2, cpg::kLegs> leg_positions() const {
    std::array<Vec2, cpg::kLegs> p;
    for (int k = 0; k < 3; ++k) {
      const double x = body_length * (0.5 - 0.5 * k) * (2.0 / 3.0);
      p[k] = {x, half_width()};
      p[3 + k] = {x, -half_width()};
    }
    return p;
  }
};

inline constexpr double kDefaultObsNoise = 0.2;  // mm

/// Every tunable constant of the surrogate.
struct SimConfig {
  double dt = cpg::kDefaultDt;
  double traction = 1.0;
  double contact_threshold = 0.2;  // vertical stroke fraction
  double yaw_gain = 2.0;
  double slip_gain = 87.0;         // mm/s
  double motor_force = 1.0;        // mN
  double drift_weight = 1.0;       // λ_drift
  double obs_noise = 0.0;          // mm, standard deviation on (dx, dy)
  cpg::Gains gains;
  RobotGeometry geometry;
};

struct Context {
  double incline_deg = 0.0;
  static constexpr double kMaxIncline = 25.0;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Applies a body-frame displacement to a world pose.
inline Pose compose(const Pose& p, double dx, double dy, double dpsi) {
  const double c = std::cos(p.psi);
  const double s = std::sin(p.psi);
  return {p.x + c * dx - s * dy, p.y + s * dx + c * dy, p.psi + dpsi};
}

using ContactState = std::array<bool, cpg::kLegs>;

struct TrialResult {
  double dx = 0.0;     // mm, along the initial heading
  double dy = 0.0;     // mm, left of the initial heading
  double dpsi = 0.0;   // rad
  double drift = 0.0;  // mm, max |lateral| deviation
  double energy = 0.0; // µJ
  std::vector<ContactState> contact_trace;
};

inline void write_trial_header(std::ostream& os) { os << "dx,dy,dpsi,drift,energy,steps\n"; }

inline void write_trial_row(std::ostream& os, const TrialResult& r) {
  os << format_double(r.dx) << ',' << format_double(r.dy) << ',' << format_double(r.dpsi) << ','
     << format_double(r.drift) << ',' << format_double(r.energy) << ',' << r.contact_trace.size()
     << '\n';
}

/// Incremental rollout of one trial; run_trial drives it to completion.
class Rollout {
 public:
  Rollout(const cpg::GaitSpec& gait, const cpg::ControlParams& params, Context context,
          const SimConfig& config)
      : config_(config),
        network_(cpg::build_network(gait, params, config.gains)),
        cos_incline_(std::cos(context.incline_deg * kPi / 180.0)),
        slip_speed_(config.slip_gain * std::sin(context.incline_deg * kPi / 180.0)) {
    if (!(context.incline_deg >= 0.0 && context.incline_deg <= Context::kMaxIncline)) {
      throw std::invalid_argument("incline outside [0, 25] degrees");
    }
    previous_ = cpg::motor_output(network_);
  }

  void advance(long steps) {
    const auto& geo = config_.geometry;
    for (long n = 0; n < steps; ++n) {
      network_.step(config_.dt);
      const auto cmd = cpg::motor_output(network_);
      ContactState contact{};
      int n_stance = 0;
      for (int leg = 0; leg < cpg::kLegs; ++leg) {
        contact[leg] = cmd[leg].vertical >= config_.contact_threshold;
        n_stance += contact[leg] ? 1 : 0;
      }
      double push_left = 0.0;
      double push_right = 0.0;
      for (int leg = 0; leg < cpg::kLegs; ++leg) {
        const double dv = (cmd[leg].vertical - previous_[leg].vertical) * geo.vertical_stroke;
        const double dh = (cmd[leg].horizontal - previous_[leg].horizontal) * geo.horizontal_stroke;
        energy_ += config_.motor_force * (std::max(dv, 0.0) + std::max(dh, 0.0));
        if (contact[leg]) (cpg::is_left(leg) ? push_left : push_right) += std::max(dh, 0.0);
      }
      double forward = 0.0;
      double turn = 0.0;
      if (n_stance > 0) {
        push_left /= n_stance;
        push_right /= n_stance;
        forward = config_.traction * cos_incline_ * (push_left + push_right);
        turn = config_.yaw_gain * config_.traction * (push_right - push_left) / geo.half_width();
      }
      const double heading = pose_.psi + 0.5 * turn;
      pose_.x += forward * std::cos(heading);
      pose_.y += forward * std::sin(heading);
      pose_.x -= slip_speed_ * (cpg::kLegs - n_stance) / cpg::kLegs * config_.dt;
      pose_.psi += turn;
      drift_ = std::max(drift_, std::abs(pose_.y));
      trace_.push_back(contact);
      previous_ = cmd;
    }
  }

  const Pose& pose() const { return pose_; }
  double energy() const { return energy_; }
  const cpg::CpgNetwork& network() const { return network_; }

  TrialResult result() const {
    return {pose_.x, pose_.y, pose_.psi, drift_, energy_, trace_};
  }

 private:
  SimConfig config_;
  cpg::CpgNetwork network_;
  double cos_incline_;
  double slip_speed_;
  std::array<cpg::MotorCommand, cpg::kLegs> previous_{};
  Pose pose_;
  double energy_ = 0.0;
  double drift_ = 0.0;
  std::vector<ContactState> trace_;
};

inline long steps_for(double duration, double dt) {
  return std::lround(duration / dt);
}

/// Simulates one trial from rest. Observation noise (if configured) is added to
/// the final (dx, dy) from a stream seeded by `seed`.
inline TrialResult run_trial(const cpg::GaitSpec& gait, const cpg::ControlParams& params,
                             Context context, double duration, std::uint64_t seed,
                             const SimConfig& config = {}) {
  if (!(duration > 0.0)) throw std::invalid_argument("trial duration must be positive");
  Rollout rollout(gait, params, context, config);
  rollout.advance(steps_for(duration, config.dt));
  TrialResult r = rollout.result();
  if (config.obs_noise > 0.0) {
    Rng rng = make_rng(seed, 0x6e6f697365ULL);
    const auto [nx, ny] = standard_normal_pair(rng);
    r.dx += config.obs_noise * nx;
    r.dy += config.obs_noise * ny;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Objectives

/// Forward distance minus a drift penalty; for 1 s trials this is a speed in mm/s.
inline double speed_objective(const TrialResult& r, double drift_weight = 1.0) {
  return r.dx - drift_weight * r.drift;
}

/// Extension-only motor work in µJ.
inline double energy_objective(const TrialResult& r) { return r.energy; }

inline double target_objective(const TrialResult& r, Vec2 target) {
  return std::hypot(target.x - r.dx, target.y - r.dy);
}

}  // namespace gaitforge::sim
