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

// Motor primitives: a displacement model θ -> (Δx, Δy, Δψ) learned from the
// trials of a contextual run, its inversion for a target displacement, and a
// greedy shooting planner that chains primitives through a maze.
//
// The heading change Δψ is learned alongside (Δx, Δy) because chaining steps
// needs the post-step heading.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/acquisition.hpp"
#include "gaitforge/common.hpp"
#include "gaitforge/cpg.hpp"
#include "gaitforge/gp.hpp"
#include "gaitforge/history.hpp"
#include "gaitforge/maze.hpp"
#include "gaitforge/sim.hpp"

namespace gaitforge::primitives {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sim::Pose;
using sim::Vec2;

inline constexpr std::size_t kMinRecords = 20;

class PrimitiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Displacement {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;
  double var_dx = 0.0;
  double var_dy = 0.0;
  double var_dpsi = 0.0;
  bool extrapolated = false;  // query outside the training bounds
};

/// Three independent GPs over identical (unit-cube) parameter inputs.
struct PrimitiveModel {
  gp::GpModel gx;
  gp::GpModel gy;
  gp::GpModel gpsi;
  bo::SearchSpace space;
  std::string source;           // id of the history it was built from
  double training_radius = 0.0; // largest observed |(Δx, Δy)|, mm
};

/// Builds the model from every record of `history`; contexts are ignored.
inline PrimitiveModel build_primitive_model(const bo::History& history, const bo::SearchSpace& space,
                                            gp::FitOptions fit_options = {}) {
  if (history.size() < kMinRecords) {
    throw PrimitiveError("primitive model needs at least " + std::to_string(kMinRecords) +
                         " records, got " + std::to_string(history.size()));
  }
  if (history.theta_names() != space.names()) throw PrimitiveError("history parameters do not match the space");
  const auto n = static_cast<Eigen::Index>(history.size());
  MatrixXd x(n, space.dim());
  VectorXd dx(n), dy(n), dpsi(n);
  double radius = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = history[static_cast<std::size_t>(i)];
    for (const char* key : {"dx", "dy", "dpsi"}) {
      if (!r.metadata.contains(key)) {
        throw PrimitiveError("record " + std::to_string(i) + " lacks observed '" + key + "'");
      }
    }
    x.row(i) = space.to_unit(r.theta).transpose();
    dx[i] = r.metadata.at("dx");
    dy[i] = r.metadata.at("dy");
    dpsi[i] = r.metadata.at("dpsi");
    radius = std::max(radius, std::hypot(dx[i], dy[i]));
  }
  const auto t = space.transform();
  auto fit_one = [&](const VectorXd& y, std::uint64_t k) {
    gp::FitOptions fo = fit_options;
    fo.seed = mix_seed(fit_options.seed, k);
    return gp::fit(gp::Dataset::from_unit(x, y, t), fo);
  };
  return {fit_one(dx, 0), fit_one(dy, 1), fit_one(dpsi, 2), space, history.id, radius};
}

inline Displacement predict_displacement(const PrimitiveModel& m, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != m.space.dim()) throw PrimitiveError("parameter dimension mismatch");
  const std::vector<double> th(theta.begin(), theta.end());
  const VectorXd u = m.space.to_unit(th);
  const auto px = m.gx.predict_unit(u);
  const auto py = m.gy.predict_unit(u);
  const auto pp = m.gpsi.predict_unit(u);
  return {px.mean, py.mean, pp.mean, px.variance, py.variance, pp.variance, !m.space.contains(th)};
}

/// Root expected squared distance between the displacement and `target`:
/// sqrt(|µ − t|² + σ_x² + σ_y²). Equals the plain Euclidean distance when the
/// model is certain and otherwise steers away from parameters whose predicted
/// match is only a guess.
inline double expected_error(double mx, double my, double vx, double vy, Vec2 target) {
  const double ex = mx - target.x;
  const double ey = my - target.y;
  return std::sqrt(ex * ex + ey * ey + vx + vy);
}

/// Expected error for every row of `unit` (unit-cube parameters).
inline VectorXd expected_errors_unit(const PrimitiveModel& m, const MatrixXd& unit, Vec2 target) {
  VectorXd mx, vx, my, vy;
  m.gx.predict_batch_unit(unit, &mx, &vx);
  m.gy.predict_batch_unit(unit, &my, &vy);
  VectorXd e(unit.rows());
  for (Eigen::Index i = 0; i < unit.rows(); ++i) e[i] = expected_error(mx[i], my[i], vx[i], vy[i], target);
  return e;
}

inline double expected_error_unit(const PrimitiveModel& m, const VectorXd& u, Vec2 target) {
  const auto px = m.gx.predict_unit(u);
  const auto py = m.gy.predict_unit(u);
  return expected_error(px.mean, py.mean, px.variance, py.variance, target);
}

/// Model inversion: argmin_θ of the expected error to `target` over n_samples
/// uniform draws and the training inputs, plus coordinate refinement of the
/// best 10. Never touches the simulator.
inline std::vector<double> solve_primitive(const PrimitiveModel& m, Vec2 target, int n_samples,
                                           std::uint64_t seed, int refine_starts = 10) {
  if (n_samples < 1) throw PrimitiveError("n_samples must be at least 1");
  auto batch = [&](const MatrixXd& u) { return VectorXd(-expected_errors_unit(m, u, target)); };
  auto point = [&](const VectorXd& u) { return -expected_error_unit(m, u, target); };
  bo::ProposeOptions opt;
  opt.candidates = n_samples;
  opt.refine_starts = refine_starts;
  // The training inputs join the random draws, so the solver never does worse
  // than the best parameters already tried.
  return m.space.from_unit(bo::maximize_unit(m.space.dim(), batch, point, seed, opt, m.gx.dataset().inputs));
}

// ---------------------------------------------------------------------------
// Planning

struct PlanStep {
  std::vector<double> theta;
  Displacement predicted;  // body frame
  Pose pose;               // world pose after the step
};

struct Path {
  Pose start;
  Vec2 goal;
  std::vector<PlanStep> steps;
  double expected_error = 0.0;  // mm, predicted terminal distance to the goal

  Pose end() const { return steps.empty() ? start : steps.back().pose; }
};

struct PlannerOptions {
  int n_samples = 10000;
  int step_budget = 25;
  double split_factor = 1.2;  // legs longer than this x training radius are split
  double risk = 1.0;          // posterior std inflation when scoring candidates
  double reach_radius = 0.0;  // overrides the model's training radius when > 0
};

class PlanningError : public PrimitiveError {
 public:
  PlanningError(const std::string& what, Path partial, int step)
      : PrimitiveError(what), partial_(std::move(partial)), step_(step) {}
  const Path& partial() const { return partial_; }
  int step() const { return step_; }

 private:
  Path partial_;
  int step_;
};

/// Every candidate of a step collided with a wall.
class BlockedSegment : public PlanningError {
 public:
  using PlanningError::PlanningError;
};

/// Step budget ran out before the goal was within tolerance.
class IncompletePath : public PlanningError {
 public:
  using PlanningError::PlanningError;
};

inline double distance(const Pose& p, Vec2 q) { return std::hypot(q.x - p.x, q.y - p.y); }

/// Greedy shooting planner. Visits `waypoints` (then the maze goal) in order;
/// a waypoint counts as reached within the maze's goal tolerance. Each step
/// draws n_samples parameter vectors, maps their predicted displacements into
/// the world frame, drops colliding segments, and keeps the candidate with the
/// smallest expected error to the current aim point.
inline Path plan_path(const PrimitiveModel& m, const sim::Maze& maze, std::vector<Vec2> waypoints,
                      std::uint64_t seed, const PlannerOptions& opt = {}) {
  if (opt.n_samples < 1) throw PrimitiveError("n_samples must be at least 1");
  waypoints.push_back(maze.goal);
  Path path;
  path.start = maze.start;
  path.goal = maze.goal;
  Pose pose = maze.start;
  std::size_t target = 0;
  const double reach = opt.split_factor * (opt.reach_radius > 0.0 ? opt.reach_radius : m.training_radius);
  const double k2 = opt.risk * opt.risk;
  const int d = m.space.dim();

  auto advance_targets = [&] {
    while (target + 1 < waypoints.size() && distance(pose, waypoints[target]) <= maze.goal_tolerance) {
      ++target;
    }
  };
  advance_targets();
  for (int step = 0; distance(pose, waypoints.back()) > maze.goal_tolerance || target + 1 < waypoints.size();
       ++step) {
    if (step >= opt.step_budget) {
      path.expected_error = distance(pose, maze.goal);
      throw IncompletePath("step budget of " + std::to_string(opt.step_budget) +
                               " exhausted before reaching the goal",
                           path, step);
    }
    Vec2 aim = waypoints[target];
    const double gap = distance(pose, aim);
    if (reach > 0.0 && gap > reach) {
      aim = {pose.x + (aim.x - pose.x) * reach / gap, pose.y + (aim.y - pose.y) * reach / gap};
    }

    Rng rng = make_rng(seed, 0x706c616e, static_cast<std::uint64_t>(step));
    MatrixXd u(opt.n_samples, d);
    for (int i = 0; i < opt.n_samples; ++i) {
      for (int k = 0; k < d; ++k) u(i, k) = uniform01(rng);
    }
    // Score in the body frame: the aim point seen from the current pose.
    const double c = std::cos(pose.psi);
    const double sn = std::sin(pose.psi);
    const Vec2 local{c * (aim.x - pose.x) + sn * (aim.y - pose.y),
                     -sn * (aim.x - pose.x) + c * (aim.y - pose.y)};
    // A heading error after this step swings everything still to be walked;
    // to first order that adds (remaining route length)^2 * var(Δψ).
    double lever = distance({aim.x, aim.y, 0.0}, waypoints[target]);
    for (std::size_t w = target; w + 1 < waypoints.size(); ++w) {
      lever += std::hypot(waypoints[w + 1].x - waypoints[w].x, waypoints[w + 1].y - waypoints[w].y);
    }
    VectorXd mx, vx, my, vy, mpsi, vpsi;
    m.gx.predict_batch_unit(u, &mx, &vx);
    m.gy.predict_batch_unit(u, &my, &vy);
    m.gpsi.predict_batch_unit(u, &mpsi, &vpsi);
    int best = -1;
    double best_err = std::numeric_limits<double>::infinity();
    for (int i = 0; i < opt.n_samples; ++i) {
      const double err = expected_error(mx[i], my[i], k2 * (vx[i] + lever * lever * vpsi[i]), k2 * vy[i], local);
      if (err >= best_err) continue;  // cheap test first; collision check only for improvements
      const Pose end = sim::compose(pose, mx[i], my[i], 0.0);
      if (sim::segment_collides({pose.x, pose.y}, {end.x, end.y}, maze)) continue;
      best = i;
      best_err = err;
    }
    if (best < 0) {
      path.expected_error = distance(pose, maze.goal);
      throw BlockedSegment("every candidate of step " + std::to_string(step) + " collides with a wall",
                           path, step);
    }
    PlanStep ps;
    ps.theta = m.space.from_unit(u.row(best).transpose());
    ps.predicted = predict_displacement(m, ps.theta);
    ps.pose = sim::compose(pose, ps.predicted.dx, ps.predicted.dy, ps.predicted.dpsi);
    pose = ps.pose;
    path.steps.push_back(std::move(ps));
    advance_targets();
  }
  path.expected_error = distance(pose, maze.goal);
  return path;
}

/// True when no step's world segment comes within the wall margin.
inline bool path_is_collision_free(const Path& path, const sim::Maze& maze) {
  Pose prev = path.start;
  for (const auto& s : path.steps) {
    if (sim::segment_collides({prev.x, prev.y}, {s.pose.x, s.pose.y}, maze)) return false;
    prev = s.pose;
  }
  return true;
}

struct ExecutionOptions {
  cpg::GaitSpec gait = cpg::gait_from_name("tripod");
  sim::Context context;
  double duration = 5.0;  // s per primitive
  sim::SimConfig sim;
};

struct ExecutedStep {
  sim::TrialResult trial;
  Pose pose;            // realized world pose after the step
  double step_error;    // |realized − predicted| body-frame displacement, mm
};

struct Execution {
  Pose start;
  std::vector<ExecutedStep> steps;
  double terminal_error = 0.0;  // realized distance to the path's goal, mm

  Pose end() const { return steps.empty() ? start : steps.back().pose; }
};

/// Open-loop execution: each step's θ is run from rest in the simulator and
/// the realized displacements are chained.
inline Execution execute_plan(const Path& path, std::uint64_t seed, const ExecutionOptions& opt = {}) {
  Execution ex;
  ex.start = path.start;
  Pose pose = path.start;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& ps = path.steps[i];
    const auto params = cpg::ControlParams::from_span(ps.theta);
    sim::TrialResult tr = sim::run_trial(opt.gait, params, opt.context, opt.duration,
                                         mix_seed(seed, 0x65786563, i), opt.sim);
    pose = sim::compose(pose, tr.dx, tr.dy, tr.dpsi);
    const double err = std::hypot(tr.dx - ps.predicted.dx, tr.dy - ps.predicted.dy);
    tr.contact_trace.clear();
    tr.contact_trace.shrink_to_fit();
    ex.steps.push_back({std::move(tr), pose, err});
  }
  ex.terminal_error = distance(pose, path.goal);
  return ex;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_path_csv(std::ostream& os, const Path& path, const std::vector<std::string>& theta_names) {
  os << "step";
  for (const auto& n : theta_names) os << ',' << n;
  os << ",pred_dx,pred_dy,pred_dpsi,world_x,world_y,world_psi\n";
  os << 0;
  for (std::size_t k = 0; k < theta_names.size(); ++k) os << ',';
  os << ",0,0,0," << format_double(path.start.x) << ',' << format_double(path.start.y) << ','
     << format_double(path.start.psi) << '\n';
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& s = path.steps[i];
    os << i + 1;
    for (double v : s.theta) os << ',' << format_double(v);
    os << ',' << format_double(s.predicted.dx) << ',' << format_double(s.predicted.dy) << ','
       << format_double(s.predicted.dpsi) << ',' << format_double(s.pose.x) << ','
       << format_double(s.pose.y) << ',' << format_double(s.pose.psi) << '\n';
  }
}

inline void write_execution_csv(std::ostream& os, const Execution& ex) {
  os << "step,real_dx,real_dy,real_dpsi,world_x,world_y,world_psi,step_error\n";
  os << "0,0,0,0," << format_double(ex.start.x) << ',' << format_double(ex.start.y) << ','
     << format_double(ex.start.psi) << ",0\n";
  for (std::size_t i = 0; i < ex.steps.size(); ++i) {
    const auto& s = ex.steps[i];
    os << i + 1 << ',' << format_double(s.trial.dx) << ',' << format_double(s.trial.dy) << ','
       << format_double(s.trial.dpsi) << ',' << format_double(s.pose.x) << ','
       << format_double(s.pose.y) << ',' << format_double(s.pose.psi) << ','
       << format_double(s.step_error) << '\n';
  }
}

}  // namespace gaitforge::primitives
