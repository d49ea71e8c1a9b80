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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gaitforge/acquisition.hpp"
#include "gaitforge/primitives.hpp"

namespace gf = gaitforge;
namespace bo = gaitforge::bo;
namespace cpg = gaitforge::cpg;
namespace pr = gaitforge::primitives;
namespace sim = gaitforge::sim;
using gf::kPi;

namespace {

constexpr double kDuration = 5.0;

bo::SearchSpace control_space() {
  return bo::SearchSpace(
      {{"omega", kPi, 16 * kPi}, {"vh_phase_diff", 0.0, kPi}, {"amp_left", 0.0, 1.0}, {"amp_right", 0.0, 1.0}});
}

bo::Record trial_record(const std::vector<double>& theta, std::uint64_t seed) {
  const auto r = sim::run_trial(cpg::gait_from_name("tripod"), cpg::ControlParams::from_span(theta), {},
                                kDuration, seed);
  return {0, seed, theta, {}, {0.0}, {{"dx", r.dx}, {"dy", r.dy}, {"dpsi", r.dpsi}}, 0.0};
}

// 80 Latin-hypercube trials plus one null trial; simulator noise off.
const bo::History& training_history() {
  static const bo::History h = [] {
    bo::History out(control_space().names(), {}, {"unused"});
    out.id = "test/lhs";
    std::uint64_t seed = 0;
    for (const auto& theta : bo::initial_design(control_space(), 80, 17)) out.append(trial_record(theta, seed++));
    out.append(trial_record({8 * kPi, 1.0, 0.0, 0.0}, seed++));
    return out;
  }();
  return h;
}

const pr::PrimitiveModel& model() {
  static const pr::PrimitiveModel m = pr::build_primitive_model(training_history(), control_space());
  return m;
}

double model_error(const std::vector<double>& theta, sim::Vec2 t) {
  const auto d = pr::predict_displacement(model(), theta);
  return std::hypot(d.dx - t.x, d.dy - t.y);
}

sim::Maze open_field(sim::Vec2 goal, double tol) {
  sim::Maze m;
  m.goal = goal;
  m.goal_tolerance = tol;
  return m;
}

}  // namespace

TEST(PrimitiveModel, Preconditions) {
  bo::History few(control_space().names(), {}, {"unused"});
  for (int i = 0; i < 19; ++i) few.append(trial_record({8 * kPi, 1.0, 0.5, 0.5}, i));
  EXPECT_THROW(pr::build_primitive_model(few, control_space()), pr::PrimitiveError);
  few.append({0, 0, {8 * kPi, 1.0, 0.5, 0.5}, {}, {0.0}, {{"dx", 1.0}, {"dy", 0.0}}, 0.0});
  EXPECT_THROW(pr::build_primitive_model(few, control_space()), pr::PrimitiveError);
  EXPECT_THROW(pr::build_primitive_model(training_history(), bo::SearchSpace({{"x", 0.0, 1.0}})),
               pr::PrimitiveError);
  EXPECT_THROW(pr::predict_displacement(model(), std::vector<double>{1.0}), pr::PrimitiveError);
}

TEST(PrimitiveModel, ProvenanceAndRadius) {
  EXPECT_EQ(model().source, "test/lhs");
  double r = 0.0;
  for (const auto& rec : training_history().records()) {
    r = std::max(r, std::hypot(rec.metadata.at("dx"), rec.metadata.at("dy")));
  }
  EXPECT_EQ(model().training_radius, r);
}

TEST(PrimitiveModel, NullTrialPredictsNoMotion) {
  const auto d = pr::predict_displacement(model(), std::vector<double>{8 * kPi, 1.0, 0.0, 0.0});
  EXPECT_LT(std::abs(d.dx), 3 * std::sqrt(d.var_dx) + 1e-3);
  EXPECT_LT(std::abs(d.dy), 3 * std::sqrt(d.var_dy) + 1e-3);
  EXPECT_LT(std::abs(d.dpsi), 3 * std::sqrt(d.var_dpsi) + 1e-3);
  EXPECT_FALSE(d.extrapolated);
}

TEST(PrimitiveModel, TrainingPointsWithinThreeSigma) {
  const auto& h = training_history();
  int inside = 0;
  for (const auto& r : h.records()) {
    const auto d = pr::predict_displacement(model(), r.theta);
    inside += std::abs(d.dx - r.metadata.at("dx")) <= 3 * std::sqrt(d.var_dx) + 1e-6 &&
              std::abs(d.dy - r.metadata.at("dy")) <= 3 * std::sqrt(d.var_dy) + 1e-6;
  }
  // A 3σ band holds for the vast majority; GP noise estimates are themselves noisy.
  EXPECT_GE(inside, static_cast<int>(0.95 * h.size()));
}

TEST(PrimitiveModel, FarAwayRevertsToPrior) {
  const std::vector<double> far{200 * kPi, 40.0, 30.0, -30.0};
  const auto d = pr::predict_displacement(model(), far);
  EXPECT_TRUE(d.extrapolated);
  auto prior = [](const gf::gp::GpModel& g) {
    const double s = g.dataset().output_transform.scale;
    return s * s * g.hyperparams().signal_variance;
  };
  EXPECT_NEAR(d.var_dx, prior(model().gx), 0.01 * prior(model().gx));
  EXPECT_NEAR(d.var_dy, prior(model().gy), 0.01 * prior(model().gy));
  EXPECT_NEAR(d.var_dpsi, prior(model().gpsi), 0.01 * prior(model().gpsi));
}

TEST(SolvePrimitive, HitsTrainingPrediction) {
  const auto& r = training_history()[5];
  const auto d = pr::predict_displacement(model(), r.theta);
  const sim::Vec2 t{d.dx, d.dy};
  const auto theta = pr::solve_primitive(model(), t, 10000, 1);
  EXPECT_TRUE(control_space().contains(theta));
  EXPECT_LE(pr::expected_error_unit(model(), control_space().to_unit(theta), t),
            pr::expected_error_unit(model(), control_space().to_unit(r.theta), t) + 1e-12);
  EXPECT_EQ(theta, pr::solve_primitive(model(), t, 10000, 1));
  EXPECT_THROW(pr::solve_primitive(model(), t, 0, 1), pr::PrimitiveError);
}

TEST(SolvePrimitive, NullTarget) {
  const auto theta = pr::solve_primitive(model(), {0.0, 0.0}, 10000, 2);
  // No simulator noise in training, so 3σ_obs collapses to the model's own spread.
  EXPECT_LT(model_error(theta, {0.0, 0.0}), 0.3);
}

TEST(SolvePrimitive, MoreSamplesNoWorseInMedian) {
  std::vector<double> small, large;
  gf::Rng rng = gf::make_rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const sim::Vec2 t{gf::uniform(rng, 0.0, 5.0), gf::uniform(rng, -3.0, 3.0)};
    auto err = [&](int n) {
      return pr::expected_error_unit(model(), control_space().to_unit(pr::solve_primitive(model(), t, n, seed)), t);
    };
    small.push_back(err(100));
    large.push_back(err(10000));
  }
  std::nth_element(small.begin(), small.begin() + 10, small.end());
  std::nth_element(large.begin(), large.begin() + 10, large.end());
  EXPECT_LE(large[10], small[10]);
}

TEST(PlanPath, OneStepInOpenField) {
  const auto& r = training_history()[5];
  const auto d = pr::predict_displacement(model(), r.theta);
  const auto maze = open_field({d.dx, d.dy}, 1.0);
  const auto path = pr::plan_path(model(), maze, {}, 3);
  ASSERT_EQ(path.steps.size(), 1u);
  EXPECT_LT(path.expected_error, maze.goal_tolerance);
  const auto& s = path.steps[0];
  const auto again = pr::predict_displacement(model(), s.theta);
  EXPECT_EQ(s.predicted.dx, again.dx);
  EXPECT_EQ(s.predicted.dy, again.dy);
  EXPECT_EQ(s.predicted.dpsi, again.dpsi);
  const auto p = sim::compose(path.start, s.predicted.dx, s.predicted.dy, s.predicted.dpsi);
  EXPECT_EQ(p.x, s.pose.x);
  EXPECT_EQ(p.y, s.pose.y);
  EXPECT_EQ(p.psi, s.pose.psi);
}

TEST(PlanPath, GoalAlreadyReachedGivesEmptyPath) {
  const auto path = pr::plan_path(model(), open_field({0.5, 0.0}, 1.0), {}, 0);
  EXPECT_TRUE(path.steps.empty());
  const auto ex = pr::execute_plan(path, 0);
  EXPECT_TRUE(ex.steps.empty());
  EXPECT_EQ(ex.end().x, 0.0);
  EXPECT_EQ(ex.end().y, 0.0);
  EXPECT_NEAR(ex.terminal_error, 0.5, 1e-15);
}

TEST(PlanPath, WallAcrossCorridorBlocks) {
  auto maze = open_field({12.0, 0.0}, 1.0);
  // The start already lies within the wall margin, so every move collides.
  maze.walls.push_back({{3.0, -50.0}, {3.0, 50.0}});
  try {
    pr::plan_path(model(), maze, {}, 0);
    FAIL() << "expected BlockedSegment";
  } catch (const pr::BlockedSegment& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_TRUE(e.partial().steps.empty());
  }
}

TEST(PlanPath, StepBudgetExhausted) {
  pr::PlannerOptions opt;
  opt.step_budget = 2;
  opt.n_samples = 500;
  try {
    pr::plan_path(model(), open_field({200.0, 0.0}, 1.0), {}, 0, opt);
    FAIL() << "expected IncompletePath";
  } catch (const pr::IncompletePath& e) {
    EXPECT_EQ(e.partial().steps.size(), 2u);
  }
}

TEST(PlanPath, DoglegIsCollisionFree) {
  auto maze = open_field({18.0, 0.0}, 3.0);
  maze.walls.push_back({{9.0, -30.0}, {9.0, 0.0}});
  const std::vector<sim::Vec2> waypoints{{9.0, 7.0}};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    pr::PlannerOptions opt;
    opt.n_samples = 3000;
    const auto path = pr::plan_path(model(), maze, waypoints, seed, opt);
    EXPECT_GE(path.steps.size(), 2u);
    EXPECT_TRUE(pr::path_is_collision_free(path, maze));
    EXPECT_LT(path.expected_error, maze.goal_tolerance);
  }
}

TEST(ExecutePlan, OneStepRealizedVersusExpected) {
  int ok = 0;
  gf::Rng rng = gf::make_rng(21);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const sim::Vec2 goal{gf::uniform(rng, 0.5, 4.0), gf::uniform(rng, -2.0, 2.0)};
    pr::Path path;
    path.goal = goal;
    pr::PlanStep step;
    step.theta = pr::solve_primitive(model(), goal, 10000, i);
    step.predicted = pr::predict_displacement(model(), step.theta);
    step.pose = sim::compose(path.start, step.predicted.dx, step.predicted.dy, step.predicted.dpsi);
    path.steps.push_back(step);
    const auto& p = step.predicted;
    const double expected = pr::expected_error(p.dx, p.dy, p.var_dx, p.var_dy, goal);
    pr::ExecutionOptions eo;
    eo.duration = kDuration;
    const auto ex = pr::execute_plan(path, i, eo);
    ASSERT_EQ(ex.steps.size(), 1u);
    EXPECT_NEAR(ex.steps[0].step_error, std::hypot(ex.steps[0].trial.dx - p.dx, ex.steps[0].trial.dy - p.dy), 1e-15);
    ok += ex.terminal_error <= 3 * expected;
  }
  EXPECT_GE(ok, 9);
}

TEST(Csv, PathAndExecutionFormats) {
  const auto& r = training_history()[5];
  const auto d = pr::predict_displacement(model(), r.theta);
  const auto path = pr::plan_path(model(), open_field({d.dx, d.dy}, 1.0), {}, 3);
  std::ostringstream ps;
  pr::write_path_csv(ps, path, control_space().names());
  std::istringstream in(ps.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,omega,vh_phase_diff,amp_left,amp_right,pred_dx,pred_dy,pred_dpsi,world_x,world_y,world_psi");
  std::getline(in, line);
  EXPECT_EQ(line, "0,,,,,0,0,0,0,0,0");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);

  const auto ex = pr::execute_plan(path, 0);
  std::ostringstream es;
  pr::write_execution_csv(es, ex);
  const std::string text = es.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,real_dx,real_dy,real_dpsi,world_x,world_y,world_psi,step_error");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
