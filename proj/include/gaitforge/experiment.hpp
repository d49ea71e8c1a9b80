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

// The experiment curriculum behind the `gaitforge` command: walk, moo,
// discover, incline, curve, primitives and plan. Each run reads a Config,
// writes CSVs into an output directory and finishes with manifest.json, whose
// `config` object replays the run exactly.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/bayesopt.hpp"
#include "gaitforge/common.hpp"
#include "gaitforge/config.hpp"
#include "gaitforge/cpg.hpp"
#include "gaitforge/gp.hpp"
#include "gaitforge/history.hpp"
#include "gaitforge/maze.hpp"
#include "gaitforge/pareto.hpp"
#include "gaitforge/primitives.hpp"
#include "gaitforge/sim.hpp"
#include "json.hpp"

#ifndef GAITFORGE_VERSION
#define GAITFORGE_VERSION "dev"
#endif

namespace gaitforge::experiment {

namespace fs = std::filesystem;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"walk",  "moo",        "discover", "incline",
                                              "curve", "primitives", "plan"};
  return names;
}

enum ExitCode : int { kOk = 0, kConfigError = 2, kEvaluatorFault = 3 };

/// Command-line overrides; they take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed_base;
  std::optional<bool> noise;
};

/// Everything an experiment needs, resolved from the config.
struct Settings {
  std::string experiment;
  std::uint64_t seed_base = 0;
  int seeds = 20;
  bool noise = true;
  double duration = 1.0;  // s per trial
  std::vector<std::string> gaits{"tripod"};
  sim::SimConfig sim;      // obs_noise already reflects the noise switch
  bo::BoOptions bo;
  std::vector<double> reference;  // hypervolume reference point
  double rho = 0.05;
  int simplex_divisions = 10;
  int solve_samples = 10000;
  int solve_refine = 10;
  primitives::PlannerOptions planner;
  long fault_at = -1;  // test hook: evaluator call that throws, -1 disables

  std::vector<std::uint64_t> seed_list() const {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < seeds; ++i) s.push_back(seed_base + static_cast<std::uint64_t>(i));
    return s;
  }
};

struct Defaults {
  int seeds;
  int budget;
  double duration;
};

inline Defaults defaults_for(const std::string& experiment) {
  if (experiment == "discover") return {5, 250, 1.0};
  if (experiment == "curve") return {10, 250, 5.0};
  if (experiment == "primitives") return {1, 250, 5.0};
  if (experiment == "plan") return {10, 250, 5.0};
  return {20, 50, 1.0};  // walk, moo, incline
}

/// Reads every tunable constant, so that each manifest lists all of them.
inline Settings read_settings(const std::string& experiment, config::Config& c, const Overrides& ov) {
  if (ov.seed_base) c.set("seed_base", std::to_string(*ov.seed_base));
  if (ov.noise) c.set("noise", *ov.noise ? "on" : "off");
  const Defaults d = defaults_for(experiment);
  Settings s;
  s.experiment = experiment;
  s.seed_base = c.get_u64("seed_base", 0);
  s.seeds = c.get_int("seeds", d.seeds, 1, 1000);
  s.noise = c.get_switch("noise", true);
  s.duration = c.get_double("trial.duration", d.duration, 0.01, 60.0);
  s.gaits = c.get_list("gaits", {"tripod"});
  if (s.gaits.empty()) c.problem("gaits", "empty list");
  for (const auto& g : s.gaits) {
    try {
      cpg::gait_from_name(g);
    } catch (const std::invalid_argument& e) {
      c.problem("gaits", e.what());
    }
  }

  sim::SimConfig& sc = s.sim;
  sc.dt = c.get_double("sim.dt", sc.dt, 1e-5, cpg::kMaxDt);
  sc.traction = c.get_double("sim.traction", sc.traction, 0.0, 10.0);
  sc.contact_threshold = c.get_double("sim.contact_threshold", sc.contact_threshold, 0.0, 1.0);
  sc.yaw_gain = c.get_double("sim.yaw_gain", sc.yaw_gain, 0.0, 100.0);
  sc.slip_gain = c.get_double("sim.slip_gain", sc.slip_gain, 0.0, 1000.0);
  sc.motor_force = c.get_double("sim.motor_force", sc.motor_force, 0.0, 100.0);
  sc.drift_weight = c.get_double("sim.drift_weight", sc.drift_weight, 0.0, 100.0);
  const double obs_noise = c.get_double("sim.obs_noise", sim::kDefaultObsNoise, 0.0, 100.0);
  sc.obs_noise = s.noise ? obs_noise : 0.0;
  sc.gains.a_r = c.get_double("sim.gain_r", sc.gains.a_r, 1e-3, 1e3);
  sc.gains.a_x = c.get_double("sim.gain_x", sc.gains.a_x, 1e-3, 1e3);
  auto& geo = sc.geometry;
  geo.body_length = c.get_double("sim.body_length", geo.body_length, 1e-3, 1e3);
  geo.body_width = c.get_double("sim.body_width", geo.body_width, 1e-3, 1e3);
  geo.mass = c.get_double("sim.mass", geo.mass, 1e-3, 1e6);
  geo.vertical_stroke = c.get_double("sim.vertical_stroke", geo.vertical_stroke, 1e-3, 1e3);
  geo.horizontal_stroke = c.get_double("sim.horizontal_stroke", geo.horizontal_stroke, 1e-3, 1e3);

  bo::BoOptions& b = s.bo;
  b.budget = c.get_int("bo.budget", d.budget, 2, 100000);
  b.n_init = c.get_int("bo.n_init", 5, 2, 100000);
  if (b.budget < b.n_init) c.problem("bo.budget", "must be at least bo.n_init");
  b.refit_every_until = c.get_int("bo.refit_every_until", b.refit_every_until, 0, 1000000);
  b.refit_period = c.get_int("bo.refit_period", b.refit_period, 1, 1000000);
  b.fit_restarts = c.get_int("gp.restarts", b.fit_restarts, 0, 1000);
  b.fit_step_tolerance = c.get_double("gp.step_tolerance", b.fit_step_tolerance, 1e-12, 1.0);
  b.fit_max_passes = c.get_int("gp.max_passes", b.fit_max_passes, 1, 1000000);
  auto& hb = b.bounds;
  hb.lengthscale_min = c.get_double("gp.lengthscale_min", hb.lengthscale_min, 1e-6, 1e6);
  hb.lengthscale_max = c.get_double("gp.lengthscale_max", hb.lengthscale_max, 1e-6, 1e6);
  hb.signal_min = c.get_double("gp.signal_min", hb.signal_min, 1e-9, 1e6);
  hb.signal_max = c.get_double("gp.signal_max", hb.signal_max, 1e-9, 1e6);
  hb.noise_min = c.get_double("gp.noise_min", hb.noise_min, gp::kNoiseFloor, 1e6);
  hb.noise_max = c.get_double("gp.noise_max", hb.noise_max, gp::kNoiseFloor, 1e6);
  if (hb.lengthscale_min > hb.lengthscale_max) c.problem("gp.lengthscale_min", "exceeds gp.lengthscale_max");
  if (hb.signal_min > hb.signal_max) c.problem("gp.signal_min", "exceeds gp.signal_max");
  if (hb.noise_min > hb.noise_max) c.problem("gp.noise_min", "exceeds gp.noise_max");
  auto& po = b.propose;
  po.candidates = c.get_int("acq.candidates", po.candidates, 1, 10000000);
  po.refine_starts = c.get_int("acq.refine_starts", po.refine_starts, 0, 10000);
  po.refine_passes = c.get_int("acq.refine_passes", po.refine_passes, 0, 10000);
  po.initial_step = c.get_double("acq.initial_step", po.initial_step, 1e-9, 1.0);
  po.step_shrink = c.get_double("acq.step_shrink", po.step_shrink, 1e-3, 0.999);

  s.reference = c.get_doubles("moo.reference", {0.0, 200.0}, -1e9, 1e9);
  if (s.reference.size() != 2) c.problem("moo.reference", "needs two values");
  s.rho = c.get_double("moo.rho", s.rho, 0.0, 10.0);
  s.simplex_divisions = c.get_int("moo.simplex_divisions", s.simplex_divisions, 1, 10000);

  s.solve_samples = c.get_int("primitives.n_samples", s.solve_samples, 1, 10000000);
  s.solve_refine = c.get_int("primitives.refine_starts", s.solve_refine, 0, 10000);
  auto& pl = s.planner;
  pl.n_samples = c.get_int("plan.n_samples", pl.n_samples, 1, 10000000);
  pl.step_budget = c.get_int("plan.step_budget", pl.step_budget, 1, 100000);
  pl.split_factor = c.get_double("plan.split_factor", pl.split_factor, 1e-3, 1e3);
  pl.risk = c.get_double("plan.risk", pl.risk, 0.0, 100.0);
  pl.reach_radius = c.get_double("plan.reach_radius", 6.0, 0.0, 1e6);

  s.fault_at = c.get_int("debug.fault_at", -1, -1, 100000000);
  return s;
}

// ---------------------------------------------------------------------------
// Spaces and evaluators

inline bo::SearchSpace control_space() {
  using B = cpg::ParamBounds;
  return bo::SearchSpace({{"omega", B::kFrequencyMin, B::kFrequencyMax},
                          {"vh_phase_diff", B::kPhaseDiffMin, B::kPhaseDiffMax},
                          {"amp_left", B::kAmpMin, B::kAmpMax},
                          {"amp_right", B::kAmpMin, B::kAmpMax}});
}

/// Discovery space: frequency, phase lag and per-leg step-start fractions.
inline bo::SearchSpace schedule_space() {
  using B = cpg::ParamBounds;
  std::vector<bo::Dimension> dims{{"omega", B::kFrequencyMin, B::kFrequencyMax},
                                  {"vh_phase_diff", B::kPhaseDiffMin, B::kPhaseDiffMax}};
  for (int leg = 0; leg < cpg::kLegs; ++leg) dims.push_back({"start_" + std::to_string(leg), 0.0, 1.0});
  return bo::SearchSpace(std::move(dims));
}

/// Counts evaluator calls and throws at the configured one (test hook).
class FaultInjector {
 public:
  explicit FaultInjector(long at) : at_(at) {}
  void tick() {
    if (at_ >= 0 && calls_++ == at_) throw std::runtime_error("injected evaluator fault");
  }

 private:
  long at_;
  long calls_ = 0;
};

inline std::map<std::string, double> trial_metadata(const sim::TrialResult& r) {
  return {{"dx", r.dx}, {"dy", r.dy}, {"dpsi", r.dpsi}, {"drift", r.drift}, {"energy", r.energy}};
}

inline double speed_of(const sim::TrialResult& r, const Settings& s) {
  return sim::speed_objective(r, s.sim.drift_weight) / s.duration;
}

/// Contexts of the curve task: five targets on the front quadrant.
inline std::vector<std::vector<double>> curve_targets(double radius) {
  std::vector<std::vector<double>> t;
  for (int k = 0; k <= 4; ++k) {
    const double b = k * kPi / 8.0;
    t.push_back({radius * std::cos(b), radius * std::sin(b)});
  }
  return t;
}

struct CurveTask {
  double radius = 6.0;
  bo::SearchSpace context_space{{{"target_x", 0.0, 8.0}, {"target_y", 0.0, 8.0}}};
};

inline CurveTask read_curve_task(config::Config& c) {
  CurveTask t;
  t.radius = c.get_double("curve.radius", t.radius, 0.1, 8.0);
  return t;
}

/// One contextual curve-following run: n_init designs then one EI step per
/// schedule entry, cycling through the five targets.
inline bo::History run_curve(const Settings& s, const CurveTask& task, std::uint64_t seed,
                             FaultInjector* fault = nullptr) {
  const auto gait = cpg::gait_from_name(s.gaits.front());
  const auto targets = curve_targets(task.radius);
  std::vector<std::vector<double>> schedule;
  for (int i = 0; i < s.bo.budget - s.bo.n_init; ++i) schedule.push_back(targets[i % targets.size()]);
  if (schedule.empty()) schedule.push_back(targets.front());
  bo::BoOptions o = s.bo;
  o.seed = seed;
  o.objective_names = {"target_error"};
  auto eval = [&](const std::vector<double>& th, const std::vector<double>& ctx, std::uint64_t sd) {
    if (fault) fault->tick();
    const auto r = sim::run_trial(gait, cpg::ControlParams::from_span(th), {}, s.duration, sd, s.sim);
    return bo::Evaluation{{sim::target_objective(r, {ctx[0], ctx[1]})}, trial_metadata(r)};
  };
  bo::History h = bo::cbo_run(eval, control_space(), task.context_space, schedule, o);
  h.id = "curve/seed=" + std::to_string(seed);
  return h;
}

// ---------------------------------------------------------------------------
// Output

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  /// Opens `name` for writing in binary mode and records it for the manifest.
  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    files_.push_back(name);
    return f;
  }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

inline void write_history(Writer& w, const std::string& name, const bo::History& h,
                          const std::vector<bool>* on_front = nullptr) {
  auto f = w.open(name);
  bo::write_history_csv(f, h, on_front);
}

inline void write_manifest(Writer& w, const Settings& s, const config::Config& c, const std::string& status,
                           const std::string& message) {
  nlohmann::json j;
  j["tool"] = "gaitforge";
  j["version"] = GAITFORGE_VERSION;
  j["experiment"] = s.experiment;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : c.resolved()) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = s.seed_list();
  j["outputs"] = w.files();
  j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                  "." + std::to_string(EIGEN_MINOR_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  j["constants"] = {{"cpg.oscillators", cpg::kOscillators},
                    {"cpg.vertical_coupling", cpg::kVerticalCoupling},
                    {"gp.noise_floor", gp::kNoiseFloor},
                    {"gp.max_jitter", gp::kMaxJitter},
                    {"primitives.min_records", primitives::kMinRecords},
                    {"sim.max_incline_deg", sim::Context::kMaxIncline}};
  std::ofstream f(w.dir() / "manifest.json", std::ios::binary);
  f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Experiments

struct Run {
  Settings settings;
  config::Config& config;
  Writer& writer;
  std::ostream& log;
};

/// Thrown by experiments after the partial results were flushed.
class FaultAfterFlush : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `body`; on an evaluator fault the partial history goes to `name`.
template <typename F>
auto guarded(Writer& w, const std::string& name, F&& body) {
  try {
    return body();
  } catch (const bo::EvaluatorFault& e) {
    write_history(w, name, e.partial());
    throw FaultAfterFlush(e.what());
  } catch (const cpg::IntegrationFault& e) {
    throw FaultAfterFlush(e.what());
  }
}

inline void run_walk(Run& r) {
  const Settings& s = r.settings;
  FaultInjector fault(s.fault_at);
  for (const auto& gname : s.gaits) {
    const auto gait = cpg::gait_from_name(gname);
    auto best = r.writer.open("walk_" + gname + "_best.csv");
    best << "seed,best_speed";
    for (const auto& n : control_space().names()) best << ',' << n;
    best << '\n';
    for (auto seed : s.seed_list()) {
      bo::BoOptions o = s.bo;
      o.seed = seed;
      o.objective_names = {"neg_speed"};
      auto eval = [&](const std::vector<double>& th, std::uint64_t sd) {
        fault.tick();
        const auto tr = sim::run_trial(gait, cpg::ControlParams::from_span(th), {}, s.duration, sd, s.sim);
        return bo::Evaluation{{-speed_of(tr, s)}, trial_metadata(tr)};
      };
      const std::string name = "walk_" + gname + "_seed" + std::to_string(seed) + ".csv";
      const auto h = guarded(r.writer, name, [&] { return bo::bo_run(eval, control_space(), o); });
      write_history(r.writer, name, h);
      std::size_t arg = 0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i].objectives[0] < h[arg].objectives[0]) arg = i;
      }
      best << seed << ',' << format_double(-h[arg].objectives[0]);
      for (double v : h[arg].theta) best << ',' << format_double(v);
      best << '\n';
      r.log << "walk " << gname << " seed " << seed << ": best speed " << -h.back().best_so_far << " mm/s\n";
    }
  }
}

inline void write_hv_trace(Writer& w, const std::string& name, const bo::ParEgoResult& res) {
  auto f = w.open(name);
  f << "iter,hypervolume,front_size\n";
  for (std::size_t i = 0; i < res.hypervolume_trace.size(); ++i) {
    f << i << ',' << format_double(res.hypervolume_trace[i]) << ',' << res.front_trace[i].size() << '\n';
  }
}

inline bo::ParEgoOptions parego_options(const Settings& s, std::uint64_t seed) {
  bo::ParEgoOptions po;
  po.bo = s.bo;
  po.bo.seed = seed;
  po.bo.objective_names = {"neg_speed", "energy"};
  po.reference = s.reference;
  po.rho = s.rho;
  po.simplex_divisions = s.simplex_divisions;
  return po;
}

inline void run_moo(Run& r) {
  const Settings& s = r.settings;
  FaultInjector fault(s.fault_at);
  for (const auto& gname : s.gaits) {
    const auto gait = cpg::gait_from_name(gname);
    for (auto seed : s.seed_list()) {
      auto eval = [&](const std::vector<double>& th, std::uint64_t sd) {
        fault.tick();
        const auto tr = sim::run_trial(gait, cpg::ControlParams::from_span(th), {}, s.duration, sd, s.sim);
        return bo::Evaluation{{-speed_of(tr, s), sim::energy_objective(tr)}, trial_metadata(tr)};
      };
      const std::string stem = "moo_" + gname + "_seed" + std::to_string(seed);
      const auto res = guarded(r.writer, stem + ".csv",
                               [&] { return bo::parego_run(eval, control_space(), parego_options(s, seed)); });
      const auto flags = res.on_front();
      write_history(r.writer, stem + ".csv", res.history, &flags);
      write_hv_trace(r.writer, stem + "_hv.csv", res);
      r.log << "moo " << gname << " seed " << seed << ": front " << res.front_trace.back().size()
            << " points, hypervolume " << res.hypervolume_trace.back() << '\n';
    }
  }
}

inline void run_discover(Run& r) {
  const Settings& s = r.settings;
  FaultInjector fault(s.fault_at);
  const auto space = schedule_space();
  for (auto seed : s.seed_list()) {
    auto eval = [&](const std::vector<double>& th, std::uint64_t sd) {
      fault.tick();
      std::vector<double> starts;
      for (int leg = 0; leg < cpg::kLegs; ++leg) starts.push_back(std::fmod(th[2 + leg], 1.0));
      const auto [gait, params] = cpg::gait_from_schedule(starts, th[0], th[1]);
      const auto tr = sim::run_trial(gait, params, {}, s.duration, sd, s.sim);
      return bo::Evaluation{{-speed_of(tr, s), sim::energy_objective(tr)}, trial_metadata(tr)};
    };
    const std::string stem = "discover_seed" + std::to_string(seed);
    const auto res = guarded(r.writer, stem + ".csv", [&] { return bo::parego_run(eval, space, parego_options(s, seed)); });
    const auto flags = res.on_front();
    write_history(r.writer, stem + ".csv", res.history, &flags);
    write_hv_trace(r.writer, stem + "_hv.csv", res);
    r.log << "discover seed " << seed << ": hypervolume " << res.hypervolume_trace.back() << '\n';
  }
}

inline void run_incline(Run& r) {
  const Settings& s = r.settings;
  config::Config& c = r.config;
  const auto contexts = c.get_doubles("incline.contexts", {5.0, 10.0, 15.0}, 0.0, sim::Context::kMaxIncline);
  const auto sweep = c.get_doubles("incline.sweep", {0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0}, 0.0,
                                   sim::Context::kMaxIncline);
  const double ctx_max = c.get_double("incline.max", 20.0, 1e-3, sim::Context::kMaxIncline);
  c.finish();
  if (contexts.empty()) throw config::ConfigError({"config key 'incline.contexts': empty list"});

  FaultInjector fault(s.fault_at);
  const auto gait = cpg::gait_from_name(s.gaits.front());
  const bo::SearchSpace ctx_space({{"incline_deg", 0.0, ctx_max}});
  std::vector<std::vector<double>> schedule;
  for (int i = 0; i < std::max(1, s.bo.budget - s.bo.n_init); ++i) schedule.push_back({contexts[i % contexts.size()]});

  auto policy = r.writer.open("incline_policy.csv");
  policy << "seed,incline_deg";
  for (const auto& n : control_space().names()) policy << ',' << n;
  policy << ",speed\n";
  for (auto seed : s.seed_list()) {
    bo::BoOptions o = s.bo;
    o.seed = seed;
    o.objective_names = {"neg_speed"};
    auto eval = [&](const std::vector<double>& th, const std::vector<double>& ctx, std::uint64_t sd) {
      fault.tick();
      const auto tr = sim::run_trial(gait, cpg::ControlParams::from_span(th), {ctx[0]}, s.duration, sd, s.sim);
      return bo::Evaluation{{-speed_of(tr, s)}, trial_metadata(tr)};
    };
    const std::string name = "incline_seed" + std::to_string(seed) + ".csv";
    const auto h = guarded(r.writer, name, [&] { return bo::cbo_run(eval, control_space(), ctx_space, schedule, o); });
    write_history(r.writer, name, h);
    const auto cm = bo::fit_contextual_model(h, control_space(), ctx_space, o);
    for (std::size_t k = 0; k < sweep.size(); ++k) {
      const double a = sweep[k];
      const auto th = bo::cbo_policy(cm, {std::min(a, ctx_max)}, mix_seed(seed, 0x706f6c, k), s.bo.propose);
      const auto tr = sim::run_trial(gait, cpg::ControlParams::from_span(th), {a}, s.duration,
                                     mix_seed(seed, 0x7377656570, k), s.sim);
      policy << seed << ',' << format_double(a);
      for (double v : th) policy << ',' << format_double(v);
      policy << ',' << format_double(speed_of(tr, s)) << '\n';
    }
    r.log << "incline seed " << seed << ": " << h.size() << " trials\n";
  }
}

inline void run_curve_experiment(Run& r) {
  const Settings& s = r.settings;
  const CurveTask task = read_curve_task(r.config);
  r.config.finish();
  FaultInjector fault(s.fault_at);
  const auto targets = curve_targets(task.radius);
  auto best = r.writer.open("curve_best.csv");
  best << "seed,target_x,target_y,best_error";
  for (const auto& n : control_space().names()) best << ',' << n;
  best << '\n';
  for (auto seed : s.seed_list()) {
    const std::string name = "curve_seed" + std::to_string(seed) + ".csv";
    const auto h = guarded(r.writer, name, [&] { return run_curve(s, task, seed, &fault); });
    write_history(r.writer, name, h);
    for (const auto& t : targets) {
      const bo::Record* b = nullptr;
      for (const auto& rec : h.records()) {
        if (rec.context == t && (!b || rec.objectives[0] < b->objectives[0])) b = &rec;
      }
      best << seed << ',' << format_double(t[0]) << ',' << format_double(t[1]);
      if (b) {
        best << ',' << format_double(b->objectives[0]);
        for (double v : b->theta) best << ',' << format_double(v);
      } else {
        best << ",nan" << std::string(control_space().dim(), ',');
      }
      best << '\n';
    }
    r.log << "curve seed " << seed << ": " << h.size() << " trials, best error " << h.back().best_so_far << " mm\n";
  }
}

/// Curve history for the primitive experiments: loaded from `history` when
/// given, otherwise produced by a fresh curve run at `seed`.
inline bo::History curve_history(Run& r, const std::string& path, const CurveTask& task, std::uint64_t seed) {
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw config::ConfigError({"config key 'primitives.history': cannot open '" + path + "'"});
    try {
      bo::History h = bo::read_history_csv(in, control_space().names(), task.context_space.names(), {"target_error"});
      h.id = "file:" + fs::path(path).filename().string();
      return h;
    } catch (const std::exception& e) {
      throw config::ConfigError({"config key 'primitives.history': " + std::string(e.what())});
    }
  }
  FaultInjector fault(r.settings.fault_at);
  const auto h = guarded(r.writer, "curve_history.csv", [&] { return run_curve(r.settings, task, seed, &fault); });
  write_history(r.writer, "curve_history.csv", h);
  return h;
}

inline gp::FitOptions model_fit_options(const Settings& s, std::uint64_t seed) {
  gp::FitOptions fo;
  fo.restarts = s.bo.fit_restarts;
  fo.seed = mix_seed(seed, 0x7072696d);
  fo.bounds = s.bo.bounds;
  fo.step_tolerance = s.bo.fit_step_tolerance;
  fo.max_passes = s.bo.fit_max_passes;
  return fo;
}

struct GridCell {
  sim::Vec2 target;
  std::vector<double> prim_theta;
  primitives::Displacement prim_pred;
  sim::TrialResult prim_trial;
  std::vector<double> cbo_theta;
  sim::TrialResult cbo_trial;
  double prim_error() const { return std::hypot(prim_trial.dx - target.x, prim_trial.dy - target.y); }
  double cbo_error() const { return std::hypot(cbo_trial.dx - target.x, cbo_trial.dy - target.y); }
};

/// Executes solve_primitive and the cBO policy on every target of a grid.
inline std::vector<GridCell> evaluate_grid(const Settings& s, const primitives::PrimitiveModel& pm,
                                           const bo::ContextualModel& cm, const std::vector<sim::Vec2>& targets,
                                           std::uint64_t seed) {
  const auto gait = cpg::gait_from_name(s.gaits.front());
  std::vector<GridCell> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    GridCell g;
    g.target = targets[i];
    g.prim_theta = primitives::solve_primitive(pm, g.target, s.solve_samples, mix_seed(seed, 0x736f6c76, i),
                                               s.solve_refine);
    g.prim_pred = primitives::predict_displacement(pm, g.prim_theta);
    const std::uint64_t trial = mix_seed(seed, 0x65786563, i);
    g.prim_trial = sim::run_trial(gait, cpg::ControlParams::from_span(g.prim_theta), {}, s.duration, trial, s.sim);
    g.cbo_theta = bo::cbo_policy(cm, {g.target.x, g.target.y}, mix_seed(seed, 0x706f6c, i), s.bo.propose);
    g.cbo_trial = sim::run_trial(gait, cpg::ControlParams::from_span(g.cbo_theta), {}, s.duration, trial, s.sim);
    g.prim_trial.contact_trace.clear();
    g.cbo_trial.contact_trace.clear();
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<sim::Vec2> grid_targets(int n, double lo, double hi) {
  std::vector<sim::Vec2> t;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double fx = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      const double fy = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
      t.push_back({lo + fx * (hi - lo), lo + fy * (hi - lo)});
    }
  }
  return t;
}

inline void run_primitives(Run& r, const fs::path& config_dir) {
  const Settings& s = r.settings;
  config::Config& c = r.config;
  const CurveTask task = read_curve_task(c);
  const std::string hist_path = c.get_path("primitives.history", config_dir);
  const int grid_n = c.get_int("primitives.grid", 7, 1, 100);
  const double grid_lo = c.get_double("primitives.grid_min", 1.0, -100.0, 100.0);
  const double grid_hi = c.get_double("primitives.grid_max", 7.0, -100.0, 100.0);
  c.finish();

  const std::uint64_t seed = s.seed_base;
  const bo::History h = curve_history(r, hist_path, task, seed);
  const auto pm = primitives::build_primitive_model(h, control_space(), model_fit_options(s, seed));
  bo::BoOptions o = s.bo;
  o.seed = seed;
  const auto cm = bo::fit_contextual_model(h, control_space(), task.context_space, o);
  {
    auto f = r.writer.open("primitive_model.json");
    nlohmann::json j;
    j["source"] = pm.source;
    j["training_radius"] = pm.training_radius;
    j["parameters"] = control_space().names();
    j["g_x"] = gp::to_json(pm.gx);
    j["g_y"] = gp::to_json(pm.gy);
    j["g_psi"] = gp::to_json(pm.gpsi);
    f << j.dump(2) << '\n';
  }
  const auto cells = guarded(r.writer, "primitives_grid.csv",
                             [&] { return evaluate_grid(s, pm, cm, grid_targets(grid_n, grid_lo, grid_hi), seed); });
  auto f = r.writer.open("primitives_grid.csv");
  f << "target_x,target_y";
  for (const auto& n : control_space().names()) f << ",prim_" << n;
  f << ",prim_pred_dx,prim_pred_dy,prim_dx,prim_dy,prim_error";
  for (const auto& n : control_space().names()) f << ",cbo_" << n;
  f << ",cbo_dx,cbo_dy,cbo_error\n";
  double ep = 0.0;
  double ec = 0.0;
  for (const auto& g : cells) {
    f << format_double(g.target.x) << ',' << format_double(g.target.y);
    for (double v : g.prim_theta) f << ',' << format_double(v);
    f << ',' << format_double(g.prim_pred.dx) << ',' << format_double(g.prim_pred.dy) << ','
      << format_double(g.prim_trial.dx) << ',' << format_double(g.prim_trial.dy) << ','
      << format_double(g.prim_error());
    for (double v : g.cbo_theta) f << ',' << format_double(v);
    f << ',' << format_double(g.cbo_trial.dx) << ',' << format_double(g.cbo_trial.dy) << ','
      << format_double(g.cbo_error()) << '\n';
    ep += g.prim_error();
    ec += g.cbo_error();
  }
  const double n = static_cast<double>(cells.size());
  r.log << "primitives: mean grid error " << ep / n << " mm (model inversion) vs " << ec / n << " mm (cBO policy)\n";
}

struct PlanOutcome {
  std::uint64_t seed = 0;
  primitives::Path path;
  std::optional<primitives::Execution> execution;
  std::string failure;  // planner error, empty on success
  bool collision_free = false;
  bool reached = false;
};

inline PlanOutcome plan_and_execute(const Settings& s, const primitives::PrimitiveModel& pm, const sim::Maze& maze,
                                    std::uint64_t seed) {
  PlanOutcome out;
  out.seed = seed;
  try {
    out.path = primitives::plan_path(pm, maze, maze.waypoints, seed, s.planner);
  } catch (const primitives::PlanningError& e) {
    out.path = e.partial();
    out.failure = e.what();
  }
  out.collision_free = primitives::path_is_collision_free(out.path, maze);
  if (out.failure.empty()) {
    primitives::ExecutionOptions eo;
    eo.gait = cpg::gait_from_name(s.gaits.front());
    eo.duration = s.duration;
    eo.sim = s.sim;
    out.execution = primitives::execute_plan(out.path, seed, eo);
    out.reached = out.collision_free && out.execution->terminal_error <= 1.5 * maze.goal_tolerance;
  }
  return out;
}

inline void run_plan(Run& r, const fs::path& config_dir) {
  const Settings& s = r.settings;
  config::Config& c = r.config;
  const CurveTask task = read_curve_task(c);
  const std::string hist_path = c.get_path("primitives.history", config_dir);
  const std::string maze_path = c.get_path("plan.maze", config_dir);
  if (maze_path.empty()) c.problem("plan.maze", "required");
  c.finish();
  sim::Maze maze;
  try {
    maze = sim::load_maze(maze_path);
  } catch (const std::exception& e) {
    throw config::ConfigError({"config key 'plan.maze': " + std::string(e.what())});
  }

  const bo::History h = curve_history(r, hist_path, task, s.seed_base);
  const auto pm = primitives::build_primitive_model(h, control_space(), model_fit_options(s, s.seed_base));
  auto summary = r.writer.open("plan_summary.csv");
  summary << "seed,steps,expected_error,terminal_error,collision_free,reached,failure\n";
  int reached = 0;
  for (auto seed : s.seed_list()) {
    const PlanOutcome po = guarded(r.writer, "plan_summary.csv", [&] { return plan_and_execute(s, pm, maze, seed); });
    {
      auto f = r.writer.open("plan_path_seed" + std::to_string(seed) + ".csv");
      primitives::write_path_csv(f, po.path, control_space().names());
    }
    if (po.execution) {
      auto f = r.writer.open("plan_exec_seed" + std::to_string(seed) + ".csv");
      primitives::write_execution_csv(f, *po.execution);
    }
    summary << seed << ',' << po.path.steps.size() << ',' << format_double(po.path.expected_error) << ','
            << (po.execution ? format_double(po.execution->terminal_error) : std::string("nan")) << ','
            << (po.collision_free ? 1 : 0) << ',' << (po.reached ? 1 : 0) << ",\"" << po.failure << "\"\n";
    reached += po.reached ? 1 : 0;
    r.log << "plan seed " << seed << ": " << po.path.steps.size() << " steps, "
          << (po.failure.empty() ? (po.reached ? "goal reached" : "goal missed") : po.failure) << '\n';
  }
  r.log << "plan: goal reached on " << reached << "/" << s.seeds << " seeds\n";
}

struct Result {
  int exit_code = kOk;
  std::string message;
  std::vector<std::string> files;
};

/// Validates the config, runs the experiment, and writes the manifest.
/// Config problems are reported before anything runs.
inline Result run_experiment(const std::string& experiment, config::Config c, const Overrides& ov,
                             const fs::path& out_dir, const fs::path& config_dir = ".",
                             std::ostream& log = std::cerr) {
  Result res;
  if (std::find(experiment_names().begin(), experiment_names().end(), experiment) == experiment_names().end()) {
    res.exit_code = kConfigError;
    res.message = "unknown experiment '" + experiment + "'";
    return res;
  }
  std::optional<Writer> writer;
  Settings s;
  try {
    s = read_settings(experiment, c, ov);
    // Experiments with extra keys validate them (and call finish) themselves.
    if (experiment == "walk" || experiment == "moo" || experiment == "discover") c.finish();
    writer.emplace(out_dir);
    Run run{s, c, *writer, log};
    if (experiment == "walk") run_walk(run);
    if (experiment == "moo") run_moo(run);
    if (experiment == "discover") run_discover(run);
    if (experiment == "incline") run_incline(run);
    if (experiment == "curve") run_curve_experiment(run);
    if (experiment == "primitives") run_primitives(run, config_dir);
    if (experiment == "plan") run_plan(run, config_dir);
    write_manifest(*writer, s, c, "ok", "");
  } catch (const config::ConfigError& e) {
    res.exit_code = kConfigError;
    res.message = e.what();
    return res;
  } catch (const FaultAfterFlush& e) {
    res.exit_code = kEvaluatorFault;
    res.message = std::string("evaluator fault: ") + e.what();
    write_manifest(*writer, s, c, "evaluator_fault", res.message);
  }
  res.files = writer->files();
  return res;
}

}  // namespace gaitforge::experiment
