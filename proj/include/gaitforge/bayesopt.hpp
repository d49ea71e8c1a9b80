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

// Sequential model-based optimizers: single-objective BO, ParEGO and
// contextual BO. Everything minimizes; maximization tasks negate at the
// evaluator.
//
// Every random draw is keyed on (run seed, purpose tag, iteration), so a run is
// a pure function of its seed and evaluator.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gaitforge/acquisition.hpp"
#include "gaitforge/common.hpp"
#include "gaitforge/gp.hpp"
#include "gaitforge/history.hpp"
#include "gaitforge/pareto.hpp"

namespace gaitforge::bo {

/// Raised when an evaluator throws or returns a non-finite objective. Carries
/// everything evaluated before the fault.
class EvaluatorFault : public std::runtime_error {
 public:
  EvaluatorFault(const std::string& what, History partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const History& partial() const { return partial_; }

 private:
  History partial_;
};

using Evaluator = std::function<Evaluation(const std::vector<double>& theta, std::uint64_t seed)>;
using ContextEvaluator = std::function<Evaluation(
    const std::vector<double>& theta, const std::vector<double>& context, std::uint64_t seed)>;

/// Wraps a plain scalar function as an Evaluator.
inline Evaluator scalar_evaluator(std::function<double(const std::vector<double>&)> f) {
  return [f = std::move(f)](const std::vector<double>& x, std::uint64_t) {
    return Evaluation{{f(x)}, {}};
  };
}

struct BoOptions {
  int budget = 50;
  int n_init = 5;
  std::uint64_t seed = 0;
  int fit_restarts = 5;
  double fit_step_tolerance = gp::FitOptions{}.step_tolerance;
  int fit_max_passes = gp::FitOptions{}.max_passes;
  gp::HyperparamBounds bounds;
  int refit_every_until = 50;  // refit hyperparameters every iteration while n <= this
  int refit_period = 5;        // ... and every refit_period iterations afterwards
  ProposeOptions propose;
  std::vector<std::string> objective_names{"objective"};
};

inline std::uint64_t trial_seed(std::uint64_t run_seed, int iteration) {
  return mix_seed(run_seed, tag::kTrial, static_cast<std::uint64_t>(iteration));
}

namespace detail {

/// Holds the hyperparameters between iterations and applies the refit schedule.
class Surrogate {
 public:
  explicit Surrogate(const BoOptions& opt) : opt_(opt) {}

  gp::GpModel update(const MatrixXd& unit_x, const VectorXd& y, gp::InputTransform t, int iteration) {
    gp::Dataset ds = gp::Dataset::from_unit(unit_x, y, std::move(t));
    const bool refit = !hp_ || ds.size() <= opt_.refit_every_until ||
                       iteration - last_fit_ >= opt_.refit_period;
    if (ds.size() < 2) {
      return gp::GpModel(std::move(ds), gp::KernelHyperparams::defaults(static_cast<int>(unit_x.cols())));
    }
    if (!refit) return gp::GpModel(std::move(ds), *hp_);
    gp::FitOptions fo;
    fo.restarts = opt_.fit_restarts;
    fo.seed = mix_seed(opt_.seed, tag::kFit, static_cast<std::uint64_t>(iteration));
    fo.bounds = opt_.bounds;
    fo.step_tolerance = opt_.fit_step_tolerance;
    fo.max_passes = opt_.fit_max_passes;
    fo.warm_start = hp_;
    gp::GpModel model = gp::fit(ds, fo);
    hp_ = model.hyperparams();
    last_fit_ = iteration;
    return model;
  }

  const std::optional<gp::KernelHyperparams>& hyperparams() const { return hp_; }

 private:
  BoOptions opt_;
  std::optional<gp::KernelHyperparams> hp_;
  int last_fit_ = 0;
};

inline Evaluation checked_call(const std::function<Evaluation()>& call, std::size_t n_objectives,
                               const History& h) {
  Evaluation e;
  try {
    e = call();
  } catch (const std::exception& ex) {
    throw EvaluatorFault(std::string("evaluator failed: ") + ex.what(), h);
  }
  if (e.objectives.size() != n_objectives) {
    throw EvaluatorFault("evaluator returned " + std::to_string(e.objectives.size()) +
                             " objectives, expected " + std::to_string(n_objectives),
                         h);
  }
  for (double v : e.objectives) {
    if (!std::isfinite(v)) throw EvaluatorFault("evaluator returned a non-finite objective", h);
  }
  return e;
}

inline void check_budget(int budget, int n_init) {
  if (n_init < 2) throw std::invalid_argument("n_init must be at least 2");
  if (budget < n_init) throw std::invalid_argument("budget must be at least n_init");
}

}  // namespace detail

/// Single-objective BO: Latin-hypercube start, then fit -> EI proposal ->
/// evaluate until the budget is spent. best_so_far is the running minimum.
inline History bo_run(const Evaluator& evaluator, const SearchSpace& space, const BoOptions& opt) {
  detail::check_budget(opt.budget, opt.n_init);
  History h(space.names(), {}, opt.objective_names);
  const std::size_t k = opt.objective_names.size();
  if (k != 1) throw std::invalid_argument("bo_run optimizes exactly one objective");
  double best = std::numeric_limits<double>::infinity();
  auto record = [&](std::vector<double> theta, int it) {
    const std::uint64_t s = trial_seed(opt.seed, it);
    Evaluation e = detail::checked_call([&] { return evaluator(theta, s); }, k, h);
    best = std::min(best, e.objectives[0]);
    h.append({it, s, std::move(theta), {}, std::move(e.objectives), std::move(e.metadata), best});
  };

  const auto design = initial_design(space, opt.n_init, opt.seed);
  for (int i = 0; i < opt.n_init; ++i) record(design[static_cast<std::size_t>(i)], i);

  detail::Surrogate surrogate(opt);
  const auto transform = space.transform();
  for (int it = opt.n_init; it < opt.budget; ++it) {
    MatrixXd x(it, space.dim());
    VectorXd y(it);
    for (int i = 0; i < it; ++i) {
      x.row(i) = space.to_unit(h[static_cast<std::size_t>(i)].theta).transpose();
      y[i] = h[static_cast<std::size_t>(i)].objectives[0];
    }
    const gp::GpModel model = surrogate.update(x, y, transform, it);
    record(propose(model, space, best, mix_seed(opt.seed, static_cast<std::uint64_t>(it)), opt.propose),
           it);
  }
  return h;
}

// ---------------------------------------------------------------------------
// ParEGO

struct ParEgoOptions {
  BoOptions bo;
  std::vector<double> reference;  // hypervolume reference point (minimization)
  double rho = 0.05;
  int simplex_divisions = 10;
};

struct ParEgoResult {
  History history;
  std::vector<std::vector<std::size_t>> front_trace;  // front indices after each evaluation
  std::vector<double> hypervolume_trace;
  std::vector<bool> on_front() const {
    std::vector<bool> flags(history.size(), false);
    if (!front_trace.empty()) {
      for (auto i : front_trace.back()) flags[i] = true;
    }
    return flags;
  }
};

/// Per-objective min/max scaling to [0, 1]; a constant column maps to 0.
inline std::vector<Objectives> normalize_objectives(const std::vector<Objectives>& ys) {
  if (ys.empty()) return {};
  const std::size_t k = ys.front().size();
  std::vector<double> lo(k, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k, -std::numeric_limits<double>::infinity());
  for (const auto& y : ys) {
    for (std::size_t i = 0; i < k; ++i) {
      lo[i] = std::min(lo[i], y[i]);
      hi[i] = std::max(hi[i], y[i]);
    }
  }
  std::vector<Objectives> out;
  for (const auto& y : ys) {
    Objectives z(k);
    for (std::size_t i = 0; i < k; ++i) {
      z[i] = hi[i] > lo[i] ? std::clamp((y[i] - lo[i]) / (hi[i] - lo[i]), 0.0, 1.0) : 0.0;
    }
    out.push_back(std::move(z));
  }
  return out;
}

/// ParEGO: each iteration draws a weight vector from the simplex grid,
/// scalarizes the normalized observations with the augmented Tchebycheff
/// function, and takes one EI step on the scalar. best_so_far holds the
/// hypervolume of the current front.
inline ParEgoResult parego_run(const Evaluator& evaluator, const SearchSpace& space,
                               const ParEgoOptions& opt) {
  const BoOptions& bo = opt.bo;
  detail::check_budget(bo.budget, bo.n_init);
  const std::size_t k = bo.objective_names.size();
  if (k != 2) throw std::invalid_argument("parego_run supports exactly two objectives");
  if (opt.reference.size() != k) throw std::invalid_argument("hypervolume reference needs one entry per objective");
  const auto weights = simplex_weights(static_cast<int>(k), opt.simplex_divisions);

  ParEgoResult res;
  res.history = History(space.names(), {}, bo.objective_names);
  History& h = res.history;
  std::vector<Objectives> ys;
  auto record = [&](std::vector<double> theta, int it) {
    const std::uint64_t s = trial_seed(bo.seed, it);
    Evaluation e = detail::checked_call([&] { return evaluator(theta, s); }, k, h);
    ys.push_back(e.objectives);
    res.front_trace.push_back(pareto_indices(ys));
    const double hv = hypervolume_within(ys, opt.reference);
    res.hypervolume_trace.push_back(hv);
    h.append({it, s, std::move(theta), {}, std::move(e.objectives), std::move(e.metadata), hv});
  };

  const auto design = initial_design(space, bo.n_init, bo.seed);
  for (int i = 0; i < bo.n_init; ++i) record(design[static_cast<std::size_t>(i)], i);

  detail::Surrogate surrogate(bo);
  const auto transform = space.transform();
  for (int it = bo.n_init; it < bo.budget; ++it) {
    Rng wrng = make_rng(bo.seed, tag::kWeights, static_cast<std::uint64_t>(it));
    const auto idx = std::min(weights.size() - 1,
                              static_cast<std::size_t>(uniform01(wrng) * static_cast<double>(weights.size())));
    const ScalarizationWeights w{weights[idx], opt.rho};
    const auto norm = normalize_objectives(ys);
    MatrixXd x(it, space.dim());
    VectorXd y(it);
    for (int i = 0; i < it; ++i) {
      x.row(i) = space.to_unit(h[static_cast<std::size_t>(i)].theta).transpose();
      y[i] = tchebycheff_scalarize(norm[static_cast<std::size_t>(i)], w);
    }
    const gp::GpModel model = surrogate.update(x, y, transform, it);
    record(propose(model, space, y.minCoeff(), mix_seed(bo.seed, static_cast<std::uint64_t>(it)),
                   bo.propose),
           it);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Contextual BO

/// A GP over joint (θ, s) inputs; θ coordinates first.
struct ContextualModel {
  gp::GpModel model;
  SearchSpace space;
  SearchSpace context_space;

  VectorXd context_unit(const std::vector<double>& s) const { return context_space.to_unit(s); }
};

inline void check_context(const SearchSpace& context_space, const std::vector<double>& s) {
  if (!context_space.contains(s)) throw std::invalid_argument("context outside its declared bounds");
}

inline MatrixXd joint_unit_inputs(const History& h, const SearchSpace& space,
                                  const SearchSpace& context_space, std::size_t n) {
  MatrixXd x(static_cast<Eigen::Index>(n), space.dim() + context_space.dim());
  for (std::size_t i = 0; i < n; ++i) {
    x.row(static_cast<Eigen::Index>(i)) << space.to_unit(h[i].theta).transpose(),
        context_space.to_unit(h[i].context).transpose();
  }
  return x;
}

/// Argmin over θ of the posterior mean at context s, using the same
/// candidate-plus-refine search as `propose`. Returns unit coordinates.
inline VectorXd minimize_mean_unit(const gp::GpModel& model, int d, const VectorXd& suffix,
                                   std::uint64_t seed, const ProposeOptions& popt) {
  auto batch = [&](const MatrixXd& x) {
    VectorXd mean;
    model.predict_batch_unit(with_suffix(x, suffix), &mean, nullptr);
    return VectorXd(-mean);
  };
  auto point = [&](const VectorXd& x) { return -model.mean_unit(with_suffix(x, suffix)); };
  return maximize_unit(d, batch, point, seed, popt);
}

/// Greedy contextual policy: argmin_θ µ(θ, s).
inline std::vector<double> cbo_policy(const ContextualModel& cm, const std::vector<double>& s,
                                      std::uint64_t seed = 0, const ProposeOptions& popt = {}) {
  check_context(cm.context_space, s);
  return cm.space.from_unit(
      minimize_mean_unit(cm.model, cm.space.dim(), cm.context_unit(s), seed, popt));
}

/// Fits a fresh joint model to every record of a contextual history.
inline ContextualModel fit_contextual_model(const History& h, const SearchSpace& space,
                                            const SearchSpace& context_space,
                                            const BoOptions& opt = {}) {
  if (h.size() < 2) throw std::invalid_argument("contextual model needs at least 2 records");
  const MatrixXd x = joint_unit_inputs(h, space, context_space, h.size());
  VectorXd y(static_cast<Eigen::Index>(h.size()));
  for (std::size_t i = 0; i < h.size(); ++i) y[static_cast<Eigen::Index>(i)] = h[i].objectives[0];
  gp::FitOptions fo;
  fo.restarts = opt.fit_restarts;
  fo.seed = mix_seed(opt.seed, tag::kFit, h.size());
  fo.bounds = opt.bounds;
  fo.step_tolerance = opt.fit_step_tolerance;
  fo.max_passes = opt.fit_max_passes;
  gp::Dataset ds = gp::Dataset::from_unit(x, y, space.joined(context_space).transform());
  return {gp::fit(ds, fo), space, context_space};
}

/// EI incumbent at context s: the best observation whose context lies within
/// one (scaled) context lengthscale of s, else the minimum posterior mean at s.
inline double contextual_incumbent(const gp::GpModel& model, const History& h, std::size_t n,
                                   const SearchSpace& space, const SearchSpace& context_space,
                                   const VectorXd& s_unit, std::uint64_t seed,
                                   const ProposeOptions& popt) {
  const auto& ls = model.hyperparams().lengthscales;
  const int d = space.dim();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd si = context_space.to_unit(h[i].context);
    double r2 = 0.0;
    for (int c = 0; c < context_space.dim(); ++c) {
      const double t = (si[c] - s_unit[c]) / ls[d + c];
      r2 += t * t;
    }
    if (r2 <= 1.0) best = std::min(best, h[i].objectives[0]);
  }
  if (std::isfinite(best)) return best;
  const VectorXd th = minimize_mean_unit(model, d, s_unit, mix_seed(seed, 0x66616c6c), popt);
  return model.mean_unit(with_suffix(th, s_unit));
}

/// Contextual BO. Without a prior history the run starts with n_init
/// Latin-hypercube parameter vectors whose contexts cycle through the
/// schedule; each schedule entry then gets one EI step over θ with the context
/// pinned. With a prior history the run continues it (no initial design).
/// best_so_far is the running minimum over all contexts.
inline History cbo_run(const ContextEvaluator& evaluator, const SearchSpace& space,
                       const SearchSpace& context_space,
                       const std::vector<std::vector<double>>& schedule, const BoOptions& opt,
                       const History* prior = nullptr) {
  if (schedule.empty()) throw std::invalid_argument("context schedule is empty");
  for (const auto& s : schedule) check_context(context_space, s);
  if (opt.objective_names.size() != 1) throw std::invalid_argument("cbo_run optimizes exactly one objective");
  const bool fresh = prior == nullptr || prior->empty();
  if (fresh && opt.n_init < 2) throw std::invalid_argument("n_init must be at least 2");

  History h = fresh ? History(space.names(), context_space.names(), opt.objective_names) : *prior;
  if (!fresh && (h.theta_names() != space.names() || h.context_names() != context_space.names())) {
    throw std::invalid_argument("prior history does not match the search/context spaces");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : h.records()) best = std::min(best, r.objectives[0]);

  auto record = [&](std::vector<double> theta, const std::vector<double>& s) {
    const int it = static_cast<int>(h.size());
    const std::uint64_t ts = trial_seed(opt.seed, it);
    Evaluation e = detail::checked_call([&] { return evaluator(theta, s, ts); }, 1, h);
    best = std::min(best, e.objectives[0]);
    h.append({it, ts, std::move(theta), s, std::move(e.objectives), std::move(e.metadata), best});
  };

  if (fresh) {
    const auto design = initial_design(space, opt.n_init, opt.seed);
    for (int i = 0; i < opt.n_init; ++i) {
      record(design[static_cast<std::size_t>(i)], schedule[static_cast<std::size_t>(i) % schedule.size()]);
    }
  }

  detail::Surrogate surrogate(opt);
  const auto transform = space.joined(context_space).transform();
  for (const auto& s : schedule) {
    const std::size_t n = h.size();
    const int it = static_cast<int>(n);
    const MatrixXd x = joint_unit_inputs(h, space, context_space, n);
    VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = h[i].objectives[0];
    const gp::GpModel model = surrogate.update(x, y, transform, it);
    const VectorXd s_unit = context_space.to_unit(s);
    const std::uint64_t pseed = mix_seed(opt.seed, static_cast<std::uint64_t>(it));
    const double incumbent =
        contextual_incumbent(model, h, n, space, context_space, s_unit, pseed, opt.propose);
    const VectorXd th = maximize_ei_unit(model, space.dim(), s_unit, incumbent, pseed, opt.propose);
    record(space.from_unit(th), s);
  }
  return h;
}

}  // namespace gaitforge::bo
