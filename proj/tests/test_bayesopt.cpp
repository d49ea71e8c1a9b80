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

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "benchmarks.hpp"
#include "gaitforge/bayesopt.hpp"
#include "oracles.hpp"

namespace gf = gaitforge;
namespace bo = gaitforge::bo;
namespace gt = gaitforge::testing;

namespace {

bo::BoOptions small_options(std::uint64_t seed, int budget) {
  bo::BoOptions o;
  o.seed = seed;
  o.budget = budget;
  return o;
}

}  // namespace

TEST(BoRun, BudgetEqualToInitialDesign) {
  const auto space = gt::bowl_space();
  auto o = small_options(3, 5);
  const auto h = bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o);
  ASSERT_EQ(h.size(), 5u);
  const auto design = bo::initial_design(space, 5, 3);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(h[i].theta, design[i]);
  o.budget = 4;
  EXPECT_THROW(bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o), std::invalid_argument);
  o.budget = 5;
  o.n_init = 1;
  EXPECT_THROW(bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o), std::invalid_argument);
}

TEST(BoRun, MonotoneInBoundsAndReplayable) {
  const auto space = gt::bowl_space();
  const auto o = small_options(7, 15);
  const auto h = bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o);
  ASSERT_EQ(h.size(), 15u);
  double best = INFINITY;
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(h[i].iteration, static_cast<int>(i));
    EXPECT_TRUE(space.contains(h[i].theta));
    best = std::min(best, h[i].objectives[0]);
    EXPECT_EQ(h[i].best_so_far, best);
    if (i > 0) EXPECT_LE(h[i].best_so_far, h[i - 1].best_so_far);
  }
  const auto again = bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o);
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(h[i].theta, again[i].theta);
    EXPECT_EQ(h[i].seed, again[i].seed);
  }
}

TEST(BoRun, FindsBowlMinimum) {
  const auto h = bo::bo_run(bo::scalar_evaluator(gt::bowl), gt::bowl_space(), small_options(0, 30));
  EXPECT_LE(h.back().best_so_far, 1.01);
}

TEST(BoRun, FaultKeepsPartialHistory) {
  int calls = 0;
  auto thrower = bo::scalar_evaluator([&](const std::vector<double>& x) {
    if (++calls == 7) throw std::runtime_error("boom");
    return gt::bowl(x);
  });
  try {
    bo::bo_run(thrower, gt::bowl_space(), small_options(1, 10));
    FAIL() << "expected EvaluatorFault";
  } catch (const bo::EvaluatorFault& e) {
    EXPECT_EQ(e.partial().size(), 6u);
  }
  auto nan = bo::scalar_evaluator([&](const std::vector<double>&) { return std::nan(""); });
  try {
    bo::bo_run(nan, gt::bowl_space(), small_options(1, 10));
    FAIL() << "expected EvaluatorFault";
  } catch (const bo::EvaluatorFault& e) {
    EXPECT_EQ(e.partial().size(), 0u);
  }
}

TEST(History, CsvRoundTrip) {
  bo::History h({"a", "b"}, {"s"}, {"f"});
  h.append({0, 42, {0.1, 1e-300}, {3.0}, {-2.5}, {{"dx", 1.0 / 3.0}}, -2.5});
  h.append({1, 18446744073709551615ull, {0.7, -4.0}, {1.0}, {1.0}, {}, -2.5});
  std::stringstream ss;
  bo::write_history_csv(ss, h);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iter,seed,s,a,b,f,best_so_far,meta:dx");
  const auto back = bo::read_history_csv(ss, {"a", "b"}, {"s"}, {"f"});
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].seed, h[i].seed);
    EXPECT_EQ(back[i].theta, h[i].theta);
    EXPECT_EQ(back[i].context, h[i].context);
    EXPECT_EQ(back[i].objectives, h[i].objectives);
    EXPECT_EQ(back[i].metadata, h[i].metadata);
  }
  std::stringstream again;
  bo::write_history_csv(again, back);
  EXPECT_EQ(again.str(), text);
  std::stringstream bad("iter,seed,a\n0,1,2\n");
  EXPECT_THROW(bo::read_history_csv(bad, {"a", "b"}, {}, {"f"}), std::runtime_error);
  EXPECT_THROW(h.append({0, 0, {0.1}, {1.0}, {1.0}, {}, 0.0}), std::invalid_argument);
}

TEST(ParEgo, FrontNormalizationAndHypervolumeTrace) {
  bo::ParEgoOptions po;
  po.bo = small_options(4, 20);
  po.bo.objective_names = {"f1", "f2"};
  po.reference = {9.0, 9.0};
  const auto r = bo::parego_run(gt::biobjective, gt::biobjective_space(), po);
  const auto& h = r.history;
  ASSERT_EQ(h.size(), 20u);
  ASSERT_EQ(r.hypervolume_trace.size(), 20u);
  std::vector<bo::Objectives> ys;
  for (std::size_t i = 0; i < h.size(); ++i) {
    ys.push_back(h[i].objectives);
    for (const auto& z : bo::normalize_objectives(ys)) {
      for (double v : z) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
    EXPECT_EQ(r.front_trace[i], gf::oracle::nondominated(ys));
    if (i > 0) EXPECT_GE(r.hypervolume_trace[i], r.hypervolume_trace[i - 1]);
    EXPECT_NEAR(r.hypervolume_trace[i], gf::oracle::hypervolume_2d(ys, po.reference), 1e-9);
  }
  const auto flags = r.on_front();
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) {
      if (flags[i] && flags[j]) EXPECT_FALSE(bo::dominates(h[i].objectives, h[j].objectives));
    }
  }
  po.reference = {9.0};
  EXPECT_THROW(bo::parego_run(gt::biobjective, gt::biobjective_space(), po), std::invalid_argument);
}

TEST(ParEgo, NormalizeConstantColumn) {
  const auto z = bo::normalize_objectives({{1.0, 5.0}, {3.0, 5.0}, {2.0, 5.0}});
  EXPECT_EQ(z[0], (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(z[1], (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(z[2], (std::vector<double>{0.5, 0.0}));
}

TEST(Cbo, SingleContextBehavesLikeBo) {
  const auto space = gt::bowl_space();
  const bo::SearchSpace ctx({{"s", 0.0, 1.0}});
  const auto o = small_options(5, 12);
  const auto plain = bo::bo_run(bo::scalar_evaluator(gt::bowl), space, o);
  const std::vector<std::vector<double>> schedule(7, {0.5});
  const auto h = bo::cbo_run(
      [](const std::vector<double>& t, const std::vector<double>&, std::uint64_t) {
        return bo::Evaluation{{gt::bowl(t)}, {}};
      },
      space, ctx, schedule, o);
  ASSERT_EQ(h.size(), plain.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(h[i].seed, plain[i].seed);
    EXPECT_TRUE(space.contains(h[i].theta));
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(h[i].theta[k], plain[i].theta[k], 1e-3) << "iteration " << i;
  }
}

TEST(Cbo, RejectsBadSchedules) {
  const auto o = small_options(0, 10);
  EXPECT_THROW(bo::cbo_run(gt::contextual_quadratic, gt::theta_space(), gt::context_space(), {}, o),
               std::invalid_argument);
  EXPECT_THROW(bo::cbo_run(gt::contextual_quadratic, gt::theta_space(), gt::context_space(), {{1.5}}, o),
               std::invalid_argument);
}

TEST(Cbo, ContextualQuadraticPolicy) {
  int near = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto o = small_options(seed, 0);
    const auto h = bo::cbo_run(gt::contextual_quadratic, gt::theta_space(), gt::context_space(),
                               gt::quadratic_schedule(), o);
    ASSERT_EQ(h.size(), 20u);
    for (const auto& r : h.records()) EXPECT_TRUE(gt::theta_space().contains(r.theta));
    const auto cm = bo::fit_contextual_model(h, gt::theta_space(), gt::context_space(), o);
    const auto p = bo::cbo_policy(cm, {0.65}, 3);
    EXPECT_EQ(p, bo::cbo_policy(cm, {0.65}, 3));
    near += std::abs(p[0] - 0.65) <= 0.1;
    EXPECT_THROW(bo::cbo_policy(cm, {2.0}), std::invalid_argument);
  }
  EXPECT_GE(near, 4);
}
