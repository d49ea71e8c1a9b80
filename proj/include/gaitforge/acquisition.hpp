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

// Design of experiments, expected improvement, and the candidate-plus-refine
// maximizer shared by every optimizer and by the primitive solver.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gaitforge/common.hpp"
#include "gaitforge/gp.hpp"
#include "gaitforge/history.hpp"

namespace gaitforge::bo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Stream tags for make_rng; kept distinct so that adding a consumer never
// shifts another consumer's draws.
namespace tag {
inline constexpr std::uint64_t kDesign = 0x6c6873;     // "lhs"
inline constexpr std::uint64_t kPropose = 0x70726f70;  // "prop"
inline constexpr std::uint64_t kTrial = 0x747269;      // "tri"
inline constexpr std::uint64_t kFit = 0x666974;        // "fit"
inline constexpr std::uint64_t kWeights = 0x776774;    // "wgt"
}  // namespace tag

/// Latin hypercube in unit coordinates: one point per equal-width stratum in
/// every column, uniformly placed inside its stratum.
inline MatrixXd latin_hypercube_unit(int n, int d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("initial design needs n >= 1");
  MatrixXd u(n, d);
  for (int k = 0; k < d; ++k) {
    Rng rng = make_rng(seed, tag::kDesign, static_cast<std::uint64_t>(k));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {  // Fisher-Yates with the portable uniform
      const int j = static_cast<int>(uniform01(rng) * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < n; ++i) u(i, k) = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
  }
  return u;
}

inline std::vector<std::vector<double>> initial_design(const SearchSpace& space, int n,
                                                       std::uint64_t seed) {
  const MatrixXd u = latin_hypercube_unit(n, space.dim(), seed);
  std::vector<std::vector<double>> out;
  for (int i = 0; i < n; ++i) out.push_back(space.from_unit(u.row(i).transpose()));
  return out;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline constexpr double kMinSigma = 1e-12;

/// EI for minimization.
inline double expected_improvement(double mean, double sigma, double incumbent) {
  if (!(sigma >= kMinSigma)) return 0.0;
  const double z = (incumbent - mean) / sigma;
  return std::max((incumbent - mean) * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

inline double expected_improvement(const gp::GpModel& model, std::span<const double> x,
                                   double incumbent) {
  const auto p = model.predict(x);
  return expected_improvement(p.mean, std::sqrt(p.variance), incumbent);
}

struct ProposeOptions {
  int candidates = 2000;
  int refine_starts = 5;
  int refine_passes = 20;
  double initial_step = 0.1;  // unit coordinates
  double step_shrink = 0.6;
};

/// Maximizes a score over the unit cube [0,1]^d: uniform random candidates
/// (followed by the rows of `extra`, if any), then coordinate refinement from
/// the best few. `batch` scores the rows of a matrix, `point` scores one
/// vector. Ties go to the lowest candidate index.
template <class Batch, class Point>
VectorXd maximize_unit(int d, Batch&& batch, Point&& point, std::uint64_t seed,
                       const ProposeOptions& opt = {}, const MatrixXd& extra = MatrixXd()) {
  const int r = std::max(1, opt.candidates);
  const int m = r + static_cast<int>(extra.rows());
  Rng rng = make_rng(seed, tag::kPropose);
  MatrixXd cand(m, d);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < d; ++k) cand(i, k) = uniform01(rng);
  }
  if (extra.rows() > 0) cand.bottomRows(extra.rows()) = extra;
  const VectorXd score = batch(cand);
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });

  VectorXd best = cand.row(order[0]).transpose();
  double best_score = score[order[0]];
  const int starts = std::min(m, std::max(0, opt.refine_starts));
  for (int s = 0; s < starts; ++s) {
    VectorXd x = cand.row(order[static_cast<std::size_t>(s)]).transpose();
    double fx = score[order[static_cast<std::size_t>(s)]];
    double step = opt.initial_step;
    for (int pass = 0; pass < opt.refine_passes; ++pass) {
      bool improved = false;
      for (int k = 0; k < d; ++k) {
        for (double dir : {1.0, -1.0}) {
          const double t = std::clamp(x[k] + dir * step, 0.0, 1.0);
          if (t == x[k]) continue;
          VectorXd xt = x;
          xt[k] = t;
          const double ft = point(xt);
          if (ft > fx) {
            x = std::move(xt);
            fx = ft;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= opt.step_shrink;
    }
    if (fx > best_score) {
      best_score = fx;
      best = x;
    }
  }
  return best;
}

/// Appends fixed trailing coordinates to every query (used to pin the context).
inline MatrixXd with_suffix(const MatrixXd& x, const VectorXd& suffix) {
  if (suffix.size() == 0) return x;
  MatrixXd q(x.rows(), x.cols() + suffix.size());
  q.leftCols(x.cols()) = x;
  q.rightCols(suffix.size()) = suffix.transpose().replicate(x.rows(), 1);
  return q;
}

inline VectorXd with_suffix(const VectorXd& x, const VectorXd& suffix) {
  VectorXd q(x.size() + suffix.size());
  q << x, suffix;
  return q;
}

/// EI maximizer over the leading coordinates of `model`; any trailing model
/// inputs are fixed to `suffix` (unit coordinates). Returns unit coordinates.
inline VectorXd maximize_ei_unit(const gp::GpModel& model, int d, const VectorXd& suffix,
                                 double incumbent, std::uint64_t seed,
                                 const ProposeOptions& opt = {}) {
  auto batch = [&](const MatrixXd& x) {
    VectorXd mean, var;
    model.predict_batch_unit(with_suffix(x, suffix), &mean, &var);
    VectorXd ei(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      ei[i] = expected_improvement(mean[i], std::sqrt(var[i]), incumbent);
    }
    return ei;
  };
  auto point = [&](const VectorXd& x) {
    const auto p = model.predict_unit(with_suffix(x, suffix));
    return expected_improvement(p.mean, std::sqrt(p.variance), incumbent);
  };
  return maximize_unit(d, batch, point, seed, opt);
}

/// Next point to evaluate: argmax EI over the whole search space.
inline std::vector<double> propose(const gp::GpModel& model, const SearchSpace& space,
                                   double incumbent, std::uint64_t seed,
                                   const ProposeOptions& opt = {}) {
  if (model.dim() != space.dim()) throw std::invalid_argument("model/search-space dimension mismatch");
  return space.from_unit(maximize_ei_unit(model, space.dim(), VectorXd(), incumbent, seed, opt));
}

}  // namespace gaitforge::bo
