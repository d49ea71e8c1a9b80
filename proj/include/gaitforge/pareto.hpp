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

// Pareto bookkeeping for minimization problems.

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace gaitforge::bo {

using Objectives = std::vector<double>;

/// y1 dominates y2: no worse everywhere and strictly better somewhere.
inline bool dominates(std::span<const double> y1, std::span<const double> y2) {
  if (y1.size() != y2.size()) throw std::invalid_argument("objective vectors differ in length");
  bool strict = false;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    if (y1[i] > y2[i]) return false;
    if (y1[i] < y2[i]) strict = true;
  }
  return strict;
}

/// Indices (into `points`, ascending) of the nondominated subset. Exact
/// duplicates keep only their earliest occurrence.
inline std::vector<std::size_t> pareto_indices(const std::vector<Objectives>& points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (j == i) continue;
      if (dominates(points[j], points[i])) keep = false;
      if (j < i && points[j] == points[i]) keep = false;
    }
    if (keep) front.push_back(i);
  }
  return front;
}

inline std::vector<Objectives> pareto_front(const std::vector<Objectives>& points) {
  std::vector<Objectives> out;
  for (auto i : pareto_indices(points)) out.push_back(points[i]);
  return out;
}

struct ScalarizationWeights {
  std::vector<double> lambda;
  double rho = 0.05;
};

/// Augmented Tchebycheff: max_i(λ_i y_i) + ρ Σ λ_i y_i.
inline double tchebycheff_scalarize(std::span<const double> y_norm, const ScalarizationWeights& w) {
  if (y_norm.size() != w.lambda.size()) throw std::invalid_argument("weight/objective length mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < y_norm.size(); ++i) {
    mx = std::max(mx, w.lambda[i] * y_norm[i]);
    sum += w.lambda[i] * y_norm[i];
  }
  return mx + w.rho * sum;
}

/// All weight vectors with components in {0, 1/s, ..., 1} summing to one.
inline std::vector<std::vector<double>> simplex_weights(int k, int s) {
  if (k < 1 || s < 1) throw std::invalid_argument("simplex grid needs k >= 1 and s >= 1");
  std::vector<std::vector<double>> out;
  std::vector<int> c(static_cast<std::size_t>(k), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == k - 1) {
      c[static_cast<std::size_t>(pos)] = left;
      std::vector<double> w;
      for (int v : c) w.push_back(static_cast<double>(v) / s);
      out.push_back(std::move(w));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, s);
  return out;
}

/// Exact dominated area of a 2-D front relative to `reference`.
inline double hypervolume_2d(std::vector<Objectives> front, std::span<const double> reference) {
  if (reference.size() != 2) throw std::invalid_argument("hypervolume_2d needs a 2-D reference");
  for (const auto& p : front) {
    if (p.size() != 2) throw std::invalid_argument("hypervolume_2d needs 2-D points");
    if (p[0] > reference[0] || p[1] > reference[1]) {
      throw std::invalid_argument("front point lies beyond the reference point");
    }
  }
  std::sort(front.begin(), front.end());
  double area = 0.0;
  double ceiling = reference[1];
  for (const auto& p : front) {
    if (p[1] < ceiling) {
      area += (reference[0] - p[0]) * (ceiling - p[1]);
      ceiling = p[1];
    }
  }
  return area;
}

/// Hypervolume of the points that lie inside the reference box; others are ignored.
inline double hypervolume_within(const std::vector<Objectives>& points, std::span<const double> reference) {
  std::vector<Objectives> inside;
  for (const auto& p : points) {
    if (p[0] <= reference[0] && p[1] <= reference[1]) inside.push_back(p);
  }
  return hypervolume_2d(pareto_front(inside), reference);
}

}  // namespace gaitforge::bo
