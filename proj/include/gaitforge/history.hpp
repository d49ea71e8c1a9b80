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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/common.hpp"
#include "gaitforge/gp.hpp"

namespace gaitforge::bo {

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
    for (const auto& d : dims_) {
      if (!(d.lower < d.upper)) {
        throw std::invalid_argument("search dimension '" + d.name + "' needs lower < upper");
      }
    }
  }

  int dim() const { return static_cast<int>(dims_.size()); }
  const std::vector<Dimension>& dims() const { return dims_; }
  const Dimension& operator[](int i) const { return dims_[static_cast<std::size_t>(i)]; }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& d : dims_) n.push_back(d.name);
    return n;
  }

  bool contains(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
      if (!(x[i] >= dims_[i].lower && x[i] <= dims_[i].upper)) return false;
    }
    return true;
  }

  std::vector<double> from_unit(const Eigen::VectorXd& u) const {
    std::vector<double> x(dims_.size());
    for (int i = 0; i < dim(); ++i) {
      x[i] = std::clamp(dims_[i].lower + u[i] * (dims_[i].upper - dims_[i].lower), dims_[i].lower,
                        dims_[i].upper);
    }
    return x;
  }

  Eigen::VectorXd to_unit(const std::vector<double>& x) const { return transform().to_unit(x); }

  gp::InputTransform transform() const {
    gp::InputTransform t{Eigen::VectorXd(dim()), Eigen::VectorXd(dim())};
    for (int i = 0; i < dim(); ++i) {
      t.lower[i] = dims_[i].lower;
      t.upper[i] = dims_[i].upper;
    }
    return t;
  }

  /// Concatenation (this space first).
  SearchSpace joined(const SearchSpace& other) const {
    auto d = dims_;
    d.insert(d.end(), other.dims_.begin(), other.dims_.end());
    return SearchSpace(std::move(d));
  }

 private:
  std::vector<Dimension> dims_;
};

/// What an evaluator returns: the objective vector (minimized) plus free-form
/// trial metadata such as observed displacements.
struct Evaluation {
  std::vector<double> objectives;
  std::map<std::string, double> metadata;
};

struct Record {
  int iteration = 0;
  std::uint64_t seed = 0;
  std::vector<double> theta;
  std::vector<double> context;
  std::vector<double> objectives;
  std::map<std::string, double> metadata;
  double best_so_far = 0.0;
};

/// Append-only log of evaluations with contiguous iteration indices.
class History {
 public:
  History() = default;
  History(std::vector<std::string> theta_names, std::vector<std::string> context_names,
          std::vector<std::string> objective_names)
      : theta_names_(std::move(theta_names)),
        context_names_(std::move(context_names)),
        objective_names_(std::move(objective_names)) {}

  void append(Record r) {
    r.iteration = static_cast<int>(records_.size());
    if (r.theta.size() != theta_names_.size() || r.context.size() != context_names_.size() ||
        r.objectives.size() != objective_names_.size()) {
      throw std::invalid_argument("record shape does not match history columns");
    }
    records_.push_back(std::move(r));
  }

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  const Record& back() const { return records_.back(); }

  const std::vector<std::string>& theta_names() const { return theta_names_; }
  const std::vector<std::string>& context_names() const { return context_names_; }
  const std::vector<std::string>& objective_names() const { return objective_names_; }

  std::string id;  // provenance tag, e.g. "curve/seed=3"

  /// Metadata keys in sorted order, union over records.
  std::vector<std::string> metadata_names() const {
    std::vector<std::string> keys;
    for (const auto& r : records_) {
      for (const auto& [k, v] : r.metadata) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  }

 private:
  std::vector<std::string> theta_names_;
  std::vector<std::string> context_names_;
  std::vector<std::string> objective_names_;
  std::vector<Record> records_;
};

// ---------------------------------------------------------------------------
// CSV: iter,seed,context...,theta...,objective...,best_so_far[,on_front][,metadata...]

inline void write_history_csv(std::ostream& os, const History& h,
                              const std::vector<bool>* on_front = nullptr) {
  const auto meta = h.metadata_names();
  os << "iter,seed";
  for (const auto& n : h.context_names()) os << ',' << n;
  for (const auto& n : h.theta_names()) os << ',' << n;
  for (const auto& n : h.objective_names()) os << ',' << n;
  os << ",best_so_far";
  if (on_front) os << ",on_front";
  for (const auto& n : meta) os << ",meta:" << n;
  os << '\n';
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& r = h[i];
    os << r.iteration << ',' << r.seed;
    for (double v : r.context) os << ',' << format_double(v);
    for (double v : r.theta) os << ',' << format_double(v);
    for (double v : r.objectives) os << ',' << format_double(v);
    os << ',' << format_double(r.best_so_far);
    if (on_front) os << ',' << ((*on_front)[i] ? 1 : 0);
    for (const auto& n : meta) {
      auto it = r.metadata.find(n);
      os << ',' << (it == r.metadata.end() ? std::string() : format_double(it->second));
    }
    os << '\n';
  }
}

/// Reads a history CSV. Column roles are recovered from the declared theta,
/// context and objective names.
inline History read_history_csv(std::istream& in, std::vector<std::string> theta_names,
                                std::vector<std::string> context_names,
                                std::vector<std::string> objective_names) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty history file");
  const auto header = split(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("history file lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_iter = col("iter");
  const std::size_t c_seed = col("seed");
  const std::size_t c_best = col("best_so_far");
  std::vector<std::size_t> c_theta, c_ctx, c_obj;
  for (const auto& n : theta_names) c_theta.push_back(col(n));
  for (const auto& n : context_names) c_ctx.push_back(col(n));
  for (const auto& n : objective_names) c_obj.push_back(col(n));
  std::vector<std::pair<std::string, std::size_t>> c_meta;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("meta:", 0) == 0) c_meta.emplace_back(header[c].substr(5), c);
  }
  History h(theta_names, context_names, objective_names);
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::runtime_error("ragged history row");
    Record r;
    if (std::stoi(cells[c_iter]) != expected++) throw std::runtime_error("non-contiguous iteration index");
    r.seed = std::stoull(cells[c_seed]);
    for (auto c : c_theta) r.theta.push_back(std::stod(cells[c]));
    for (auto c : c_ctx) r.context.push_back(std::stod(cells[c]));
    for (auto c : c_obj) r.objectives.push_back(std::stod(cells[c]));
    r.best_so_far = std::stod(cells[c_best]);
    for (const auto& [name, c] : c_meta) {
      if (!cells[c].empty()) r.metadata[name] = std::stod(cells[c]);
    }
    h.append(std::move(r));
  }
  return h;
}

}  // namespace gaitforge::bo
