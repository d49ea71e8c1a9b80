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

// Line-oriented `key = value` configuration.
//
//   # comment
//   gait = tripod
//   omega = 25.1327
//
// Typed getters never throw; they record problems so that every error in a
// file can be reported at once. Each getter also records the effective value,
// which is what a run manifest echoes (and what a replay feeds back in).

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/common.hpp"
#include "gaitforge/cpg.hpp"
#include "json.hpp"

namespace gaitforge::config {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s;
    for (const auto& m : p) s += (s.empty() ? "" : "\n") + m;
    return s;
  }
  std::vector<std::string> problems_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

inline bool parse_double(const std::string& s, double* out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto res = std::from_chars(b, e, *out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& source = "<config>") {
    Config c;
    std::vector<std::string> problems;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = source + ":" + std::to_string(lineno) + ": ";
      if (eq == std::string::npos) {
        problems.push_back(where + "expected 'key = value'");
        continue;
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) {
        problems.push_back(where + "empty key");
      } else if (c.values_.contains(key)) {
        problems.push_back(where + "duplicate key '" + key + "'");
      } else {
        c.values_[key] = value;
      }
    }
    if (!problems.empty()) throw ConfigError(problems);
    return c;
  }

  /// Reads a config file, or the `config` object of a run manifest (JSON).
  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      Config c;
      try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& [k, v] : j.at("config").items()) {
          c.values_[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError({path + ": not a valid run manifest (" + e.what() + ")"});
      }
      return c;
    }
    std::istringstream is(text);
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const std::string v = raw(key, fallback);
    resolved_[key] = v;
    return v;
  }

  /// File path. Relative values are taken relative to `base` and echoed
  /// absolute, so a manifest replays from any working directory.
  std::string get_path(const std::string& key, const std::filesystem::path& base) {
    std::string v = raw(key, "");
    if (!v.empty()) {
      std::filesystem::path q(v);
      if (q.is_relative()) q = base / q;
      v = std::filesystem::weakly_canonical(q).string();
    }
    resolved_[key] = v;
    return v;
  }

  std::string get_choice(const std::string& key, const std::string& fallback,
                         const std::vector<std::string>& choices) {
    const std::string v = get_string(key, fallback);
    if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
      std::string all;
      for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
      problem(key, "'" + v + "' is not one of {" + all + "}");
    }
    return v;
  }

  double get_double(const std::string& key, double fallback, double lo, double hi) {
    double v = fallback;
    if (has(key) && !detail::parse_double(values_.at(key), &v)) {
      problem(key, "'" + values_.at(key) + "' is not a number");
      v = fallback;
    } else if (!(v >= lo && v <= hi)) {
      problem(key, format_double(v) + " outside [" + format_double(lo) + ", " + format_double(hi) + "]");
    }
    resolved_[key] = format_double(v);
    return v;
  }

  int get_int(const std::string& key, int fallback, int lo, int hi) {
    long long v = fallback;
    if (has(key)) {
      const std::string& s = values_.at(key);
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        problem(key, "'" + s + "' is not an integer");
        v = fallback;
      }
    }
    if (v < lo || v > hi) problem(key, std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    resolved_[key] = std::to_string(v);
    return static_cast<int>(v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    std::uint64_t v = fallback;
    if (has(key)) {
      const std::string& s = values_.at(key);
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        problem(key, "'" + s + "' is not a nonnegative integer");
        v = fallback;
      }
    }
    resolved_[key] = std::to_string(v);
    return v;
  }

  bool get_switch(const std::string& key, bool fallback) {
    const std::string v = raw(key, fallback ? "on" : "off");
    bool out = fallback;
    if (v == "on" || v == "true" || v == "1" || v == "yes") {
      out = true;
    } else if (v == "off" || v == "false" || v == "0" || v == "no") {
      out = false;
    } else {
      problem(key, "'" + v + "' is not on/off");
    }
    resolved_[key] = out ? "on" : "off";
    return out;
  }

  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback,
                                  double lo, double hi) {
    std::vector<double> out = fallback;
    if (has(key)) {
      out.clear();
      for (const auto& cell : detail::split_list(values_.at(key))) {
        double v = 0.0;
        if (!detail::parse_double(cell, &v)) {
          problem(key, "'" + cell + "' is not a number");
        } else {
          out.push_back(v);
        }
      }
    }
    std::string echo;
    for (double v : out) {
      if (!(v >= lo && v <= hi)) {
        problem(key, format_double(v) + " outside [" + format_double(lo) + ", " + format_double(hi) + "]");
      }
      echo += (echo.empty() ? "" : ",") + format_double(v);
    }
    resolved_[key] = echo;
    return out;
  }

  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) {
    std::vector<std::string> out = has(key) ? detail::split_list(values_.at(key)) : fallback;
    std::string echo;
    for (const auto& v : out) echo += (echo.empty() ? "" : ",") + v;
    resolved_[key] = echo;
    return out;
  }

  void problem(const std::string& key, const std::string& what) {
    problems_.push_back("config key '" + key + "': " + what);
  }

  /// Raises every recorded problem, plus any key that no getter asked for.
  void finish() {
    for (const auto& [k, v] : values_) {
      if (!resolved_.contains(k)) problems_.push_back("unknown config key '" + k + "'");
    }
    if (!problems_.empty()) throw ConfigError(problems_);
  }

  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::string raw(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
  std::vector<std::string> problems_;
};

/// A single CPG network described in the shared config format:
/// gait, omega, vh_phase_diff, amp_left, amp_right, a_r, a_x, dt.
struct NetworkSettings {
  std::string gait = "tripod";
  cpg::ControlParams params;
  cpg::Gains gains;
  double dt = cpg::kDefaultDt;
};

inline NetworkSettings read_network(Config& c) {
  using B = cpg::ParamBounds;
  NetworkSettings n;
  n.gait = c.get_choice("gait", n.gait, {"tripod", "ripple", "wave", "four_two"});
  n.params.frequency = c.get_double("omega", n.params.frequency, B::kFrequencyMin, B::kFrequencyMax);
  n.params.vh_phase_diff = c.get_double("vh_phase_diff", n.params.vh_phase_diff, B::kPhaseDiffMin, B::kPhaseDiffMax);
  n.params.amp_left = c.get_double("amp_left", n.params.amp_left, B::kAmpMin, B::kAmpMax);
  n.params.amp_right = c.get_double("amp_right", n.params.amp_right, B::kAmpMin, B::kAmpMax);
  n.gains.a_r = c.get_double("a_r", n.gains.a_r, 1e-3, 1e3);
  n.gains.a_x = c.get_double("a_x", n.gains.a_x, 1e-3, 1e3);
  n.dt = c.get_double("dt", n.dt, 1e-6, cpg::kMaxDt);
  return n;
}

inline void write_network(std::ostream& os, const NetworkSettings& n) {
  os << "gait = " << n.gait << '\n'
     << "omega = " << format_double(n.params.frequency) << '\n'
     << "vh_phase_diff = " << format_double(n.params.vh_phase_diff) << '\n'
     << "amp_left = " << format_double(n.params.amp_left) << '\n'
     << "amp_right = " << format_double(n.params.amp_right) << '\n'
     << "a_r = " << format_double(n.gains.a_r) << '\n'
     << "a_x = " << format_double(n.gains.a_x) << '\n'
     << "dt = " << format_double(n.dt) << '\n';
}

}  // namespace gaitforge::config
