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

// gaitforge <experiment> --config <file> [--seed-base N] [--out DIR] [--noise on|off]

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gaitforge/config.hpp"
#include "gaitforge/experiment.hpp"

namespace ex = gaitforge::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Gait learning experiments on a simulated hexapod", "gaitforge"};
  app.set_version_flag("--version", GAITFORGE_VERSION);
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_base;
  std::string noise;
  for (const auto& name : ex::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "config file or run manifest")->required();
    sub->add_option("--seed-base", seed_base, "first seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--noise", noise, "observation noise")->check(CLI::IsMember({"on", "off"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ex::kConfigError;
  }
  const std::string experiment = app.get_subcommands().front()->get_name();

  ex::Overrides ov;
  ov.seed_base = seed_base;
  if (!noise.empty()) ov.noise = noise == "on";

  gaitforge::config::Config cfg;
  try {
    cfg = gaitforge::config::Config::load(config_path);
  } catch (const gaitforge::config::ConfigError& e) {
    std::cerr << "gaitforge: config error:\n" << e.what() << '\n';
    return ex::kConfigError;
  }
  const auto config_dir = std::filesystem::absolute(config_path).parent_path();
  const auto res = ex::run_experiment(experiment, std::move(cfg), ov, out_dir, config_dir, std::cerr);
  if (res.exit_code == ex::kConfigError) {
    std::cerr << "gaitforge: config error:\n" << res.message << '\n';
  } else if (res.exit_code == ex::kEvaluatorFault) {
    std::cerr << "gaitforge: " << res.message << " (partial results in " << out_dir << ")\n";
  } else {
    std::cerr << "gaitforge: wrote " << res.files.size() << " files and manifest.json to " << out_dir << '\n';
  }
  return res.exit_code;
}
