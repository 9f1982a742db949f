// Copyright 2026 The qbm Authors
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


// Command-line front end for the QBM experiments.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime failure.

#include "qbm/experiments.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

qbm::ExperimentConfig load_config(const CommonOptions& opt, qbm::ExperimentKind kind) {
  nlohmann::json j = nlohmann::json::object();
  if (!opt.config.empty()) {
    std::ifstream in(opt.config);
    if (!in) throw qbm::ValidationError("--config: cannot open '" + opt.config + "'");
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw qbm::ValidationError("--config: " + std::string(e.what()));
    }
  }
  if (opt.seed) j["seed"] = *opt.seed;
  if (opt.out_dir) j["out_dir"] = *opt.out_dir;
  if (opt.threads) j["threads"] = *opt.threads;
  return qbm::experiment_config_from_json(j, kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum Boltzmann machine training with nested variational loops"};
  app.require_subcommand(1);
  CommonOptions opt;
  std::optional<qbm::ExperimentKind> chosen;
  for (const auto& [kind, name] : qbm::experiment_kind_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
    sub->add_option("--out-dir", opt.out_dir, "output directory (overrides the config)");
    sub->add_option("--threads", opt.threads, "worker threads for independent sweep points")->check(CLI::PositiveNumber);
    sub->callback([&chosen, k = kind] { chosen = k; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  qbm::ExperimentConfig cfg;
  try {
    cfg = load_config(opt, *chosen);
  } catch (const qbm::ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    qbm::run_experiment(cfg);
  } catch (const qbm::ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  std::cout << "wrote " << cfg.out_dir << '\n';
  return 0;
}
