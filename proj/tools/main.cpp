// Copyright 2026 The cqed-beats Authors
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

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cqed/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional photon-correlation quantum beats in a two-mode cavity"};
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool check = false;
  app.add_option("--config", config_path, "Run configuration file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides [run] output)");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides [run] seed)");
  app.add_flag("--check", check, "Validate the configuration and exit");
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << config_path << "\n";
    return 2;
  }
  std::ostringstream text;
  text << in.rdbuf();

  cqed::RunConfig config;
  try {
    config = cqed::parse_config(text.str());
  } catch (const cqed::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return 1;
  }
  if (*out_opt) config.output = out_dir;
  if (*seed_opt) {
    config.seed = seed;
    config.beam.seed = seed;
  }
  for (const auto& w : config.beam.warnings()) {
    if (config.mode == cqed::RunMode::Beam) std::cerr << "warning: " << w << "\n";
  }
  if (check) {
    std::cout << "ok: mode " << cqed::to_string(config.mode) << ", config_hash "
              << cqed::config_hash(config) << "\n";
    return 0;
  }
  try {
    cqed::run(config);
  } catch (const cqed::DegenerateSteadyState& e) {
    std::cerr << "error (steady state): " << e.what() << "\n";
    return 3;
  } catch (const cqed::NumericalError& e) {
    std::cerr << "error (numerics): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << "wrote " << config.output << "\n";
  return 0;
}
