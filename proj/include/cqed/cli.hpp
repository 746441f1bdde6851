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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqed/beam.hpp"
#include "cqed/control.hpp"
#include "cqed/error.hpp"

namespace cqed {

enum class RunMode { Steady, G2, Feedback, Qec, Beam };

std::string_view to_string(RunMode mode);

struct RunConfig {
  RunMode mode = RunMode::G2;
  SystemParams params;

  int n1_max = 3;
  int n2_max = 2;
  bool control_levels = false;

  Schedule schedule;
  ReferenceState reference = ReferenceState::SteadyState;
  double t_prep = 20.0;
  bool outcomes_known = false;

  BeamConfig beam;
  double waist = 56e-6;
  double wavelength = 780e-9;
  std::size_t n_traj = 200;
  std::size_t start_points = 32;

  double tau_max = 40.0;
  std::size_t tau_points = 4096;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::optional<double> fringe_lo;
  std::optional<double> fringe_hi;
  double max_step = 0.0;
  std::size_t check_stride = 16;

  CompositeBasis basis() const;
  ModeGeometry geometry() const;
  /// [fringe_lo, fringe_hi], defaulting to [pi / delta, 3 pi / delta]
  /// clipped to the tau grid.
  std::pair<double, double> fringe_window() const;

  bool operator==(const RunConfig&) const = default;
};

struct ConfigDiagnostic {
  int line = 0;  ///< 1-based; 0 for whole-file problems
  std::string message;
};

class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<ConfigDiagnostic> diagnostics);
  const std::vector<ConfigDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<ConfigDiagnostic> diagnostics_;
};

/// Parses and validates. Throws ConfigError listing every problem found.
RunConfig parse_config(std::string_view text);

/// Canonical text that parses back to an identical RunConfig.
std::string echo_config(const RunConfig& config);

/// 64-bit FNV-1a of the canonical echo without the output path, as 16 hex
/// digits.
std::string config_hash(const RunConfig& config);

/// Runs the selected mode and writes trace.csv (beam also trace_stderr.csv),
/// metrics.txt and config.txt into config.output.
void run(const RunConfig& config, const EnsembleOptions& beam_options = {});

}  // namespace cqed
