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

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cqed/beats.hpp"

namespace cqed {

/// Standing-wave mode along z with a Gaussian transverse profile.
struct ModeGeometry {
  double waist = 56e-6;        ///< m
  double wavelength = 780e-9;  ///< m
  double g0 = 0.25;            ///< peak coupling, units of gamma

  void validate() const;
  bool operator==(const ModeGeometry&) const = default;
};

struct BeamConfig {
  double mean_speed = 15.0;    ///< m/s
  double speed_sigma = 1.1;    ///< m/s, Gaussian
  double theta_p = 1.0 / 40.0; ///< rad, triangular half-width toward the cavity axis
  double theta_t = 1.0 / 80.0; ///< rad, triangular half-width transverse
  double mean_atoms = 0.1;     ///< mean atom number in the mode volume
  /// Entry offsets: y0 in [-y_extent w, y_extent w].
  double y_extent = 1.5;
  /// t_j is the time the Gaussian envelope spends above this fraction.
  double threshold = 0.01;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on bad values (mean_atoms must stay below 1).
  void validate() const;
  /// Nonempty when mean_atoms > 0.2, where the one-atom picture is doubtful.
  std::vector<std::string> warnings() const;
  bool operator==(const BeamConfig&) const = default;
};

/// Straight path crossing the plane x = 0 at (0, y0, z0). Times are in
/// seconds measured from that crossing.
struct Trajectory {
  double y0 = 0.0;
  double z0 = 0.0;
  double speed = 0.0;
  double theta_p = 0.0;
  double theta_t = 0.0;
  double entry_s = 0.0;  ///< envelope rises above threshold
  double exit_s = 0.0;   ///< envelope falls below threshold

  double transit_s() const { return exit_s - entry_s; }
  /// (x, y, z) at time `s`.
  std::array<double, 3> position(double s) const;
};

/// Build a trajectory from its entry data; computes the threshold crossings.
/// Throws InvalidArgument if the path never rises above the threshold.
Trajectory make_trajectory(double y0, double z0, double speed, double theta_p, double theta_t,
                           const ModeGeometry& geom, double threshold = 0.01);

Trajectory sample_trajectory(const BeamConfig& cfg, const ModeGeometry& geom,
                             std::mt19937_64& rng);

/// g0 |cos(2 pi z / lambda)| exp(-(x^2 + y^2) / w^2) at time `s`.
double coupling_at(const Trajectory& traj, const ModeGeometry& geom, double s);
std::vector<double> coupling_profile(const Trajectory& traj, const ModeGeometry& geom,
                                     std::span<const double> times_s);

/// 1 / gamma in seconds for gamma / 2 pi = gamma_hz.
double time_unit_s(double gamma_hz);

struct TransitOptions {
  std::size_t start_points = 32;
  PropagationOptions propagation{0.0, 50, true};
};

/// Time averages over the transit of one atom.
struct TransitCorrelation {
  double transit_time = 0.0;  ///< units of 1 / gamma
  /// (1/t_j) int <a2^dag a2>(t) dt
  double intensity = 0.0;
  /// (1/t_j) int <a2^dag(t) a2^dag(t+tau) a2(t+tau) a2(t)> dt on the tau grid
  std::vector<double> correlation;
  PropagationStats stats;
};

/// Atom enters in b0 with the cavity in its driven empty state. `coupling`
/// maps time since entry (units of 1 / gamma) to g. Past `transit_time`
/// the coupling is zero.
TransitCorrelation transit_correlation(const std::function<double(double)>& coupling,
                                       double transit_time, const Generator& gen,
                                       std::span<const double> tau_grid,
                                       const TransitOptions& options = {});
TransitCorrelation transit_correlation(const Trajectory& traj, const ModeGeometry& geom,
                                       const Generator& gen, std::span<const double> tau_grid,
                                       const TransitOptions& options = {});

/// Driven empty-cavity steady state with the atom in b0, on `gen`'s basis.
DensityMatrix empty_cavity_state(const Generator& gen);

struct EnsembleOptions {
  TransitOptions transit;
  /// 0 reads CQED_THREADS, falling back to the hardware concurrency.
  unsigned workers = 0;
};

struct EnsembleResult {
  /// 1 + mean G / (mean_atoms * mean I^2), with delta-method standard errors.
  CorrelationTrace trace;
  double mean_intensity = 0.0;  ///< mean_atoms * mean I
  double mean_transit_time = 0.0;
  std::size_t trajectories = 0;
  PropagationStats stats;
};

/// Trajectory k draws from mt19937_64 seeded with seed_seq{seed, k}, so the
/// result does not depend on the worker count.
EnsembleResult ensemble_g2(const BeamConfig& cfg, const ModeGeometry& geom,
                           const SystemParams& params, const CompositeBasis& basis,
                           std::size_t n_traj, std::span<const double> tau_grid,
                           std::uint64_t seed, const EnsembleOptions& options = {});

/// Combine per-trajectory results in the given order.
EnsembleResult reduce_ensemble(std::span<const TransitCorrelation> transits, double mean_atoms,
                               std::span<const double> tau_grid);

/// Worker count from CQED_THREADS, else the hardware concurrency (at least 1).
unsigned default_workers();

}  // namespace cqed
