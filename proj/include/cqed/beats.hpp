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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cqed/liouville.hpp"

namespace cqed {

enum class Normalization { NormalizedG2, ConditionalIntensity, UnnormalizedG2 };

std::string_view to_string(Normalization n);

struct TraceMetadata {
  SystemParams params;
  std::optional<std::uint64_t> seed;
  /// Populations of b-1 and b+1 in the conditioned state at tau = 0.
  double population_minus = 0.0;
  double population_plus = 0.0;
  PropagationStats stats;
};

struct CorrelationTrace {
  std::vector<double> tau;
  std::vector<double> values;
  Normalization normalization = Normalization::NormalizedG2;
  TraceMetadata meta;
  /// Empty unless the trace is a Monte Carlo estimate.
  std::vector<double> stderr_values;

  /// Throws InvalidArgument on a non-uniform grid or negative intensities.
  void validate() const;
};

struct FringeMetrics {
  double visibility = 0.0;
  double predictability = 0.0;
  double beat_frequency = 0.0;
  std::vector<double> minima;
  std::vector<double> maxima;
  /// No oscillation inside the window; visibility is reported as 0.
  bool flat = false;

  double complementarity() const {
    return predictability * predictability + visibility * visibility;
  }
};

/// Tr(a^dag a rho) for the selected mode.
double mean_photon(const DensityMatrix& rho, Mode which);

/// a2 rho a2^dag / Tr(a2 rho a2^dag). Throws NumericalError when the click
/// probability vanishes.
DensityMatrix conditional_state_after_click(const DensityMatrix& rho);

/// |p(b-1) - p(b+1)| / (p(b-1) + p(b+1)) of a state.
double predictability(const Matrix& rho, const CompositeBasis& basis);

/// g2(tau) = Tr[a2^dag a2 e^{L tau}(a2 rho a2^dag)] / <a2^dag a2>^2 on a
/// uniform grid starting at 0.
CorrelationTrace g2_undriven(const DensityMatrix& rho_ss, const Generator& gen,
                             std::span<const double> tau_grid,
                             const PropagationOptions& options = {});

/// Atom in b0 with the cavity relaxed under the drive for `t_prep` (atom
/// coupled throughout). The reference state for engineered superpositions.
DensityMatrix ground_prepared_state(const Generator& gen, double t_prep = 20.0);

/// Conditional intensity after a click on `reference`, Tr[a2^dag a2 rho_c(tau)]
/// with rho_c normalized at tau = 0, divided by `intensity`. With the steady
/// state as reference and its own intensity this is g2_undriven.
CorrelationTrace g2_conditioned(const DensityMatrix& reference, double intensity,
                                const Generator& gen, std::span<const double> tau_grid,
                                const PropagationOptions& options = {});

/// Fringe extrema inside [tau_lo, tau_hi] with parabolic refinement.
/// V uses the first minimum after tau_lo and the maximum that follows it.
/// P is read from the trace metadata.
FringeMetrics fringe_metrics(const CorrelationTrace& trace, double tau_lo, double tau_hi);

/// Angular frequency of the dominant spectral peak on [tau_lo, tau_hi] after
/// subtracting a running mean over one period.
double spectral_peak(const CorrelationTrace& trace, double tau_lo, double tau_hi);

/// Value at `tau` by linear interpolation.
double sample(const CorrelationTrace& trace, double tau);

/// `tau,gvalue` (or `tau,gvalue,stderr`) with 17 significant digits.
/// `comments` are written first as `# ` lines.
void write_csv(std::ostream& os, const CorrelationTrace& trace, bool with_stderr,
               const std::vector<std::string>& comments = {});

}  // namespace cqed
