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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqed/beats.hpp"

namespace cqed {

using Matrix2 = Eigen::Matrix2cd;
using Vector2 = Eigen::Vector2cd;

/// alpha0 |0> + alpha1 |1>, with |0> = b-1 and |1> = b+1.
struct QubitState {
  cplx alpha0{1.0, 0.0};
  cplx alpha1{0.0, 0.0};

  /// Throws InvalidArgument unless |alpha0|^2 + |alpha1|^2 = 1 within `tol`.
  void validate(double tol = 1e-12) const;
  Vector2 vector() const { return {alpha0, alpha1}; }
  Matrix2 density() const;

  bool operator==(const QubitState&) const = default;
};

/// Generalized measurement pair: yes = sqrt(p)|1><1|,
/// no = 1 - (1 - sqrt(1 - p))|1><1|.
struct MeasurementOps {
  double p = 0.0;
  Matrix2 yes;
  Matrix2 no;
};

MeasurementOps measurement_ops(double p);

struct PartialMeasurement {
  double p_yes = 0.0;
  double p_no = 1.0;
  /// Empty when the null outcome has zero probability.
  std::optional<QubitState> post_no;
};

PartialMeasurement partial_measure(const QubitState& state, double p);

enum class Outcome { Yes, No };

struct QubitBranch {
  std::vector<Outcome> record;
  double probability = 0.0;
  Matrix2 state;  ///< normalized post-measurement qubit density matrix
};

/// Measure, swap, measure, swap. A yes outcome removes the qubit, so the
/// sequence stops there and the branch keeps the collapsed state |1><1|.
struct ProtocolOutcome {
  std::vector<QubitBranch> branches;
  /// sum_k probability_k * state_k.
  Matrix2 averaged;
  double recovery_probability = 0.0;
  /// |<psi|post>|^2 of the all-no branch; the input is never rescaled by p.
  double recovered_fidelity = 0.0;
  /// Null probability of the second measurement given a null first one.
  double second_no_probability = 0.0;
};

/// With unknown outcomes the yes branches are merged into one.
ProtocolOutcome qec_protocol(const QubitState& state, double p, bool outcomes_known);

enum class EventKind { DriveSet, Shelve, Swap, Prepare, WeakIonization };

struct ScheduleEvent {
  double time = 0.0;
  EventKind kind = EventKind::DriveSet;
  double value = 0.0;  ///< E for DriveSet, p for WeakIonization
  QubitState target;   ///< Prepare only

  bool operator==(const ScheduleEvent&) const = default;
};

/// Events applied after the click at tau = 0, in order. The click itself is
/// implicit and unique.
struct Schedule {
  std::vector<ScheduleEvent> events;

  /// Throws InvalidArgument on decreasing times, bad payloads or events that
  /// need levels absent from `basis`.
  void validate(const CompositeBasis& basis) const;
  /// True if any event needs the shelf or ion levels.
  bool needs_control_levels() const;

  bool operator==(const Schedule&) const = default;
};

std::string describe(const ScheduleEvent& event);

/// Lifted atomic unitaries (identity on the modes and on untouched levels).
Matrix shelve_unitary(const CompositeBasis& basis);  ///< b+-1 <-> s+-1
Matrix swap_unitary(const CompositeBasis& basis);    ///< b-1 <-> b+1

/// Unitary on span{b-1, b+1} mapping the equal superposition carried by the
/// clicked state (including its relative phase) to `target`.
Matrix superposition_unitary(const Matrix& rho_clicked, const CompositeBasis& basis,
                             const QubitState& target);
DensityMatrix prepare_superposition(const DensityMatrix& rho_clicked, const QubitState& target);

/// Kraus pair of a weak ionization of b+1 with strength p.
struct IonizationKraus {
  Matrix yes;
  Matrix no;
};
IonizationKraus ionization_kraus(const CompositeBasis& basis, double p);

enum class ReferenceState { SteadyState, GroundPrepared };

struct ScheduleOptions {
  ReferenceState reference = ReferenceState::SteadyState;
  double t_prep = 20.0;
  bool outcomes_known = false;
  PropagationOptions propagation;
};

struct ScheduleBranch {
  std::vector<Outcome> record;
  double probability = 0.0;
  Matrix final_state;  ///< normalized
  CorrelationTrace trace;
};

struct ScheduleResult {
  /// Survivor (all null outcomes) when outcomes are known, otherwise the
  /// outcome average.
  CorrelationTrace trace;
  std::vector<ScheduleBranch> branches;
  Matrix averaged_final;
  CompositeBasis basis;
  /// Weight outside the ion level after the tau = 0 events.
  double survival_weight = 1.0;
  /// Same weight relative to the b+-1 population before the first ionization.
  double qubit_survival_weight = 1.0;
  double steady_intensity = 0.0;
};

/// Click on the reference state at tau = 0, then propagate under the schedule.
/// The reference is computed on the six core levels and embedded in `basis`.
/// Values are Tr[a2^dag a2 rho_c(tau)] / <a2^dag a2>_ss.
ScheduleResult run_conditional_schedule(const SystemParams& params, const CompositeBasis& basis,
                                        const Schedule& schedule,
                                        std::span<const double> tau_grid,
                                        const ScheduleOptions& options = {});

}  // namespace cqed
