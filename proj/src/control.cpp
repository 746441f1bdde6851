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

#include "cqed/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cqed/error.hpp"

namespace cqed {

namespace {

void require_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("measurement strength p must lie in [0, 1]");
  }
}

Matrix2 swap_x() {
  Matrix2 x;
  x << 0.0, 1.0, 1.0, 0.0;
  return x;
}

Matrix permutation(const CompositeBasis& basis,
                   const std::vector<std::pair<AtomicLevel, AtomicLevel>>& pairs) {
  const auto n = static_cast<Eigen::Index>(basis.levels().size());
  Matrix atomic = Matrix::Identity(n, n);
  for (const auto& [a, b] : pairs) {
    const auto i = static_cast<Eigen::Index>(basis.level_position(a));
    const auto j = static_cast<Eigen::Index>(basis.level_position(b));
    atomic(i, i) = 0.0;
    atomic(j, j) = 0.0;
    atomic(i, j) = 1.0;
    atomic(j, i) = 1.0;
  }
  return atomic_operator(basis, atomic, "permutation").matrix;
}

struct Branch {
  std::vector<Outcome> record;
  Matrix rho;  // unnormalized; trace is the branch probability
  std::vector<double> values;
};

void merge_stats(PropagationStats& into, const PropagationStats& from) {
  into.step = std::max(into.step, from.step);
  into.steps += from.steps;
  into.max_trace_drift = std::max(into.max_trace_drift, from.max_trace_drift);
  into.max_hermiticity_error = std::max(into.max_hermiticity_error, from.max_hermiticity_error);
  into.min_eigenvalue = std::min(into.min_eigenvalue, from.min_eigenvalue);
  into.physical = into.physical && from.physical;
  into.diagnostics += from.diagnostics;
}

}  // namespace

void QubitState::validate(double tol) const {
  const double norm = std::norm(alpha0) + std::norm(alpha1);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > tol) {
    std::ostringstream os;
    os << "qubit state is not normalized (|alpha0|^2 + |alpha1|^2 = " << norm << ")";
    throw InvalidArgument(os.str());
  }
}

Matrix2 QubitState::density() const {
  const Vector2 v = vector();
  return v * v.adjoint();
}

MeasurementOps measurement_ops(double p) {
  require_probability(p);
  MeasurementOps ops;
  ops.p = p;
  ops.yes = Matrix2::Zero();
  ops.yes(1, 1) = std::sqrt(p);
  ops.no = Matrix2::Identity();
  ops.no(1, 1) = std::sqrt(1.0 - p);
  return ops;
}

PartialMeasurement partial_measure(const QubitState& state, double p) {
  state.validate();
  require_probability(p);
  PartialMeasurement m;
  m.p_yes = p * std::norm(state.alpha1);
  m.p_no = 1.0 - m.p_yes;
  if (m.p_no > 0.0) {
    const double scale = 1.0 / std::sqrt(m.p_no);
    m.post_no = QubitState{state.alpha0 * scale, state.alpha1 * std::sqrt(1.0 - p) * scale};
  }
  return m;
}

ProtocolOutcome qec_protocol(const QubitState& state, double p, bool outcomes_known) {
  state.validate();
  const auto ops = measurement_ops(p);
  const Matrix2 x = swap_x();
  const Vector2 psi = state.vector();

  ProtocolOutcome out;
  out.averaged = Matrix2::Zero();
  auto add = [&](std::vector<Outcome> record, const Vector2& unnormalized) {
    const double prob = unnormalized.squaredNorm();
    if (prob == 0.0) return;
    const Vector2 v = unnormalized / std::sqrt(prob);
    out.branches.push_back({std::move(record), prob, v * v.adjoint()});
    out.averaged += prob * out.branches.back().state;
  };

  add({Outcome::Yes}, ops.yes * psi);
  const Vector2 first_no = ops.no * psi;
  const Vector2 swapped = x * first_no;
  add({Outcome::No, Outcome::Yes}, ops.yes * swapped);
  const Vector2 recovered = x * (ops.no * swapped);
  add({Outcome::No, Outcome::No}, recovered);

  const double p_first_no = first_no.squaredNorm();
  out.second_no_probability = p_first_no > 0.0 ? recovered.squaredNorm() / p_first_no : 0.0;
  out.recovery_probability = recovered.squaredNorm();
  if (out.recovery_probability > 0.0) {
    const cplx overlap = psi.dot(recovered) / std::sqrt(out.recovery_probability);
    out.recovered_fidelity = std::norm(overlap);
  }

  if (!outcomes_known) {
    QubitBranch yes{{Outcome::Yes}, 0.0, Matrix2::Zero()};
    std::vector<QubitBranch> merged;
    for (const auto& b : out.branches) {
      if (b.record.back() == Outcome::Yes) {
        yes.probability += b.probability;
        yes.state += b.probability * b.state;
      } else {
        merged.push_back(b);
      }
    }
    if (yes.probability > 0.0) {
      yes.state /= yes.probability;
      merged.insert(merged.begin(), yes);
    }
    out.branches = std::move(merged);
  }
  return out;
}

void Schedule::validate(const CompositeBasis& basis) const {
  double last = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::string where = "schedule event " + std::to_string(i + 1) + " (" + describe(e) + ")";
    if (!std::isfinite(e.time) || e.time < 0.0) {
      throw InvalidArgument(where + ": time must be finite and >= 0");
    }
    if (e.time < last) throw InvalidArgument(where + ": times must be nondecreasing");
    last = e.time;
    switch (e.kind) {
      case EventKind::DriveSet:
        if (!std::isfinite(e.value) || e.value < 0.0) {
          throw InvalidArgument(where + ": drive must be finite and >= 0");
        }
        break;
      case EventKind::Shelve:
        if (!basis.contains(AtomicLevel::SMinus1) || !basis.contains(AtomicLevel::SPlus1)) {
          throw InvalidArgument(where + ": basis lacks the shelf levels s-1, s+1");
        }
        break;
      case EventKind::Swap:
        break;
      case EventKind::Prepare:
        try {
          e.target.validate(1e-9);
        } catch (const InvalidArgument& err) {
          throw InvalidArgument(where + ": " + err.what());
        }
        break;
      case EventKind::WeakIonization:
        if (!(e.value >= 0.0 && e.value <= 1.0)) {
          throw InvalidArgument(where + ": p must lie in [0, 1]");
        }
        if (!basis.contains(AtomicLevel::Ion)) {
          throw InvalidArgument(where + ": basis lacks the ion level");
        }
        break;
    }
  }
}

bool Schedule::needs_control_levels() const {
  return std::any_of(events.begin(), events.end(), [](const ScheduleEvent& e) {
    return e.kind == EventKind::Shelve || e.kind == EventKind::WeakIonization;
  });
}

std::string describe(const ScheduleEvent& event) {
  std::ostringstream os;
  os.precision(17);
  os << event.time << ' ';
  switch (event.kind) {
    case EventKind::DriveSet:
      os << "drive " << event.value;
      break;
    case EventKind::Shelve:
      os << "shelve";
      break;
    case EventKind::Swap:
      os << "swap";
      break;
    case EventKind::Prepare:
      os << "prepare " << event.target.alpha0.real() << ' ' << event.target.alpha1.real();
      break;
    case EventKind::WeakIonization:
      os << "ionize " << event.value;
      break;
  }
  return os.str();
}

Matrix shelve_unitary(const CompositeBasis& basis) {
  return permutation(basis, {{AtomicLevel::BMinus1, AtomicLevel::SMinus1},
                             {AtomicLevel::BPlus1, AtomicLevel::SPlus1}});
}

Matrix swap_unitary(const CompositeBasis& basis) {
  return permutation(basis, {{AtomicLevel::BMinus1, AtomicLevel::BPlus1}});
}

Matrix superposition_unitary(const Matrix& rho_clicked, const CompositeBasis& basis,
                             const QubitState& target) {
  target.validate(1e-9);
  const Matrix atom = atomic_marginal(rho_clicked, basis);
  const auto m = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BMinus1));
  const auto p = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
  const cplx coherence = atom(m, p);
  const double phi = std::abs(coherence) > 0.0 ? std::arg(coherence) : 0.0;

  // The clicked superposition is (|b-1> + e^{-i phi}|b+1>)/sqrt(2) = D|+>.
  Matrix2 d = Matrix2::Identity();
  d(1, 1) = std::polar(1.0, -phi);
  const double h = 1.0 / std::sqrt(2.0);
  Vector2 plus(h, h), minus(h, -h);
  const Vector2 t = target.vector();
  const Vector2 t_perp(-std::conj(target.alpha1), std::conj(target.alpha0));
  const Matrix2 u0 = t * plus.adjoint() + t_perp * minus.adjoint();
  const Matrix2 u = d * u0 * d.adjoint();

  const auto n = static_cast<Eigen::Index>(basis.levels().size());
  Matrix atomic = Matrix::Identity(n, n);
  atomic(m, m) = u(0, 0);
  atomic(m, p) = u(0, 1);
  atomic(p, m) = u(1, 0);
  atomic(p, p) = u(1, 1);
  return atomic_operator(basis, atomic, "prepare").matrix;
}

DensityMatrix prepare_superposition(const DensityMatrix& rho_clicked, const QubitState& target) {
  const Matrix u = superposition_unitary(rho_clicked.matrix(), rho_clicked.basis(), target);
  return {u * rho_clicked.matrix() * u.adjoint(), rho_clicked.basis()};
}

IonizationKraus ionization_kraus(const CompositeBasis& basis, double p) {
  require_probability(p);
  const auto n = static_cast<Eigen::Index>(basis.levels().size());
  const auto plus = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
  const auto ion = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::Ion));
  Matrix yes = Matrix::Zero(n, n);
  yes(ion, plus) = std::sqrt(p);
  Matrix no = Matrix::Identity(n, n);
  no(plus, plus) = std::sqrt(1.0 - p);
  return {atomic_operator(basis, yes, "K_yes").matrix, atomic_operator(basis, no, "K_no").matrix};
}

ScheduleResult run_conditional_schedule(const SystemParams& params, const CompositeBasis& basis,
                                        const Schedule& schedule,
                                        std::span<const double> tau_grid,
                                        const ScheduleOptions& options) {
  schedule.validate(basis);
  if (tau_grid.size() < 2 || tau_grid.front() != 0.0) {
    throw InvalidArgument("tau grid must start at 0 and hold at least two points");
  }
  const auto core = build_basis(core_levels(), basis.n1_max(), basis.n2_max());
  const Generator core_gen(params, core);
  const DensityMatrix rho_ss = steady_state(core_gen);
  const double intensity = mean_photon(rho_ss, Mode::Undriven);
  if (!(intensity > 0.0)) throw NumericalError("steady-state undriven intensity is zero");
  const DensityMatrix reference = options.reference == ReferenceState::SteadyState
                                      ? rho_ss
                                      : ground_prepared_state(core_gen, options.t_prep);
  const DensityMatrix clicked = conditional_state_after_click(reference);

  const Generator gen(params, basis);
  std::vector<double> n2(basis.dim());
  for (std::size_t k = 0; k < basis.dim(); ++k) n2[k] = basis.state(k).n2;
  auto readout = [&](const Matrix& rho) {
    double g = 0.0;
    for (std::size_t k = 0; k < n2.size(); ++k) {
      g += n2[k] * rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real();
    }
    const double w = rho.trace().real();
    return w > 0.0 ? g / (w * intensity) : 0.0;
  };

  std::vector<Branch> branches;
  branches.push_back({{}, embed(clicked.matrix(), core, basis), std::vector<double>(tau_grid.size())});
  double drive = params.drive;
  ScheduleResult result{{}, {}, {}, basis};
  result.steady_intensity = intensity;
  bool first_ionization = true;

  auto apply_event = [&](const ScheduleEvent& e) {
    switch (e.kind) {
      case EventKind::DriveSet:
        drive = e.value;
        return;
      case EventKind::Shelve:
      case EventKind::Swap: {
        const Matrix u = e.kind == EventKind::Shelve ? shelve_unitary(basis) : swap_unitary(basis);
        for (auto& b : branches) b.rho = u * b.rho * u.adjoint();
        return;
      }
      case EventKind::Prepare:
        for (auto& b : branches) {
          const Matrix u = superposition_unitary(b.rho / b.rho.trace().real(), basis, e.target);
          b.rho = u * b.rho * u.adjoint();
        }
        return;
      case EventKind::WeakIonization: {
        const auto k = ionization_kraus(basis, e.value);
        if (first_ionization) {
          const Matrix atom = atomic_marginal(branches.front().rho, basis);
          const auto m = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BMinus1));
          const auto p = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
          result.qubit_survival_weight = (atom(m, m) + atom(p, p)).real();
          first_ionization = false;
        }
        std::vector<Branch> next;
        for (auto& b : branches) {
          const bool done = !b.record.empty() && b.record.back() == Outcome::Yes;
          if (done || !options.outcomes_known) {
            if (!done) b.rho = k.yes * b.rho * k.yes.adjoint() + k.no * b.rho * k.no.adjoint();
            next.push_back(std::move(b));
            continue;
          }
          Branch yes{b.record, k.yes * b.rho * k.yes.adjoint(), b.values};
          yes.record.push_back(Outcome::Yes);
          b.rho = k.no * b.rho * k.no.adjoint();
          b.record.push_back(Outcome::No);
          next.push_back(std::move(yes));
          next.push_back(std::move(b));
        }
        branches = std::move(next);
        return;
      }
    }
  };

  std::size_t next_event = 0;
  const auto& events = schedule.events;
  auto apply_events_at = [&](double t) {
    while (next_event < events.size() && events[next_event].time <= t) apply_event(events[next_event++]);
  };
  apply_events_at(0.0);

  // Survival is read once the tau = 0 events are done.
  auto ion_weight = [&]() {
    double total = 0.0, ion = 0.0;
    const auto pos = basis.contains(AtomicLevel::Ion)
                         ? static_cast<Eigen::Index>(basis.level_position(AtomicLevel::Ion))
                         : -1;
    for (const auto& b : branches) {
      const Matrix atom = atomic_marginal(b.rho, basis);
      total += atom.trace().real();
      if (pos >= 0) ion += atom(pos, pos).real();
    }
    return std::pair{total, ion};
  };
  {
    const auto [total, ion] = ion_weight();
    result.survival_weight = total - ion;
    if (!first_ionization && result.qubit_survival_weight > 0.0) {
      const double lost = ion;
      result.qubit_survival_weight = 1.0 - lost / result.qubit_survival_weight;
    } else {
      result.qubit_survival_weight = 1.0;
    }
  }

  PropagationStats stats;
  stats.min_eigenvalue = std::numeric_limits<double>::infinity();
  std::vector<Matrix> initial;
  for (const auto& b : branches) initial.push_back(b.rho / b.rho.trace().real());

  std::size_t idx = 0;  // first tau index not yet written
  double t_a = 0.0;
  const double t_end = tau_grid.back();
  while (idx < tau_grid.size()) {
    const double t_b =
        next_event < events.size() && events[next_event].time < t_end ? events[next_event].time : t_end;
    std::vector<double> grid = {t_a};
    std::vector<std::ptrdiff_t> slot = {tau_grid[idx] == t_a ? static_cast<std::ptrdiff_t>(idx) : -1};
    if (slot.back() >= 0) ++idx;
    while (idx < tau_grid.size() && (tau_grid[idx] < t_b || (t_b == t_end && tau_grid[idx] <= t_b))) {
      if (tau_grid[idx] > grid.back()) {
        grid.push_back(tau_grid[idx]);
        slot.push_back(static_cast<std::ptrdiff_t>(idx));
      }
      ++idx;
    }
    if (t_b > grid.back()) {
      grid.push_back(t_b);
      slot.push_back(-1);
    }
    const Controls controls{params.g, drive};
    for (auto& b : branches) {
      if (grid.size() == 1) {
        if (slot[0] >= 0) b.values[static_cast<std::size_t>(slot[0])] = readout(b.rho);
        continue;
      }
      Matrix last;
      const auto s = propagate_observe(
          gen, b.rho, grid, [controls](double) { return controls; },
          [&](std::size_t i, double, const Matrix& rho) {
            if (slot[i] >= 0) b.values[static_cast<std::size_t>(slot[i])] = readout(rho);
            if (i + 1 == grid.size()) last = rho;
          },
          options.propagation);
      merge_stats(stats, s);
      b.rho = std::move(last);
    }
    t_a = t_b;
    if (t_b >= t_end) break;
    apply_events_at(t_b);
  }
  if (!std::isfinite(stats.min_eigenvalue)) stats.min_eigenvalue = 0.0;

  result.averaged_final = Matrix::Zero(static_cast<Eigen::Index>(basis.dim()),
                                       static_cast<Eigen::Index>(basis.dim()));
  const auto m = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BMinus1));
  const auto p = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
  std::size_t main = 0;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    auto& b = branches[i];
    const double w = b.rho.trace().real();
    result.averaged_final += b.rho;
    CorrelationTrace trace;
    trace.tau.assign(tau_grid.begin(), tau_grid.end());
    trace.values = b.values;
    trace.normalization = Normalization::ConditionalIntensity;
    trace.meta.params = params;
    trace.meta.stats = stats;
    const Matrix atom = atomic_marginal(initial[i], basis);
    trace.meta.population_minus = atom(m, m).real();
    trace.meta.population_plus = atom(p, p).real();
    const bool survivor = std::all_of(b.record.begin(), b.record.end(),
                                      [](Outcome o) { return o == Outcome::No; });
    if (survivor) main = i;
    result.branches.push_back({b.record, w, w > 0.0 ? Matrix(b.rho / w) : b.rho, std::move(trace)});
  }
  result.trace = result.branches[main].trace;
  return result;
}

}  // namespace cqed
