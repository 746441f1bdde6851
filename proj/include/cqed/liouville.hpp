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

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "cqed/hilbert.hpp"

namespace cqed {

/// Physical parameters in units of the spontaneous rate gamma.
struct SystemParams {
  double g = 0.25;
  double kappa = 0.5;
  double gamma = 1.0;
  double delta = 0.5;
  double delta_prime = 0.5;
  double drive = 1.0 / 64.0;
  double xi_b = 0.0;
  double c0 = std::sqrt(4.0 / 7.0);
  double c0p = std::sqrt(15.0 / 28.0);
  double c1 = -std::sqrt(3.0 / 14.0);
  double c1p = -std::sqrt(5.0 / 14.0);
  /// Physical value of gamma, carried through to output headers only.
  double gamma_hz = 6.0e6;

  /// Throws InvalidArgument on negative rates or non-finite values.
  void validate() const;
  /// Largest rate entering the step rule of the integrator.
  double max_rate() const;

  bool operator==(const SystemParams&) const = default;
};

/// Scalars that schedules and atomic transits vary in time: the dipole
/// coupling g and the drive amplitude E.
struct Controls {
  double coupling = 0.0;
  double drive = 0.0;
};

using ControlSchedule = std::function<Controls(double)>;

struct CollapseChannel {
  double rate;  ///< prefactor of L[o] = 2 o rho o^dag - o^dag o rho - rho o^dag o
  Operator op;
};

/// The Hamiltonian split by the scalar that multiplies each piece, so that
/// H(g, E) = fixed + g * per_coupling + E * per_drive.
struct HamiltonianParts {
  Operator fixed;         ///< Zeeman shifts and birefringence
  Operator per_coupling;  ///< atom-cavity interaction divided by g
  Operator per_drive;     ///< i (a1^dag - a1)
};

HamiltonianParts build_hamiltonian_parts(const SystemParams& params,
                                         const CompositeBasis& basis);
Operator build_hamiltonian(const SystemParams& params, const CompositeBasis& basis);
std::vector<CollapseChannel> build_collapse_ops(const SystemParams& params,
                                                const CompositeBasis& basis);

/// Density matrix bound to its basis.
class DensityMatrix {
 public:
  DensityMatrix(Matrix matrix, CompositeBasis basis);

  static DensityMatrix pure(const CompositeBasis& basis, AtomicLevel level, int n1,
                            int n2);

  const Matrix& matrix() const { return matrix_; }
  const CompositeBasis& basis() const { return basis_; }
  double trace() const { return matrix_.trace().real(); }

 private:
  Matrix matrix_;
  CompositeBasis basis_;
};

struct PhysicalityTolerance {
  double hermiticity = 1e-12;
  double trace = 1e-10;
  double min_eigenvalue = -1e-8;
};

struct PhysicalityReport {
  double hermiticity_error = 0.0;  ///< max |rho - rho^dag|
  double trace_error = 0.0;        ///< |Tr rho - 1| (or relative drift when unnormalized)
  double min_eigenvalue = 0.0;     ///< smallest eigenvalue relative to Tr rho

  bool ok(const PhysicalityTolerance& tol = {}) const;
  std::string describe() const;
};

/// `expected_trace` is 1 for states; conditioned (unnormalized) matrices pass
/// their own initial trace.
PhysicalityReport check_physical(const Matrix& rho, double expected_trace = 1.0);

/// 0.5 * || a - b ||_1 for Hermitian arguments.
double trace_distance(const Matrix& a, const Matrix& b);

/// Complex matrix stored as separate row-major real and imaginary parts.
/// This is the layout of the integrator hot path.
struct SplitMatrix {
  using Real = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Real re;
  Real im;

  static SplitMatrix from(const Matrix& m);
  Matrix to_complex() const;
  double trace_real() const { return re.trace(); }
};

/// Bitwise Hermitian: re symmetric, im antisymmetric with a zero diagonal.
bool is_exactly_hermitian(const SplitMatrix& m);

/// Compressed-row sparse matrix with a fixed pattern. Values can be
/// re-weighted without touching the pattern.
struct SparsePattern {
  Eigen::Index n = 0;
  std::vector<int> row_start;
  std::vector<int> col;
  std::vector<double> re;
  std::vector<double> im;

  static SparsePattern from_dense(const Matrix& m, double drop = 0.0);
  std::size_t nonzeros() const { return col.size(); }
  /// out = A * x.
  void multiply(const SplitMatrix& x, SplitMatrix& out) const;
  /// out += A * x.
  void multiply_add(const SplitMatrix& x, SplitMatrix& out) const;
};

/// Lindblad generator rho -> d rho / dt. Applied matrix-free through the
/// effective non-Hermitian Hamiltonian H_eff = H - i sum_k r_k o_k^dag o_k
/// and jump operators sqrt(2 r_k) o_k.
class Generator {
 public:
  Generator(const SystemParams& params, const CompositeBasis& basis);

  const SystemParams& params() const { return params_; }
  const CompositeBasis& basis() const { return basis_; }
  Controls nominal() const { return {params_.g, params_.drive}; }

  Operator hamiltonian() const { return hamiltonian(nominal()); }
  Operator hamiltonian(Controls controls) const;
  const HamiltonianParts& hamiltonian_parts() const { return parts_; }
  const std::vector<CollapseChannel>& collapse_ops() const { return collapse_; }

  /// Largest rate of the generator at `controls`, for the step rule.
  double max_rate(Controls controls) const;

  Matrix apply(const Matrix& rho) const { return apply(rho, nominal()); }
  Matrix apply(const Matrix& rho, Controls controls) const;

  struct Workspace {
    SplitMatrix adj, x, y;
    SparsePattern heff;
  };
  Workspace make_workspace() const;
  /// Exactly Hermitian input (bitwise) takes a path that needs one sparse
  /// product and returns an exactly Hermitian result.
  void apply(const SplitMatrix& rho, Controls controls, SplitMatrix& out,
             Workspace& ws) const;

  /// Vectorized generator (column stacking, vec index = i + dim * j).
  Eigen::SparseMatrix<cplx> superoperator(Controls controls) const;

 private:
  void assemble_heff(Controls controls, SparsePattern& heff) const;

  SystemParams params_;
  CompositeBasis basis_;
  HamiltonianParts parts_;
  std::vector<CollapseChannel> collapse_;
  // H_eff pattern; values are fixed + g * coupling + E * drive.
  SparsePattern heff_pattern_;
  std::vector<cplx> heff_fixed_, heff_coupling_, heff_drive_;
  // sum_k J_k rho J_k^dag as out[i, j] += c * rho[k, l], merged over channels.
  struct JumpTerm {
    int out;
    int in;
    double re;
    double im;
  };
  std::vector<JumpTerm> jump_terms_;
  // Terms with row <= column, for exactly Hermitian input.
  std::vector<JumpTerm> jump_terms_upper_;
};

/// d rho / dt at the generator's nominal controls. Throws on basis mismatch.
Matrix lindblad_apply(const Generator& gen, const DensityMatrix& rho);

struct PropagationOptions {
  /// Extra cap on the RK4 step; 0 means the step rule alone.
  double max_step = 0.0;
  /// Trace and Hermiticity are checked at every output point, positivity
  /// every `check_stride` points and at the last one.
  std::size_t check_stride = 1;
  bool check_physicality = true;
};

struct PropagationStats {
  double step = 0.0;
  std::size_t steps = 0;
  double max_trace_drift = 0.0;  ///< |Tr rho(t) - Tr rho(0)| / |Tr rho(0)|
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  bool physical = true;
  std::string diagnostics;
};

struct PropagationResult {
  std::vector<double> times;
  std::vector<Matrix> states;
  PropagationStats stats;
};

using Observer = std::function<void(std::size_t, double, const Matrix&)>;

/// Fixed-step RK4 over an increasing time grid starting at t_grid[0]. The
/// observer sees the state at every grid point (including the first).
/// Invariant violations are recorded in the stats, never corrected.
PropagationStats propagate_observe(const Generator& gen, const Matrix& rho0,
                                   std::span<const double> t_grid,
                                   const ControlSchedule& controls,
                                   const Observer& observer,
                                   const PropagationOptions& options = {});

PropagationResult propagate(const Generator& gen, const DensityMatrix& rho0,
                            std::span<const double> t_grid,
                            const PropagationOptions& options = {});
PropagationResult propagate(const Generator& gen, const DensityMatrix& rho0,
                            std::span<const double> t_grid,
                            const ControlSchedule& controls,
                            const PropagationOptions& options = {});

/// Integration step used on an interval of length `span`: the largest
/// h <= min(span, 1 / (10 * max_rate), max_step) that divides the span.
double rk4_step(double span, double max_rate, double max_step = 0.0);

/// Unique stationary state of the vectorized generator with the trace
/// condition replacing one row. Throws DegenerateSteadyState when the null
/// space is not one-dimensional.
DensityMatrix steady_state(const Generator& gen);
DensityMatrix steady_state(const Generator& gen, Controls controls);

std::vector<double> uniform_grid(double t_max, std::size_t points);

}  // namespace cqed
