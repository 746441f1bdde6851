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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cqed {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

/// Atomic sublevels. b = ground manifold, e = excited manifold,
/// s = dark shelf levels used by the feedback protocol, Ion = ionized atom.
enum class AtomicLevel : std::uint8_t {
  BMinus1,
  B0,
  BPlus1,
  EMinus1,
  E0,
  EPlus1,
  SMinus1,
  SPlus1,
  Ion,
};

enum class LevelKind { Ground, Excited, Shelf, Ionized };

enum class Mode { Driven, Undriven };

LevelKind kind_of(AtomicLevel level);
std::string_view label(AtomicLevel level);
std::optional<AtomicLevel> parse_level(std::string_view text);

/// b-1, b0, b+1, e-1, e0, e+1.
std::vector<AtomicLevel> core_levels();
/// Core levels followed by s-1, s+1 and the ionized level.
std::vector<AtomicLevel> control_levels();

/// Product basis (atomic level) x (driven Fock) x (undriven Fock).
/// Flat index = (atom * (n1_max + 1) + n1) * (n2_max + 1) + n2.
class CompositeBasis {
 public:
  struct State {
    AtomicLevel level;
    int n1;
    int n2;
  };

  CompositeBasis(std::vector<AtomicLevel> levels, int n1_max, int n2_max);

  std::size_t dim() const { return dim_; }
  int n1_max() const { return n1_max_; }
  int n2_max() const { return n2_max_; }
  std::size_t fock_dim() const {
    return static_cast<std::size_t>((n1_max_ + 1) * (n2_max_ + 1));
  }
  const std::vector<AtomicLevel>& levels() const { return levels_; }

  bool contains(AtomicLevel level) const;
  bool has_core_levels() const;
  /// Position of `level` in the level list; throws if absent.
  std::size_t level_position(AtomicLevel level) const;

  std::size_t index(AtomicLevel level, int n1, int n2) const;
  State state(std::size_t index) const;

  bool operator==(const CompositeBasis& other) const = default;

 private:
  std::vector<AtomicLevel> levels_;
  int n1_max_;
  int n2_max_;
  std::size_t dim_;
};

/// Validating factory: n1_max, n2_max >= 1, nonempty duplicate-free levels.
CompositeBasis build_basis(std::vector<AtomicLevel> levels, int n1_max, int n2_max);

/// Dense operator on a composite basis.
struct Operator {
  Matrix matrix;
  CompositeBasis basis;
  std::string label;

  Operator adjoint() const;
};

Operator operator*(const Operator& lhs, const Operator& rhs);
Operator operator+(const Operator& lhs, const Operator& rhs);
Operator operator*(cplx scale, const Operator& op);

Operator identity(const CompositeBasis& basis);
Operator zero_operator(const CompositeBasis& basis, std::string label = "0");

/// |i><j| on the atom, identity on both modes.
Operator sigma(const CompositeBasis& basis, AtomicLevel i, AtomicLevel j);

/// Truncated lowering operator on one mode, identity elsewhere.
Operator mode_annihilator(const CompositeBasis& basis, Mode which);

/// a^dagger a for the selected mode.
Operator number_operator(const CompositeBasis& basis, Mode which);

/// Lift a square matrix acting on the atomic level list (ordered as in
/// `basis.levels()`) to the full space.
Operator atomic_operator(const CompositeBasis& basis, const Matrix& atomic,
                         std::string label);

/// Copy a matrix from one basis into a larger one that shares the same Fock
/// truncation; amplitudes on levels absent from `from` are zero.
Matrix embed(const Matrix& m, const CompositeBasis& from, const CompositeBasis& to);

/// Reduced atomic density matrix (trace over both modes).
Matrix atomic_marginal(const Matrix& rho, const CompositeBasis& basis);

}  // namespace cqed
