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

#include "cqed/hilbert.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

#include "cqed/error.hpp"

namespace cqed {

namespace {

constexpr std::array<std::string_view, 9> kLabels = {
    "b-1", "b0", "b+1", "e-1", "e0", "e+1", "s-1", "s+1", "ion"};

void require_same_basis(const Operator& lhs, const Operator& rhs) {
  if (!(lhs.basis == rhs.basis)) {
    throw InvalidArgument("operators '" + lhs.label + "' and '" + rhs.label +
                          "' live on different bases");
  }
}

}  // namespace

LevelKind kind_of(AtomicLevel level) {
  switch (level) {
    case AtomicLevel::BMinus1:
    case AtomicLevel::B0:
    case AtomicLevel::BPlus1:
      return LevelKind::Ground;
    case AtomicLevel::EMinus1:
    case AtomicLevel::E0:
    case AtomicLevel::EPlus1:
      return LevelKind::Excited;
    case AtomicLevel::SMinus1:
    case AtomicLevel::SPlus1:
      return LevelKind::Shelf;
    case AtomicLevel::Ion:
      return LevelKind::Ionized;
  }
  return LevelKind::Ground;
}

std::string_view label(AtomicLevel level) {
  return kLabels[static_cast<std::size_t>(level)];
}

std::optional<AtomicLevel> parse_level(std::string_view text) {
  for (std::size_t i = 0; i < kLabels.size(); ++i) {
    if (kLabels[i] == text) return static_cast<AtomicLevel>(i);
  }
  return std::nullopt;
}

std::vector<AtomicLevel> core_levels() {
  return {AtomicLevel::BMinus1, AtomicLevel::B0,  AtomicLevel::BPlus1,
          AtomicLevel::EMinus1, AtomicLevel::E0,  AtomicLevel::EPlus1};
}

std::vector<AtomicLevel> control_levels() {
  auto levels = core_levels();
  levels.push_back(AtomicLevel::SMinus1);
  levels.push_back(AtomicLevel::SPlus1);
  levels.push_back(AtomicLevel::Ion);
  return levels;
}

CompositeBasis::CompositeBasis(std::vector<AtomicLevel> levels, int n1_max,
                               int n2_max)
    : levels_(std::move(levels)), n1_max_(n1_max), n2_max_(n2_max), dim_(0) {
  if (levels_.empty()) throw InvalidArgument("basis needs at least one atomic level");
  if (n1_max_ < 1 || n2_max_ < 1) {
    throw InvalidArgument("Fock truncations must be >= 1 (got n1_max=" +
                          std::to_string(n1_max_) + ", n2_max=" +
                          std::to_string(n2_max_) + ")");
  }
  auto sorted = levels_;
  std::sort(sorted.begin(), sorted.end());
  auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) {
    throw InvalidArgument("duplicate atomic level '" + std::string(label(*dup)) +
                          "' in basis");
  }
  dim_ = levels_.size() * fock_dim();
}

bool CompositeBasis::contains(AtomicLevel level) const {
  return std::find(levels_.begin(), levels_.end(), level) != levels_.end();
}

bool CompositeBasis::has_core_levels() const {
  const auto core = core_levels();
  return std::all_of(core.begin(), core.end(),
                     [this](AtomicLevel l) { return contains(l); });
}

std::size_t CompositeBasis::level_position(AtomicLevel level) const {
  auto it = std::find(levels_.begin(), levels_.end(), level);
  if (it == levels_.end()) {
    throw InvalidArgument("atomic level '" + std::string(label(level)) +
                          "' is not part of the basis");
  }
  return static_cast<std::size_t>(it - levels_.begin());
}

std::size_t CompositeBasis::index(AtomicLevel level, int n1, int n2) const {
  if (n1 < 0 || n1 > n1_max_ || n2 < 0 || n2 > n2_max_) {
    throw InvalidArgument("photon numbers outside truncation");
  }
  const auto a = level_position(level);
  return (a * static_cast<std::size_t>(n1_max_ + 1) + static_cast<std::size_t>(n1)) *
             static_cast<std::size_t>(n2_max_ + 1) +
         static_cast<std::size_t>(n2);
}

CompositeBasis::State CompositeBasis::state(std::size_t index) const {
  if (index >= dim_) throw InvalidArgument("basis index out of range");
  const auto n2dim = static_cast<std::size_t>(n2_max_ + 1);
  const auto n1dim = static_cast<std::size_t>(n1_max_ + 1);
  const int n2 = static_cast<int>(index % n2dim);
  const int n1 = static_cast<int>((index / n2dim) % n1dim);
  const auto a = index / (n2dim * n1dim);
  return {levels_[a], n1, n2};
}

CompositeBasis build_basis(std::vector<AtomicLevel> levels, int n1_max, int n2_max) {
  return CompositeBasis(std::move(levels), n1_max, n2_max);
}

Operator Operator::adjoint() const {
  return {matrix.adjoint(), basis, label + "^dag"};
}

Operator operator*(const Operator& lhs, const Operator& rhs) {
  require_same_basis(lhs, rhs);
  return {lhs.matrix * rhs.matrix, lhs.basis, lhs.label + " " + rhs.label};
}

Operator operator+(const Operator& lhs, const Operator& rhs) {
  require_same_basis(lhs, rhs);
  return {lhs.matrix + rhs.matrix, lhs.basis, lhs.label + " + " + rhs.label};
}

Operator operator*(cplx scale, const Operator& op) {
  return {scale * op.matrix, op.basis, op.label};
}

Operator identity(const CompositeBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  return {Matrix::Identity(n, n), basis, "I"};
}

Operator zero_operator(const CompositeBasis& basis, std::string label) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  return {Matrix::Zero(n, n), basis, std::move(label)};
}

Operator sigma(const CompositeBasis& basis, AtomicLevel i, AtomicLevel j) {
  const auto pi = basis.level_position(i);
  const auto pj = basis.level_position(j);
  const auto f = basis.fock_dim();
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < f; ++k) {
    m(static_cast<Eigen::Index>(pi * f + k), static_cast<Eigen::Index>(pj * f + k)) = 1.0;
  }
  return {std::move(m), basis,
          "sigma(" + std::string(label(i)) + "," + std::string(label(j)) + ")"};
}

Operator mode_annihilator(const CompositeBasis& basis, Mode which) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t col = 0; col < basis.dim(); ++col) {
    const auto s = basis.state(col);
    const int photons = which == Mode::Driven ? s.n1 : s.n2;
    if (photons == 0) continue;
    const auto row = which == Mode::Driven ? basis.index(s.level, s.n1 - 1, s.n2)
                                           : basis.index(s.level, s.n1, s.n2 - 1);
    m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
        std::sqrt(static_cast<double>(photons));
  }
  return {std::move(m), basis, which == Mode::Driven ? "a1" : "a2"};
}

Operator number_operator(const CompositeBasis& basis, Mode which) {
  const auto a = mode_annihilator(basis, which);
  return {a.matrix.adjoint() * a.matrix, basis, a.label + "^dag " + a.label};
}

Operator atomic_operator(const CompositeBasis& basis, const Matrix& atomic,
                         std::string label) {
  const auto levels = static_cast<Eigen::Index>(basis.levels().size());
  if (atomic.rows() != levels || atomic.cols() != levels) {
    throw InvalidArgument("atomic operator size does not match the level count");
  }
  const auto f = static_cast<Eigen::Index>(basis.fock_dim());
  return {Eigen::kroneckerProduct(atomic, Matrix::Identity(f, f)), basis,
          std::move(label)};
}

Matrix embed(const Matrix& m, const CompositeBasis& from, const CompositeBasis& to) {
  if (from.n1_max() != to.n1_max() || from.n2_max() != to.n2_max()) {
    throw InvalidArgument("embedding requires identical Fock truncations");
  }
  const auto f = static_cast<Eigen::Index>(from.fock_dim());
  const auto n = static_cast<Eigen::Index>(to.dim());
  Matrix out = Matrix::Zero(n, n);
  const auto& levels = from.levels();
  for (std::size_t a = 0; a < levels.size(); ++a) {
    const auto ta = static_cast<Eigen::Index>(to.level_position(levels[a]));
    for (std::size_t b = 0; b < levels.size(); ++b) {
      const auto tb = static_cast<Eigen::Index>(to.level_position(levels[b]));
      out.block(ta * f, tb * f, f, f) =
          m.block(static_cast<Eigen::Index>(a) * f, static_cast<Eigen::Index>(b) * f, f, f);
    }
  }
  return out;
}

Matrix atomic_marginal(const Matrix& rho, const CompositeBasis& basis) {
  const auto levels = static_cast<Eigen::Index>(basis.levels().size());
  const auto f = static_cast<Eigen::Index>(basis.fock_dim());
  Matrix out(levels, levels);
  for (Eigen::Index a = 0; a < levels; ++a) {
    for (Eigen::Index b = 0; b < levels; ++b) {
      out(a, b) = rho.block(a * f, b * f, f, f).trace();
    }
  }
  return out;
}

}  // namespace cqed
