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

// Dense reference implementations used only by the tests.

#pragma once

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "cqed/liouville.hpp"

namespace cqed::oracle {

/// Column-stacked Lindbladian built from Kronecker products.
inline Matrix dense_lindbladian(const Generator& gen, Controls c) {
  const Matrix h = gen.hamiltonian(c).matrix;
  const auto n = h.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix l = cplx{0.0, -1.0} * (Eigen::kroneckerProduct(id, h).eval() -
                                Eigen::kroneckerProduct(h.transpose(), id).eval());
  for (const auto& ch : gen.collapse_ops()) {
    const Matrix& o = ch.op.matrix;
    const Matrix odo = o.adjoint() * o;
    l += ch.rate * (2.0 * Eigen::kroneckerProduct(o.conjugate(), o).eval() -
                    Eigen::kroneckerProduct(id, odo).eval() -
                    Eigen::kroneckerProduct(odo.transpose(), id).eval());
  }
  return l;
}

inline Eigen::VectorXcd vec(const Matrix& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

inline Matrix unvec(const Eigen::VectorXcd& v, Eigen::Index n) {
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

/// exp(L t) rho by the dense matrix exponential.
inline Matrix expm_propagate(const Matrix& l, const Matrix& rho, double t) {
  const Matrix u = (l * t).exp();
  return unvec(u * vec(rho), rho.rows());
}

inline Matrix random_hermitian(Eigen::Index n, unsigned seed) {
  std::srand(seed);
  Matrix m = Matrix::Random(n, n);
  return m + m.adjoint();
}

/// Random density matrix (positive, unit trace).
inline Matrix random_density(Eigen::Index n, unsigned seed) {
  std::srand(seed);
  Matrix a = Matrix::Random(n, n);
  Matrix rho = a * a.adjoint();
  return rho / rho.trace();
}

}  // namespace cqed::oracle
