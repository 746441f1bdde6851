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

#include "cqed/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "cqed/error.hpp"

namespace cqed {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_nonnegative(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw InvalidArgument(std::string("parameter ") + name + " is not finite");
  }
  if (value < 0.0) {
    throw InvalidArgument(std::string("parameter ") + name + " must be nonnegative");
  }
}

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw InvalidArgument(std::string("parameter ") + name + " is not finite");
  }
}

}  // namespace

void SystemParams::validate() const {
  require_nonnegative(g, "g");
  require_nonnegative(kappa, "kappa");
  require_nonnegative(gamma, "gamma");
  require_nonnegative(drive, "drive");
  require_nonnegative(xi_b, "xi_b");
  require_finite(delta, "delta");
  require_finite(delta_prime, "delta_prime");
  require_finite(c0, "c0");
  require_finite(c0p, "c0p");
  require_finite(c1, "c1");
  require_finite(c1p, "c1p");
  require_finite(gamma_hz, "gamma_hz");
}

double SystemParams::max_rate() const {
  return std::max({kappa, gamma, g, std::abs(delta), std::abs(delta_prime), drive, xi_b});
}

HamiltonianParts build_hamiltonian_parts(const SystemParams& params,
                                         const CompositeBasis& basis) {
  params.validate();
  if (!basis.has_core_levels()) {
    throw InvalidArgument("the Hamiltonian needs the six core levels in the basis");
  }
  using L = AtomicLevel;
  const auto s = [&](L i, L j) { return sigma(basis, i, j).matrix; };
  const Matrix a1 = mode_annihilator(basis, Mode::Driven).matrix;
  const Matrix a2 = mode_annihilator(basis, Mode::Undriven).matrix;

  Matrix zeeman = params.delta_prime * (s(L::EMinus1, L::EMinus1) - s(L::EPlus1, L::EPlus1)) +
                  params.delta * (s(L::BMinus1, L::BMinus1) - s(L::BPlus1, L::BPlus1));
  Matrix birefringence = kI * (a1.adjoint() * a2 - a2.adjoint() * a1);

  Matrix lowering = params.c0 * s(L::E0, L::B0) * a1 +
                    params.c0p * (s(L::EPlus1, L::BPlus1) + s(L::EMinus1, L::BMinus1)) * a1 +
                    params.c1 * (s(L::E0, L::BPlus1) + s(L::E0, L::BMinus1)) * a2 +
                    params.c1p * (s(L::EMinus1, L::B0) + s(L::EPlus1, L::B0)) * a2;
  Matrix interaction = -(lowering + lowering.adjoint());
  Matrix drive = kI * (a1.adjoint() - a1);

  return {{zeeman + params.xi_b * birefringence, basis, "H0+Hbir"},
          {std::move(interaction), basis, "HI/g"},
          {std::move(drive), basis, "i(a1^dag-a1)"}};
}

Operator build_hamiltonian(const SystemParams& params, const CompositeBasis& basis) {
  const auto parts = build_hamiltonian_parts(params, basis);
  return {parts.fixed.matrix + params.g * parts.per_coupling.matrix +
              params.drive * parts.per_drive.matrix,
          basis, "H"};
}

std::vector<CollapseChannel> build_collapse_ops(const SystemParams& params,
                                                const CompositeBasis& basis) {
  params.validate();
  using L = AtomicLevel;
  const auto s = [&](L i, L j) { return sigma(basis, i, j).matrix; };
  std::vector<CollapseChannel> out;
  out.push_back({params.kappa, mode_annihilator(basis, Mode::Driven)});
  out.push_back({params.kappa, mode_annihilator(basis, Mode::Undriven)});
  out.push_back({params.gamma / 2.0,
                 {params.c0 * s(L::B0, L::E0) +
                      params.c0p * (s(L::BPlus1, L::EPlus1) + s(L::BMinus1, L::EMinus1)),
                  basis, "pi"}});
  out.push_back({params.gamma / 2.0,
                 {params.c1 * s(L::B0, L::EMinus1) + params.c1p * s(L::BPlus1, L::E0),
                  basis, "sigma+"}});
  out.push_back({params.gamma / 2.0,
                 {params.c1p * s(L::BMinus1, L::E0) + params.c1 * s(L::B0, L::EPlus1),
                  basis, "sigma-"}});
  return out;
}

DensityMatrix::DensityMatrix(Matrix matrix, CompositeBasis basis)
    : matrix_(std::move(matrix)), basis_(std::move(basis)) {
  const auto n = static_cast<Eigen::Index>(basis_.dim());
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw InvalidArgument("density matrix size does not match the basis dimension");
  }
}

DensityMatrix DensityMatrix::pure(const CompositeBasis& basis, AtomicLevel level, int n1,
                                  int n2) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Matrix m = Matrix::Zero(n, n);
  const auto k = static_cast<Eigen::Index>(basis.index(level, n1, n2));
  m(k, k) = 1.0;
  return {std::move(m), basis};
}

bool PhysicalityReport::ok(const PhysicalityTolerance& tol) const {
  return hermiticity_error <= tol.hermiticity && trace_error <= tol.trace &&
         min_eigenvalue >= tol.min_eigenvalue;
}

std::string PhysicalityReport::describe() const {
  std::ostringstream os;
  os << "hermiticity=" << hermiticity_error << " trace=" << trace_error
     << " min_eig=" << min_eigenvalue;
  return os.str();
}

PhysicalityReport check_physical(const Matrix& rho, double expected_trace) {
  PhysicalityReport r;
  r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const double tr = rho.trace().real();
  const double scale = std::abs(expected_trace) > 0 ? std::abs(expected_trace) : 1.0;
  r.trace_error = std::abs(tr - expected_trace) / scale;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()),
                                           Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff() / (tr != 0.0 ? tr : 1.0);
  return r;
}

double trace_distance(const Matrix& a, const Matrix& b) {
  const Matrix d = a - b;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

SplitMatrix SplitMatrix::from(const Matrix& m) { return {m.real(), m.imag()}; }

Matrix SplitMatrix::to_complex() const {
  Matrix m(re.rows(), re.cols());
  m.real() = re;
  m.imag() = im;
  return m;
}

bool is_exactly_hermitian(const SplitMatrix& m) {
  const Eigen::Index n = m.re.rows();
  if (m.re.cols() != n) return false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.im(i, i) != 0.0) return false;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (m.re(i, j) != m.re(j, i) || m.im(i, j) != -m.im(j, i)) return false;
    }
  }
  return true;
}

SparsePattern SparsePattern::from_dense(const Matrix& m, double drop) {
  SparsePattern p;
  p.n = m.rows();
  p.row_start.reserve(static_cast<std::size_t>(p.n) + 1);
  p.row_start.push_back(0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > drop) {
        p.col.push_back(static_cast<int>(j));
        p.re.push_back(m(i, j).real());
        p.im.push_back(m(i, j).imag());
      }
    }
    p.row_start.push_back(static_cast<int>(p.col.size()));
  }
  return p;
}

void SparsePattern::multiply(const SplitMatrix& x, SplitMatrix& out) const {
  out.re.setZero(n, x.re.cols());
  out.im.setZero(n, x.re.cols());
  multiply_add(x, out);
}

void SparsePattern::multiply_add(const SplitMatrix& x, SplitMatrix& out) const {
  const Eigen::Index cols = x.re.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    double* __restrict out_re = out.re.row(i).data();
    double* __restrict out_im = out.im.row(i).data();
    for (int k = row_start[static_cast<std::size_t>(i)];
         k < row_start[static_cast<std::size_t>(i) + 1]; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double a = re[kk];
      const double b = im[kk];
      const double* __restrict x_re = x.re.row(col[kk]).data();
      const double* __restrict x_im = x.im.row(col[kk]).data();
      for (Eigen::Index c = 0; c < cols; ++c) {
        out_re[c] += a * x_re[c] - b * x_im[c];
        out_im[c] += a * x_im[c] + b * x_re[c];
      }
    }
  }
}

Generator::Generator(const SystemParams& params, const CompositeBasis& basis)
    : params_(params),
      basis_(basis),
      parts_(build_hamiltonian_parts(params, basis)),
      collapse_(build_collapse_ops(params, basis)) {
  const auto n = static_cast<Eigen::Index>(basis_.dim());
  Matrix decay = Matrix::Zero(n, n);
  for (const auto& ch : collapse_) {
    decay += ch.rate * ch.op.matrix.adjoint() * ch.op.matrix;
    const SparsePattern jump = SparsePattern::from_dense(std::sqrt(2.0 * ch.rate) * ch.op.matrix);
    for (int i = 0; i < static_cast<int>(n); ++i) {
      for (int a = jump.row_start[static_cast<std::size_t>(i)];
           a < jump.row_start[static_cast<std::size_t>(i) + 1]; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const cplx va{jump.re[ua], jump.im[ua]};
        for (int j = 0; j < static_cast<int>(n); ++j) {
          for (int b = jump.row_start[static_cast<std::size_t>(j)];
               b < jump.row_start[static_cast<std::size_t>(j) + 1]; ++b) {
            const auto ub = static_cast<std::size_t>(b);
            const cplx c = va * std::conj(cplx{jump.re[ub], jump.im[ub]});
            jump_terms_.push_back({i * static_cast<int>(n) + j,
                                   jump.col[ua] * static_cast<int>(n) + jump.col[ub], c.real(),
                                   c.imag()});
          }
        }
      }
    }
  }
  std::sort(jump_terms_.begin(), jump_terms_.end(), [](const JumpTerm& x, const JumpTerm& y) {
    return x.out != y.out ? x.out < y.out : x.in < y.in;
  });
  std::vector<JumpTerm> merged;
  for (const auto& t : jump_terms_) {
    if (!merged.empty() && merged.back().out == t.out && merged.back().in == t.in) {
      merged.back().re += t.re;
      merged.back().im += t.im;
    } else {
      merged.push_back(t);
    }
  }
  jump_terms_ = std::move(merged);
  for (const auto& t : jump_terms_) {
    if (t.out / static_cast<int>(n) <= t.out % static_cast<int>(n)) jump_terms_upper_.push_back(t);
  }
  const Matrix fixed = parts_.fixed.matrix - kI * decay;
  const Matrix& coupling = parts_.per_coupling.matrix;
  const Matrix& drive = parts_.per_drive.matrix;
  const Matrix mask = fixed.cwiseAbs() + coupling.cwiseAbs() + drive.cwiseAbs();
  heff_pattern_ = SparsePattern::from_dense(mask.cast<cplx>());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = heff_pattern_.row_start[static_cast<std::size_t>(i)];
         k < heff_pattern_.row_start[static_cast<std::size_t>(i) + 1]; ++k) {
      const auto j = heff_pattern_.col[static_cast<std::size_t>(k)];
      heff_fixed_.push_back(fixed(i, j));
      heff_coupling_.push_back(coupling(i, j));
      heff_drive_.push_back(drive(i, j));
    }
  }
}

Operator Generator::hamiltonian(Controls controls) const {
  return {parts_.fixed.matrix + controls.coupling * parts_.per_coupling.matrix +
              controls.drive * parts_.per_drive.matrix,
          basis_, "H"};
}

double Generator::max_rate(Controls controls) const {
  return std::max({params_.max_rate(), std::abs(controls.coupling), std::abs(controls.drive)});
}

void Generator::assemble_heff(Controls controls, SparsePattern& heff) const {
  if (heff.col.size() != heff_pattern_.col.size()) heff = heff_pattern_;
  for (std::size_t k = 0; k < heff_fixed_.size(); ++k) {
    const cplx v = heff_fixed_[k] + controls.coupling * heff_coupling_[k] +
                   controls.drive * heff_drive_[k];
    heff.re[k] = v.real();
    heff.im[k] = v.imag();
  }
}

Generator::Workspace Generator::make_workspace() const {
  Workspace ws;
  ws.heff = heff_pattern_;
  return ws;
}

void Generator::apply(const SplitMatrix& rho, Controls controls, SplitMatrix& out,
                      Workspace& ws) const {
  assemble_heff(controls, ws.heff);
  const Eigen::Index n = rho.re.rows();
  const double* rre = rho.re.data();
  const double* rim = rho.im.data();
  if (is_exactly_hermitian(rho)) {
    // rho H_eff^dag = (H_eff rho)^dag, so -i(X - X^dag) with X = H_eff rho.
    ws.heff.multiply(rho, ws.x);
    out.re = ws.x.im + ws.x.im.transpose();
    out.im = ws.x.re.transpose() - ws.x.re;
    double* ore = out.re.data();
    double* oim = out.im.data();
    const auto* t = jump_terms_upper_.data();
    const auto* end = t + jump_terms_upper_.size();
    while (t != end) {
      const int o = t->out;
      double sre = 0.0, sim = 0.0;
      for (; t != end && t->out == o; ++t) {
        const auto i = static_cast<std::size_t>(t->in);
        sre += t->re * rre[i] - t->im * rim[i];
        sim += t->re * rim[i] + t->im * rre[i];
      }
      const Eigen::Index r = o / n, c = o % n;
      const auto mirror = static_cast<std::size_t>(c * n + r);
      const auto uo = static_cast<std::size_t>(o);
      ore[uo] += sre;
      if (r != c) {
        oim[uo] += sim;
        ore[mirror] += sre;
        oim[mirror] -= sim;
      }
    }
    return;
  }
  ws.adj.re = rho.re.transpose();
  ws.adj.im = -rho.im.transpose();
  ws.heff.multiply(rho, ws.x);
  ws.heff.multiply(ws.adj, ws.y);
  // -i (X - Y^dag) with X = H_eff rho and Y = H_eff rho^dag.
  out.re = ws.x.im + ws.y.im.transpose();
  out.im = ws.y.re.transpose() - ws.x.re;
  double* ore = out.re.data();
  double* oim = out.im.data();
  for (const auto& t : jump_terms_) {
    const auto o = static_cast<std::size_t>(t.out);
    const auto i = static_cast<std::size_t>(t.in);
    ore[o] += t.re * rre[i] - t.im * rim[i];
    oim[o] += t.re * rim[i] + t.im * rre[i];
  }
}

Matrix Generator::apply(const Matrix& rho, Controls controls) const {
  const auto n = static_cast<Eigen::Index>(basis_.dim());
  if (rho.rows() != n || rho.cols() != n) {
    throw InvalidArgument("matrix size does not match the generator basis");
  }
  SplitMatrix out;
  auto ws = make_workspace();
  apply(SplitMatrix::from(rho), controls, out, ws);
  return out.to_complex();
}

Eigen::SparseMatrix<cplx> Generator::superoperator(Controls controls) const {
  SparsePattern heff;
  assemble_heff(controls, heff);
  const auto n = static_cast<int>(basis_.dim());
  const auto value = [](const SparsePattern& p, int k) {
    return cplx{p.re[static_cast<std::size_t>(k)], p.im[static_cast<std::size_t>(k)]};
  };
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (int i = 0; i < n; ++i) {
    for (int k = heff.row_start[static_cast<std::size_t>(i)];
         k < heff.row_start[static_cast<std::size_t>(i) + 1]; ++k) {
      const int c = heff.col[static_cast<std::size_t>(k)];
      const cplx h = value(heff, k);
      for (int j = 0; j < n; ++j) {
        // -i H_eff rho: row (i, j) <- column (c, j)
        triplets.emplace_back(i + n * j, c + n * j, -kI * h);
        // +i rho H_eff^dag: row (j, i) <- column (j, c)
        triplets.emplace_back(j + n * i, j + n * c, kI * std::conj(h));
      }
    }
  }
  for (const auto& t : jump_terms_) {
    const int i = t.out / n, j = t.out % n, k = t.in / n, l = t.in % n;
    triplets.emplace_back(i + n * j, k + n * l, cplx{t.re, t.im});
  }
  Eigen::SparseMatrix<cplx> s(n * n, n * n);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

Matrix lindblad_apply(const Generator& gen, const DensityMatrix& rho) {
  if (!(rho.basis() == gen.basis())) {
    throw InvalidArgument("density matrix and generator live on different bases");
  }
  return gen.apply(rho.matrix());
}

double rk4_step(double span, double max_rate, double max_step) {
  if (!(span > 0.0)) throw InvalidArgument("time grid must be strictly increasing");
  double h = max_rate > 0.0 ? 1.0 / (10.0 * max_rate) : span;
  if (max_step > 0.0) h = std::min(h, max_step);
  h = std::min(h, span);
  const double n = std::ceil(span / h - 1e-9);
  return span / n;
}

PropagationStats propagate_observe(const Generator& gen, const Matrix& rho0,
                                   std::span<const double> t_grid,
                                   const ControlSchedule& controls,
                                   const Observer& observer,
                                   const PropagationOptions& options) {
  const auto n = static_cast<Eigen::Index>(gen.basis().dim());
  if (rho0.rows() != n || rho0.cols() != n) {
    throw InvalidArgument("initial matrix size does not match the generator basis");
  }
  if (t_grid.empty()) throw InvalidArgument("empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw InvalidArgument("time grid must be strictly increasing");
    }
  }

  PropagationStats stats;
  stats.min_eigenvalue = std::numeric_limits<double>::infinity();
  const double trace0 = rho0.trace().real();
  const double trace_scale = std::abs(trace0) > 0.0 ? std::abs(trace0) : 1.0;
  const double t0 = t_grid.front();
  const double rate = std::max(gen.max_rate(controls(t0)), gen.max_rate(gen.nominal()));
  const std::size_t stride = std::max<std::size_t>(options.check_stride, 1);

  auto check = [&](std::size_t idx, double t, const Matrix& rho) {
    const double drift = std::abs(rho.trace().real() - trace0) / trace_scale;
    stats.max_trace_drift = std::max(stats.max_trace_drift, drift);
    if (drift > 1e-8 * std::max(1.0, t - t0)) {
      stats.physical = false;
      std::ostringstream os;
      os << "trace drift " << drift << " at t=" << t << "; ";
      stats.diagnostics += os.str();
    }
    if (!options.check_physicality) return;
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    stats.max_hermiticity_error = std::max(stats.max_hermiticity_error, herm);
    double min_eig = 0.0;
    if (idx % stride == 0 || idx + 1 == t_grid.size()) {
      min_eig = check_physical(rho, trace0).min_eigenvalue;
      stats.min_eigenvalue = std::min(stats.min_eigenvalue, min_eig);
    }
    if (herm > 1e-10 * trace_scale || min_eig < -1e-8) {
      stats.physical = false;
      std::ostringstream os;
      os << "physicality violated at t=" << t << " (hermiticity=" << herm
         << " min_eig=" << min_eig << "); ";
      stats.diagnostics += os.str();
    }
  };

  // Rounding-level asymmetry is removed so the Hermitian fast path applies.
  const bool near_hermitian =
      (rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * trace_scale;
  SplitMatrix rho = near_hermitian ? SplitMatrix::from(0.5 * (rho0 + rho0.adjoint()))
                                   : SplitMatrix::from(rho0);
  SplitMatrix k1, k2, k3, k4, tmp;
  auto ws = gen.make_workspace();
  Matrix snapshot = rho0;
  if (observer) observer(0, t0, snapshot);
  check(0, t0, snapshot);

  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double span = t_grid[i] - t_grid[i - 1];
    const double h = rk4_step(span, rate, options.max_step);
    const auto substeps = static_cast<std::size_t>(std::llround(span / h));
    stats.step = std::max(stats.step, h);
    for (std::size_t s = 0; s < substeps; ++s) {
      const double t = t_grid[i - 1] + static_cast<double>(s) * h;
      const double t_end = s + 1 == substeps ? t_grid[i] : t + h;
      // Endpoints are taken one ulp inside the step, so a control that jumps
      // on a grid point is seen from the correct side.
      const Controls c0 = controls(std::nextafter(t, t_end));
      const Controls cm = controls(t + 0.5 * h);
      const Controls c1 = controls(std::nextafter(t_end, t));
      gen.apply(rho, c0, k1, ws);
      tmp.re = rho.re + (0.5 * h) * k1.re;
      tmp.im = rho.im + (0.5 * h) * k1.im;
      gen.apply(tmp, cm, k2, ws);
      tmp.re = rho.re + (0.5 * h) * k2.re;
      tmp.im = rho.im + (0.5 * h) * k2.im;
      gen.apply(tmp, cm, k3, ws);
      tmp.re = rho.re + h * k3.re;
      tmp.im = rho.im + h * k3.im;
      gen.apply(tmp, c1, k4, ws);
      rho.re += (h / 6.0) * (k1.re + 2.0 * k2.re + 2.0 * k3.re + k4.re);
      rho.im += (h / 6.0) * (k1.im + 2.0 * k2.im + 2.0 * k3.im + k4.im);
      ++stats.steps;
    }
    snapshot = rho.to_complex();
    if (observer) observer(i, t_grid[i], snapshot);
    check(i, t_grid[i], snapshot);
  }
  if (!std::isfinite(stats.min_eigenvalue)) stats.min_eigenvalue = 0.0;
  return stats;
}

PropagationResult propagate(const Generator& gen, const DensityMatrix& rho0,
                            std::span<const double> t_grid,
                            const PropagationOptions& options) {
  const Controls fixed = gen.nominal();
  return propagate(gen, rho0, t_grid, [fixed](double) { return fixed; }, options);
}

PropagationResult propagate(const Generator& gen, const DensityMatrix& rho0,
                            std::span<const double> t_grid,
                            const ControlSchedule& controls,
                            const PropagationOptions& options) {
  if (!(rho0.basis() == gen.basis())) {
    throw InvalidArgument("initial state and generator live on different bases");
  }
  if (!t_grid.empty() && t_grid.front() != 0.0) {
    throw InvalidArgument("time grid must start at 0");
  }
  PropagationResult result;
  result.times.assign(t_grid.begin(), t_grid.end());
  result.states.reserve(t_grid.size());
  result.stats = propagate_observe(
      gen, rho0.matrix(), t_grid, controls,
      [&](std::size_t, double, const Matrix& rho) { result.states.push_back(rho); }, options);
  return result;
}

DensityMatrix steady_state(const Generator& gen) { return steady_state(gen, gen.nominal()); }

DensityMatrix steady_state(const Generator& gen, Controls controls) {
  const auto n = static_cast<int>(gen.basis().dim());
  const Eigen::SparseMatrix<cplx> full = gen.superoperator(controls);

  // Replace the equation for rho(0,0) by Tr rho = 1.
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(static_cast<std::size_t>(full.nonZeros()) + static_cast<std::size_t>(n));
  for (int col = 0; col < full.outerSize(); ++col) {
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(full, col); it; ++it) {
      if (it.row() != 0) triplets.emplace_back(static_cast<int>(it.row()), col, it.value());
    }
  }
  for (int m = 0; m < n; ++m) triplets.emplace_back(0, m + n * m, cplx{1.0, 0.0});
  Eigen::SparseMatrix<cplx> system(n * n, n * n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(system);
  lu.factorize(system);
  if (lu.info() != Eigen::Success) {
    throw DegenerateSteadyState(
        "steady state is not unique: the Liouvillian with the trace condition is "
        "rank deficient (" + lu.lastErrorMessage() + ")");
  }
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n * n);
  rhs(0) = 1.0;
  const Eigen::VectorXcd x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw DegenerateSteadyState("steady state is not unique: singular linear system");
  }
  Matrix rho = Eigen::Map<const Matrix>(x.data(), n, n);

  // A rank-deficient system that slipped through the factorization leaves a
  // large residual in the full (unreplaced) generator.
  const Eigen::VectorXcd residual = full * x;
  const double res = residual.cwiseAbs().maxCoeff();
  if (res > 1e-10 || std::abs(rho.trace() - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "steady state is not unique or ill-conditioned: residual " << res;
    throw DegenerateSteadyState(os.str());
  }
  return {std::move(rho), gen.basis()};
}

std::vector<double> uniform_grid(double t_max, std::size_t points) {
  if (points < 2 || !(t_max > 0.0)) {
    throw InvalidArgument("uniform grid needs t_max > 0 and at least two points");
  }
  std::vector<double> grid(points);
  const double dt = t_max / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = dt * static_cast<double>(i);
  grid.back() = t_max;
  return grid;
}

}  // namespace cqed
