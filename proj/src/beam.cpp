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

#include "cqed/beam.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/LU>

#include "cqed/error.hpp"

namespace cqed {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(name) + " must be positive and finite");
  }
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(name) + " must be nonnegative and finite");
  }
}

// Column-stacking Kronecker product.
Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

void merge_stats(PropagationStats& into, const PropagationStats& from) {
  into.step = std::max(into.step, from.step);
  into.steps += from.steps;
  into.max_trace_drift = std::max(into.max_trace_drift, from.max_trace_drift);
  into.max_hermiticity_error = std::max(into.max_hermiticity_error, from.max_hermiticity_error);
  into.min_eigenvalue = std::min(into.min_eigenvalue, from.min_eigenvalue);
  if (!from.physical) {
    into.physical = false;
    if (into.diagnostics.size() < 4096) into.diagnostics += from.diagnostics;
  }
}

// Pairwise summation over [lo, hi) in index order.
template <typename Value>
double pairwise(std::size_t lo, std::size_t hi, const Value& value) {
  if (hi - lo == 1) return value(lo);
  if (hi - lo == 2) return value(lo) + value(lo + 1);
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise(lo, mid, value) + pairwise(mid, hi, value);
}

double triangular(std::mt19937_64& rng, double half_width) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng);
  const double b = u(rng);
  return half_width * (a + b - 1.0);
}

}  // namespace

void ModeGeometry::validate() const {
  require_positive(waist, "waist");
  require_positive(wavelength, "wavelength");
  require_nonnegative(g0, "g0");
}

void BeamConfig::validate() const {
  require_positive(mean_speed, "mean_speed");
  require_nonnegative(speed_sigma, "speed_sigma");
  require_nonnegative(theta_p, "theta_p");
  require_nonnegative(theta_t, "theta_t");
  require_positive(y_extent, "y_extent");
  if (!(theta_p < std::numbers::pi / 2 && theta_t < std::numbers::pi / 2)) {
    throw InvalidArgument("divergence angles must stay below pi/2");
  }
  if (!(mean_atoms > 0.0 && mean_atoms < 1.0)) {
    throw InvalidArgument("mean_atoms must lie in (0, 1)");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("threshold must lie in (0, 1)");
  }
}

std::vector<std::string> BeamConfig::warnings() const {
  std::vector<std::string> out;
  if (mean_atoms > 0.2) {
    std::ostringstream os;
    os << "mean_atoms = " << mean_atoms
       << " exceeds 0.2; the one-atom-at-a-time model assumes mean_atoms << 1";
    out.push_back(os.str());
  }
  return out;
}

std::array<double, 3> Trajectory::position(double s) const {
  const double cp = std::cos(theta_p);
  return {speed * cp * std::cos(theta_t) * s, y0 + speed * cp * std::sin(theta_t) * s,
          z0 + speed * std::sin(theta_p) * s};
}

Trajectory make_trajectory(double y0, double z0, double speed, double theta_p, double theta_t,
                           const ModeGeometry& geom, double threshold) {
  geom.validate();
  require_positive(speed, "speed");
  Trajectory t{y0, z0, speed, theta_p, theta_t, 0.0, 0.0};
  const double cp = std::cos(theta_p);
  const double vx = speed * cp * std::cos(theta_t);
  const double vy = speed * cp * std::sin(theta_t);
  // x(s)^2 + y(s)^2 = w^2 ln(1 / threshold) at the crossings.
  const double a = vx * vx + vy * vy;
  const double b = 2.0 * y0 * vy;
  const double c = y0 * y0 - geom.waist * geom.waist * std::log(1.0 / threshold);
  const double disc = b * b - 4.0 * a * c;
  if (!(a > 0.0) || !(disc > 0.0)) {
    throw InvalidArgument("trajectory never enters the coupling region");
  }
  const double root = std::sqrt(disc);
  t.entry_s = (-b - root) / (2.0 * a);
  t.exit_s = (-b + root) / (2.0 * a);
  return t;
}

Trajectory sample_trajectory(const BeamConfig& cfg, const ModeGeometry& geom,
                             std::mt19937_64& rng) {
  cfg.validate();
  std::normal_distribution<double> speed_dist(cfg.mean_speed, cfg.speed_sigma);
  double speed = 0.0;
  do {
    speed = speed_dist(rng);
  } while (!(speed > 0.0));
  const double theta_p = triangular(rng, cfg.theta_p);
  const double theta_t = triangular(rng, cfg.theta_t);
  std::uniform_real_distribution<double> y_dist(-cfg.y_extent * geom.waist,
                                                cfg.y_extent * geom.waist);
  std::uniform_real_distribution<double> z_dist(0.0, 0.5 * geom.wavelength);
  const double y0 = y_dist(rng);
  const double z0 = z_dist(rng);
  return make_trajectory(y0, z0, speed, theta_p, theta_t, geom, cfg.threshold);
}

double coupling_at(const Trajectory& traj, const ModeGeometry& geom, double s) {
  const auto [x, y, z] = traj.position(s);
  return geom.g0 * std::abs(std::cos(2.0 * std::numbers::pi * z / geom.wavelength)) *
         std::exp(-(x * x + y * y) / (geom.waist * geom.waist));
}

std::vector<double> coupling_profile(const Trajectory& traj, const ModeGeometry& geom,
                                     std::span<const double> times_s) {
  std::vector<double> out;
  out.reserve(times_s.size());
  for (double s : times_s) out.push_back(coupling_at(traj, geom, s));
  return out;
}

double time_unit_s(double gamma_hz) {
  require_positive(gamma_hz, "gamma_hz");
  return 1.0 / (2.0 * std::numbers::pi * gamma_hz);
}

DensityMatrix empty_cavity_state(const Generator& gen) {
  const CompositeBasis& basis = gen.basis();
  const auto f = static_cast<Eigen::Index>(basis.fock_dim());
  const auto offset = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::B0)) * f;
  const Controls nominal = gen.nominal();
  const auto& parts = gen.hamiltonian_parts();
  // With the atom parked in b0 and g = 0 the field block evolves on its own.
  const Matrix h = parts.fixed.matrix.block(offset, offset, f, f) +
                   nominal.drive * parts.per_drive.matrix.block(offset, offset, f, f);
  const Matrix id = Matrix::Identity(f, f);
  Matrix lv = cplx{0.0, -1.0} * (kron(id, h) - kron(h.transpose(), id));
  for (Mode m : {Mode::Driven, Mode::Undriven}) {
    const Matrix o = mode_annihilator(basis, m).matrix.block(offset, offset, f, f);
    const Matrix odo = o.adjoint() * o;
    lv += gen.params().kappa *
          (2.0 * kron(o.conjugate(), o) - kron(id, odo) - kron(odo.transpose(), id));
  }
  for (Eigen::Index k = 0; k < f * f; ++k) lv(0, k) = 0.0;
  for (Eigen::Index k = 0; k < f; ++k) lv(0, k + f * k) = 1.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(f * f);
  rhs(0) = 1.0;
  const Eigen::FullPivLU<Matrix> lu(lv);
  if (!lu.isInvertible()) {
    throw DegenerateSteadyState("empty-cavity steady state is not unique");
  }
  const Eigen::VectorXcd x = lu.solve(rhs);
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Matrix rho = Matrix::Zero(n, n);
  rho.block(offset, offset, f, f) = Eigen::Map<const Matrix>(x.data(), f, f);
  return {std::move(rho), basis};
}

TransitCorrelation transit_correlation(const std::function<double(double)>& coupling,
                                       double transit_time, const Generator& gen,
                                       std::span<const double> tau_grid,
                                       const TransitOptions& options) {
  require_positive(transit_time, "transit time");
  if (options.start_points < 2) throw InvalidArgument("need at least two start times");
  if (tau_grid.empty() || tau_grid.front() != 0.0) {
    throw InvalidArgument("tau grid must start at 0");
  }
  const SystemParams& params = gen.params();
  const double drive = gen.nominal().drive;
  const ControlSchedule controls = [&](double t) {
    return Controls{t < transit_time ? coupling(t) : 0.0, drive};
  };
  const Matrix a2 = mode_annihilator(gen.basis(), Mode::Undriven).matrix;
  const Eigen::VectorXd n2 = number_operator(gen.basis(), Mode::Undriven).matrix.diagonal().real();
  const auto readout = [&](const Matrix& rho) { return n2.dot(rho.diagonal().real()); };

  const std::size_t k_count = options.start_points;
  std::vector<double> starts(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    starts[k] = transit_time * static_cast<double>(k) / static_cast<double>(k_count - 1);
  }
  starts.back() = transit_time;
  std::vector<double> weights(k_count, 1.0 / static_cast<double>(k_count - 1));
  weights.front() *= 0.5;
  weights.back() *= 0.5;

  TransitCorrelation result;
  result.transit_time = transit_time;
  std::vector<double> intensity(k_count);
  std::vector<Matrix> clicked(k_count);
  result.stats = propagate_observe(
      gen, empty_cavity_state(gen).matrix(), starts, controls,
      [&](std::size_t k, double, const Matrix& rho) {
        intensity[k] = readout(rho);
        clicked[k] = a2 * rho * a2.adjoint();
      },
      options.propagation);

  // After the exit an undriven a2 with g = 0 and no birefringence only decays.
  const bool analytic_tail = params.xi_b == 0.0;
  const std::size_t n_tau = tau_grid.size();
  std::vector<std::vector<double>> g(k_count, std::vector<double>(n_tau, 0.0));
  for (std::size_t k = 0; k < k_count; ++k) {
    if (clicked[k].trace().real() <= 0.0) continue;
    const double room = std::max(transit_time - starts[k], 0.0);
    std::vector<double> grid;
    std::size_t numeric = 0;
    for (; numeric < n_tau; ++numeric) {
      if (analytic_tail && tau_grid[numeric] > room) break;
      grid.push_back(starts[k] + tau_grid[numeric]);
    }
    const bool add_exit = numeric < n_tau && grid.back() < transit_time;
    if (add_exit) grid.push_back(transit_time);
    std::vector<double> values(grid.size());
    const auto stats = propagate_observe(
        gen, clicked[k], grid, controls,
        [&](std::size_t i, double, const Matrix& rho) { values[i] = readout(rho); },
        options.propagation);
    merge_stats(result.stats, stats);
    for (std::size_t i = 0; i < numeric; ++i) g[k][i] = values[i];
    const double exit_value = values.back();
    const double exit_time = grid.back();
    for (std::size_t i = numeric; i < n_tau; ++i) {
      g[k][i] = exit_value * std::exp(-2.0 * params.kappa * (starts[k] + tau_grid[i] - exit_time));
    }
  }

  result.intensity = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) result.intensity += weights[k] * intensity[k];
  result.correlation.assign(n_tau, 0.0);
  for (std::size_t i = 0; i < n_tau; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) sum += weights[k] * g[k][i];
    result.correlation[i] = sum;
  }
  return result;
}

TransitCorrelation transit_correlation(const Trajectory& traj, const ModeGeometry& geom,
                                       const Generator& gen, std::span<const double> tau_grid,
                                       const TransitOptions& options) {
  const double unit = time_unit_s(gen.params().gamma_hz);
  const double entry = traj.entry_s;
  return transit_correlation(
      [&](double t) { return coupling_at(traj, geom, entry + t * unit); },
      traj.transit_s() / unit, gen, tau_grid, options);
}

unsigned default_workers() {
  if (const char* env = std::getenv("CQED_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleResult reduce_ensemble(std::span<const TransitCorrelation> transits, double mean_atoms,
                               std::span<const double> tau_grid) {
  const std::size_t n = transits.size();
  if (n == 0) throw InvalidArgument("ensemble needs at least one trajectory");
  const std::size_t n_tau = tau_grid.size();
  for (const auto& t : transits) {
    if (t.correlation.size() != n_tau) {
      throw InvalidArgument("trajectory correlation length does not match the tau grid");
    }
  }
  const double dn = static_cast<double>(n);
  const double mu_i = pairwise(0, n, [&](std::size_t j) { return transits[j].intensity; }) / dn;
  if (!(mu_i > 0.0)) throw NumericalError("ensemble mean intensity is zero");
  const double var_i =
      n > 1 ? pairwise(0, n,
                       [&](std::size_t j) {
                         const double d = transits[j].intensity - mu_i;
                         return d * d;
                       }) /
                  (dn - 1.0)
            : 0.0;

  EnsembleResult out;
  out.trajectories = n;
  out.mean_intensity = mean_atoms * mu_i;
  out.mean_transit_time =
      pairwise(0, n, [&](std::size_t j) { return transits[j].transit_time; }) / dn;
  out.stats = transits[0].stats;
  for (std::size_t j = 1; j < n; ++j) merge_stats(out.stats, transits[j].stats);

  CorrelationTrace& trace = out.trace;
  trace.tau.assign(tau_grid.begin(), tau_grid.end());
  trace.values.resize(n_tau);
  trace.stderr_values.resize(n_tau);
  trace.normalization = Normalization::NormalizedG2;
  trace.meta.stats = out.stats;
  for (std::size_t i = 0; i < n_tau; ++i) {
    const double mu_g =
        pairwise(0, n, [&](std::size_t j) { return transits[j].correlation[i]; }) / dn;
    double var_g = 0.0, cov = 0.0;
    if (n > 1) {
      var_g = pairwise(0, n,
                       [&](std::size_t j) {
                         const double d = transits[j].correlation[i] - mu_g;
                         return d * d;
                       }) /
              (dn - 1.0);
      cov = pairwise(0, n,
                     [&](std::size_t j) {
                       return (transits[j].correlation[i] - mu_g) *
                              (transits[j].intensity - mu_i);
                     }) /
            (dn - 1.0);
    }
    // g2 - 1 = mu_g / (N mu_i^2); delta method on (mu_g, mu_i).
    const double scale = 1.0 / (mean_atoms * mu_i * mu_i);
    const double dg = scale;
    const double di = -2.0 * mu_g * scale / mu_i;
    const double var = (dg * dg * var_g + 2.0 * dg * di * cov + di * di * var_i) / dn;
    trace.values[i] = 1.0 + mu_g * scale;
    trace.stderr_values[i] = std::sqrt(std::max(var, 0.0));
  }
  return out;
}

EnsembleResult ensemble_g2(const BeamConfig& cfg, const ModeGeometry& geom,
                           const SystemParams& params, const CompositeBasis& basis,
                           std::size_t n_traj, std::span<const double> tau_grid,
                           std::uint64_t seed, const EnsembleOptions& options) {
  cfg.validate();
  geom.validate();
  if (n_traj == 0) throw InvalidArgument("n_traj must be at least 1");
  SystemParams p = params;
  p.g = geom.g0;
  const Generator gen(p, basis);

  std::vector<TransitCorrelation> transits(n_traj);
  std::vector<std::exception_ptr> errors(n_traj);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t k = next++; k < n_traj; k = next++) {
      try {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        std::mt19937_64 rng(seq);
        const Trajectory traj = sample_trajectory(cfg, geom, rng);
        transits[k] = transit_correlation(traj, geom, gen, tau_grid, options.transit);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(
      1u, std::min<unsigned>(options.workers ? options.workers : default_workers(),
                             static_cast<unsigned>(std::min<std::size_t>(n_traj, 1u << 16))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EnsembleResult out = reduce_ensemble(transits, cfg.mean_atoms, tau_grid);
  out.trace.meta.params = p;
  out.trace.meta.seed = seed;
  return out;
}

}  // namespace cqed
