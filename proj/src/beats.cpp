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

#include "cqed/beats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cqed/error.hpp"

namespace cqed {

namespace {

// Relative fringe contrast below which a trace counts as flat.
constexpr double kFlatContrast = 1e-3;

struct Extremum {
  double tau;
  double value;
};

// Vertex of the parabola through (i-1, i, i+1).
Extremum refine(const std::vector<double>& tau, const std::vector<double>& v, std::size_t i) {
  const double y0 = v[i - 1], y1 = v[i], y2 = v[i + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  if (denom == 0.0) return {tau[i], y1};
  double shift = 0.5 * (y0 - y2) / denom;
  shift = std::clamp(shift, -1.0, 1.0);
  const double dt = tau[i + 1] - tau[i];
  return {tau[i] + shift * dt, y1 - 0.25 * (y0 - y2) * shift};
}

std::pair<std::size_t, std::size_t> window_indices(const CorrelationTrace& trace, double lo,
                                                   double hi) {
  const auto& t = trace.tau;
  const auto first = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), lo) - t.begin());
  const auto last = static_cast<std::size_t>(
      std::upper_bound(t.begin(), t.end(), hi) - t.begin());
  return {first, last};
}

double dtft_magnitude(const std::vector<double>& x, double dt, double omega) {
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double phase = omega * dt * static_cast<double>(k);
    re += x[k] * std::cos(phase);
    im -= x[k] * std::sin(phase);
  }
  return std::hypot(re, im);
}

// Peak of |DTFT| over the native bins 1..N/2, refined inside the
// neighbouring bins by golden-section search.
double peak_frequency(const std::vector<double>& x, double dt) {
  const std::size_t n = x.size();
  const double bin = 2.0 * std::numbers::pi / (dt * static_cast<double>(n));
  std::size_t best = 1;
  double best_mag = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double mag = dtft_magnitude(x, dt, bin * static_cast<double>(k));
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  double a = bin * (static_cast<double>(best) - 1.0);
  double b = bin * (static_cast<double>(best) + 1.0);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = dtft_magnitude(x, dt, c), fd = dtft_magnitude(x, dt, d);
  for (int it = 0; it < 60 && b - a > 1e-10 * bin; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = dtft_magnitude(x, dt, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = dtft_magnitude(x, dt, d);
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> subtract_running_mean(const std::vector<double>& x, std::size_t width) {
  const std::size_t n = x.size();
  const std::size_t half = width / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = x[i] - (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::NormalizedG2:
      return "normalized-g2";
    case Normalization::ConditionalIntensity:
      return "conditional-intensity";
    case Normalization::UnnormalizedG2:
      return "unnormalized-G2";
  }
  return "normalized-g2";
}

void CorrelationTrace::validate() const {
  if (tau.size() != values.size()) throw InvalidArgument("tau and values differ in length");
  if (!stderr_values.empty() && stderr_values.size() != values.size()) {
    throw InvalidArgument("stderr and values differ in length");
  }
  if (tau.size() < 2) return;
  const double dt = (tau.back() - tau.front()) / static_cast<double>(tau.size() - 1);
  const double tol = 1e-12 * std::max(1.0, std::abs(tau.back()));
  for (std::size_t i = 1; i < tau.size(); ++i) {
    if (!(tau[i] > tau[i - 1]) || std::abs(tau[i] - tau[i - 1] - dt) > tol) {
      throw InvalidArgument("tau grid is not strictly increasing and uniform");
    }
  }
  for (double v : values) {
    if (!(v >= -1e-10)) throw InvalidArgument("negative intensity in correlation trace");
  }
}

double mean_photon(const DensityMatrix& rho, Mode which) {
  const auto& basis = rho.basis();
  double total = 0.0;
  for (std::size_t k = 0; k < basis.dim(); ++k) {
    const auto s = basis.state(k);
    const int n = which == Mode::Driven ? s.n1 : s.n2;
    total += n * rho.matrix()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real();
  }
  return total;
}

DensityMatrix conditional_state_after_click(const DensityMatrix& rho) {
  const Matrix a2 = mode_annihilator(rho.basis(), Mode::Undriven).matrix;
  Matrix clicked = a2 * rho.matrix() * a2.adjoint();
  const double norm = clicked.trace().real();
  if (!(norm > 0.0)) {
    throw NumericalError("click probability is zero: the undriven mode is empty");
  }
  clicked /= norm;
  return {std::move(clicked), rho.basis()};
}

double predictability(const Matrix& rho, const CompositeBasis& basis) {
  const Matrix atom = atomic_marginal(rho, basis);
  const auto pm = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BMinus1));
  const auto pp = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
  const double a = atom(pm, pm).real();
  const double b = atom(pp, pp).real();
  return a + b > 0.0 ? std::abs(a - b) / (a + b) : 0.0;
}

DensityMatrix ground_prepared_state(const Generator& gen, double t_prep) {
  if (!(t_prep > 0.0)) throw InvalidArgument("preparation time must be positive");
  const auto start = DensityMatrix::pure(gen.basis(), AtomicLevel::B0, 0, 0);
  const std::vector<double> grid = {0.0, t_prep};
  auto result = propagate(gen, start, grid);
  if (!result.stats.physical) {
    throw NumericalError("ground-state preparation left the physical set: " +
                         result.stats.diagnostics);
  }
  return {std::move(result.states.back()), gen.basis()};
}

CorrelationTrace g2_conditioned(const DensityMatrix& reference, double intensity,
                                const Generator& gen, std::span<const double> tau_grid,
                                const PropagationOptions& options) {
  if (!(reference.basis() == gen.basis())) {
    throw InvalidArgument("reference state and generator live on different bases");
  }
  if (!(intensity > 0.0)) {
    throw NumericalError("cannot normalize g2: the undriven-mode intensity is zero");
  }
  const auto& basis = gen.basis();
  const DensityMatrix clicked = conditional_state_after_click(reference);

  std::vector<double> n2(basis.dim());
  for (std::size_t k = 0; k < basis.dim(); ++k) n2[k] = basis.state(k).n2;

  CorrelationTrace trace;
  trace.tau.assign(tau_grid.begin(), tau_grid.end());
  trace.values.resize(tau_grid.size());
  trace.normalization = Normalization::NormalizedG2;
  trace.meta.params = gen.params();
  const Matrix atom = atomic_marginal(clicked.matrix(), basis);
  const auto m = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BMinus1));
  const auto p = static_cast<Eigen::Index>(basis.level_position(AtomicLevel::BPlus1));
  trace.meta.population_minus = atom(m, m).real();
  trace.meta.population_plus = atom(p, p).real();

  const Controls fixed = gen.nominal();
  trace.meta.stats = propagate_observe(
      gen, clicked.matrix(), tau_grid, [fixed](double) { return fixed; },
      [&](std::size_t i, double, const Matrix& rho) {
        double g = 0.0;
        for (std::size_t k = 0; k < n2.size(); ++k) {
          g += n2[k] * rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real();
        }
        trace.values[i] = g / intensity;
      },
      options);
  return trace;
}

CorrelationTrace g2_undriven(const DensityMatrix& rho_ss, const Generator& gen,
                             std::span<const double> tau_grid,
                             const PropagationOptions& options) {
  return g2_conditioned(rho_ss, mean_photon(rho_ss, Mode::Undriven), gen, tau_grid, options);
}

FringeMetrics fringe_metrics(const CorrelationTrace& trace, double tau_lo, double tau_hi) {
  FringeMetrics m;
  const double pops = trace.meta.population_minus + trace.meta.population_plus;
  m.predictability =
      pops > 0.0
          ? std::abs(trace.meta.population_minus - trace.meta.population_plus) / pops
          : 0.0;

  const auto [first, last] = window_indices(trace, tau_lo, tau_hi);
  const auto& t = trace.tau;
  const auto& v = trace.values;
  for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 < std::min(last, v.size()); ++i) {
    if (v[i] < v[i - 1] && v[i] <= v[i + 1]) m.minima.push_back(refine(t, v, i).tau);
    if (v[i] > v[i - 1] && v[i] >= v[i + 1]) m.maxima.push_back(refine(t, v, i).tau);
  }

  std::optional<Extremum> lo, hi;
  for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 < std::min(last, v.size()); ++i) {
    if (!lo) {
      if (v[i] < v[i - 1] && v[i] <= v[i + 1]) lo = refine(t, v, i);
    } else if (v[i] > v[i - 1] && v[i] >= v[i + 1]) {
      hi = refine(t, v, i);
      break;
    }
  }
  if (lo && hi && hi->value + lo->value > 0.0) {
    m.visibility = (hi->value - lo->value) / (hi->value + lo->value);
  }
  if (m.visibility < kFlatContrast) {
    m.visibility = 0.0;
    m.flat = true;
  }
  m.visibility = std::clamp(m.visibility, 0.0, 1.0);

  if (!m.flat && m.minima.size() >= 2) {
    const double spacing =
        (m.minima.back() - m.minima.front()) / static_cast<double>(m.minima.size() - 1);
    m.beat_frequency = 2.0 * std::numbers::pi / spacing;
  }
  return m;
}

double spectral_peak(const CorrelationTrace& trace, double tau_lo, double tau_hi) {
  const auto [first, last] = window_indices(trace, tau_lo, tau_hi);
  if (last <= first + 4) throw InvalidArgument("spectral window holds too few samples");
  std::vector<double> x(trace.values.begin() + static_cast<std::ptrdiff_t>(first),
                        trace.values.begin() + static_cast<std::ptrdiff_t>(last));
  const double dt = trace.tau[1] - trace.tau[0];
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> centered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean;

  const double coarse = peak_frequency(centered, dt);
  const auto width = static_cast<std::size_t>(
      std::llround(2.0 * std::numbers::pi / coarse / dt));
  if (width < 2 || width >= x.size()) return coarse;
  return peak_frequency(subtract_running_mean(x, width), dt);
}

double sample(const CorrelationTrace& trace, double tau) {
  const auto& t = trace.tau;
  if (t.empty()) throw InvalidArgument("empty trace");
  if (tau <= t.front()) return trace.values.front();
  if (tau >= t.back()) return trace.values.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), tau) - t.begin());
  const std::size_t lo = hi - 1;
  const double w = (tau - t[lo]) / (t[hi] - t[lo]);
  return (1.0 - w) * trace.values[lo] + w * trace.values[hi];
}

void write_csv(std::ostream& os, const CorrelationTrace& trace, bool with_stderr,
               const std::vector<std::string>& comments) {
  if (with_stderr && trace.stderr_values.size() != trace.values.size()) {
    throw InvalidArgument("trace carries no standard errors");
  }
  for (const auto& c : comments) os << "# " << c << '\n';
  os << (with_stderr ? "tau,gvalue,stderr\n" : "tau,gvalue\n");
  char buf[96];
  for (std::size_t i = 0; i < trace.tau.size(); ++i) {
    if (with_stderr) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", trace.tau[i], trace.values[i],
                    trace.stderr_values[i]);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", trace.tau[i], trace.values[i]);
    }
    os << buf;
  }
}

}  // namespace cqed
