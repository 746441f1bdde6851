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

#include "cqed/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace cqed {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<std::uint64_t> parse_unsigned(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  return std::nullopt;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

// Error message, empty on success.
using Setter = std::function<std::string(RunConfig&, std::string_view)>;

Setter real(double RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto d = parse_double(v);
    if (!d) return "not a finite number: '" + std::string(v) + "'";
    c.*field = *d;
    return {};
  };
}

Setter param(double SystemParams::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto d = parse_double(v);
    if (!d) return "not a finite number: '" + std::string(v) + "'";
    c.params.*field = *d;
    return {};
  };
}

Setter beam_field(double BeamConfig::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto d = parse_double(v);
    if (!d) return "not a finite number: '" + std::string(v) + "'";
    c.beam.*field = *d;
    return {};
  };
}

Setter count(std::size_t RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto n = parse_unsigned(v);
    if (!n) return "not a nonnegative integer: '" + std::string(v) + "'";
    c.*field = static_cast<std::size_t>(*n);
    return {};
  };
}

Setter small_int(int RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto n = parse_unsigned(v);
    if (!n || *n > 64) return "not an integer in [0, 64]: '" + std::string(v) + "'";
    c.*field = static_cast<int>(*n);
    return {};
  };
}

Setter flag(bool RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v) -> std::string {
    const auto b = parse_bool(v);
    if (!b) return "expected true or false, got '" + std::string(v) + "'";
    c.*field = *b;
    return {};
  };
}

std::optional<RunMode> parse_mode(std::string_view s) {
  for (RunMode m : {RunMode::Steady, RunMode::G2, RunMode::Feedback, RunMode::Qec, RunMode::Beam}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

std::string_view to_string(ReferenceState r) {
  return r == ReferenceState::SteadyState ? "steady" : "ground";
}

std::optional<ScheduleEvent> parse_event(std::string_view text, std::string& error) {
  const auto w = split_words(text);
  if (w.size() < 2) {
    error = "event needs 'time kind [args]'";
    return std::nullopt;
  }
  ScheduleEvent e;
  const auto t = parse_double(w[0]);
  if (!t) {
    error = "event time is not a finite number: '" + std::string(w[0]) + "'";
    return std::nullopt;
  }
  e.time = *t;
  const std::string_view kind = w[1];
  auto expect_args = [&](std::size_t n) {
    if (w.size() != n + 2) {
      error = "event '" + std::string(kind) + "' takes " + std::to_string(n) + " argument(s)";
      return false;
    }
    return true;
  };
  auto number = [&](std::size_t i, double& out) {
    const auto d = parse_double(w[i]);
    if (!d) {
      error = "event argument is not a finite number: '" + std::string(w[i]) + "'";
      return false;
    }
    out = *d;
    return true;
  };
  if (kind == "drive") {
    e.kind = EventKind::DriveSet;
    if (!expect_args(1) || !number(2, e.value)) return std::nullopt;
  } else if (kind == "shelve") {
    e.kind = EventKind::Shelve;
    if (!expect_args(0)) return std::nullopt;
  } else if (kind == "swap") {
    e.kind = EventKind::Swap;
    if (!expect_args(0)) return std::nullopt;
  } else if (kind == "prepare") {
    e.kind = EventKind::Prepare;
    double a0 = 0.0, a1 = 0.0;
    if (!expect_args(2) || !number(2, a0) || !number(3, a1)) return std::nullopt;
    e.target = QubitState{a0, a1};
  } else if (kind == "ionize") {
    e.kind = EventKind::WeakIonization;
    if (!expect_args(1) || !number(2, e.value)) return std::nullopt;
  } else {
    error = "unknown event kind '" + std::string(kind) +
            "' (expected drive, shelve, swap, prepare or ionize)";
    return std::nullopt;
  }
  return e;
}

std::string join_values(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i]);
  }
  return out;
}

class MetricsWriter {
 public:
  void add(const std::string& key, const std::string& value) {
    text_ += key + ": " + value + "\n";
  }
  void add(const std::string& key, double value) { add(key, fmt(value)); }
  void add_bool(const std::string& key, bool value) { add(key, value ? "true" : "false"); }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

void add_stats(MetricsWriter& m, const PropagationStats& s) {
  m.add_bool("physical", s.physical);
  m.add("max_trace_drift", s.max_trace_drift);
  m.add("max_hermiticity_error", s.max_hermiticity_error);
  m.add("min_eigenvalue", s.min_eigenvalue);
  m.add("integration_step", s.step);
  m.add("integration_steps", std::to_string(s.steps));
  if (!s.physical) m.add("diagnostics", s.diagnostics);
}

void add_fringes(MetricsWriter& m, const CorrelationTrace& trace, std::pair<double, double> window) {
  const auto fm = fringe_metrics(trace, window.first, window.second);
  m.add("window_lo", window.first);
  m.add("window_hi", window.second);
  m.add("visibility", fm.visibility);
  m.add("predictability", fm.predictability);
  m.add("p2_plus_v2", fm.complementarity());
  m.add_bool("flat", fm.flat);
  double peak = std::numeric_limits<double>::quiet_NaN();
  try {
    peak = spectral_peak(trace, window.first, trace.tau.back());
  } catch (const InvalidArgument&) {
    // tau grid ends inside the fringe window
  }
  m.add("beat_frequency", peak);
  m.add("beat_frequency_from_minima", fm.beat_frequency);
  m.add("minima", join_values(fm.minima));
  m.add("maxima", join_values(fm.maxima));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw NumericalError("failed writing " + path.string());
}

void write_trace(const std::filesystem::path& path, const CorrelationTrace& trace,
                 bool with_stderr, const std::vector<std::string>& comments) {
  std::ostringstream os;
  write_csv(os, trace, with_stderr, comments);
  write_file(path, os.str());
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Steady:
      return "steady";
    case RunMode::G2:
      return "g2";
    case RunMode::Feedback:
      return "feedback";
    case RunMode::Qec:
      return "qec";
    case RunMode::Beam:
      return "beam";
  }
  return "unknown";
}

CompositeBasis RunConfig::basis() const {
  return build_basis(control_levels ? cqed::control_levels() : core_levels(), n1_max, n2_max);
}

ModeGeometry RunConfig::geometry() const { return {waist, wavelength, params.g}; }

std::pair<double, double> RunConfig::fringe_window() const {
  const double period = params.delta > 0.0 ? std::numbers::pi / params.delta : tau_max;
  const double lo = fringe_lo.value_or(std::min(period, tau_max));
  const double hi = fringe_hi.value_or(std::min(3.0 * period, tau_max));
  return {lo, hi};
}

ConfigError::ConfigError(std::vector<ConfigDiagnostic> diagnostics)
    : InvalidArgument([&] {
        std::string msg = "invalid configuration:";
        for (const auto& d : diagnostics) {
          msg += "\n  ";
          if (d.line > 0) msg += "line " + std::to_string(d.line) + ": ";
          msg += d.message;
        }
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

RunConfig parse_config(std::string_view text) {
  const std::map<std::string, std::map<std::string, Setter>> table = {
      {"system",
       {{"g", param(&SystemParams::g)},
        {"kappa", param(&SystemParams::kappa)},
        {"gamma", param(&SystemParams::gamma)},
        {"delta", param(&SystemParams::delta)},
        {"delta_prime", param(&SystemParams::delta_prime)},
        {"drive", param(&SystemParams::drive)},
        {"xi_b", param(&SystemParams::xi_b)},
        {"c0", param(&SystemParams::c0)},
        {"c0p", param(&SystemParams::c0p)},
        {"c1", param(&SystemParams::c1)},
        {"c1p", param(&SystemParams::c1p)},
        {"gamma_hz", param(&SystemParams::gamma_hz)}}},
      {"basis",
       {{"n1_max", small_int(&RunConfig::n1_max)},
        {"n2_max", small_int(&RunConfig::n2_max)},
        {"control_levels", flag(&RunConfig::control_levels)}}},
      {"schedule",
       {{"reference",
         [](RunConfig& c, std::string_view v) -> std::string {
           if (v == "steady") {
             c.reference = ReferenceState::SteadyState;
           } else if (v == "ground") {
             c.reference = ReferenceState::GroundPrepared;
           } else {
             return "reference must be steady or ground, got '" + std::string(v) + "'";
           }
           return {};
         }},
        {"t_prep", real(&RunConfig::t_prep)},
        {"outcomes_known", flag(&RunConfig::outcomes_known)}}},
      {"beam",
       {{"mean_speed", beam_field(&BeamConfig::mean_speed)},
        {"speed_sigma", beam_field(&BeamConfig::speed_sigma)},
        {"theta_p", beam_field(&BeamConfig::theta_p)},
        {"theta_t", beam_field(&BeamConfig::theta_t)},
        {"mean_atoms", beam_field(&BeamConfig::mean_atoms)},
        {"y_extent", beam_field(&BeamConfig::y_extent)},
        {"threshold", beam_field(&BeamConfig::threshold)},
        {"waist", real(&RunConfig::waist)},
        {"wavelength", real(&RunConfig::wavelength)},
        {"n_traj", count(&RunConfig::n_traj)},
        {"start_points", count(&RunConfig::start_points)}}},
      {"run",
       {{"mode",
         [](RunConfig& c, std::string_view v) -> std::string {
           const auto m = parse_mode(v);
           if (!m) return "mode must be steady, g2, feedback, qec or beam, got '" + std::string(v) + "'";
           c.mode = *m;
           return {};
         }},
        {"tau_max", real(&RunConfig::tau_max)},
        {"tau_points", count(&RunConfig::tau_points)},
        {"seed",
         [](RunConfig& c, std::string_view v) -> std::string {
           const auto n = parse_unsigned(v);
           if (!n) return "seed is not a nonnegative integer: '" + std::string(v) + "'";
           c.seed = *n;
           return {};
         }},
        {"output",
         [](RunConfig& c, std::string_view v) -> std::string {
           if (v.empty()) return "output path is empty";
           if (v.find('"') != std::string_view::npos) return "output path contains a quote";
           c.output = std::string(v);
           return {};
         }},
        {"fringe_lo",
         [](RunConfig& c, std::string_view v) -> std::string {
           const auto d = parse_double(v);
           if (!d) return "not a finite number: '" + std::string(v) + "'";
           c.fringe_lo = *d;
           return {};
         }},
        {"fringe_hi",
         [](RunConfig& c, std::string_view v) -> std::string {
           const auto d = parse_double(v);
           if (!d) return "not a finite number: '" + std::string(v) + "'";
           c.fringe_hi = *d;
           return {};
         }},
        {"max_step", real(&RunConfig::max_step)},
        {"check_stride", count(&RunConfig::check_stride)}}},
  };

  RunConfig c;
  std::vector<ConfigDiagnostic> errors;
  std::map<std::string, int> seen;  // "section.key" -> line
  std::vector<int> event_lines;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    // Strip a comment that starts outside quotes.
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const std::string_view line = trim(raw.substr(0, cut));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back({line_no, "malformed section header '" + std::string(line) + "'"});
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!table.contains(section)) {
        errors.push_back({line_no, "unknown section [" + section + "]"});
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back({line_no, "expected 'key = value', got '" + std::string(line) + "'"});
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.find('"') != std::string_view::npos) {
      errors.push_back({line_no, "unbalanced quotes in value of '" + key + "'"});
      continue;
    }
    if (section.empty()) {
      errors.push_back({line_no, "key '" + key + "' appears before any section header"});
      continue;
    }
    const auto sec = table.find(section);
    if (sec == table.end()) continue;  // already reported

    if (section == "schedule" && key == "event") {
      std::string error;
      if (auto e = parse_event(value, error)) {
        c.schedule.events.push_back(*e);
        event_lines.push_back(line_no);
      } else {
        errors.push_back({line_no, error});
      }
      continue;
    }
    const auto setter = sec->second.find(key);
    if (setter == sec->second.end()) {
      errors.push_back({line_no, "unknown key '" + key + "' in [" + section + "]"});
      continue;
    }
    const std::string full = section + "." + key;
    if (const auto prev = seen.find(full); prev != seen.end()) {
      errors.push_back({line_no, "duplicate key '" + key + "' (first set on line " +
                                     std::to_string(prev->second) + ")"});
      continue;
    }
    seen[full] = line_no;
    if (std::string err = setter->second(c, value); !err.empty()) {
      errors.push_back({line_no, key + ": " + err});
    }
  }

  const auto line_of = [&](const std::string& full) {
    const auto it = seen.find(full);
    return it == seen.end() ? 0 : it->second;
  };
  const auto require = [&](const std::string& full) {
    if (!seen.contains(full)) {
      errors.push_back({0, "missing key '" + full.substr(full.find('.') + 1) + "' in [" +
                               full.substr(0, full.find('.')) + "] (required for mode " +
                               std::string(to_string(c.mode)) + ")"});
    }
  };

  require("run.mode");
  if (c.mode != RunMode::Steady) {
    require("run.tau_max");
    require("run.tau_points");
  }
  if (c.mode == RunMode::Beam) require("beam.n_traj");

  try {
    c.params.validate();
  } catch (const std::exception& e) {
    errors.push_back({0, std::string("[system]: ") + e.what()});
  }
  std::optional<CompositeBasis> basis;
  try {
    basis = c.basis();
  } catch (const std::exception& e) {
    errors.push_back({line_of("basis.n1_max"), std::string("[basis]: ") + e.what()});
  }

  if (c.mode != RunMode::Steady) {
    if (!(c.tau_max > 0.0)) errors.push_back({line_of("run.tau_max"), "tau_max must be positive"});
    if (c.tau_points < 2) {
      errors.push_back({line_of("run.tau_points"), "tau_points must be at least 2"});
    }
  }
  if (c.max_step < 0.0) errors.push_back({line_of("run.max_step"), "max_step must be >= 0"});
  if (c.check_stride < 1) {
    errors.push_back({line_of("run.check_stride"), "check_stride must be at least 1"});
  }
  if (!(c.t_prep >= 0.0)) errors.push_back({line_of("schedule.t_prep"), "t_prep must be >= 0"});
  if (c.fringe_lo && c.fringe_hi && !(*c.fringe_lo < *c.fringe_hi)) {
    errors.push_back({line_of("run.fringe_hi"), "fringe_lo must be below fringe_hi"});
  }

  const bool uses_schedule = c.mode == RunMode::Feedback || c.mode == RunMode::Qec;
  if (!uses_schedule && !c.schedule.events.empty()) {
    errors.push_back({event_lines.front(), "schedule events need mode feedback or qec"});
  }
  if (c.control_levels && (c.mode == RunMode::Steady || c.mode == RunMode::G2 ||
                           c.mode == RunMode::Beam)) {
    errors.push_back({line_of("basis.control_levels"),
                      "control_levels is only meaningful for modes feedback and qec"});
  }
  if (c.mode == RunMode::Feedback && c.schedule.events.size() < 2) {
    errors.push_back({0, "mode feedback requires at least 2 schedule events"});
  }
  if (c.mode == RunMode::Qec &&
      std::none_of(c.schedule.events.begin(), c.schedule.events.end(),
                   [](const ScheduleEvent& e) { return e.kind == EventKind::WeakIonization; })) {
    errors.push_back({0, "mode qec requires at least one 'ionize' schedule event"});
  }
  if (basis && uses_schedule) {
    double last = 0.0;
    for (std::size_t i = 0; i < c.schedule.events.size(); ++i) {
      const auto& e = c.schedule.events[i];
      if (e.time < last) {
        errors.push_back({event_lines[i], "event times must be nondecreasing"});
      }
      last = std::max(last, e.time);
      try {
        Schedule{{e}}.validate(*basis);
      } catch (const std::exception& err) {
        std::string msg = err.what();
        const auto colon = msg.find("): ");
        errors.push_back({event_lines[i], colon == std::string::npos ? msg : msg.substr(colon + 3)});
      }
    }
  }
  if (c.mode == RunMode::Beam) {
    try {
      c.beam.validate();
      c.geometry().validate();
    } catch (const std::exception& e) {
      errors.push_back({0, std::string("[beam]: ") + e.what()});
    }
    if (c.n_traj < 1) errors.push_back({line_of("beam.n_traj"), "n_traj must be at least 1"});
    if (c.start_points < 2) {
      errors.push_back({line_of("beam.start_points"), "start_points must be at least 2"});
    }
  }
  c.beam.seed = c.seed;

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

std::string echo_config(const RunConfig& c) {
  std::ostringstream os;
  const auto& p = c.params;
  os << "[run]\n"
     << "mode = " << to_string(c.mode) << "\n"
     << "tau_max = " << fmt(c.tau_max) << "\n"
     << "tau_points = " << c.tau_points << "\n"
     << "seed = " << c.seed << "\n"
     << "output = \"" << c.output << "\"\n";
  if (c.fringe_lo) os << "fringe_lo = " << fmt(*c.fringe_lo) << "\n";
  if (c.fringe_hi) os << "fringe_hi = " << fmt(*c.fringe_hi) << "\n";
  os << "max_step = " << fmt(c.max_step) << "\n"
     << "check_stride = " << c.check_stride << "\n\n"
     << "[system]\n"
     << "g = " << fmt(p.g) << "\n"
     << "kappa = " << fmt(p.kappa) << "\n"
     << "gamma = " << fmt(p.gamma) << "\n"
     << "delta = " << fmt(p.delta) << "\n"
     << "delta_prime = " << fmt(p.delta_prime) << "\n"
     << "drive = " << fmt(p.drive) << "\n"
     << "xi_b = " << fmt(p.xi_b) << "\n"
     << "c0 = " << fmt(p.c0) << "\n"
     << "c0p = " << fmt(p.c0p) << "\n"
     << "c1 = " << fmt(p.c1) << "\n"
     << "c1p = " << fmt(p.c1p) << "\n"
     << "gamma_hz = " << fmt(p.gamma_hz) << "\n\n"
     << "[basis]\n"
     << "n1_max = " << c.n1_max << "\n"
     << "n2_max = " << c.n2_max << "\n"
     << "control_levels = " << (c.control_levels ? "true" : "false") << "\n\n"
     << "[schedule]\n"
     << "reference = " << to_string(c.reference) << "\n"
     << "t_prep = " << fmt(c.t_prep) << "\n"
     << "outcomes_known = " << (c.outcomes_known ? "true" : "false") << "\n";
  for (const auto& e : c.schedule.events) {
    std::string canon = fmt(e.time);
    switch (e.kind) {
      case EventKind::DriveSet:
        canon += " drive " + fmt(e.value);
        break;
      case EventKind::Shelve:
        canon += " shelve";
        break;
      case EventKind::Swap:
        canon += " swap";
        break;
      case EventKind::Prepare:
        canon += " prepare " + fmt(e.target.alpha0.real()) + " " + fmt(e.target.alpha1.real());
        break;
      case EventKind::WeakIonization:
        canon += " ionize " + fmt(e.value);
        break;
    }
    os << "event = \"" << canon << "\"\n";
  }
  const auto& b = c.beam;
  os << "\n[beam]\n"
     << "mean_speed = " << fmt(b.mean_speed) << "\n"
     << "speed_sigma = " << fmt(b.speed_sigma) << "\n"
     << "theta_p = " << fmt(b.theta_p) << "\n"
     << "theta_t = " << fmt(b.theta_t) << "\n"
     << "mean_atoms = " << fmt(b.mean_atoms) << "\n"
     << "y_extent = " << fmt(b.y_extent) << "\n"
     << "threshold = " << fmt(b.threshold) << "\n"
     << "waist = " << fmt(c.waist) << "\n"
     << "wavelength = " << fmt(c.wavelength) << "\n"
     << "n_traj = " << c.n_traj << "\n"
     << "start_points = " << c.start_points << "\n";
  return os.str();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  RunConfig keyed = config;
  keyed.output.clear();
  for (unsigned char ch : echo_config(keyed)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void run(const RunConfig& config, const EnsembleOptions& beam_options) {
  namespace fs = std::filesystem;
  const fs::path out(config.output);
  fs::create_directories(out);
  const std::string hash = config_hash(config);
  write_file(out / "config.txt", echo_config(config));

  MetricsWriter m;
  m.add("mode", std::string(to_string(config.mode)));
  m.add("config_hash", hash);
  m.add("gamma_hz", config.params.gamma_hz);

  const CompositeBasis basis = config.basis();
  const PropagationOptions prop{config.max_step, config.check_stride, true};
  std::vector<std::string> comments = {"config_hash: " + hash,
                                       "mode: " + std::string(to_string(config.mode)),
                                       "gamma_hz: " + fmt(config.params.gamma_hz)};

  if (config.mode == RunMode::Steady) {
    const Generator gen(config.params, basis);
    const DensityMatrix ss = steady_state(gen);
    const Matrix atom = atomic_marginal(ss.matrix(), basis);
    for (std::size_t k = 0; k < basis.levels().size(); ++k) {
      m.add("population_" + std::string(label(basis.levels()[k])),
            atom(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real());
    }
    m.add("mean_photons_driven", mean_photon(ss, Mode::Driven));
    m.add("mean_photons_undriven", mean_photon(ss, Mode::Undriven));
    const auto report = check_physical(ss.matrix());
    m.add_bool("physical", report.ok());
    m.add("hermiticity_error", report.hermiticity_error);
    m.add("trace_error", report.trace_error);
    m.add("min_eigenvalue", report.min_eigenvalue);
    write_file(out / "metrics.txt", m.text());
    return;
  }

  const auto tau = uniform_grid(config.tau_max, config.tau_points);
  const auto window = config.fringe_window();

  if (config.mode == RunMode::Beam) {
    for (const auto& w : config.beam.warnings()) m.add("warning", w);
    EnsembleOptions opts = beam_options;
    opts.transit.start_points = config.start_points;
    opts.transit.propagation.max_step = config.max_step;
    const auto result = ensemble_g2(config.beam, config.geometry(), config.params, basis,
                                    config.n_traj, tau, config.seed, opts);
    const auto& trace = result.trace;
    comments.push_back("normalization: " + std::string(to_string(trace.normalization)));
    comments.push_back("seed: " + std::to_string(config.seed));
    write_trace(out / "trace.csv", trace, false, comments);
    write_trace(out / "trace_stderr.csv", trace, true, comments);
    const auto peak = std::max_element(trace.values.begin(), trace.values.end());
    const auto ipeak = static_cast<std::size_t>(peak - trace.values.begin());
    m.add("seed", std::to_string(config.seed));
    m.add("n_traj", std::to_string(result.trajectories));
    m.add("normalization", std::string(to_string(trace.normalization)));
    m.add("peak_g2", *peak);
    m.add("peak_tau", trace.tau[ipeak]);
    m.add("baseline_g2", trace.values.back());
    m.add("baseline_stderr", trace.stderr_values.back());
    m.add("mean_intensity", result.mean_intensity);
    m.add("mean_transit_time", result.mean_transit_time);
    add_fringes(m, trace, window);
    add_stats(m, result.stats);
    write_file(out / "metrics.txt", m.text());
    return;
  }

  ScheduleOptions opts;
  opts.reference = config.reference;
  opts.t_prep = config.t_prep;
  opts.outcomes_known = config.outcomes_known;
  opts.propagation = prop;
  const Schedule schedule = config.mode == RunMode::G2 ? Schedule{} : config.schedule;
  const auto result = run_conditional_schedule(config.params, basis, schedule, tau, opts);
  const auto& trace = result.trace;
  comments.push_back("normalization: " + std::string(to_string(trace.normalization)));
  comments.push_back("reference: " + std::string(to_string(config.reference)));
  write_trace(out / "trace.csv", trace, false, comments);

  m.add("normalization", std::string(to_string(trace.normalization)));
  m.add("reference", std::string(to_string(config.reference)));
  m.add("g2_0", trace.values.front());
  add_fringes(m, trace, window);
  if (config.mode != RunMode::G2) {
    m.add("survival_weight", result.survival_weight);
    m.add("qubit_survival_weight", result.qubit_survival_weight);
    m.add("branches", std::to_string(result.branches.size()));
    for (const auto& br : result.branches) {
      std::string rec;
      for (Outcome o : br.record) rec += o == Outcome::Yes ? 'Y' : 'N';
      m.add("branch_" + (rec.empty() ? std::string("none") : rec), br.probability);
    }
  }
  if (config.mode == RunMode::Qec) {
    double p = 0.0;
    QubitState state{std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0};
    Schedule baseline;
    bool have_p = false;
    for (const auto& e : config.schedule.events) {
      if (e.kind == EventKind::WeakIonization && !have_p) {
        p = e.value;
        have_p = true;
      }
      if (e.kind == EventKind::Prepare) state = e.target;
      if (e.kind == EventKind::Prepare || e.kind == EventKind::DriveSet) {
        baseline.events.push_back(e);
      }
    }
    const auto qec = qec_protocol(state, p, config.outcomes_known);
    m.add("qec_p", p);
    m.add("recovery_probability", qec.recovery_probability);
    m.add("recovered_fidelity", qec.recovered_fidelity);
    m.add("second_no_probability", qec.second_no_probability);
    const auto ref = run_conditional_schedule(config.params, basis, baseline, tau, opts);
    const auto fm = fringe_metrics(ref.trace, window.first, window.second);
    m.add("reference_visibility", fm.visibility);
  }
  add_stats(m, trace.meta.stats);
  write_file(out / "metrics.txt", m.text());
}

}  // namespace cqed
