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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqed/cli.hpp"

using namespace cqed;
namespace fs = std::filesystem;

namespace {

const char* kFig2 = R"(# undriven-mode correlation
[run]
mode = g2
tau_max = 40
tau_points = 4096

[system]
kappa = 0.5
g = 0.25
delta = 0.5
drive = 0.015625
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cqed-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<ConfigDiagnostic> diagnostics_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.diagnostics();
  }
  return {};
}

}  // namespace

TEST_CASE("reference configuration is accepted") {
  const auto c = parse_config(kFig2);
  CHECK(c.mode == RunMode::G2);
  CHECK(c.params.kappa == 0.5);
  CHECK(c.params.drive == 1.0 / 64.0);
  CHECK(c.params.c0 == SystemParams{}.c0);
  CHECK(c.tau_points == 4096);
}

TEST_CASE("misspelled key is rejected with its line number") {
  std::string text = kFig2;
  text.replace(text.find("kappa"), 5, "kapa");
  const auto d = diagnostics_of(text);
  REQUIRE(d.size() == 1);
  CHECK(d[0].line == 8);
  CHECK(d[0].message.find("kapa") != std::string::npos);
}

TEST_CASE("feedback mode needs at least two events") {
  const auto d = diagnostics_of(
      "[run]\nmode = feedback\ntau_max = 10\ntau_points = 100\n[basis]\ncontrol_levels = true\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].message.find("at least 2") != std::string::npos);
}

TEST_CASE("all problems are reported at once") {
  const auto d = diagnostics_of(
      "[run]\nmode = beam\ntau_max = -1\ntau_points = x\nfoo = 1\n[nowhere]\n"
      "[system]\nkappa = -2\n[schedule]\nevent = \"1 shelve\"\n");
  CHECK(d.size() >= 6);
  auto has = [&](int line) {
    return std::any_of(d.begin(), d.end(), [&](const auto& x) { return x.line == line; });
  };
  CHECK(has(4));   // unparsable number
  CHECK(has(5));   // unknown key
  CHECK(has(6));   // unknown section
  CHECK(has(10));  // event outside feedback/qec
}

TEST_CASE("malformed lines and duplicates") {
  auto d = diagnostics_of("mode = g2\n");
  CHECK(d.front().line == 1);
  d = diagnostics_of("[run]\nmode = g2\nmode = g2\ntau_max = 1\ntau_points = 10\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].line == 3);
  d = diagnostics_of("[run]\nmode g2\n");
  CHECK(d.front().line == 2);
  d = diagnostics_of(
      "[run]\nmode = qec\ntau_max = 1\ntau_points = 10\n[basis]\ncontrol_levels = true\n"
      "[schedule]\nevent = \"0 ionize 0.3 extra\"\nevent = \"0 teleport\"\n");
  CHECK(d.size() == 3);  // two bad events and no ionize event left
}

TEST_CASE("schedule events are checked against the basis") {
  const auto d = diagnostics_of(
      "[run]\nmode = feedback\ntau_max = 10\ntau_points = 100\n[schedule]\n"
      "event = \"1 shelve\"\nevent = \"2 shelve\"\n");
  REQUIRE(d.size() == 2);
  CHECK(d[0].line == 6);
  CHECK(d[0].message.find("shelf") != std::string::npos);
}

TEST_CASE("echoed configuration parses back to the same config") {
  const char* texts[] = {
      kFig2,
      "[run]\nmode = qec\ntau_max = 30\ntau_points = 64\nfringe_lo = 6.1\nseed = 7\n"
      "[basis]\ncontrol_levels = true\n[schedule]\nreference = ground\noutcomes_known = true\n"
      "event = \"0 ionize 0.3\"\nevent = \"0 swap\"\nevent = \"0.5 prepare 0.6 0.8\"\n",
      "[run]\nmode = beam\ntau_max = 800\ntau_points = 8001\n[beam]\nn_traj = 3\n"
      "mean_atoms = 0.15\nwaist = 5e-05\n[system]\ngamma_hz = 6e6\nxi_b = 0.01\n",
      "[run]\nmode = steady\n"};
  for (const char* t : texts) {
    const auto c = parse_config(t);
    const auto again = parse_config(echo_config(c));
    CHECK(again == c);
    CHECK(echo_config(again) == echo_config(c));
  }
}

TEST_CASE("config hash ignores the output path only") {
  auto a = parse_config(kFig2);
  auto b = a;
  b.output = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.params.kappa = 0.4;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("g2 run writes deterministic files inside the output directory") {
  auto c = parse_config(
      "[run]\nmode = g2\ntau_max = 8\ntau_points = 81\n[basis]\nn1_max = 1\nn2_max = 1\n"
      "[system]\ndrive = 0.05\n");
  const auto dir = scratch("g2");
  c.output = (dir / "a").string();
  run(c);
  c.output = (dir / "b").string();
  run(c);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "a")) names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"config.txt", "metrics.txt", "trace.csv"});
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "metrics.txt") == slurp(dir / "b" / "metrics.txt"));
  auto without_output = [](std::string text) {
    const auto at = text.find("output = ");
    return text.erase(at, text.find('\n', at) - at);
  };
  CHECK(without_output(slurp(dir / "a" / "config.txt")) ==
        without_output(slurp(dir / "b" / "config.txt")));
  const auto csv = slurp(dir / "a" / "trace.csv");
  CHECK(csv.find("# config_hash: " + config_hash(c)) == 0);
  CHECK(csv.find("\ntau,gvalue\n0,") != std::string::npos);
  const auto metrics = slurp(dir / "a" / "metrics.txt");
  for (const char* key : {"visibility: ", "predictability: ", "beat_frequency: ", "minima: ",
                          "p2_plus_v2: ", "physical: true"}) {
    CHECK(metrics.find(key) != std::string::npos);
  }
  CHECK(parse_config(slurp(dir / "a" / "config.txt")).params == c.params);
  fs::remove_all(dir);
}

TEST_CASE("qec run reports the recovery probability") {
  auto c = parse_config(
      "[run]\nmode = qec\ntau_max = 4\ntau_points = 41\n[basis]\nn1_max = 1\nn2_max = 1\n"
      "control_levels = true\n[system]\ndrive = 0.05\n[schedule]\nreference = ground\n"
      "event = \"0 ionize 0.3\"\nevent = \"0 swap\"\nevent = \"0 ionize 0.3\"\n"
      "event = \"0 swap\"\n");
  const auto dir = scratch("qec");
  c.output = dir.string();
  run(c);
  const auto metrics = slurp(dir / "metrics.txt");
  CHECK(metrics.find("recovery_probability: 0.7000000000000") != std::string::npos);
  CHECK(metrics.find("recovered_fidelity: 1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("steady run reports populations") {
  auto c = parse_config("[run]\nmode = steady\n[basis]\nn1_max = 1\nn2_max = 1\n");
  const auto dir = scratch("steady");
  c.output = dir.string();
  run(c);
  const auto metrics = slurp(dir / "metrics.txt");
  CHECK(metrics.find("population_b0: ") != std::string::npos);
  CHECK(metrics.find("physical: true") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "trace.csv"));
  fs::remove_all(dir);
}

TEST_CASE("steady run without drive reports the degeneracy") {
  auto c = parse_config("[run]\nmode = steady\n[basis]\nn1_max = 1\nn2_max = 1\n[system]\ndrive = 0\n");
  c.output = scratch("degenerate").string();
  CHECK_THROWS_AS(run(c), DegenerateSteadyState);
  fs::remove_all(c.output);
}

TEST_CASE("beam run is byte-identical across reruns") {
  auto c = parse_config(
      "[run]\nmode = beam\ntau_max = 40\ntau_points = 401\nseed = 3\n"
      "[basis]\nn1_max = 1\nn2_max = 1\n[system]\ndrive = 0.0625\n"
      "[beam]\nn_traj = 2\nstart_points = 6\n");
  const auto dir = scratch("beam");
  c.output = (dir / "a").string();
  run(c);
  c.output = (dir / "b").string();
  EnsembleOptions two;
  two.workers = 2;
  run(c, two);
  for (const char* n : {"trace.csv", "trace_stderr.csv", "metrics.txt"}) {
    CHECK(slurp(dir / "a" / n) == slurp(dir / "b" / n));
  }
  CHECK(slurp(dir / "a" / "trace_stderr.csv").find("tau,gvalue,stderr\n") != std::string::npos);
  fs::remove_all(dir);
}
