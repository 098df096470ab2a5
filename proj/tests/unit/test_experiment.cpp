#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dualbound/experiment.hpp"

using namespace dualbound;
using namespace dualbound::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dualbound_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmall = R"(
schema: 1
seed: 5
circuit:
  family: brickwall_1d
  n: 6
  depths: {from: 1, to: 5, step: 2}
  theta: [0.1]
noise:
  p: [0.05, 0.1]
methods: [trace_dual, tebd_error, info_only, purity_only, exact]
ansatz: [2, 8]
record_timing: false
output: OUT
)";

std::string with_output(const char* text, const std::string& out) {
  std::string s = text;
  s.replace(s.find("OUT"), 3, out);
  return s;
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(Config, ParsesRangesAndDefaults) {
  const auto c = parse_config(with_output(kSmall, "x.csv"));
  EXPECT_EQ(c.depths, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(c.methods.front(), BoundMethod::trace_purity_dual);
  EXPECT_EQ(c.noise, NoiseKind::depolarizing);
  EXPECT_EQ(c.n_sites(), 6);
  EXPECT_FALSE(c.record_timing);
  EXPECT_EQ(grid_points(c).size(), 6u);
}

TEST(Config, RoundTrip) {
  const auto c = parse_config(with_output(kSmall, "x.csv"));
  const auto again = parse_config(serialize_config(c));
  EXPECT_EQ(c, again);
  EXPECT_EQ(serialize_config(c), serialize_config(again));
  EXPECT_EQ(config_digest(c), config_digest(again));
}

TEST(Config, ErrorsCarryFieldPaths) {
  const std::string base = with_output(kSmall, "x.csv");
  auto edit = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  EXPECT_EQ(field_of(edit("methods: [trace_dual, tebd_error, info_only, purity_only, exact]", "methods: []")), "methods");
  EXPECT_EQ(field_of(edit("seed: 5\n", "")), "seed");
  EXPECT_EQ(field_of(edit("p: [0.05, 0.1]", "p: [0.05, 1.5]")), "noise.p[1]");
  EXPECT_EQ(field_of(edit("p: [0.05, 0.1]", "p: [0.05, abc]")), "noise.p[1]");
  EXPECT_EQ(field_of(edit("family: brickwall_1d", "family: ladder")), "circuit.family");
  EXPECT_EQ(field_of(edit("schema: 1", "schema: 2")), "schema");
  EXPECT_EQ(field_of(edit("tebd_error", "fermion_dual")), "methods[1]");
  EXPECT_EQ(field_of(edit("tebd_error", "magic")), "methods[1]");
  EXPECT_EQ(field_of(edit("ansatz: [2, 8]", "ansatz: []")), "ansatz");
  EXPECT_EQ(field_of(edit("step: 2", "step: 0")), "circuit.depths.step");
  EXPECT_EQ(field_of(edit("output: x.csv", "oracle_check: true\noutput: x.csv")), "<none>");
  EXPECT_EQ(field_of(edit("n: 6", "n: 14") + "oracle_check: true\n"), "oracle_check");
  EXPECT_EQ(field_of(edit("step: 2", "step: 1")), "circuit.depths[1]");
  EXPECT_EQ(field_of("[1, 2]"), "<document>");
}

TEST(Config, FermionMethodsNeedFermionFamily) {
  const std::string text = R"(
schema: 1
seed: 1
circuit: {family: ssh_1d, n: 8, depths: [4]}
noise: {p: 0.05}
methods: [fermion_dual, trace_dual]
ansatz: [0, 1]
output: f.csv
)";
  EXPECT_EQ(field_of(text), "methods[1]");
}

TEST(Run, DeterministicAndOrderedAcrossWorkers) {
  const fs::path dir = scratch("determinism");
  auto c = parse_config(with_output(kSmall, (dir / "a.csv").string()));
  const auto s1 = run_experiment(c, 1);
  const std::string a = slurp(s1.csv_path);
  c.output = (dir / "b.csv").string();
  run_experiment(c, 1);
  c.output = (dir / "c.csv").string();
  run_experiment(c, 3);
  EXPECT_EQ(a, slurp((dir / "b.csv").string()));
  EXPECT_EQ(a, slurp((dir / "c.csv").string()));
  // 6 points x (2 trace + 2 tebd + info + purity + exact)
  EXPECT_EQ(s1.rows, 42);
  EXPECT_EQ(s1.failed_rows, 0);
}

TEST(Run, RowsAreSelfConsistentAndSound) {
  const fs::path dir = scratch("consistency");
  const auto c = parse_config(with_output(kSmall, (dir / "r.csv").string()));
  run_experiment(c, 1);
  const auto rows = read_csv(c.output);
  std::map<std::tuple<int, double, long>, std::map<BoundMethod, double>> by_point;
  std::map<std::pair<int, double>, double> exact;
  for (const auto& r : rows) {
    EXPECT_NEAR(r.report.bound, r.report.boundary_term - r.report.penalty_sum,
                1e-12 * std::max(1.0, std::abs(r.report.bound)));
    by_point[{r.report.depth, r.p, r.report.ansatz}][r.report.method] = r.report.bound;
    if (r.report.method == BoundMethod::exact) exact[{r.report.depth, r.p}] = r.report.bound;
  }
  for (const auto& r : rows) EXPECT_LE(r.report.bound, exact.at({r.report.depth, r.p}) + 1e-8);
  for (const auto& [key, m] : by_point)
    if (m.count(BoundMethod::tebd_error)) EXPECT_LE(m.at(BoundMethod::tebd_error), m.at(BoundMethod::trace_purity_dual));
}

TEST(Run, JsonlHasOneRecordPerRow) {
  const fs::path dir = scratch("jsonl");
  const auto c = parse_config(with_output(kSmall, (dir / "j.csv").string()));
  const auto s = run_experiment(c, 2);
  std::ifstream in(s.jsonl_path);
  int lines = 0;
  for (std::string l; std::getline(in, l);) {
    ++lines;
    EXPECT_NE(l.find("\"config_digest\""), std::string::npos);
  }
  EXPECT_EQ(lines, s.rows);
}

TEST(Run, FailedRowsAreMarkedAndTheRunContinues) {
  const fs::path dir = scratch("failure");
  auto c = parse_config(with_output(kSmall, (dir / "f.csv").string()));
  c.n = 14;  // the dense exact energy is out of reach at 14 qubits
  c.methods = {BoundMethod::tebd_error, BoundMethod::exact};
  c.ansatz = {2};
  c.depths = {3};
  const auto s = run_experiment(c, 1);
  EXPECT_EQ(s.rows, 4);
  EXPECT_EQ(s.failed_rows, 2);
  const auto rows = read_csv(c.output);
  EXPECT_FALSE(rows[0].failed);
  EXPECT_TRUE(rows[1].failed);
  EXPECT_TRUE(std::isnan(rows[1].report.bound));
}

TEST(Run, FermionRangesNonDecreasing) {
  const fs::path dir = scratch("fermion");
  const std::string text = R"(
schema: 1
seed: 3
circuit: {family: ssh_1d, n: 12, depths: [4, 8]}
noise: {p: 0.05}
methods: [fermion_dual, exact]
ansatz: [2, 0, 1]
record_timing: false
oracle_check: true
output: )" + (dir / "f.csv").string() + "\n";
  const auto c = parse_config(text);
  const auto s = run_experiment(c, 1);
  EXPECT_EQ(s.failed_rows, 0);
  const auto rows = read_csv(c.output);
  ASSERT_EQ(rows.size(), 8u);
  for (int base : {0, 4}) {
    const double r2 = rows[static_cast<size_t>(base)].report.bound, r0 = rows[static_cast<size_t>(base + 1)].report.bound,
                 r1 = rows[static_cast<size_t>(base + 2)].report.bound, ex = rows[static_cast<size_t>(base + 3)].report.bound;
    EXPECT_LE(r0, r1 + 1e-12);
    EXPECT_LE(r1, r2 + 1e-12);
    EXPECT_LE(r2, ex + 1e-9);
  }
}

TEST(Run, WorkerCountFromEnvironment) {
  ::setenv("DUALBOUND_WORKERS", "4", 1);
  EXPECT_EQ(worker_count_from_env(), 4);
  ::setenv("DUALBOUND_WORKERS", "zero", 1);
  EXPECT_THROW(worker_count_from_env(), ConfigError);
  ::unsetenv("DUALBOUND_WORKERS");
  EXPECT_EQ(worker_count_from_env(), 1);
}

TEST(Plot, SingleRowGivesSinglePointSeries) {
  const fs::path dir = scratch("plot_single");
  const std::string csv = (dir / "one.csv").string();
  {
    std::ofstream f(csv);
    f << csv_header() << "\ntebd_error,4,3,8,0.050000000000000003,0.10000000000000001,9,-2.5,-2,0.5,0\n";
  }
  const auto files = emit_plotdata(csv, PlotTemplate::bound_vs_depth, (dir / "out").string());
  ASSERT_EQ(files.series.size(), 1u);
  EXPECT_EQ(slurp(files.series[0]), "3 -2.5\n");
  EXPECT_TRUE(fs::exists(files.caption));
}

TEST(Plot, HeatmapShapeAndRoundTrip) {
  const fs::path dir = scratch("plot_heatmap");
  const std::string text = R"(
schema: 1
seed: 4
circuit: {family: brickwall_1d, n: 4, depths: [3], theta: [0.0, 0.1, 0.2]}
noise: {p: [0.01, 0.1]}
methods: [trace_dual]
ansatz: [4]
record_timing: false
output: )" + (dir / "h.csv").string() + "\n";
  const auto c = parse_config(text);
  run_experiment(c, 1);
  const auto files = emit_plotdata(c.output, PlotTemplate::bound_vs_p_theta_heatmap, (dir / "out").string());
  ASSERT_EQ(files.series.size(), 3u);
  std::ifstream g(files.series[2]);
  std::vector<std::vector<double>> grid;
  for (std::string line; std::getline(g, line);) {
    std::stringstream ss(line);
    std::vector<double> row;
    for (double v; ss >> v;) row.push_back(v);
    grid.push_back(row);
  }
  ASSERT_EQ(grid.size(), 2u);
  ASSERT_EQ(grid[0].size(), 3u);
  const auto rows = read_csv(c.output);
  for (const auto& r : rows) {
    const size_t i = r.p < 0.05 ? 0 : 1;
    const size_t j = static_cast<size_t>(std::lround(r.theta * 10));
    EXPECT_EQ(grid[i][j], r.report.bound);
  }
}

TEST(Plot, TrivialPointsAreFlaggedNotClipped) {
  const fs::path dir = scratch("plot_trivial");
  const std::string csv = (dir / "t.csv").string();
  {
    std::ofstream f(csv);
    f << csv_header() << "\n"
      << "trace_purity_dual,4,3,8,0.1,0,1,-5,-4,1,0\n"
      << "trace_purity_dual,4,5,8,0.1,0,1,-1,-0.5,0.5,0\n";
  }
  const auto files = emit_plotdata(csv, PlotTemplate::bound_vs_depth, (dir / "out").string(), -4.0);
  EXPECT_EQ(slurp(files.series[0]), "3 -5 1\n5 -1 0\n");
  EXPECT_NE(slurp(files.caption).find("\"trivial_points\": 1"), std::string::npos);
}

TEST(Plot, SchemaMismatchIsRejected) {
  const fs::path dir = scratch("plot_schema");
  const std::string csv = (dir / "bad.csv").string();
  {
    std::ofstream f(csv);
    f << "method,N,bound\nexact,4,1\n";
  }
  EXPECT_THROW(emit_plotdata(csv, PlotTemplate::bound_vs_depth, (dir / "out").string()), DomainError);
  EXPECT_THROW(parse_template("scatter"), DomainError);
}
