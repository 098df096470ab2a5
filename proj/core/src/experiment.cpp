#include "dualbound/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include "dualbound/circuits.hpp"
#include "dualbound/dual_info.hpp"
#include "dualbound/dual_trace.hpp"
#include "dualbound/fermion.hpp"
#include "dualbound/noise.hpp"
#include "dualbound/oracle.hpp"
#include "dualbound/rng.hpp"

namespace dualbound::experiment {

namespace {

const std::vector<std::pair<Family, std::string>> kFamilies = {
    {Family::brickwall_1d, "brickwall_1d"}, {Family::brickwall_2d, "brickwall_2d"},
    {Family::clifford, "clifford"},         {Family::single_qubit, "single_qubit"},
    {Family::ssh_1d, "ssh_1d"},             {Family::ssh_2d, "ssh_2d"},
};

bool is_fermionic(Family f) { return f == Family::ssh_1d || f == Family::ssh_2d; }
bool is_2d(Family f) { return f == Family::brickwall_2d || f == Family::ssh_2d; }

bool uses_ansatz(BoundMethod m) {
  return m == BoundMethod::trace_purity_dual || m == BoundMethod::tebd_error || m == BoundMethod::nonunital_dual ||
         m == BoundMethod::fermion_dual;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- YAML reading with field paths ----

template <typename T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError(path, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "value '" + node.Scalar() + "' has the wrong type");
  }
}

template <typename T>
T required(const YAML::Node& parent, const std::string& key, const std::string& path) {
  const YAML::Node n = parent[key];
  if (!n) throw ConfigError(path + key, "required field is missing");
  return scalar<T>(n, path + key);
}

template <typename T>
T optional_field(const YAML::Node& parent, const std::string& key, const std::string& path, T fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  return scalar<T>(n, path + key);
}

template <typename T>
std::vector<T> list(const YAML::Node& node, const std::string& path) {
  std::vector<T> out;
  if (node.IsScalar()) {
    out.push_back(scalar<T>(node, path));
    return out;
  }
  if (!node.IsSequence()) throw ConfigError(path, "expected a list");
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<T>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// A list, or a range map {from, to, step}.
std::vector<int> int_grid(const YAML::Node& node, const std::string& path) {
  if (node.IsMap()) {
    const int from = required<int>(node, "from", path + ".");
    const int to = required<int>(node, "to", path + ".");
    const int step = optional_field<int>(node, "step", path + ".", 1);
    if (step < 1) throw ConfigError(path + ".step", "step must be positive");
    if (to < from) throw ConfigError(path + ".to", "range end lies below its start");
    std::vector<int> out;
    for (int v = from; v <= to; v += step) out.push_back(v);
    return out;
  }
  return list<int>(node, path);
}

const YAML::Node section(const YAML::Node& root, const std::string& key) {
  const YAML::Node n = root[key];
  if (!n) throw ConfigError(key, "required section is missing");
  if (!n.IsMap()) throw ConfigError(key, "expected a map");
  return n;
}

// ---- circuit construction ----

Mat2 replacement_tau(double eps) {
  Mat2 tau;
  tau << 0.5 + eps, 0.0, 0.0, 0.5 - eps;
  return tau;
}

circuits::GeneratedCircuit qubit_circuit(const ExperimentConfig& c, const GridPoint& g) {
  switch (c.family) {
    case Family::brickwall_1d:
      if (c.noise == NoiseKind::replacement)
        return circuits::brickwall_1d(c.n, g.depth, g.theta, noise::Replacement{g.p, replacement_tau(c.epsilon)},
                                      g.seed, circuits::TwoSiteAxis::zz);
      return circuits::brickwall_1d(c.n, g.depth, g.theta, g.p, g.seed);
    case Family::brickwall_2d:
      return circuits::brickwall_2d_snake(c.lx, c.ly, g.depth, g.theta, g.p, g.seed);
    case Family::clifford:
      return circuits::clifford_entangle_unentangle(c.n, g.depth, g.p, g.seed);
    case Family::single_qubit:
      return circuits::single_qubit_rotation(g.theta, g.p, c.delta);
    default:
      throw NotApplicableError("not a qubit circuit family");
  }
}

fermion::GeneratedFermionCircuit fermion_circuit(const ExperimentConfig& c, const GridPoint& g) {
  if (c.family == Family::ssh_1d) return fermion::ssh_circuit_1d(c.n, g.depth, g.p, g.seed);
  return fermion::ssh_circuit_2d(c.lx, c.ly, g.depth, g.p, g.seed);
}

double qubit_exact_energy(const ExperimentConfig& c, const circuits::GeneratedCircuit& gen) {
  if (c.family == Family::clifford) return oracle::stabilizer_energy(gen.circuit, gen.target);
  if (gen.circuit.n_sites > 12) throw NotApplicableError("exact energy needs n <= 12 or a Clifford circuit");
  const MatC h = oracle::dense_hamiltonian(gen.target, gen.circuit.n_sites);
  return oracle::dense_simulate(gen.circuit, &h, {false, std::nullopt}).energy;
}

VecR expanded_spectrum(const info::Spectrum& s, int n) {
  if (n > 20) throw NotApplicableError("purity-only bound needs the full spectrum (n <= 20)");
  std::vector<double> out;
  for (Index i = 0; i < s.energies.size(); ++i) {
    const auto m = static_cast<long>(std::llround(std::exp(s.log_multiplicities(i))));
    out.insert(out.end(), static_cast<size_t>(m), s.energies(i));
  }
  return Eigen::Map<VecR>(out.data(), static_cast<Index>(out.size()));
}

BoundReport exact_report(double energy, int n, int d) {
  BoundReport r;
  r.method = BoundMethod::exact;
  r.n_sites = n;
  r.depth = d;
  r.boundary_term = energy;
  finalize(r);
  return r;
}

std::vector<ResultRow> evaluate_qubit(const ExperimentConfig& c, const GridPoint& g) {
  const auto gen = qubit_circuit(c, g);
  const int n = gen.circuit.n_sites;
  std::vector<ResultRow> rows;
  std::map<long, dual::DualVariables> tebd;
  auto duals_at = [&](long cap) -> const dual::DualVariables& {
    auto it = tebd.find(cap);
    if (it == tebd.end()) it = tebd.emplace(cap, dual::heisenberg_tebd(gen.circuit, gen.target.mpo, cap)).first;
    return it->second;
  };
  std::optional<double> exact;
  auto exact_energy = [&]() {
    if (!exact) exact = qubit_exact_energy(c, gen);
    return *exact;
  };

  for (BoundMethod m : c.methods) {
    const std::vector<long> caps = uses_ansatz(m) ? c.ansatz : std::vector<long>{0};
    for (long cap : caps) {
      ResultRow row;
      row.p = g.p;
      row.theta = g.theta;
      const auto start = std::chrono::steady_clock::now();
      try {
        switch (m) {
          case BoundMethod::trace_purity_dual: {
            const auto sched = noise::purity_schedule_depolarizing(n, g.p, g.depth);
            if (c.refine_iters > 0) {
              dual::RefineOptions opt;
              opt.max_iters = c.refine_iters;
              row.report = dual::refine_dual(duals_at(cap), gen.circuit, gen.target.mpo, sched, opt).report;
            } else {
              row.report = dual::dual_value_trace(duals_at(cap), gen.circuit, gen.target.mpo, sched);
            }
            break;
          }
          case BoundMethod::tebd_error:
            row.report = dual::tebd_error_bound(duals_at(cap), gen.circuit, gen.target.mpo);
            break;
          case BoundMethod::nonunital_dual: {
            const Mat2 tau = replacement_tau(c.epsilon);
            const auto sched = noise::relative_entropy_schedule(gen.circuit, tau, g.p,
                                                                noise::zero_state_relative_entropy(n, tau));
            row.report = dual::dual_value_nonunital(duals_at(cap), gen.circuit, gen.target.mpo, sched.distance, tau);
            break;
          }
          case BoundMethod::info_only:
            row.report = info::info_bound(info::commuting_spectrum(gen.target, n), n, g.p, g.depth,
                                          c.lambda_c > 0 ? c.lambda_c : info::kDefaultLambdaC)
                             .report;
            break;
          case BoundMethod::purity_only: {
            const double purity = noise::purity_schedule_depolarizing(n, g.p, g.depth).values.back();
            row.report.method = BoundMethod::purity_only;
            row.report.n_sites = n;
            row.report.depth = g.depth;
            row.report.boundary_term =
                noise::purity_only_bound(expanded_spectrum(info::commuting_spectrum(gen.target, n), n), purity);
            finalize(row.report);
            break;
          }
          case BoundMethod::exact:
            row.report = exact_report(exact_energy(), n, g.depth);
            break;
          default:
            throw NotApplicableError("method " + method_name(m) + " does not apply to qubit circuits");
        }
        row.report.ansatz = cap;
        check_consistent(row.report);
        if (c.oracle_check && m != BoundMethod::exact && row.report.bound > exact_energy() + 1e-8)
          throw NumericalError("oracle check failed: bound " + fmt(row.report.bound) + " exceeds exact energy " +
                               fmt(exact_energy()));
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        row.report.method = m;
        row.report.ansatz = cap;
      }
      row.report.n_sites = n;
      row.report.depth = g.depth;
      row.report.seed = g.seed;
      row.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResultRow> evaluate_fermion(const ExperimentConfig& c, const GridPoint& g) {
  const auto gen = fermion_circuit(c, g);
  const int n = gen.circuit.n_modes();
  const double exact = fermion::output_energy(gen.circuit, gen.target);
  std::vector<ResultRow> rows;
  for (BoundMethod m : c.methods) {
    if (m == BoundMethod::exact) {
      ResultRow row{exact_report(exact, n, g.depth), g.p, g.theta, false, {}};
      row.report.seed = g.seed;
      rows.push_back(std::move(row));
      continue;
    }
    // fermion_dual: ranges solved in increasing order, each seeded by the
    // previous optimum, then reported in config order.
    const auto sched = noise::info_schedule_depolarizing(n, g.p, g.depth);
    fermion::FermionOptimizerOptions opt;
    opt.max_iters = c.fermion_iters;
    std::vector<long> order = c.ansatz;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    std::map<long, ResultRow> by_r;
    std::optional<fermion::FermionDualResult> prev;
    for (long r : order) {
      ResultRow row;
      row.p = g.p;
      row.theta = g.theta;
      try {
        auto res = fermion::optimize_fermionic_dual(gen.circuit, gen.target, static_cast<int>(r), sched, opt,
                                                    prev ? &*prev : nullptr);
        row.report = res.report;
        check_consistent(row.report);
        if (c.oracle_check && row.report.bound > exact + 1e-8)
          throw NumericalError("oracle check failed: bound " + fmt(row.report.bound) + " exceeds exact energy " +
                               fmt(exact));
        prev = std::move(res);
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        row.report.method = m;
      }
      row.report.ansatz = r;
      row.report.n_sites = n;
      row.report.depth = g.depth;
      row.report.seed = g.seed;
      by_r.emplace(r, std::move(row));
    }
    for (long r : c.ansatz) rows.push_back(by_r.at(r));
  }
  return rows;
}

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& message)
    : DomainError(field + ": " + message), field_(std::move(field)) {}

std::string family_name(Family f) {
  for (const auto& [k, v] : kFamilies)
    if (k == f) return v;
  return "unknown";
}

std::string noise_kind_name(NoiseKind k) { return k == NoiseKind::depolarizing ? "depolarizing" : "replacement"; }

int ExperimentConfig::n_sites() const {
  if (family == Family::single_qubit) return 1;
  return is_2d(family) ? lx * ly : n;
}

void validate(const ExperimentConfig& c) {
  if (c.schema != 1) throw ConfigError("schema", "unsupported schema version " + std::to_string(c.schema));
  if (is_2d(c.family)) {
    if (c.lx < 2) throw ConfigError("circuit.lx", "must be at least 2");
    if (c.ly < 2) throw ConfigError("circuit.ly", "must be at least 2");
  } else if (c.family != Family::single_qubit) {
    if (c.n < 2) throw ConfigError("circuit.n", "must be at least 2");
  }
  if (c.depths.empty()) throw ConfigError("circuit.depths", "grid is empty");
  for (size_t i = 0; i < c.depths.size(); ++i) {
    const std::string path = "circuit.depths[" + std::to_string(i) + "]";
    const int d = c.depths[i];
    if (d < 1) throw ConfigError(path, "depth must be at least 1");
    if (c.family == Family::brickwall_1d && d % 2 == 0) throw ConfigError(path, "brickwall_1d needs an odd depth");
    if ((c.family == Family::brickwall_2d || c.family == Family::clifford) && d % 2 != 0)
      throw ConfigError(path, family_name(c.family) + " needs an even depth");
    if (c.family == Family::single_qubit && d != 1) throw ConfigError(path, "single_qubit has depth 1");
  }
  if (c.thetas.empty()) throw ConfigError("circuit.theta", "grid is empty");
  for (size_t i = 0; i < c.thetas.size(); ++i)
    if (!std::isfinite(c.thetas[i])) throw ConfigError("circuit.theta[" + std::to_string(i) + "]", "must be finite");
  if (c.ps.empty()) throw ConfigError("noise.p", "grid is empty");
  for (size_t i = 0; i < c.ps.size(); ++i)
    if (!(c.ps[i] >= 0.0 && c.ps[i] <= 1.0)) throw ConfigError("noise.p[" + std::to_string(i) + "]", "must lie in [0, 1]");
  if (c.noise == NoiseKind::replacement) {
    if (!(std::abs(c.epsilon) < 0.5)) throw ConfigError("noise.epsilon", "must satisfy |epsilon| < 1/2");
    if (c.family != Family::brickwall_1d) throw ConfigError("noise.model", "replacement noise needs brickwall_1d");
  }
  if (is_fermionic(c.family) && c.noise != NoiseKind::depolarizing)
    throw ConfigError("noise.model", "fermionic circuits support depolarizing noise only");
  if (c.methods.empty()) throw ConfigError("methods", "method list is empty");
  bool need_ansatz = false;
  for (size_t i = 0; i < c.methods.size(); ++i) {
    const BoundMethod m = c.methods[i];
    const std::string path = "methods[" + std::to_string(i) + "]";
    need_ansatz |= uses_ansatz(m);
    if (is_fermionic(c.family)) {
      if (m != BoundMethod::fermion_dual && m != BoundMethod::exact)
        throw ConfigError(path, method_name(m) + " does not apply to Gaussian fermion circuits");
      continue;
    }
    switch (m) {
      case BoundMethod::fermion_dual:
        throw ConfigError(path, "fermion_dual needs a Gaussian fermion circuit family");
      case BoundMethod::info_dual:
        throw ConfigError(path, "info_dual is not available in sweeps");
      case BoundMethod::nonunital_dual:
        if (c.noise != NoiseKind::replacement) throw ConfigError(path, "nonunital_dual needs replacement noise");
        break;
      case BoundMethod::trace_purity_dual:
      case BoundMethod::info_only:
      case BoundMethod::purity_only:
        if (c.noise != NoiseKind::depolarizing) throw ConfigError(path, method_name(m) + " needs depolarizing noise");
        break;
      default:
        break;
    }
  }
  if (need_ansatz && c.ansatz.empty()) throw ConfigError("ansatz", "grid is empty");
  for (size_t i = 0; i < c.ansatz.size(); ++i) {
    const long lo = is_fermionic(c.family) ? 0 : 1;
    if (c.ansatz[i] < lo) throw ConfigError("ansatz[" + std::to_string(i) + "]", "value out of range");
  }
  if (c.refine_iters < 0) throw ConfigError("refine_iters", "must be non-negative");
  if (c.fermion_iters < 0) throw ConfigError("fermion_iters", "must be non-negative");
  if (c.lambda_c < 0) throw ConfigError("lambda_c", "must be positive (or 0 for the default)");
  if (c.output.empty()) throw ConfigError("output", "required field is missing");
  if (c.oracle_check && !is_fermionic(c.family) && c.family != Family::clifford && c.n_sites() > 12)
    throw ConfigError("oracle_check", "dense cross-checks need n <= 12");
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", std::string("not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("<document>", "expected a map at the top level");
  ExperimentConfig c;
  c.schema = required<int>(root, "schema", "");
  if (c.schema != 1) throw ConfigError("schema", "unsupported schema version " + std::to_string(c.schema));
  c.name = optional_field<std::string>(root, "name", "", "");
  c.seed = required<std::uint64_t>(root, "seed", "");

  const YAML::Node circ = section(root, "circuit");
  const auto fam = required<std::string>(circ, "family", "circuit.");
  auto it = std::find_if(kFamilies.begin(), kFamilies.end(), [&](const auto& kv) { return kv.second == fam; });
  if (it == kFamilies.end()) throw ConfigError("circuit.family", "unknown family '" + fam + "'");
  c.family = it->first;
  if (is_2d(c.family)) {
    c.lx = required<int>(circ, "lx", "circuit.");
    c.ly = required<int>(circ, "ly", "circuit.");
  } else if (c.family != Family::single_qubit) {
    c.n = required<int>(circ, "n", "circuit.");
  }
  if (!circ["depths"]) throw ConfigError("circuit.depths", "required field is missing");
  c.depths = int_grid(circ["depths"], "circuit.depths");
  if (circ["theta"]) c.thetas = list<double>(circ["theta"], "circuit.theta");
  c.delta = optional_field<double>(circ, "delta", "circuit.", 1.0);

  const YAML::Node nz = section(root, "noise");
  const auto model = optional_field<std::string>(nz, "model", "noise.", "depolarizing");
  if (model == "depolarizing")
    c.noise = NoiseKind::depolarizing;
  else if (model == "replacement")
    c.noise = NoiseKind::replacement;
  else
    throw ConfigError("noise.model", "unknown noise model '" + model + "'");
  if (!nz["p"]) throw ConfigError("noise.p", "required field is missing");
  c.ps = list<double>(nz["p"], "noise.p");
  c.epsilon = optional_field<double>(nz, "epsilon", "noise.", 0.0);

  if (!root["methods"]) throw ConfigError("methods", "required field is missing");
  const auto names = list<std::string>(root["methods"], "methods");
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string& nm = names[i];
    try {
      c.methods.push_back(nm == "trace_dual" ? BoundMethod::trace_purity_dual : parse_method(nm));
    } catch (const DomainError&) {
      throw ConfigError("methods[" + std::to_string(i) + "]", "unknown method '" + nm + "'");
    }
  }
  if (root["ansatz"]) c.ansatz = list<long>(root["ansatz"], "ansatz");
  c.refine_iters = optional_field<int>(root, "refine_iters", "", 0);
  c.fermion_iters = optional_field<int>(root, "fermion_iters", "", 200);
  c.lambda_c = optional_field<double>(root, "lambda_c", "", 0.0);
  c.output = optional_field<std::string>(root, "output", "", "");
  c.oracle_check = optional_field<bool>(root, "oracle_check", "", false);
  c.record_timing = optional_field<bool>(root, "record_timing", "", true);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << c.schema;
  if (!c.name.empty()) out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "circuit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << family_name(c.family);
  if (is_2d(c.family)) {
    out << YAML::Key << "lx" << YAML::Value << c.lx << YAML::Key << "ly" << YAML::Value << c.ly;
  } else if (c.family != Family::single_qubit) {
    out << YAML::Key << "n" << YAML::Value << c.n;
  }
  out << YAML::Key << "depths" << YAML::Value << YAML::Flow << c.depths;
  out << YAML::Key << "theta" << YAML::Value << YAML::Flow << c.thetas;
  out << YAML::Key << "delta" << YAML::Value << c.delta;
  out << YAML::EndMap;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "model" << YAML::Value << noise_kind_name(c.noise);
  out << YAML::Key << "p" << YAML::Value << YAML::Flow << c.ps;
  out << YAML::Key << "epsilon" << YAML::Value << c.epsilon;
  out << YAML::EndMap;
  std::vector<std::string> names;
  for (BoundMethod m : c.methods) names.push_back(method_name(m));
  out << YAML::Key << "methods" << YAML::Value << YAML::Flow << names;
  out << YAML::Key << "ansatz" << YAML::Value << YAML::Flow << c.ansatz;
  out << YAML::Key << "refine_iters" << YAML::Value << c.refine_iters;
  out << YAML::Key << "fermion_iters" << YAML::Value << c.fermion_iters;
  out << YAML::Key << "lambda_c" << YAML::Value << c.lambda_c;
  out << YAML::Key << "output" << YAML::Value << c.output;
  out << YAML::Key << "oracle_check" << YAML::Value << c.oracle_check;
  out << YAML::Key << "record_timing" << YAML::Value << c.record_timing;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_digest(const ExperimentConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<GridPoint> grid_points(const ExperimentConfig& c) {
  std::vector<GridPoint> out;
  const SeedStream master(c.seed);
  int idx = 0;
  for (int d : c.depths)
    for (double p : c.ps)
      for (double th : c.thetas) {
        out.push_back({idx, d, p, th, master.child(static_cast<std::uint64_t>(idx)).key()});
        ++idx;
      }
  return out;
}

std::vector<ResultRow> evaluate_point(const ExperimentConfig& config, const GridPoint& point) {
  std::vector<ResultRow> rows;
  try {
    rows = is_fermionic(config.family) ? evaluate_fermion(config, point) : evaluate_qubit(config, point);
  } catch (const std::exception& e) {
    // Circuit construction failed: every requested row fails.
    rows.clear();
    for (BoundMethod m : config.methods)
      for (long a : uses_ansatz(m) ? config.ansatz : std::vector<long>{0}) {
        ResultRow row;
        row.report.method = m;
        row.report.ansatz = a;
        row.report.n_sites = config.n_sites();
        row.report.depth = point.depth;
        row.report.seed = point.seed;
        row.p = point.p;
        row.theta = point.theta;
        row.failed = true;
        row.error = e.what();
        rows.push_back(std::move(row));
      }
  }
  const std::string digest = config_digest(config);
  for (auto& r : rows) r.report.config_digest = digest;
  return rows;
}

std::string csv_header() { return "method,N,d,D_or_r,p,theta,seed,bound,boundary_term,penalty_sum,wall_time_s"; }

std::string csv_row(const ResultRow& row, bool record_timing) {
  const auto& r = row.report;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream s;
  s << method_name(r.method) << ',' << r.n_sites << ',' << r.depth << ',' << r.ansatz << ',' << fmt(row.p) << ','
    << fmt(row.theta) << ',' << r.seed << ',' << fmt(row.failed ? nan : r.bound) << ','
    << fmt(row.failed ? nan : r.boundary_term) << ',' << fmt(row.failed ? nan : r.penalty_sum) << ','
    << fmt(record_timing ? r.wall_time_s : 0.0);
  return s.str();
}

std::string json_record(const ResultRow& row, bool record_timing) {
  const auto& r = row.report;
  nlohmann::json j;
  j["method"] = method_name(r.method);
  j["N"] = r.n_sites;
  j["d"] = r.depth;
  j["D_or_r"] = r.ansatz;
  j["p"] = row.p;
  j["theta"] = row.theta;
  j["seed"] = r.seed;
  j["failed"] = row.failed;
  if (row.failed) {
    j["error"] = row.error;
  } else {
    j["bound"] = r.bound;
    j["boundary_term"] = r.boundary_term;
    j["penalty_sum"] = r.penalty_sum;
    j["per_step_penalties"] = r.per_step_penalties;
  }
  j["wall_time_s"] = record_timing ? r.wall_time_s : 0.0;
  j["config_digest"] = r.config_digest;
  return j.dump();
}

int worker_count_from_env() {
  const char* v = std::getenv("DUALBOUND_WORKERS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("DUALBOUND_WORKERS", "must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

RunSummary run_experiment(const ExperimentConfig& config, int workers) {
  validate(config);
  if (workers <= 0) workers = worker_count_from_env();
  const auto points = grid_points(config);

  RunSummary summary;
  summary.csv_path = config.output;
  summary.jsonl_path = config.output + ".jsonl";
  const auto parent = std::filesystem::path(config.output).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream csv(summary.csv_path, std::ios::trunc);
  std::ofstream jsonl(summary.jsonl_path, std::ios::trunc);
  if (!csv || !jsonl) throw Error("cannot open output " + config.output);
  csv << csv_header() << '\n' << std::flush;

  // Completed points wait here until every earlier point has been written.
  std::mutex mu;
  std::map<int, std::vector<ResultRow>> pending;
  int next_write = 0;
  std::atomic<int> next_point{0};

  auto flush_ready = [&]() {
    for (auto it = pending.find(next_write); it != pending.end(); it = pending.find(next_write)) {
      for (const auto& row : it->second) {
        csv << csv_row(row, config.record_timing) << '\n';
        jsonl << json_record(row, config.record_timing) << '\n';
        ++summary.rows;
        if (row.failed) {
          ++summary.failed_rows;
          std::fprintf(stderr, "row failed (%s, d=%d, D_or_r=%ld, p=%g, theta=%g): %s\n",
                       method_name(row.report.method).c_str(), row.report.depth, row.report.ansatz, row.p, row.theta,
                       row.error.c_str());
        }
      }
      csv.flush();
      jsonl.flush();
      pending.erase(it);
      ++next_write;
    }
  };

  auto work = [&]() {
    for (int i = next_point++; i < static_cast<int>(points.size()); i = next_point++) {
      auto rows = evaluate_point(config, points[static_cast<size_t>(i)]);
      std::lock_guard<std::mutex> lock(mu);
      pending.emplace(i, std::move(rows));
      flush_ready();
    }
  };

  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return summary;
}

std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw DomainError(path + ": CSV header does not match the schema");
  std::vector<ResultRow> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw DomainError(path + ":" + std::to_string(lineno) + ": expected 11 columns");
    try {
      ResultRow r;
      r.report.method = parse_method(f[0]);
      r.report.n_sites = std::stoi(f[1]);
      r.report.depth = std::stoi(f[2]);
      r.report.ansatz = std::stol(f[3]);
      r.p = std::stod(f[4]);
      r.theta = std::stod(f[5]);
      r.report.seed = std::stoull(f[6]);
      r.report.bound = std::stod(f[7]);
      r.report.boundary_term = std::stod(f[8]);
      r.report.penalty_sum = std::stod(f[9]);
      r.report.wall_time_s = std::stod(f[10]);
      r.failed = std::isnan(r.report.bound);
      out.push_back(std::move(r));
    } catch (const std::invalid_argument&) {
      throw DomainError(path + ":" + std::to_string(lineno) + ": malformed field");
    } catch (const std::out_of_range&) {
      throw DomainError(path + ":" + std::to_string(lineno) + ": field out of range");
    }
  }
  return out;
}

PlotTemplate parse_template(const std::string& name) {
  for (PlotTemplate t : {PlotTemplate::bound_vs_depth, PlotTemplate::bound_vs_p_theta_heatmap, PlotTemplate::fermion_vs_depth})
    if (template_name(t) == name) return t;
  throw DomainError("unknown plot template '" + name + "'");
}

std::string template_name(PlotTemplate t) {
  switch (t) {
    case PlotTemplate::bound_vs_depth:
      return "bound_vs_depth";
    case PlotTemplate::bound_vs_p_theta_heatmap:
      return "bound_vs_p_theta_heatmap";
    case PlotTemplate::fermion_vs_depth:
      return "fermion_vs_depth";
  }
  return "unknown";
}

PlotFiles emit_plotdata(const std::string& csv_path, PlotTemplate t, const std::string& out_dir,
                        std::optional<double> ground_energy) {
  const auto rows = read_csv(csv_path);
  std::filesystem::create_directories(out_dir);
  PlotFiles files;
  nlohmann::json caption;
  caption["template"] = template_name(t);
  caption["source"] = csv_path;
  caption["ground_energy"] = ground_energy ? nlohmann::json(*ground_energy) : nlohmann::json(nullptr);
  caption["curves"] = nlohmann::json::array();
  auto out_path = [&](const std::string& stem) { return (std::filesystem::path(out_dir) / stem).string(); };
  auto trivial = [&](double b) { return ground_energy && b <= *ground_energy; };

  if (t == PlotTemplate::bound_vs_p_theta_heatmap) {
    // One dense grid per (method, d, D_or_r); rows follow p, columns theta.
    std::map<std::tuple<std::string, int, long>, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) groups[{method_name(r.report.method), r.report.depth, r.report.ansatz}].push_back(&r);
    for (const auto& [key, members] : groups) {
      const auto& [method, d, a] = key;
      std::set<double> ps, thetas;
      for (const auto* r : members) {
        ps.insert(r->p);
        thetas.insert(r->theta);
      }
      const std::vector<double> pv(ps.begin(), ps.end()), tv(thetas.begin(), thetas.end());
      std::vector<double> grid(pv.size() * tv.size(), std::numeric_limits<double>::quiet_NaN());
      int n_trivial = 0;
      for (const auto* r : members) {
        const auto i = static_cast<size_t>(std::lower_bound(pv.begin(), pv.end(), r->p) - pv.begin());
        const auto j = static_cast<size_t>(std::lower_bound(tv.begin(), tv.end(), r->theta) - tv.begin());
        grid[i * tv.size() + j] = r->report.bound;
        n_trivial += trivial(r->report.bound) ? 1 : 0;
      }
      const std::string stem = method + "_d" + std::to_string(d) + "_a" + std::to_string(a);
      std::ofstream pf(out_path(stem + ".p.dat")), tf(out_path(stem + ".theta.dat")), gf(out_path(stem + ".grid.dat"));
      for (double v : pv) pf << fmt(v) << '\n';
      for (double v : tv) tf << fmt(v) << '\n';
      for (size_t i = 0; i < pv.size(); ++i) {
        for (size_t j = 0; j < tv.size(); ++j) gf << (j ? " " : "") << fmt(grid[i * tv.size() + j]);
        gf << '\n';
      }
      for (const auto& suffix : {".p.dat", ".theta.dat", ".grid.dat"}) files.series.push_back(out_path(stem + suffix));
      caption["curves"].push_back({{"file", stem + ".grid.dat"},
                                   {"method", method},
                                   {"d", d},
                                   {"D_or_r", a},
                                   {"shape", {pv.size(), tv.size()}},
                                   {"rows", "p"},
                                   {"columns", "theta"},
                                   {"trivial_points", n_trivial}});
    }
  } else {
    // Series of bound against depth per (method, D_or_r, p, theta).
    std::map<std::tuple<std::string, long, double, double>, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) {
      const bool fermionic = r.report.method == BoundMethod::fermion_dual;
      if (t == PlotTemplate::fermion_vs_depth && !fermionic && r.report.method != BoundMethod::exact) continue;
      groups[{method_name(r.report.method), r.report.ansatz, r.p, r.theta}].push_back(&r);
    }
    for (auto& [key, members] : groups) {
      const auto& [method, a, p, th] = key;
      std::stable_sort(members.begin(), members.end(),
                       [](const ResultRow* x, const ResultRow* y) { return x->report.depth < y->report.depth; });
      std::ostringstream stem;
      stem << method << "_a" << a << "_p" << fmt(p) << "_theta" << fmt(th);
      const std::string file = stem.str() + ".dat";
      std::ofstream f(out_path(file));
      int n_trivial = 0;
      for (const auto* r : members) {
        f << r->report.depth << ' ' << fmt(r->report.bound);
        if (ground_energy) f << ' ' << (trivial(r->report.bound) ? 1 : 0);
        f << '\n';
        n_trivial += trivial(r->report.bound) ? 1 : 0;
      }
      files.series.push_back(out_path(file));
      caption["curves"].push_back({{"file", file},
                                   {"method", method},
                                   {"D_or_r", a},
                                   {"p", p},
                                   {"theta", th},
                                   {"columns", ground_energy ? "d bound trivial" : "d bound"},
                                   {"trivial_points", n_trivial}});
    }
  }
  if (ground_energy)
    caption["note"] = "points with bound <= ground_energy are trivial bounds; they are flagged, not clipped";
  files.caption = out_path("caption.json");
  std::ofstream cf(files.caption);
  cf << caption.dump(2) << '\n';
  return files;
}

}  // namespace dualbound::experiment
