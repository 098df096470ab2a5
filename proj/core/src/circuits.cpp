#include "dualbound/circuits.hpp"

#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>

#include "dualbound/errors.hpp"
#include "yaml_io.hpp"

namespace dualbound::circuits {

namespace {

// Hash key of a 4x4 matrix modulo a global phase.
std::string phase_free_key(const Mat4& m) {
  cplx phase(1.0, 0.0);
  for (Index k = 0; k < 16; ++k) {
    const cplx x = m.data()[k];
    if (std::abs(x) > 1e-6) {
      phase = std::conj(x) / std::abs(x);
      break;
    }
  }
  std::string key;
  key.reserve(16 * 12);
  for (Index k = 0; k < 16; ++k) {
    const cplx x = m.data()[k] * phase;
    key += std::to_string(std::llround(x.real() * 1e6));
    key += ',';
    key += std::to_string(std::llround(x.imag() * 1e6));
    key += ';';
  }
  return key;
}

Layer random_brick_layer(int n, double theta, TwoSiteAxis axis, const noise::NoiseModel& noise, SeedStream rng) {
  Layer layer;
  layer.noise = noise;
  const Mat4 two = pauli_rotation(theta, axis);
  const char* name = axis == TwoSiteAxis::xx ? "xx" : "zz";
  for (int parity = 0; parity < 2; ++parity) {
    std::vector<GateOp> stage;
    for (int i = parity; i + 1 < n; i += 2) stage.push_back(make_gate(two, {i, i + 1}, name));
    if (!stage.empty()) layer.stages.push_back(std::move(stage));
  }
  std::vector<GateOp> singles;
  for (int i = 0; i < n; ++i) singles.push_back(make_gate(haar_single_qubit(rng), {i}, "haar"));
  layer.stages.push_back(std::move(singles));
  return layer;
}

mpo::Mpo build_target_mpo(int n, const std::vector<PauliTerm>& terms, const std::optional<Layer>& dressing,
                          double scale, double shift) {
  std::vector<PauliTerm> scaled = terms;
  for (auto& t : scaled) t.coefficient *= scale;
  mpo::Mpo h = mpo::from_pauli_sum(scaled, n);
  if (dressing) {
    // U X U^dag with U = S_m ... S_1: apply S_1 first, each as gate_adjoint(G^dag).
    for (const auto& stage : dressing->stages)
      for (const auto& g : stage) h = mpo::apply_gate_adjoint(h, g.matrix.adjoint(), g.sites);
    h = mpo::compress(h, std::numeric_limits<Index>::max()).mpo;
  }
  if (shift != 0.0) h = mpo::compress(mpo::add(h, mpo::scale(mpo::Mpo::identity(n), shift)), std::numeric_limits<Index>::max()).mpo;
  return h;
}

GeneratedCircuit assemble(CircuitSpec circuit, std::vector<PauliTerm> terms, std::optional<Layer> dressing,
                          double scale, double shift) {
  validate(circuit);
  TargetHamiltonian target;
  target.mpo = build_target_mpo(circuit.n_sites, terms, dressing, scale, shift);
  target.terms = std::move(terms);
  target.dressing_layer = std::move(dressing);
  target.scale = scale;
  target.shift = shift;
  return {std::move(circuit), std::move(target)};
}

std::vector<PauliTerm> minus_z_terms(int n) {
  std::vector<PauliTerm> terms;
  for (int i = 0; i < n; ++i) {
    std::string s(static_cast<size_t>(n), 'I');
    s[static_cast<size_t>(i)] = 'Z';
    terms.push_back({-1.0, s});
  }
  return terms;
}

}  // namespace

GateOp GateOp::dagger() const { return GateOp{matrix.adjoint(), sites, kind, name.empty() ? name : name + "_dag"}; }

GateOp make_gate(MatC matrix, std::vector<int> sites, std::string name) {
  GateOp g;
  if (sites.size() == 1 && matrix.rows() == 2 && matrix.cols() == 2) {
    g.kind = GateKind::single;
  } else if (sites.size() == 2 && matrix.rows() == 4 && matrix.cols() == 4) {
    if (sites[0] == sites[1]) throw DomainError("make_gate: two-site gate on a repeated site");
    g.kind = GateKind::two_site;
  } else {
    throw DimensionError("make_gate: gate shape does not match its site count");
  }
  if (!is_unitary(matrix)) throw DomainError("make_gate: gate is not unitary");
  g.matrix = std::move(matrix);
  g.sites = std::move(sites);
  g.name = std::move(name);
  return g;
}

Layer Layer::inverse() const {
  Layer inv;
  inv.noise = noise;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    std::vector<GateOp> stage;
    for (const auto& g : *it) stage.push_back(g.dagger());
    inv.stages.push_back(std::move(stage));
  }
  return inv;
}

void validate(const CircuitSpec& circuit) {
  if (circuit.n_sites < 1) throw DomainError("circuit needs at least one site");
  if (static_cast<int>(circuit.initial_state.size()) != circuit.n_sites)
    throw DimensionError("circuit initial state needs one local state per site");
  for (const auto& rho : circuit.initial_state) check_density_matrix(rho, "initial state");
  for (size_t t = 0; t < circuit.layers.size(); ++t) {
    const auto& layer = circuit.layers[t];
    noise::validate(layer.noise);
    for (const auto& stage : layer.stages) {
      std::vector<bool> used(static_cast<size_t>(circuit.n_sites), false);
      for (const auto& g : stage) {
        if (!is_unitary(g.matrix)) throw DomainError("layer " + std::to_string(t + 1) + ": gate is not unitary");
        for (int s : g.sites) {
          if (s < 0 || s >= circuit.n_sites)
            throw DimensionError("layer " + std::to_string(t + 1) + ": gate site out of range");
          if (used[static_cast<size_t>(s)])
            throw DomainError("layer " + std::to_string(t + 1) + ": gates overlap on site " + std::to_string(s));
          used[static_cast<size_t>(s)] = true;
        }
      }
    }
  }
}

std::vector<Mat2> zero_product_state(int n) {
  Mat2 zero = Mat2::Zero();
  zero(0, 0) = 1.0;
  return std::vector<Mat2>(static_cast<size_t>(n), zero);
}

Mat4 pauli_rotation(double theta, TwoSiteAxis axis) {
  // exp(-i theta P(x)P) = cos(theta) I - i sin(theta) P(x)P, since (P(x)P)^2 = I.
  const char letter = axis == TwoSiteAxis::xx ? 'X' : 'Z';
  const Mat2& p = pauli_matrix(letter);
  Mat4 pp;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) pp.block<2, 2>(a * 2, b * 2) = p(a, b) * p;
  return std::cos(theta) * Mat4::Identity() - cplx(0.0, std::sin(theta)) * pp;
}

Mat4 swap_gate() {
  Mat4 s = Mat4::Zero();
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1.0;
  return s;
}

Mat2 haar_single_qubit(SeedStream& rng) {
  Mat2 g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
  Eigen::HouseholderQR<Mat2> qr(g);
  Mat2 q = qr.householderQ();
  const Mat2 r = qr.matrixQR();
  for (int j = 0; j < 2; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

const std::vector<Mat4>& two_qubit_clifford_group() {
  static const std::vector<Mat4> group = [] {
    const double s2 = 1.0 / std::sqrt(2.0);
    Mat2 h;
    h << s2, s2, s2, -s2;
    Mat2 s;
    s << 1, 0, 0, cplx(0, 1);
    auto kron2 = [](const Mat2& a, const Mat2& b) {
      Mat4 m;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(i * 2, j * 2) = a(i, j) * b;
      return m;
    };
    Mat4 cnot = Mat4::Zero();
    cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
    const Mat2 id = Mat2::Identity();
    const std::vector<Mat4> gens{kron2(h, id), kron2(id, h), kron2(s, id), kron2(id, s), cnot};

    std::vector<Mat4> elements{Mat4::Identity()};
    std::unordered_map<std::string, size_t> seen{{phase_free_key(Mat4::Identity()), 0}};
    std::deque<size_t> queue{0};
    while (!queue.empty()) {
      const Mat4 cur = elements[queue.front()];
      queue.pop_front();
      for (const auto& g : gens) {
        const Mat4 next = g * cur;
        auto key = phase_free_key(next);
        if (seen.emplace(std::move(key), elements.size()).second) {
          queue.push_back(elements.size());
          elements.push_back(next);
        }
      }
    }
    return elements;
  }();
  return group;
}

Mat4 random_two_site_clifford(SeedStream& rng) {
  const auto& group = two_qubit_clifford_group();
  return group[rng.below(group.size())];
}

GeneratedCircuit brickwall_1d(int n, int depth, double theta, const noise::NoiseModel& noise, std::uint64_t seed,
                              TwoSiteAxis axis) {
  if (n < 2) throw DomainError("brickwall_1d: n must be at least 2");
  if (depth < 1 || depth % 2 == 0) throw DomainError("brickwall_1d: depth must be odd and positive");
  noise::validate(noise);
  SeedStream rng(seed);
  CircuitSpec c{n, {}, zero_product_state(n)};
  const int forward = (depth + 1) / 2;
  for (int k = 0; k < forward; ++k)
    c.layers.push_back(random_brick_layer(n, theta, axis, noise, rng.child(static_cast<std::uint64_t>(k))));
  for (int k = forward - 1; k >= 1; --k) c.layers.push_back(c.layers[static_cast<size_t>(k)].inverse());
  Layer dressing = c.layers.front();
  // Spectrum of -sum Z is [-n, n]; map to [0, 1].
  return assemble(std::move(c), minus_z_terms(n), std::move(dressing), 1.0 / (2.0 * n), 0.5);
}

GeneratedCircuit brickwall_1d(int n, int depth, double theta, double noise_p, std::uint64_t seed) {
  return brickwall_1d(n, depth, theta, noise::Depolarizing{noise_p}, seed, TwoSiteAxis::xx);
}

int snake_index(int x, int y, int lx) { return y * lx + ((y % 2 == 0) ? x : lx - 1 - x); }

GeneratedCircuit brickwall_2d_snake(int lx, int ly, int depth, double theta, double noise_p, std::uint64_t seed) {
  if (lx < 2 || ly < 2) throw DomainError("brickwall_2d_snake: lattice must be at least 2 x 2");
  if (depth < 2 || depth % 2 != 0) throw DomainError("brickwall_2d_snake: depth must be even and positive");
  const noise::NoiseModel noise = noise::Depolarizing{noise_p};
  noise::validate(noise);
  const int n = lx * ly;
  SeedStream rng(seed);
  CircuitSpec c{n, {}, zero_product_state(n)};
  const Mat4 xx = pauli_rotation(theta, TwoSiteAxis::xx);
  const int half = depth / 2;
  for (int k = 0; k < half; ++k) {
    SeedStream lr = rng.child(static_cast<std::uint64_t>(k));
    Layer layer;
    layer.noise = noise;
    std::vector<GateOp> stage;
    const int pattern = k % 4;  // odd horizontal, even horizontal, odd vertical, even vertical
    if (pattern < 2) {
      for (int y = 0; y < ly; ++y)
        for (int x = pattern; x + 1 < lx; x += 2)
          stage.push_back(make_gate(xx, {snake_index(x, y, lx), snake_index(x + 1, y, lx)}, "xx"));
    } else {
      for (int y = pattern - 2; y + 1 < ly; y += 2)
        for (int x = 0; x < lx; ++x)
          stage.push_back(make_gate(xx, {snake_index(x, y, lx), snake_index(x, y + 1, lx)}, "xx"));
    }
    if (!stage.empty()) layer.stages.push_back(std::move(stage));
    std::vector<GateOp> singles;
    for (int i = 0; i < n; ++i) singles.push_back(make_gate(haar_single_qubit(lr), {i}, "haar"));
    layer.stages.push_back(std::move(singles));
    c.layers.push_back(std::move(layer));
  }
  for (int k = half - 1; k >= 0; --k) c.layers.push_back(c.layers[static_cast<size_t>(k)].inverse());

  std::vector<PauliTerm> terms;
  for (int y = 0; y < ly; ++y)
    for (int x = 0; x < lx; ++x) {
      const int i = snake_index(x, y, lx);
      auto edge = [&](int j) {
        std::string s(static_cast<size_t>(n), 'I');
        s[static_cast<size_t>(i)] = 'Z';
        s[static_cast<size_t>(j)] = 'Z';
        terms.push_back({-1.0, s});
      };
      if (x + 1 < lx) edge(snake_index(x + 1, y, lx));
      if (y + 1 < ly) edge(snake_index(x, y + 1, lx));
    }
  const double edges = static_cast<double>(terms.size());
  // Bipartite lattice: spectrum of -sum ZZ is [-E, E].
  return assemble(std::move(c), std::move(terms), std::nullopt, 1.0 / (2.0 * edges), 0.5);
}

GeneratedCircuit clifford_entangle_unentangle(int n, int depth, double noise_p, std::uint64_t seed) {
  if (n < 2) throw DomainError("clifford_entangle_unentangle: n must be at least 2");
  if (depth < 2 || depth % 2 != 0) throw DomainError("clifford_entangle_unentangle: depth must be even and positive");
  const noise::NoiseModel noise = noise::Depolarizing{noise_p};
  noise::validate(noise);
  SeedStream rng(seed);
  CircuitSpec c{n, {}, zero_product_state(n)};
  const int half = depth / 2;
  for (int k = 0; k < half; ++k) {
    SeedStream lr = rng.child(static_cast<std::uint64_t>(k));
    Layer layer;
    layer.noise = noise;
    std::vector<GateOp> stage;
    for (int i = k % 2; i + 1 < n; i += 2) stage.push_back(make_gate(random_two_site_clifford(lr), {i, i + 1}, "clifford"));
    layer.stages.push_back(std::move(stage));
    c.layers.push_back(std::move(layer));
  }
  for (int k = half - 1; k >= 0; --k) c.layers.push_back(c.layers[static_cast<size_t>(k)].inverse());
  return assemble(std::move(c), minus_z_terms(n), std::nullopt, 1.0, 0.0);
}

GeneratedCircuit single_qubit_rotation(double theta, double noise_p, double delta) {
  const noise::NoiseModel noise = noise::Depolarizing{noise_p};
  noise::validate(noise);
  Mat2 u;
  u << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  CircuitSpec c{1, {}, zero_product_state(1)};
  Layer layer;
  layer.noise = noise;
  layer.stages.push_back({make_gate(u, {0}, "ry")});
  c.layers.push_back(std::move(layer));
  return assemble(std::move(c), {{1.0, "Z"}}, std::nullopt, delta, 0.0);
}

Layer route_nearest_neighbour(const Layer& layer) {
  Layer out;
  out.noise = layer.noise;
  const Mat4 swap = swap_gate();
  for (const auto& stage : layer.stages) {
    std::vector<GateOp> local;
    std::vector<std::vector<GateOp>> routed;
    for (const auto& g : stage) {
      if (g.kind == GateKind::single || std::abs(g.sites[0] - g.sites[1]) == 1) {
        local.push_back(g);
        continue;
      }
      const int a = std::min(g.sites[0], g.sites[1]);
      const int b = std::max(g.sites[0], g.sites[1]);
      // Move qubit b next to a, apply, move it back; the sequence is a palindrome.
      std::vector<std::vector<GateOp>> chain;
      for (int s = b - 1; s > a; --s) chain.push_back({GateOp{swap, {s, s + 1}, GateKind::two_site, "swap"}});
      routed.insert(routed.end(), chain.begin(), chain.end());
      const std::vector<int> sites = g.sites[0] == a ? std::vector<int>{a, a + 1} : std::vector<int>{a + 1, a};
      routed.push_back({GateOp{g.matrix, sites, GateKind::two_site, g.name}});
      routed.insert(routed.end(), chain.rbegin(), chain.rend());
    }
    if (!local.empty()) out.stages.push_back(std::move(local));
    for (auto& st : routed) out.stages.push_back(std::move(st));
  }
  return out;
}

std::string serialize(const CircuitSpec& circuit) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "n_sites" << YAML::Value << circuit.n_sites;
  out << YAML::Key << "initial_state" << YAML::Value << YAML::BeginSeq;
  for (const auto& rho : circuit.initial_state) yaml_io::emit_matrix(out, rho);
  out << YAML::EndSeq;
  out << YAML::Key << "layers" << YAML::Value << YAML::BeginSeq;
  for (const auto& layer : circuit.layers) {
    out << YAML::BeginMap << YAML::Key << "noise" << YAML::Value;
    yaml_io::emit_noise(out, layer.noise);
    out << YAML::Key << "stages" << YAML::Value << YAML::BeginSeq;
    for (const auto& stage : layer.stages) {
      out << YAML::BeginSeq;
      for (const auto& g : stage) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << g.name;
        out << YAML::Key << "sites" << YAML::Value << YAML::Flow << g.sites;
        out << YAML::Key << "matrix" << YAML::Value;
        yaml_io::emit_matrix(out, g.matrix);
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return out.c_str();
}

}  // namespace dualbound::circuits
