#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualbound/mpo.hpp"
#include "dualbound/noise.hpp"
#include "dualbound/pauli.hpp"
#include "dualbound/rng.hpp"
#include "dualbound/types.hpp"

namespace dualbound::circuits {

enum class GateKind { single, two_site };

struct GateOp {
  MatC matrix;             // 2x2 or 4x4; first listed site is the more significant qubit
  std::vector<int> sites;  // 1 or 2 entries
  GateKind kind = GateKind::single;
  std::string name;        // informational, e.g. "xx", "haar", "clifford", "swap"

  GateOp dagger() const;
};

GateOp make_gate(MatC matrix, std::vector<int> sites, std::string name = "");

// One unitary layer is an ordered list of stages of disjoint gates followed
// by the same single-qubit noise channel on every site.
struct Layer {
  std::vector<std::vector<GateOp>> stages;
  noise::NoiseModel noise = noise::Depolarizing{0.0};

  Layer inverse() const;  // stages reversed, gates daggered, noise kept
};

struct CircuitSpec {
  int n_sites = 0;
  std::vector<Layer> layers;
  std::vector<Mat2> initial_state;  // one local density matrix per site

  int depth() const { return static_cast<int>(layers.size()); }
};

// Checks unitarity, site ranges and per-stage disjointness.
void validate(const CircuitSpec& circuit);

std::vector<Mat2> zero_product_state(int n);

// Target Hamiltonian H = scale * U (sum terms) U^dag + shift, where U is the
// unitary of `dressing_layer` (if any). The MPO is the same operator.
struct TargetHamiltonian {
  std::vector<PauliTerm> terms;
  std::optional<Layer> dressing_layer;
  double scale = 1.0;
  double shift = 0.0;
  mpo::Mpo mpo;
};

struct GeneratedCircuit {
  CircuitSpec circuit;
  TargetHamiltonian target;
};

enum class TwoSiteAxis { xx, zz };

// exp(-i theta P (x) P) for P = X or Z.
Mat4 pauli_rotation(double theta, TwoSiteAxis axis);
Mat4 swap_gate();

Mat2 haar_single_qubit(SeedStream& rng);
Mat4 random_two_site_clifford(SeedStream& rng);

// The two-qubit Clifford group modulo phases (11520 elements).
const std::vector<Mat4>& two_qubit_clifford_group();

GeneratedCircuit brickwall_1d(int n, int depth, double theta, const noise::NoiseModel& noise, std::uint64_t seed,
                              TwoSiteAxis axis = TwoSiteAxis::xx);
GeneratedCircuit brickwall_1d(int n, int depth, double theta, double noise_p, std::uint64_t seed);

GeneratedCircuit brickwall_2d_snake(int lx, int ly, int depth, double theta, double noise_p, std::uint64_t seed);

GeneratedCircuit clifford_entangle_unentangle(int n, int depth, double noise_p, std::uint64_t seed);

// One qubit, one layer: exp(-i theta Y) then noise; H = delta Z.
GeneratedCircuit single_qubit_rotation(double theta, double noise_p, double delta);

// Snake ordering of an lx x ly lattice: site (x, y) -> chain index.
int snake_index(int x, int y, int lx);

// Deterministic text form (YAML) of a circuit; identical inputs give
// identical bytes.
std::string serialize(const CircuitSpec& circuit);

// Expands gates on non-adjacent sites into SWAP chains around an adjacent
// gate; the result has only nearest-neighbour two-site gates. Each original
// stage becomes several stages.
Layer route_nearest_neighbour(const Layer& layer);

}  // namespace dualbound::circuits
