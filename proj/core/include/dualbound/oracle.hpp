#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dualbound/circuits.hpp"
#include "dualbound/types.hpp"

// Exact small-scale references. Nothing here touches the MPO code: target
// Hamiltonians are rebuilt densely from their Pauli terms.
namespace dualbound::oracle {

struct DenseSimulation {
  MatC rho;                            // rho_d
  double energy = 0.0;                 // Tr(H rho_d) when a target was given
  std::vector<double> purities;        // Tr(rho_t^2), t = 1..d
  std::vector<double> info_contents;   // n + Tr(rho_t log2 rho_t), t = 1..d
  std::vector<double> distances;       // |rho_t - ref^{(x)n}|_F when a reference was given
};

struct DenseOptions {
  bool record_info = true;
  std::optional<Mat2> reference_local_state;
};

MatC dense_product_state(const std::vector<Mat2>& local_states);

// Dense target Hamiltonian from its Pauli terms and dressing layer.
MatC dense_hamiltonian(const circuits::TargetHamiltonian& target, int n);

// rho -> G rho G^dag for a gate on any (possibly non-adjacent) sites.
void apply_gate(MatC& rho, const MatC& gate, const std::vector<int>& sites, int n);
// Applies a single-qubit superoperator (vec index out * 2 + in).
void apply_site_channel(MatC& rho, const Mat4& superop, int site, int n);
void apply_layer(MatC& rho, const circuits::Layer& layer, int n);

DenseSimulation dense_simulate(const circuits::CircuitSpec& circuit, const MatC* hamiltonian = nullptr,
                               const DenseOptions& options = {});

struct PurityInfo {
  double trace_purity = 0.0;
  double info_content_bits = 0.0;
};

PurityInfo purity_and_info(const MatC& rho);

struct SignedPauli {
  double coefficient = 1.0;
  std::string letters;
  double damping = 1.0;
};

// Exact Heisenberg image of a Pauli string through a Clifford circuit with
// depolarizing noise. Throws DomainError on non-Clifford gates or other
// noise models.
SignedPauli stabilizer_heisenberg(const circuits::CircuitSpec& circuit, const SignedPauli& initial);

// Same, stopping after the adjoints of layers d, d-1, ..., first_layer
// (1-based). first_layer = 1 gives the full image.
SignedPauli stabilizer_heisenberg_from(const circuits::CircuitSpec& circuit, const SignedPauli& initial,
                                       int first_layer);

// <0...0| P |0...0> weighted sum over the target terms, for Clifford circuits
// starting in |0...0>.
double stabilizer_energy(const circuits::CircuitSpec& circuit, const circuits::TargetHamiltonian& target);

}  // namespace dualbound::oracle
