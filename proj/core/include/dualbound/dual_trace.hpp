#pragma once

#include <vector>

#include "dualbound/circuits.hpp"
#include "dualbound/mpo.hpp"
#include "dualbound/noise.hpp"
#include "dualbound/report.hpp"

namespace dualbound::dual {

enum class DualProvenance { heisenberg_tebd, refined, user };

// sigmas[t - 1] holds sigma_t for t = 1..depth.
struct DualVariables {
  std::vector<mpo::Mpo> sigmas;
  DualProvenance provenance = DualProvenance::user;
  Index bond_cap = 0;
  std::vector<double> truncation_errors;         // per compression, t = d-1 .. 1
  std::vector<double> symmetrization_residuals;  // relative anti-Hermitian part before symmetrizing
};

// h_terms[t - 1] holds H_t.
struct EffectiveHamiltonians {
  std::vector<mpo::Mpo> h_terms;
  std::vector<double> frobenius_norms;
};

// E^dag for one layer without compression: noise adjoint on every site, then
// gate adjoints in reverse order. Non-adjacent gates are routed through SWAPs.
mpo::Mpo apply_layer_adjoint(const mpo::Mpo& a, const circuits::Layer& layer);

// E for one layer (Schroedinger picture) on an operator, without compression.
mpo::Mpo apply_layer(const mpo::Mpo& a, const circuits::Layer& layer);

// sigma_d = -H, sigma_t = Pi_D E_{t+1}^dag(sigma_{t+1}).
DualVariables heisenberg_tebd(const circuits::CircuitSpec& circuit, const mpo::Mpo& target, Index bond_cap);

EffectiveHamiltonians effective_hamiltonians(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                             const mpo::Mpo& target);

// -Re Tr[rho_0 E_1^dag(sigma_1)]
double boundary_term(const DualVariables& duals, const circuits::CircuitSpec& circuit);

BoundReport dual_value_trace(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                             const mpo::Mpo& target, const noise::BoundSchedule& schedule);

// The trace-purity dual with every cap set to 1.
BoundReport tebd_error_bound(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                             const mpo::Mpo& target);

// Dual for a Frobenius-distance schedule around tau^{(x)N}.
BoundReport dual_value_nonunital(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                 const mpo::Mpo& target, const noise::BoundSchedule& schedule, const Mat2& tau);

// Tr(H tau^{(x)N}) - |H| sqrt(D / 2), with |H| supplied by the caller.
double architecture_free_bound_nonunital(double target_norm, const Mat2& tau, double relent_final,
                                         const mpo::Mpo& target);

struct RefineOptions {
  int max_iters = 20;
  double step_tolerance = 1e-10;  // stop when an iteration gains less than this
};

struct Refined {
  DualVariables duals;
  BoundReport report;
  std::vector<double> history;  // accepted bound after each iteration, starting with the initial one
};

// Supergradient of the trace-purity dual with respect to each sigma_t in the
// real Hilbert-Schmidt inner product.
std::vector<mpo::Mpo> ascent_direction(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                       const mpo::Mpo& target, const noise::BoundSchedule& schedule);

// Ascent with a line search; only improving steps are accepted, so the
// returned bound never falls below the initial one.
Refined refine_dual(const DualVariables& initial, const circuits::CircuitSpec& circuit, const mpo::Mpo& target,
                    const noise::BoundSchedule& schedule, const RefineOptions& options = {});

}  // namespace dualbound::dual
