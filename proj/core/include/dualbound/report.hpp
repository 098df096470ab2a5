#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dualbound {

enum class BoundMethod {
  trace_purity_dual,
  tebd_error,
  nonunital_dual,
  info_dual,
  purity_only,
  info_only,
  fermion_dual,
  exact,
};

std::string method_name(BoundMethod m);
// Throws DomainError for unknown names.
BoundMethod parse_method(const std::string& name);

// A certified lower bound together with its decomposition
// bound = boundary_term - sum(per_step_penalties). Methods without a
// per-step decomposition (purity_only, info_only, exact) leave the penalty
// list empty and set boundary_term = bound.
struct BoundReport {
  BoundMethod method = BoundMethod::trace_purity_dual;
  double bound = 0.0;
  double boundary_term = 0.0;
  std::vector<double> per_step_penalties;
  double penalty_sum = 0.0;
  int n_sites = 0;
  int depth = 0;
  long ansatz = 0;  // bond cap D or fermionic order r
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Fills penalty_sum and bound from boundary_term and the penalties.
void finalize(BoundReport& report);

// Throws NumericalError when a field is non-finite or the decomposition does
// not reproduce the bound within 1e-12 relative.
void check_consistent(const BoundReport& report);

}  // namespace dualbound
