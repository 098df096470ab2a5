#pragma once

#include <cmath>
#include <vector>

#include "dualbound/circuits.hpp"
#include "dualbound/dual_trace.hpp"
#include "dualbound/noise.hpp"
#include "dualbound/report.hpp"
#include "dualbound/types.hpp"

namespace dualbound::info {

// 8 e^3
inline const double kDefaultLambdaC = 8.0 * std::exp(3.0);

// Discrete spectrum with multiplicities stored as natural logs.
struct Spectrum {
  VecR energies;
  VecR log_multiplicities;
};

Spectrum dense_spectrum(const MatC& h);

// Spectrum of a target whose Pauli terms are all Z strings. Equal-weight
// single-Z sums use binomial multiplicities at any n; other Z-string sums are
// enumerated for n <= 24. Throws NotApplicableError for anything else.
Spectrum commuting_spectrum(const circuits::TargetHamiltonian& target, int n);

// -lambda ln Tr exp(-H / lambda), shifted by the smallest eigenvalue.
double gibbs_free_energy(const Spectrum& spectrum, double lambda);
double gibbs_free_energy_dense(const MatC& h, double lambda);

struct InfoBound {
  BoundReport report;
  double lambda = 0.0;
};

// max over lambda in [lambda_c, 1e9] of lambda S_d ln 2 + G(H, lambda) with
// S_d = n - n (1 - p)^depth bits.
InfoBound info_bound(const Spectrum& spectrum, int n, double p, int depth, double lambda_c = kDefaultLambdaC);

struct InfoDual {
  BoundReport report;
  std::vector<double> lambdas;
};

// Information-content dual with H_t exponentiated densely (n <= 10). When
// `lambdas` is empty each lambda_t >= 0 is optimized independently; lambda = 0
// stands for the zero-temperature limit.
InfoDual dual_value_info_dense(const dual::DualVariables& duals, const circuits::CircuitSpec& circuit,
                               const mpo::Mpo& target, const noise::BoundSchedule& schedule,
                               const std::vector<double>& lambdas = {});

}  // namespace dualbound::info
