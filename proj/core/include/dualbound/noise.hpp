#pragma once

#include <string>
#include <variant>
#include <vector>

#include "dualbound/types.hpp"

namespace dualbound::circuits {
struct CircuitSpec;
}

namespace dualbound::noise {

struct Depolarizing {
  double p = 0.0;
};

// N(rho) = (1 - p) rho + V (sum_P p_P P U rho U^dag P) V^dag, p = px + py + pz.
struct UnitalPauli {
  double px = 0.0, py = 0.0, pz = 0.0;
  Mat2 u = Mat2::Identity();
  Mat2 v = Mat2::Identity();
};

// With probability q the qubit is traced out and replaced by tau.
struct Replacement {
  double q = 0.0;
  Mat2 tau = Mat2::Identity() / 2.0;
};

struct GeneralChannel {
  Mat4 choi = Mat4::Zero();
};

using NoiseModel = std::variant<Depolarizing, UnitalPauli, Replacement, GeneralChannel>;

// Throws DomainError when probabilities, tau or the Choi matrix are invalid.
void validate(const NoiseModel& model);

std::string kind_name(const NoiseModel& model);

// True when the model is depolarizing with p = 0 (no channel applied).
bool is_identity(const NoiseModel& model);

// Superoperator on vec(X) with index out * 2 + in (row-major 2x2).
Mat4 superoperator(const NoiseModel& model);

// Unnormalized Choi matrix sum_jk |j><k| (x) N(|j><k|), input factor first;
// the Choi matrix of the identity channel has trace 2.
struct ChoiMatrix {
  Mat4 matrix;
};

ChoiMatrix choi_matrix(const NoiseModel& model);

// Throws DomainError when the matrix is not Hermitian, not PSD (tolerance
// -1e-10) or not trace preserving.
void check_choi(const Mat4& choi);

Mat4 superoperator_from_choi(const Mat4& choi);

enum class ScheduleKind { trace_purity, information, frobenius_distance };

struct BoundSchedule {
  ScheduleKind kind = ScheduleKind::trace_purity;
  std::vector<double> values;  // values[t - 1] for t = 1..depth
  int n_sites = 0;
  int depth = 0;
  double rate = 0.0;           // p, min(px, py, pz) or q
};

BoundSchedule purity_schedule_depolarizing(int n, double p, int depth);
BoundSchedule info_schedule_depolarizing(int n, double p, int depth);
BoundSchedule purity_schedule_unital(int n, double px, double py, double pz, int depth);

// Same numbers as a trace-purity schedule but with every cap equal to 1.
BoundSchedule unit_purity_schedule(int n, int depth);

// Largest q with choi - q I (x) tau PSD, by bisection on the smallest
// eigenvalue. Throws NotApplicableError when no q > 0 is feasible.
double max_replacement_fraction(const ChoiMatrix& choi, const Mat2& tau);

// log2 |tau^{-1/2} V tau V^dag tau^{-1/2}|_op
double dinf_term(const Mat2& v, const Mat2& tau);

// Relative entropy caps D_t (bits) and Frobenius-distance caps
// d_t = (2 D_t)^{1/4} for a circuit whose noise has replacement fraction q
// towards tau. rho0_relent is D(rho_0 || tau^{(x)N}) in bits.
struct RelativeEntropySchedule {
  std::vector<double> relative_entropy;
  BoundSchedule distance;
};

RelativeEntropySchedule relative_entropy_schedule(const circuits::CircuitSpec& circuit, const Mat2& tau, double q,
                                                  double rho0_relent);

// D(|0><0|^{(x)n} || tau^{(x)n}) = -n log2 <0|tau|0>.
double zero_state_relative_entropy(int n, const Mat2& tau);

// min Tr(H rho) over density matrices with Tr rho^2 <= purity, from the
// spectrum of H (water-filling).
double purity_only_bound(const VecR& spectrum, double purity);

}  // namespace dualbound::noise
