#pragma once

#include <cstdint>
#include <vector>

#include "dualbound/noise.hpp"
#include "dualbound/report.hpp"
#include "dualbound/types.hpp"

namespace dualbound::fermion {

// Majorana operators c_0..c_{2N-1} with {c_j, c_k} = delta_jk; index x is
// c^1 of mode x and N + x is c^2 of mode x. a_x = (c^1_x - i c^2_x) / sqrt(2).

// H = i c^T matrix c + offset, matrix real antisymmetric.
struct QuadraticOp {
  MatR matrix;
  double offset = 0.0;

  int n_modes() const { return static_cast<int>(matrix.rows() / 2); }
};

// gamma_jk = i Tr(rho [c_j, c_k])
struct CovarianceMatrix {
  MatR matrix;

  int n_modes() const { return static_cast<int>(matrix.rows() / 2); }
};

// Rectangular lattice of lx * ly modes, mode index x + lx * y. A chain has
// ly = 1. Distances are Manhattan.
struct Lattice {
  int lx = 1;
  int ly = 1;

  int n_modes() const { return lx * ly; }
  int distance(int a, int b) const;
  int diameter() const { return lx - 1 + ly - 1; }
};

struct FermionLayer {
  QuadraticOp generator;  // h_U; the layer unitary is exp(-i H_U)
  MatR orthogonal;        // exp(2 h_U)
  double p = 0.0;         // depolarizing probability, applied after the unitary
  std::vector<int> depolarized_sites;
};

struct FermionCircuit {
  Lattice lattice;
  std::vector<FermionLayer> layers;
  CovarianceMatrix initial;

  int depth() const { return static_cast<int>(layers.size()); }
  int n_modes() const { return lattice.n_modes(); }
};

struct GeneratedFermionCircuit {
  FermionCircuit circuit;
  QuadraticOp target;
};

// Throws DomainError when the matrix is not antisymmetric to 1e-12.
void check_antisymmetric(const MatR& m, const char* what);

// Throws DomainError when gamma is not antisymmetric or a singular value
// exceeds 1 + 1e-10.
void check_covariance(const CovarianceMatrix& gamma);

// Hopping sum t_b (a_x^dag a_y + h.c.) over bonds, strengths alternating v, w
// along each axis. Not rescaled.
QuadraticOp ssh_hamiltonian_1d(int n, double v, double w);
QuadraticOp ssh_hamiltonian_2d(int lx, int ly, double vx, double wx, double vy, double wy);

// Mode energies eps_x >= 0; the eigenvalues of i * matrix are +-eps_x.
VecR mode_energies(const MatR& matrix);

// Shift and scale so that the many-body spectrum is exactly [0, 1].
QuadraticOp scaled_to_unit_interval(const QuadraticOp& h);

CovarianceMatrix vacuum_covariance(int n);
CovarianceMatrix ground_state_covariance(const QuadraticOp& h);
// Covariance of exp(-H / lambda) / Z.
CovarianceMatrix gibbs_covariance(const MatR& matrix, double lambda);

MatR gaussian_orthogonal(const MatR& generator);  // exp(2 h_U)

CovarianceMatrix evolve_covariance_unitary(const CovarianceMatrix& gamma, const QuadraticOp& h_u);
CovarianceMatrix evolve_covariance_orthogonal(const CovarianceMatrix& gamma, const MatR& orthogonal);
CovarianceMatrix evolve_covariance_depolarizing(const CovarianceMatrix& gamma, double p, int site);
CovarianceMatrix evolve_layer(const CovarianceMatrix& gamma, const FermionLayer& layer);

double energy_from_covariance(const CovarianceMatrix& gamma, const QuadraticOp& h);

// Information content N - S(rho) in bits of the Gaussian state.
double info_content_bits(const CovarianceMatrix& gamma);

// Adjoint channel of one layer on a quadratic operator: noise adjoint, then
// s -> exp(-2 h_U) s exp(2 h_U). The offset is unchanged.
QuadraticOp heisenberg_quadratic_step(const QuadraticOp& s, const FermionLayer& layer);

// Zeroes every entry whose modes are further apart than r.
QuadraticOp project_local(const QuadraticOp& s, int r, const Lattice& lattice);

// sum_x ln(2 cosh(eps_x / lambda)), i.e. ln Tr exp(-H / lambda) without the offset.
double fermionic_free_energy(const MatR& matrix, double lambda);

// Random two-mode Gaussian brick-wall: the first depth/2 layers are random,
// the rest invert them (an odd depth gets one noise-only layer in the
// middle). Every mode is depolarized with probability p after each layer.
// The initial state is the ground state of the scaled SSH target.
GeneratedFermionCircuit ssh_circuit_1d(int n, int depth, double p, std::uint64_t seed, double v = 1.0,
                                       double w = 0.6);
GeneratedFermionCircuit ssh_circuit_2d(int lx, int ly, int depth, double p, std::uint64_t seed, double vx = 1.0,
                                       double wx = 0.6, double vy = 1.0, double wy = 0.6);

// Covariance after each layer.
std::vector<CovarianceMatrix> simulate(const FermionCircuit& circuit);
double output_energy(const FermionCircuit& circuit, const QuadraticOp& target);

// s[t - 1] holds sigma_t; lambdas must be positive.
BoundReport fermionic_dual_value(const std::vector<QuadraticOp>& s, const std::vector<double>& lambdas,
                                 const FermionCircuit& circuit, const QuadraticOp& target,
                                 const noise::BoundSchedule& schedule);

// Heisenberg images of -H, projected to range r after every step.
std::vector<QuadraticOp> projected_heisenberg_images(const FermionCircuit& circuit, const QuadraticOp& target, int r);

// The dual as a function of the free entries of every s_t (upper triangle
// within range r) followed by ln(lambda_t).
class FermionDualProblem {
 public:
  FermionDualProblem(const FermionCircuit& circuit, const QuadraticOp& target, const noise::BoundSchedule& schedule,
                     int r);

  int n_params() const { return static_cast<int>(free_.size()) * depth_ + depth_; }
  std::vector<double> pack(const std::vector<QuadraticOp>& s, const std::vector<double>& lambdas) const;
  void unpack(const double* x, std::vector<QuadraticOp>& s, std::vector<double>& lambdas) const;

  // Dual value; fills the gradient when `grad` is non-null.
  double value(const double* x, double* grad) const;
  BoundReport report(const double* x) const;

 private:
  const FermionCircuit& circuit_;
  const QuadraticOp& target_;
  std::vector<double> entropy_nats_;  // (N - I_t) ln 2
  std::vector<std::pair<int, int>> free_;
  CovarianceMatrix gamma1_;
  int depth_;
};

struct FermionOptimizerOptions {
  int max_iters = 200;
  double function_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;
};

struct FermionDualResult {
  std::vector<QuadraticOp> s;
  std::vector<double> lambdas;
  BoundReport report;
  double initial_bound = 0.0;
  int iterations = 0;
};

// L-BFGS ascent from the projected Heisenberg images, with each lambda_t
// first set by a 1-D search. With a `seed` (e.g. the optimum at a smaller r)
// a second ascent starts from its projection and the better result is kept.
// The returned bound is never below initial_bound, the best starting value.
FermionDualResult optimize_fermionic_dual(const FermionCircuit& circuit, const QuadraticOp& target, int r,
                                          const noise::BoundSchedule& schedule,
                                          const FermionOptimizerOptions& options = {},
                                          const FermionDualResult* seed = nullptr);

}  // namespace dualbound::fermion
