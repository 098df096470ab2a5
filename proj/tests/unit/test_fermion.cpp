#include <gtest/gtest.h>

#include <cmath>

#include "dualbound/errors.hpp"
#include "dualbound/fermion.hpp"
#include "dualbound/noise.hpp"
#include "dualbound/rng.hpp"
#include "fock.hpp"

using namespace dualbound;
using namespace dualbound::fermion;
namespace fk = testsupport::fock;

namespace {

MatR random_antisymmetric(int n, SeedStream& rng, double scale = 1.0) {
  MatR h = MatR::Zero(2 * n, 2 * n);
  for (int j = 0; j < 2 * n; ++j)
    for (int k = j + 1; k < 2 * n; ++k) {
      h(j, k) = scale * rng.uniform(-1.0, 1.0);
      h(k, j) = -h(j, k);
    }
  return h;
}

double real_trace(const MatC& a, const MatC& b) { return (a * b).trace().real(); }

// Runs the circuit on the Fock space from the ground state of the target.
std::vector<MatC> fock_states(const GeneratedFermionCircuit& g, const std::vector<MatC>& c) {
  const int n = g.circuit.n_modes();
  MatC rho = fk::ground_state(fk::quadratic(g.target.matrix, g.target.offset, c));
  std::vector<MatC> out;
  for (const auto& layer : g.circuit.layers) {
    const MatC u = fk::gaussian_unitary(layer.generator.matrix, c);
    rho = u * rho * u.adjoint();
    for (int x : layer.depolarized_sites) rho = fk::depolarize(rho, layer.p, x, c);
    out.push_back(rho);
  }
  (void)n;
  return out;
}

}  // namespace

TEST(FockOracle, CanonicalAnticommutation) {
  const auto c = fk::majoranas(3);
  for (size_t j = 0; j < c.size(); ++j)
    for (size_t k = 0; k < c.size(); ++k) {
      const MatC ac = c[j] * c[k] + c[k] * c[j];
      const MatC expect = (j == k ? 1.0 : 0.0) * MatC::Identity(8, 8);
      EXPECT_LT((ac - expect).norm(), 1e-13);
    }
}

TEST(Covariance, VacuumMatchesFock) {
  for (int n : {1, 2, 3}) {
    const auto c = fk::majoranas(n);
    EXPECT_LT((vacuum_covariance(n).matrix - fk::covariance(fk::vacuum(n), c)).norm(), 1e-13);
  }
  const MatR g = vacuum_covariance(2).matrix;
  EXPECT_EQ(g(0, 2), 1.0);
  EXPECT_EQ(g(2, 0), -1.0);
  EXPECT_THROW(vacuum_covariance(0), DomainError);
}

TEST(Covariance, GibbsAndGroundStateMatchFock) {
  SeedStream rng(11);
  for (int n : {2, 3, 4}) {
    const auto c = fk::majoranas(n);
    const MatR h = random_antisymmetric(n, rng);
    const MatC hd = fk::quadratic(h, 0.0, c);
    for (double l : {0.3, 2.0}) {
      const MatR g = gibbs_covariance(h, l).matrix;
      EXPECT_LT((g - fk::covariance(fk::gibbs_state(hd, l), c)).norm(), 1e-10) << n << " " << l;
      EXPECT_NEAR(energy_from_covariance({g}, {h, 0.0}), real_trace(fk::gibbs_state(hd, l), hd), 1e-10);
    }
    const MatC ground = fk::ground_state(hd);
    const MatR g0 = ground_state_covariance({h, 0.0}).matrix;
    EXPECT_LT((g0 - fk::covariance(ground, c)).norm(), 1e-9);
    const double e0 = Eigen::SelfAdjointEigenSolver<MatC>(hd, Eigen::EigenvaluesOnly).eigenvalues()(0);
    EXPECT_NEAR(energy_from_covariance({g0}, {h, 0.25}), e0 + 0.25, 1e-10);
    EXPECT_NEAR(e0, -mode_energies(h).sum(), 1e-10);
  }
}

TEST(Covariance, EvolutionMatchesFock) {
  SeedStream rng(12);
  const int n = 3;
  const auto c = fk::majoranas(n);
  const MatC rho0 = fk::gibbs_state(fk::quadratic(random_antisymmetric(n, rng), 0.0, c), 0.7);
  const CovarianceMatrix g0{fk::covariance(rho0, c)};
  const MatR hu = random_antisymmetric(n, rng, 0.6);
  const MatC u = fk::gaussian_unitary(hu, c);
  const MatC rho1 = u * rho0 * u.adjoint();
  const CovarianceMatrix g1 = evolve_covariance_unitary(g0, {hu, 0.0});
  EXPECT_LT((g1.matrix - fk::covariance(rho1, c)).norm(), 1e-10);
  for (int x = 0; x < n; ++x) {
    const MatC rho2 = fk::depolarize(rho1, 0.3, x, c);
    EXPECT_LT((evolve_covariance_depolarizing(g1, 0.3, x).matrix - fk::covariance(rho2, c)).norm(), 1e-10);
  }
  EXPECT_THROW(evolve_covariance_depolarizing(g1, 1.5, 0), DomainError);
  EXPECT_THROW(evolve_covariance_depolarizing(g1, 0.1, n), DimensionError);
}

TEST(Covariance, InfoContentMatchesFock) {
  SeedStream rng(13);
  const int n = 3;
  const auto c = fk::majoranas(n);
  const MatC rho = fk::gibbs_state(fk::quadratic(random_antisymmetric(n, rng), 0.0, c), 0.5);
  EXPECT_NEAR(info_content_bits({fk::covariance(rho, c)}), n - fk::von_neumann_bits(rho), 1e-9);
  EXPECT_NEAR(info_content_bits(vacuum_covariance(4)), 4.0, 1e-12);
  EXPECT_NEAR(info_content_bits({MatR::Zero(6, 6)}), 0.0, 1e-12);
}

TEST(Ssh, SingleBond) {
  for (double v : {0.4, 1.0, 2.5}) {
    const QuadraticOp h = ssh_hamiltonian_1d(2, v, 0.3);
    const VecR eps = mode_energies(h.matrix);
    EXPECT_NEAR(eps(0), v / 2, 1e-13);
    EXPECT_NEAR(eps(1), v / 2, 1e-13);
    const auto c = fk::majoranas(2);
    const auto e = Eigen::SelfAdjointEigenSolver<MatC>(fk::quadratic(h.matrix, 0.0, c), Eigen::EigenvaluesOnly).eigenvalues();
    EXPECT_NEAR(e(0), -v, 1e-12);
    EXPECT_NEAR(e(3), v, 1e-12);
  }
}

TEST(Ssh, HoppingMatchesFockOperators) {
  const int n = 4;
  const auto c = fk::majoranas(n);
  std::vector<MatC> a;
  for (int x = 0; x < n; ++x) a.push_back((c[static_cast<size_t>(x)] - cplx(0, 1) * c[static_cast<size_t>(n + x)]) / std::sqrt(2.0));
  MatC expect = MatC::Zero(16, 16);
  const double t[3] = {1.0, 0.6, 1.0};
  for (int x = 0; x + 1 < n; ++x) {
    const MatC hop = a[static_cast<size_t>(x)].adjoint() * a[static_cast<size_t>(x + 1)];
    expect += t[x] * (hop + hop.adjoint());
  }
  EXPECT_LT((fk::quadratic(ssh_hamiltonian_1d(n, 1.0, 0.6).matrix, 0.0, c) - expect).norm(), 1e-12);
}

TEST(Ssh, DimerLimit) {
  const VecR eps = mode_energies(ssh_hamiltonian_1d(6, 1.0, 0.0).matrix);
  for (Index i = 0; i < eps.size(); ++i) EXPECT_NEAR(eps(i), 0.5, 1e-12);
}

TEST(Ssh, TwoDimensionalBonds) {
  const QuadraticOp h = ssh_hamiltonian_2d(2, 2, 1.0, 0.6, 0.8, 0.6);
  const auto c = fk::majoranas(4);
  std::vector<MatC> a;
  for (int x = 0; x < 4; ++x) a.push_back((c[static_cast<size_t>(x)] - cplx(0, 1) * c[static_cast<size_t>(4 + x)]) / std::sqrt(2.0));
  auto bond = [&](int x, int y, double s) {
    const MatC hop = a[static_cast<size_t>(x)].adjoint() * a[static_cast<size_t>(y)];
    return MatC(s * (hop + hop.adjoint()));
  };
  const MatC expect = bond(0, 1, 1.0) + bond(2, 3, 1.0) + bond(0, 2, 0.8) + bond(1, 3, 0.8);
  EXPECT_LT((fk::quadratic(h.matrix, 0.0, c) - expect).norm(), 1e-12);
  EXPECT_THROW(ssh_hamiltonian_2d(1, 3, 1, 1, 1, 1), DomainError);
}

TEST(Ssh, ScaledSpectrumIsUnitInterval) {
  const QuadraticOp h = scaled_to_unit_interval(ssh_hamiltonian_1d(4, 1.0, 0.6));
  const auto c = fk::majoranas(4);
  const auto e = Eigen::SelfAdjointEigenSolver<MatC>(fk::quadratic(h.matrix, h.offset, c), Eigen::EigenvaluesOnly).eigenvalues();
  EXPECT_NEAR(e(0), 0.0, 1e-12);
  EXPECT_NEAR(e(15), 1.0, 1e-12);
  EXPECT_THROW(scaled_to_unit_interval({MatR::Zero(4, 4), 0.0}), DomainError);
}

TEST(FreeEnergy, Limits) {
  EXPECT_NEAR(fermionic_free_energy(MatR::Zero(8, 8), 0.7), 4 * std::log(2.0), 1e-14);
  MatR h = MatR::Zero(2, 2);
  h(0, 1) = 1.0;
  h(1, 0) = -1.0;
  EXPECT_NEAR(fermionic_free_energy(h, 1.0), std::log(std::exp(1.0) + std::exp(-1.0)), 1e-14);
  EXPECT_NEAR(fermionic_free_energy(h, 1e-8), 1e8, 1e-4);
  EXPECT_THROW(fermionic_free_energy(h, 0.0), DomainError);
}

TEST(FreeEnergy, MatchesFock) {
  SeedStream rng(14);
  const auto c = fk::majoranas(3);
  const MatR h = random_antisymmetric(3, rng);
  Eigen::SelfAdjointEigenSolver<MatC> es(fk::quadratic(h, 0.0, c), Eigen::EigenvaluesOnly);
  for (double l : {0.2, 1.0, 5.0}) {
    double z = 0.0;
    for (Index i = 0; i < 8; ++i) z += std::exp(-es.eigenvalues()(i) / l);
    EXPECT_NEAR(fermionic_free_energy(h, l), std::log(z), 1e-12);
  }
}

TEST(Heisenberg, DualToSchrodingerOnCovariances) {
  SeedStream rng(15);
  const int n = 4;
  FermionLayer layer;
  layer.generator = {random_antisymmetric(n, rng, 0.5), 0.0};
  layer.orthogonal = gaussian_orthogonal(layer.generator.matrix);
  layer.p = 0.2;
  layer.depolarized_sites = {0, 2, 3};
  const MatR s = random_antisymmetric(n, rng);
  const CovarianceMatrix g = gibbs_covariance(random_antisymmetric(n, rng), 0.4);
  const double lhs = energy_from_covariance(evolve_layer(g, layer), {s, 0.0});
  const double rhs = energy_from_covariance(g, heisenberg_quadratic_step({s, 0.0}, layer));
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Heisenberg, MatchesFockAdjointChannel) {
  SeedStream rng(16);
  const int n = 3;
  const auto c = fk::majoranas(n);
  FermionLayer layer;
  layer.generator = {random_antisymmetric(n, rng, 0.5), 0.0};
  layer.orthogonal = gaussian_orthogonal(layer.generator.matrix);
  layer.p = 0.35;
  layer.depolarized_sites = {0, 1, 2};
  const MatR s = random_antisymmetric(n, rng);
  const MatC u = fk::gaussian_unitary(layer.generator.matrix, c);
  // Fock adjoint: noise adjoint (self-adjoint twirl) then U^dag X U.
  MatC x = fk::quadratic(s, 0.3, c);
  for (int site : layer.depolarized_sites) x = fk::depolarize(x, layer.p, site, c);
  x = u.adjoint() * x * u;
  const QuadraticOp out = heisenberg_quadratic_step({s, 0.3}, layer);
  EXPECT_LT((fk::quadratic(out.matrix, out.offset, c) - x).norm(), 1e-10);
}

TEST(Projection, Properties) {
  SeedStream rng(17);
  const Lattice chain{6, 1};
  const QuadraticOp s{random_antisymmetric(6, rng), 0.1};
  for (int r = 0; r <= 6; ++r) {
    const QuadraticOp p = project_local(s, r, chain);
    EXPECT_LT((project_local(p, r, chain).matrix - p.matrix).norm(), 1e-15);
    EXPECT_LE(p.matrix.norm(), s.matrix.norm());
    EXPECT_EQ(p.offset, s.offset);
  }
  const QuadraticOp p0 = project_local(s, 0, chain);
  for (int j = 0; j < 12; ++j)
    for (int k = 0; k < 12; ++k)
      if (j % 6 != k % 6) EXPECT_EQ(p0.matrix(j, k), 0.0);
      else EXPECT_EQ(p0.matrix(j, k), s.matrix(j, k));
  EXPECT_EQ(project_local(s, chain.diameter(), chain).matrix, s.matrix);
  const Lattice grid{3, 2};
  EXPECT_EQ(grid.distance(0, 5), 3);
  EXPECT_EQ(grid.diameter(), 3);
  EXPECT_THROW(project_local(s, -1, chain), DomainError);
  EXPECT_THROW(project_local(s, 1, Lattice{2, 2}), DimensionError);
}

TEST(Circuit, MatchesFockSimulation) {
  for (int depth : {3, 4}) {
    const auto g = ssh_circuit_1d(4, depth, 0.1, 21);
    ASSERT_EQ(g.circuit.depth(), depth);
    const auto c = fk::majoranas(4);
    const auto states = simulate(g.circuit);
    const auto fock = fock_states(g, c);
    EXPECT_LT((g.circuit.initial.matrix - fk::covariance(fk::ground_state(fk::quadratic(g.target.matrix, 0.0, c)), c)).norm(), 1e-9);
    for (int t = 0; t < depth; ++t)
      EXPECT_LT((states[static_cast<size_t>(t)].matrix - fk::covariance(fock[static_cast<size_t>(t)], c)).norm(), 1e-9);
    EXPECT_NEAR(output_energy(g.circuit, g.target), real_trace(fock.back(), fk::quadratic(g.target.matrix, g.target.offset, c)), 1e-9);
  }
}

TEST(Circuit, NoiselessMirrorReturnsToGroundState) {
  const auto g = ssh_circuit_2d(2, 3, 6, 0.0, 5);
  EXPECT_NEAR(output_energy(g.circuit, g.target), 0.0, 1e-10);
  const auto g1 = ssh_circuit_1d(8, 6, 0.0, 5);
  EXPECT_NEAR(output_energy(g1.circuit, g1.target), 0.0, 1e-10);
}

TEST(Circuit, SeedDeterminism) {
  const auto a = ssh_circuit_1d(6, 4, 0.1, 9);
  const auto b = ssh_circuit_1d(6, 4, 0.1, 9);
  const auto d = ssh_circuit_1d(6, 4, 0.1, 10);
  EXPECT_EQ(a.circuit.layers[0].orthogonal, b.circuit.layers[0].orthogonal);
  EXPECT_NE(a.circuit.layers[0].orthogonal, d.circuit.layers[0].orthogonal);
}

TEST(Circuit, InfoContentWithinSchedule) {
  for (double p : {0.05, 0.3}) {
    const auto g = ssh_circuit_1d(6, 8, p, 3);
    const auto sched = noise::info_schedule_depolarizing(6, p, 8);
    const auto states = simulate(g.circuit);
    for (int t = 0; t < 8; ++t) EXPECT_LE(info_content_bits(states[static_cast<size_t>(t)]), sched.values[static_cast<size_t>(t)] + 1e-9);
  }
}

TEST(Dual, ExactImagesRecoverNoiselessEnergy) {
  const auto g = ssh_circuit_1d(6, 4, 0.0, 2);
  const auto sched = noise::info_schedule_depolarizing(6, 0.0, 4);
  const auto s = projected_heisenberg_images(g.circuit, g.target, g.circuit.lattice.diameter());
  const BoundReport r = fermionic_dual_value(s, std::vector<double>(4, 1e-12), g.circuit, g.target, sched);
  EXPECT_NEAR(r.bound, output_energy(g.circuit, g.target), 1e-9);
}

TEST(Dual, SoundnessOnSmallChainAgainstFock) {
  const auto g = ssh_circuit_1d(4, 5, 0.1, 8);
  const auto sched = noise::info_schedule_depolarizing(4, 0.1, 5);
  const auto c = fk::majoranas(4);
  const double exact = real_trace(fock_states(g, c).back(), fk::quadratic(g.target.matrix, g.target.offset, c));
  for (int r = 0; r <= 3; ++r) {
    const auto res = optimize_fermionic_dual(g.circuit, g.target, r, sched);
    EXPECT_LE(res.report.bound, exact + 1e-9);
    EXPECT_GE(res.report.bound, res.initial_bound - 1e-12);
    check_consistent(res.report);
  }
}

TEST(Dual, SoundnessOnLongChain) {
  const auto g = ssh_circuit_1d(48, 6, 0.05, 4);
  const auto sched = noise::info_schedule_depolarizing(48, 0.05, 6);
  FermionOptimizerOptions opt;
  opt.max_iters = 40;
  const auto res = optimize_fermionic_dual(g.circuit, g.target, 2, sched, opt);
  EXPECT_LE(res.report.bound, output_energy(g.circuit, g.target) + 1e-9);
  EXPECT_EQ(res.report.ansatz, 2);
  EXPECT_EQ(res.report.method, BoundMethod::fermion_dual);
}

TEST(Dual, RandomDualsAreSound) {
  SeedStream rng(30);
  const auto g = ssh_circuit_1d(4, 4, 0.2, 1);
  const auto sched = noise::info_schedule_depolarizing(4, 0.2, 4);
  const double exact = output_energy(g.circuit, g.target);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<QuadraticOp> s;
    std::vector<double> l;
    for (int t = 0; t < 4; ++t) {
      s.push_back({random_antisymmetric(4, rng, 0.3), rng.uniform(-1.0, 1.0)});
      l.push_back(std::exp(rng.uniform(-4.0, 2.0)));
    }
    EXPECT_LE(fermionic_dual_value(s, l, g.circuit, g.target, sched).bound, exact + 1e-10);
  }
}

TEST(Dual, FullDepolarizationGivesMixedStateFloor) {
  const auto g = ssh_circuit_1d(8, 4, 1.0, 6);
  const auto sched = noise::info_schedule_depolarizing(8, 1.0, 4);
  EXPECT_NEAR(output_energy(g.circuit, g.target), 0.5, 1e-12);
  const auto res = optimize_fermionic_dual(g.circuit, g.target, 1, sched);
  EXPECT_NEAR(res.report.bound, 0.5, 1e-6);
}

TEST(Dual, ConcaveAlongSegments) {
  SeedStream rng(31);
  const auto g = ssh_circuit_1d(6, 4, 0.1, 3);
  const auto sched = noise::info_schedule_depolarizing(6, 0.1, 4);
  const FermionDualProblem prob(g.circuit, g.target, sched, 2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(static_cast<size_t>(prob.n_params())), b(a.size()), m(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.uniform(-0.5, 0.5);
      b[i] = rng.uniform(-0.5, 0.5);
    }
    // lambda entries held equal so the objective is concave in the rest
    for (int t = 0; t < 4; ++t) a[a.size() - 1 - static_cast<size_t>(t)] = b[b.size() - 1 - static_cast<size_t>(t)];
    for (size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
    EXPECT_GE(prob.value(m.data(), nullptr), 0.5 * (prob.value(a.data(), nullptr) + prob.value(b.data(), nullptr)) - 1e-12);
  }
}

TEST(Dual, GradientMatchesFiniteDifferences) {
  SeedStream rng(32);
  const auto g = ssh_circuit_1d(6, 4, 0.1, 12);
  const auto sched = noise::info_schedule_depolarizing(6, 0.1, 4);
  const FermionDualProblem prob(g.circuit, g.target, sched, 2);
  std::vector<double> x(static_cast<size_t>(prob.n_params()));
  for (auto& v : x) v = rng.uniform(-0.3, 0.3);
  std::vector<double> grad(x.size());
  prob.value(x.data(), grad.data());
  const double h = 1e-6;
  for (size_t i = 0; i < x.size(); i += 7) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (prob.value(xp.data(), nullptr) - prob.value(xm.data(), nullptr)) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << i;
  }
  for (size_t i = x.size() - 4; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (prob.value(xp.data(), nullptr) - prob.value(xm.data(), nullptr)) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << i;
  }
}

TEST(Dual, NestedRangesAreMonotone) {
  const auto g = ssh_circuit_1d(8, 6, 0.05, 7);
  const auto sched = noise::info_schedule_depolarizing(8, 0.05, 6);
  FermionDualResult prev;
  double last = -1e300;
  for (int r = 0; r <= g.circuit.lattice.diameter(); ++r) {
    prev = optimize_fermionic_dual(g.circuit, g.target, r, sched, {}, r == 0 ? nullptr : &prev);
    EXPECT_GE(prev.report.bound, last - 1e-12) << r;
    last = prev.report.bound;
  }
  EXPECT_LE(last, output_energy(g.circuit, g.target) + 1e-9);
}

TEST(Dual, Rejections) {
  const auto g = ssh_circuit_1d(4, 2, 0.1, 1);
  const auto sched = noise::info_schedule_depolarizing(4, 0.1, 2);
  const auto s = projected_heisenberg_images(g.circuit, g.target, 1);
  EXPECT_THROW(fermionic_dual_value(s, {1.0, 0.0}, g.circuit, g.target, sched), DomainError);
  EXPECT_THROW(fermionic_dual_value(s, {1.0}, g.circuit, g.target, sched), DimensionError);
  EXPECT_THROW(fermionic_dual_value(s, {1.0, 1.0}, g.circuit, g.target, noise::purity_schedule_depolarizing(4, 0.1, 2)),
               DomainError);
  EXPECT_THROW(fermionic_dual_value(s, {1.0, 1.0}, g.circuit, g.target, noise::info_schedule_depolarizing(4, 0.1, 3)),
               DimensionError);
  EXPECT_THROW(check_antisymmetric(MatR::Identity(4, 4), "x"), DomainError);
  EXPECT_THROW(check_covariance({2.0 * vacuum_covariance(2).matrix}), DomainError);
  EXPECT_THROW(optimize_fermionic_dual(g.circuit, g.target, -1, sched), DomainError);
  EXPECT_THROW(ssh_circuit_1d(4, 0, 0.1, 1), DomainError);
}
