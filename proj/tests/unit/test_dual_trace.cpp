#include <gtest/gtest.h>

#include <cmath>

#include "dense.hpp"
#include "dualbound/circuits.hpp"
#include "dualbound/dual_trace.hpp"
#include "dualbound/errors.hpp"
#include "dualbound/oracle.hpp"

using namespace dualbound;
using namespace dualbound::dual;

namespace {

double exact_energy(const circuits::GeneratedCircuit& g) {
  const MatC h = oracle::dense_hamiltonian(g.target, g.circuit.n_sites);
  return oracle::dense_simulate(g.circuit, &h, {false, std::nullopt}).energy;
}

Index full_cap(int n) { return Index(1) << (2 * n); }

DualVariables random_duals(int n, int depth, Index bond, SeedStream& rng, double scale = 1.0) {
  DualVariables d;
  for (int t = 0; t < depth; ++t) d.sigmas.push_back(mpo::scale(testsupport::random_hermitian_mpo(n, bond, rng), scale));
  return d;
}

DualVariables zero_duals(int n, int depth) {
  DualVariables d;
  d.sigmas.assign(static_cast<size_t>(depth), mpo::Mpo::zero(n));
  return d;
}

circuits::CircuitSpec identity_circuit(int n, int depth, double p) {
  circuits::CircuitSpec c{n, {}, circuits::zero_product_state(n)};
  for (int t = 0; t < depth; ++t) c.layers.push_back(circuits::Layer{{}, noise::Depolarizing{p}});
  return c;
}

Mat2 tau_eps(double eps) {
  Mat2 t = Mat2::Identity() / 2.0;
  t(0, 0) += eps;
  t(1, 1) -= eps;
  return t;
}

}  // namespace

TEST(HeisenbergTebd, DepthOneIsMinusH) {
  const auto g = circuits::brickwall_1d(4, 1, 0.3, 0.1, 2);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 64);
  ASSERT_EQ(d.sigmas.size(), 1u);
  EXPECT_LT((d.sigmas[0].to_dense() + g.target.mpo.to_dense()).norm(), 1e-12);
}

TEST(HeisenbergTebd, IdentityCircuitFixedPoint) {
  const auto g = circuits::brickwall_1d(4, 3, 0.3, 0.0, 2);
  const auto c = identity_circuit(4, 4, 0.0);
  const auto d = heisenberg_tebd(c, g.target.mpo, g.target.mpo.max_bond());
  for (const auto& s : d.sigmas) EXPECT_LT((s.to_dense() + g.target.mpo.to_dense()).norm(), 1e-10);
}

TEST(HeisenbergTebd, MatchesDenseHeisenbergEvolution) {
  const auto g = circuits::brickwall_1d(5, 5, 0.4, 0.1, 17);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(5));
  MatC x = -oracle::dense_hamiltonian(g.target, 5);
  for (int t = 5; t >= 1; --t) {
    EXPECT_LT((d.sigmas[static_cast<size_t>(t - 1)].to_dense() - x).norm(), 1e-10) << "t=" << t;
    x = testsupport::dense_layer_adjoint(x, g.circuit.layers[static_cast<size_t>(t - 1)], 5);
  }
}

TEST(HeisenbergTebd, CliffordDualsAreStabilizerImages) {
  const int n = 6, depth = 6;
  const auto g = circuits::clifford_entangle_unentangle(n, depth, 0.05, 31);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, n);
  for (int t = 1; t <= depth; ++t) {
    MatC expected = MatC::Zero(1 << n, 1 << n);
    for (const auto& term : g.target.terms) {
      const auto img = oracle::stabilizer_heisenberg_from(g.circuit, {term.coefficient, term.letters, 1.0}, t + 1);
      expected -= img.coefficient * img.damping * pauli_string_dense(img.letters);
    }
    EXPECT_LT((d.sigmas[static_cast<size_t>(t - 1)].to_dense() - g.target.scale * expected).norm(), 1e-10);
  }
}

// Degenerate Pauli-sum images once tripped the divide-and-conquer SVD.
TEST(HeisenbergTebd, CliffordSixteenSitesStaysExactAtCapN) {
  const int n = 16, depth = 16;
  const auto g = circuits::clifford_entangle_unentangle(n, depth, 0.05, 153411656);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, n);
  for (double e : d.truncation_errors) EXPECT_LT(e, 1e-10);
  const double dual = dual_value_trace(d, g.circuit, g.target.mpo, noise::purity_schedule_depolarizing(n, 0.05, depth)).bound;
  EXPECT_NEAR(dual, oracle::stabilizer_energy(g.circuit, g.target), 1e-8);
}

TEST(HeisenbergTebd, RejectsZeroCap) {
  const auto g = circuits::brickwall_1d(3, 1, 0.3, 0.1, 2);
  EXPECT_THROW(heisenberg_tebd(g.circuit, g.target.mpo, 0), DomainError);
}

TEST(EffectiveHamiltonians, UncompressedDualsGiveZero) {
  const auto g = circuits::brickwall_1d(4, 5, 0.3, 0.05, 3);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(4));
  for (double v : effective_hamiltonians(d, g.circuit, g.target.mpo).frobenius_norms) EXPECT_LT(v, 1e-10);
}

TEST(EffectiveHamiltonians, ZeroDuals) {
  const auto g = circuits::brickwall_1d(4, 3, 0.3, 0.05, 3);
  const auto eff = effective_hamiltonians(zero_duals(4, 3), g.circuit, g.target.mpo);
  EXPECT_EQ(eff.frobenius_norms[0], 0.0);
  EXPECT_EQ(eff.frobenius_norms[1], 0.0);
  EXPECT_LT((eff.h_terms[2].to_dense() - g.target.mpo.to_dense()).norm(), 1e-12);
}

TEST(EffectiveHamiltonians, MatchDenseRecomputation) {
  SeedStream rng(5);
  const auto g = circuits::brickwall_1d(4, 3, 0.5, 0.1, 4);
  const auto d = random_duals(4, 3, 3, rng);
  const auto eff = effective_hamiltonians(d, g.circuit, g.target.mpo);
  for (int t = 1; t <= 3; ++t) {
    MatC expected = d.sigmas[static_cast<size_t>(t - 1)].to_dense();
    if (t < 3)
      expected -= testsupport::dense_layer_adjoint(d.sigmas[static_cast<size_t>(t)].to_dense(),
                                                   g.circuit.layers[static_cast<size_t>(t)], 4);
    else
      expected += g.target.mpo.to_dense();
    EXPECT_LT((eff.h_terms[static_cast<size_t>(t - 1)].to_dense() - expected).norm(), 1e-10);
    EXPECT_NEAR(eff.frobenius_norms[static_cast<size_t>(t - 1)], expected.norm(), 1e-10);
  }
}

TEST(DualValueTrace, ZeroDualsGiveFloor) {
  const auto g = circuits::brickwall_1d(4, 3, 0.3, 0.05, 3);
  const auto s = noise::purity_schedule_depolarizing(4, 0.05, 3);
  const auto r = dual_value_trace(zero_duals(4, 3), g.circuit, g.target.mpo, s);
  EXPECT_NEAR(r.bound, -std::sqrt(s.values[2]) * g.target.mpo.to_dense().norm(), 1e-12);
  EXPECT_EQ(r.boundary_term, 0.0);
  EXPECT_NO_THROW(check_consistent(r));
}

TEST(DualValueTrace, SingleQubitExact) {
  const double delta = 1.7;
  for (double p : {0.0, 0.1, 0.3})
    for (double theta : {0.0, 0.4, 1.1, 2.9}) {
      const auto g = circuits::single_qubit_rotation(theta, p, delta);
      const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 4);
      const auto r = dual_value_trace(d, g.circuit, g.target.mpo, noise::purity_schedule_depolarizing(1, p, 1));
      EXPECT_NEAR(r.bound, delta * (1 - p) * std::cos(2 * theta), 1e-12);
    }
}

TEST(DualValueTrace, UncompressedIsExact) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = circuits::brickwall_1d(6, 5, 0.4, 0.05, seed);
    const auto d = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(6));
    const auto r = dual_value_trace(d, g.circuit, g.target.mpo, noise::purity_schedule_depolarizing(6, 0.05, 5));
    EXPECT_NEAR(r.bound, exact_energy(g), 1e-8);
  }
}

TEST(DualValueTrace, RejectsBadSchedules) {
  const auto g = circuits::brickwall_1d(3, 3, 0.3, 0.05, 3);
  auto s = noise::purity_schedule_depolarizing(3, 0.05, 3);
  s.values[1] = -0.1;
  EXPECT_THROW(dual_value_trace(zero_duals(3, 3), g.circuit, g.target.mpo, s), DomainError);
  EXPECT_THROW(dual_value_trace(zero_duals(3, 3), g.circuit, g.target.mpo, noise::info_schedule_depolarizing(3, 0.05, 3)),
               DomainError);
  EXPECT_THROW(dual_value_trace(zero_duals(3, 2), g.circuit, g.target.mpo, noise::purity_schedule_depolarizing(3, 0.05, 3)),
               DimensionError);
}

TEST(Soundness, RandomDualsNeverExceedEnergy) {
  SeedStream rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(4));
    const int depth = 1 + 2 * static_cast<int>(rng.below(3));
    const double p = rng.uniform(0.0, 0.3);
    const auto g = circuits::brickwall_1d(n, depth, rng.uniform(0, 1), p, rng.below(1000));
    const double e = exact_energy(g);
    const auto s = noise::purity_schedule_depolarizing(n, p, depth);
    const auto rnd = random_duals(n, depth, 1 + static_cast<Index>(rng.below(4)), rng, rng.uniform(0.01, 1.0));
    EXPECT_LE(dual_value_trace(rnd, g.circuit, g.target.mpo, s).bound, e + 1e-8);
    const auto tebd = heisenberg_tebd(g.circuit, g.target.mpo, 1 + static_cast<Index>(rng.below(8)));
    const auto dual = dual_value_trace(tebd, g.circuit, g.target.mpo, s);
    const auto err = tebd_error_bound(tebd, g.circuit, g.target.mpo);
    EXPECT_LE(dual.bound, e + 1e-8);
    EXPECT_LE(err.bound, dual.bound);
  }
}

TEST(Soundness, UnitalNoise) {
  SeedStream rng(78);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    const int depth = 1 + 2 * static_cast<int>(rng.below(3));
    noise::UnitalPauli m{rng.uniform(0.01, 0.1), rng.uniform(0.01, 0.1), rng.uniform(0.01, 0.1),
                         testsupport::random_unitary(2, rng), testsupport::random_unitary(2, rng)};
    const auto g = circuits::brickwall_1d(n, depth, rng.uniform(0, 1), m, rng.below(1000));
    const auto s = noise::purity_schedule_unital(n, m.px, m.py, m.pz, depth);
    const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 2);
    EXPECT_LE(dual_value_trace(d, g.circuit, g.target.mpo, s).bound, exact_energy(g) + 1e-8);
    const auto full = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(n));
    EXPECT_NEAR(dual_value_trace(full, g.circuit, g.target.mpo, s).bound, exact_energy(g), 1e-8);
  }
}

TEST(TebdError, RequiresTebdProvenance) {
  const auto g = circuits::brickwall_1d(3, 3, 0.3, 0.05, 3);
  EXPECT_THROW(tebd_error_bound(zero_duals(3, 3), g.circuit, g.target.mpo), DomainError);
}

TEST(TebdError, UncompressedIsExact) {
  const auto g = circuits::brickwall_1d(4, 3, 0.3, 0.05, 9);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(4));
  EXPECT_NEAR(tebd_error_bound(d, g.circuit, g.target.mpo).bound, exact_energy(g), 1e-8);
}

TEST(Clifford, DualEqualsStabilizerEnergy) {
  for (int n : {6, 8, 12}) {
    const auto g = circuits::clifford_entangle_unentangle(n, 10, 0.05, 500 + static_cast<std::uint64_t>(n));
    const auto d = heisenberg_tebd(g.circuit, g.target.mpo, n);
    const auto r = dual_value_trace(d, g.circuit, g.target.mpo, noise::purity_schedule_depolarizing(n, 0.05, 10));
    EXPECT_NEAR(r.bound, oracle::stabilizer_energy(g.circuit, g.target), 1e-9);
    if (n <= 8) EXPECT_NEAR(r.bound, exact_energy(g), 1e-9);
  }
}

TEST(Nonunital, ZeroDuals) {
  const int n = 3;
  const Mat2 tau = tau_eps(0.2);
  const auto g = circuits::brickwall_1d(n, 3, 0.3, noise::Replacement{0.1, tau}, 5, circuits::TwoSiteAxis::zz);
  const auto rs = noise::relative_entropy_schedule(g.circuit, tau, 0.1, noise::zero_state_relative_entropy(n, tau));
  const auto r = dual_value_nonunital(zero_duals(n, 3), g.circuit, g.target.mpo, rs.distance, tau);
  const MatC h = g.target.mpo.to_dense();
  const MatC tn = oracle::dense_product_state(std::vector<Mat2>(n, tau));
  EXPECT_NEAR(r.bound, (h * tn).trace().real() - rs.distance.values[2] * h.norm(), 1e-12);
}

TEST(Nonunital, MaximallyMixedReferenceMatchesDenseFormula) {
  SeedStream rng(6);
  const int n = 4, depth = 3;
  const double q = 0.1;
  const Mat2 tau = Mat2::Identity() / 2.0;
  const auto g = circuits::brickwall_1d(n, depth, 0.3, noise::Replacement{q, tau}, 6, circuits::TwoSiteAxis::zz);
  const auto rs = noise::relative_entropy_schedule(g.circuit, tau, q, noise::zero_state_relative_entropy(n, tau));
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 3);
  const auto r = dual_value_nonunital(d, g.circuit, g.target.mpo, rs.distance, tau);
  const auto eff = effective_hamiltonians(d, g.circuit, g.target.mpo);
  const double dim = std::pow(2.0, n);
  double expected = boundary_term(d, g.circuit);
  for (int t = 0; t < depth; ++t) {
    const MatC ht = eff.h_terms[static_cast<size_t>(t)].to_dense();
    expected += ht.trace().real() / dim - rs.distance.values[static_cast<size_t>(t)] * ht.norm();
  }
  EXPECT_NEAR(r.bound, expected, 1e-10);
}

TEST(Nonunital, SoundAgainstDenseOracle) {
  SeedStream rng(79);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    const int depth = 1 + 2 * static_cast<int>(rng.below(3));
    const Mat2 tau = tau_eps(rng.uniform(0.0, 0.3));
    const double q = rng.uniform(0.02, 0.3);
    const auto g = circuits::brickwall_1d(n, depth, rng.uniform(0, 1), noise::Replacement{q, tau}, rng.below(1000),
                                          circuits::TwoSiteAxis::zz);
    const auto rs = noise::relative_entropy_schedule(g.circuit, tau, q, noise::zero_state_relative_entropy(n, tau));
    const double e = exact_energy(g);
    const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 1 + static_cast<Index>(rng.below(6)));
    EXPECT_LE(dual_value_nonunital(d, g.circuit, g.target.mpo, rs.distance, tau).bound, e + 1e-8);
    const auto rnd = random_duals(n, depth, 2, rng, 0.3);
    EXPECT_LE(dual_value_nonunital(rnd, g.circuit, g.target.mpo, rs.distance, tau).bound, e + 1e-8);
    const auto full = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(n));
    EXPECT_NEAR(dual_value_nonunital(full, g.circuit, g.target.mpo, rs.distance, tau).bound, e, 1e-8);
  }
}

TEST(Nonunital, RejectsPuritySchedule) {
  const auto g = circuits::brickwall_1d(3, 1, 0.3, 0.1, 2);
  EXPECT_THROW(dual_value_nonunital(zero_duals(3, 1), g.circuit, g.target.mpo,
                                    noise::purity_schedule_depolarizing(3, 0.1, 1), Mat2::Identity() / 2.0),
               DomainError);
}

TEST(ArchitectureFree, Examples) {
  const auto g = circuits::brickwall_1d(3, 1, 0.3, 0.1, 2);
  const Mat2 tau = tau_eps(0.15);
  const MatC h = g.target.mpo.to_dense();
  const MatC tn = oracle::dense_product_state(std::vector<Mat2>(3, tau));
  const double at_tau = (h * tn).trace().real();
  EXPECT_NEAR(architecture_free_bound_nonunital(2.0, tau, 0.0, g.target.mpo), at_tau, 1e-12);
  EXPECT_NEAR(architecture_free_bound_nonunital(2.0, tau, 0.5, g.target.mpo), at_tau - 2.0 * 0.5, 1e-12);
  const mpo::Mpo z = mpo::from_pauli_sum({{1.0, "ZII"}, {0.5, "XXI"}}, 3);
  EXPECT_NEAR(architecture_free_bound_nonunital(1.5, Mat2::Identity() / 2.0, 0.8, z), -1.5 * std::sqrt(0.4), 1e-12);
  EXPECT_THROW(architecture_free_bound_nonunital(1.0, tau, -0.1, z), DomainError);
}

TEST(Refine, OptimalInputIsKept) {
  const auto g = circuits::brickwall_1d(4, 3, 0.3, 0.05, 9);
  const auto s = noise::purity_schedule_depolarizing(4, 0.05, 3);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, full_cap(4));
  const double before = dual_value_trace(d, g.circuit, g.target.mpo, s).bound;
  const auto r = refine_dual(d, g.circuit, g.target.mpo, s, {5, 1e-12});
  EXPECT_LT(std::abs(r.report.bound - before), 1e-9);
}

TEST(Refine, SingleQubitFromZeroReachesExact) {
  const double p = 0.1, theta = 0.35, delta = 1.0;
  const auto g = circuits::single_qubit_rotation(theta, p, delta);
  const auto s = noise::purity_schedule_depolarizing(1, p, 1);
  auto d = zero_duals(1, 1);
  d.bond_cap = 1;
  const auto r = refine_dual(d, g.circuit, g.target.mpo, s, {500, 1e-15});
  EXPECT_NEAR(r.report.bound, delta * (1 - p) * std::cos(2 * theta), 1e-6);
}

TEST(Refine, CompressedDualsImproveMonotonically) {
  const auto g = circuits::brickwall_1d(6, 5, 0.3, 0.05, 12);
  const auto s = noise::purity_schedule_depolarizing(6, 0.05, 5);
  const auto d = heisenberg_tebd(g.circuit, g.target.mpo, 2);
  const double before = dual_value_trace(d, g.circuit, g.target.mpo, s).bound;
  const auto r = refine_dual(d, g.circuit, g.target.mpo, s, {4, 1e-12});
  EXPECT_GE(r.report.bound, before - 1e-9);
  for (size_t k = 1; k < r.history.size(); ++k) EXPECT_GT(r.history[k], r.history[k - 1]);
  EXPECT_LE(r.report.bound, exact_energy(g) + 1e-8);
  EXPECT_NEAR(r.report.bound, dual_value_trace(r.duals, g.circuit, g.target.mpo, s).bound, 1e-12);
}

TEST(Refine, DirectionMatchesFiniteDifferences) {
  SeedStream rng(8);
  const auto g = circuits::brickwall_1d(3, 3, 0.4, 0.1, 13);
  const auto s = noise::purity_schedule_depolarizing(3, 0.1, 3);
  const auto d = random_duals(3, 3, 2, rng, 0.5);
  const auto dir = ascent_direction(d, g.circuit, g.target.mpo, s);
  double norm2 = 0.0;
  for (const auto& x : dir) norm2 += std::pow(mpo::frobenius_norm(x), 2);
  auto at = [&](double a) {
    DualVariables c = d;
    for (size_t t = 0; t < c.sigmas.size(); ++t) c.sigmas[t] = mpo::add(c.sigmas[t], mpo::scale(dir[t], a));
    return dual_value_trace(c, g.circuit, g.target.mpo, s).bound;
  };
  const double h = 1e-6;
  EXPECT_NEAR((at(h) - at(-h)) / (2 * h), norm2, 1e-5 * norm2);
}
