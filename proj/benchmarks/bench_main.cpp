#include <benchmark/benchmark.h>

#include "dualbound/circuits.hpp"
#include "dualbound/dual_trace.hpp"
#include "dualbound/fermion.hpp"
#include "dualbound/mpo.hpp"
#include "dualbound/noise.hpp"

using namespace dualbound;

namespace {

// Compress a sum of two TEBD images (bond 2D) back to D.
void BM_Compress(benchmark::State& state) {
  const int n = 16;
  const auto d = static_cast<Index>(state.range(0));
  const auto g = circuits::brickwall_1d(n, 7, 0.1, 0.03, 1);
  const auto duals = dual::heisenberg_tebd(g.circuit, g.target.mpo, d);
  const mpo::Mpo sum = mpo::add(duals.sigmas[0], duals.sigmas[1]);
  for (auto _ : state) benchmark::DoNotOptimize(mpo::compress(sum, d));
}
BENCHMARK(BM_Compress)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

// One layer adjoint plus compression, the inner step of Heisenberg TEBD.
void BM_TebdStep(benchmark::State& state) {
  const int n = 16;
  const auto d = static_cast<Index>(state.range(0));
  const auto g = circuits::brickwall_1d(n, 5, 0.1, 0.03, 2);
  const auto duals = dual::heisenberg_tebd(g.circuit, g.target.mpo, d);
  for (auto _ : state) {
    const auto next = dual::apply_layer_adjoint(duals.sigmas[1], g.circuit.layers[1]);
    benchmark::DoNotOptimize(mpo::compress(next, d));
  }
}
BENCHMARK(BM_TebdStep)->Arg(4)->Arg(8)->Arg(16);

void BM_FermionDualValue(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = fermion::ssh_circuit_1d(n, 16, 0.05, 3);
  const auto sched = noise::info_schedule_depolarizing(n, 0.05, 16);
  const fermion::FermionDualProblem prob(g.circuit, g.target, sched, 2);
  const auto s = fermion::projected_heisenberg_images(g.circuit, g.target, 2);
  const auto x = prob.pack(s, std::vector<double>(16, 0.1));
  std::vector<double> grad(x.size());
  for (auto _ : state) benchmark::DoNotOptimize(prob.value(x.data(), grad.data()));
}
BENCHMARK(BM_FermionDualValue)->Arg(16)->Arg(48);

void BM_FermionOptimize(benchmark::State& state) {
  const auto g = fermion::ssh_circuit_1d(48, 8, 0.05, 4);
  const auto sched = noise::info_schedule_depolarizing(48, 0.05, 8);
  fermion::FermionOptimizerOptions opt;
  opt.max_iters = 50;
  for (auto _ : state) benchmark::DoNotOptimize(fermion::optimize_fermionic_dual(g.circuit, g.target, 2, sched, opt));
}
BENCHMARK(BM_FermionOptimize)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
