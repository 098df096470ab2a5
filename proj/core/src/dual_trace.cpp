#include "dualbound/dual_trace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dualbound/errors.hpp"

namespace dualbound::dual {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool needs_routing(const circuits::Layer& layer) {
  for (const auto& stage : layer.stages)
    for (const auto& g : stage)
      if (g.kind == circuits::GateKind::two_site && std::abs(g.sites[0] - g.sites[1]) != 1) return true;
  return false;
}

const circuits::Layer& routed(const circuits::Layer& layer, circuits::Layer& storage) {
  if (!needs_routing(layer)) return layer;
  storage = circuits::route_nearest_neighbour(layer);
  return storage;
}

void check_depths(const DualVariables& duals, const circuits::CircuitSpec& circuit, const mpo::Mpo& target) {
  if (static_cast<int>(duals.sigmas.size()) != circuit.depth())
    throw DimensionError("number of dual variables differs from the circuit depth");
  if (circuit.depth() < 1) throw DomainError("circuit depth must be at least 1");
  if (target.n_sites() != circuit.n_sites) throw DimensionError("target Hamiltonian width differs from the circuit");
  for (const auto& s : duals.sigmas)
    if (s.n_sites() != circuit.n_sites) throw DimensionError("dual variable width differs from the circuit");
}

void check_schedule(const noise::BoundSchedule& schedule, noise::ScheduleKind kind, int depth) {
  if (schedule.kind != kind) throw DomainError("schedule kind does not match the bound");
  if (static_cast<int>(schedule.values.size()) != depth)
    throw DimensionError("schedule length differs from the circuit depth");
  for (double v : schedule.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("schedule entries must be finite and non-negative");
}

BoundReport make_report(BoundMethod method, const DualVariables& duals, const circuits::CircuitSpec& circuit) {
  BoundReport r;
  r.method = method;
  r.n_sites = circuit.n_sites;
  r.depth = circuit.depth();
  r.ansatz = static_cast<long>(duals.bond_cap);
  return r;
}

BoundReport trace_dual(BoundMethod method, const DualVariables& duals, const circuits::CircuitSpec& circuit,
                       const mpo::Mpo& target, const std::vector<double>& caps) {
  const auto start = Clock::now();
  BoundReport r = make_report(method, duals, circuit);
  r.boundary_term = boundary_term(duals, circuit);
  const auto eff = effective_hamiltonians(duals, circuit, target);
  for (size_t t = 0; t < caps.size(); ++t) r.per_step_penalties.push_back(std::sqrt(caps[t]) * eff.frobenius_norms[t]);
  finalize(r);
  r.wall_time_s = seconds_since(start);
  return r;
}

Index refine_cap(const DualVariables& d) {
  if (d.bond_cap > 0) return d.bond_cap;
  Index cap = 1;
  for (const auto& s : d.sigmas) cap = std::max(cap, s.max_bond());
  return cap;
}

}  // namespace

mpo::Mpo apply_layer_adjoint(const mpo::Mpo& a, const circuits::Layer& layer) {
  circuits::Layer storage;
  const circuits::Layer& l = routed(layer, storage);
  mpo::Mpo out = a;
  if (!noise::is_identity(l.noise)) {
    if (const auto* dep = std::get_if<noise::Depolarizing>(&l.noise)) {
      for (int s = 0; s < out.n_sites(); ++s) out = mpo::apply_depolarizing_adjoint(out, dep->p, s);
    } else {
      const Mat4 adj = noise::superoperator(l.noise).adjoint();
      for (int s = 0; s < out.n_sites(); ++s) out = mpo::apply_site_map(out, adj, s);
    }
  }
  for (auto st = l.stages.rbegin(); st != l.stages.rend(); ++st)
    for (const auto& g : *st) out = mpo::apply_gate_adjoint(out, g.matrix, g.sites);
  return out;
}

mpo::Mpo apply_layer(const mpo::Mpo& a, const circuits::Layer& layer) {
  circuits::Layer storage;
  const circuits::Layer& l = routed(layer, storage);
  mpo::Mpo out = a;
  for (const auto& stage : l.stages)
    for (const auto& g : stage) out = mpo::apply_gate_adjoint(out, g.matrix.adjoint(), g.sites);
  if (!noise::is_identity(l.noise)) {
    const Mat4 sup = noise::superoperator(l.noise);
    for (int s = 0; s < out.n_sites(); ++s) out = mpo::apply_site_map(out, sup, s);
  }
  return out;
}

DualVariables heisenberg_tebd(const circuits::CircuitSpec& circuit, const mpo::Mpo& target, Index bond_cap) {
  if (bond_cap < 1) throw DomainError("heisenberg_tebd: bond cap must be at least 1");
  if (circuit.depth() < 1) throw DomainError("heisenberg_tebd: circuit depth must be at least 1");
  if (target.n_sites() != circuit.n_sites)
    throw DimensionError("heisenberg_tebd: target Hamiltonian width differs from the circuit");
  const int d = circuit.depth();
  DualVariables out;
  out.provenance = DualProvenance::heisenberg_tebd;
  out.bond_cap = bond_cap;
  out.sigmas.resize(static_cast<size_t>(d));
  auto top = mpo::compress(mpo::scale(target, -1.0), bond_cap);
  out.sigmas.back() = std::move(top.mpo);
  out.truncation_errors.push_back(top.truncation_error);
  for (int t = d - 1; t >= 1; --t) {
    const mpo::Mpo evolved = apply_layer_adjoint(out.sigmas[static_cast<size_t>(t)], circuit.layers[static_cast<size_t>(t)]);
    auto c = mpo::compress(evolved, bond_cap);
    out.truncation_errors.push_back(c.truncation_error);
    const double norm = mpo::frobenius_norm(c.mpo);
    const double residual = norm > 0.0 ? mpo::hermiticity_residual(c.mpo) / norm : 0.0;
    out.symmetrization_residuals.push_back(residual);
    if (residual > 1e-10) c = mpo::compress(mpo::hermitian_part(c.mpo), bond_cap);
    out.sigmas[static_cast<size_t>(t - 1)] = std::move(c.mpo);
  }
  return out;
}

EffectiveHamiltonians effective_hamiltonians(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                             const mpo::Mpo& target) {
  check_depths(duals, circuit, target);
  const int d = circuit.depth();
  EffectiveHamiltonians out;
  for (int t = 1; t < d; ++t) {
    const mpo::Mpo back =
        apply_layer_adjoint(duals.sigmas[static_cast<size_t>(t)], circuit.layers[static_cast<size_t>(t)]);
    out.h_terms.push_back(mpo::subtract(duals.sigmas[static_cast<size_t>(t - 1)], back));
  }
  out.h_terms.push_back(mpo::add(target, duals.sigmas.back()));
  for (const auto& h : out.h_terms) out.frobenius_norms.push_back(mpo::frobenius_norm(h));
  return out;
}

double boundary_term(const DualVariables& duals, const circuits::CircuitSpec& circuit) {
  if (duals.sigmas.empty()) throw DimensionError("boundary_term: no dual variables");
  const mpo::Mpo first = apply_layer_adjoint(duals.sigmas.front(), circuit.layers.front());
  return -mpo::expectation_product_state_complex(first, circuit.initial_state).real();
}

BoundReport dual_value_trace(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                             const mpo::Mpo& target, const noise::BoundSchedule& schedule) {
  check_depths(duals, circuit, target);
  check_schedule(schedule, noise::ScheduleKind::trace_purity, circuit.depth());
  return trace_dual(BoundMethod::trace_purity_dual, duals, circuit, target, schedule.values);
}

BoundReport tebd_error_bound(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                             const mpo::Mpo& target) {
  if (duals.provenance != DualProvenance::heisenberg_tebd)
    throw DomainError("tebd_error_bound: dual variables must come from heisenberg_tebd");
  check_depths(duals, circuit, target);
  return trace_dual(BoundMethod::tebd_error, duals, circuit, target,
                    std::vector<double>(static_cast<size_t>(circuit.depth()), 1.0));
}

BoundReport dual_value_nonunital(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                 const mpo::Mpo& target, const noise::BoundSchedule& schedule, const Mat2& tau) {
  const auto start = Clock::now();
  check_depths(duals, circuit, target);
  check_schedule(schedule, noise::ScheduleKind::frobenius_distance, circuit.depth());
  check_density_matrix(tau, "dual_value_nonunital: tau");
  BoundReport r = make_report(BoundMethod::nonunital_dual, duals, circuit);
  r.boundary_term = boundary_term(duals, circuit);
  const auto eff = effective_hamiltonians(duals, circuit, target);
  const std::vector<Mat2> taus(static_cast<size_t>(circuit.n_sites), tau);
  for (size_t t = 0; t < eff.h_terms.size(); ++t) {
    const double at_tau = mpo::expectation_product_state_complex(eff.h_terms[t], taus).real();
    r.per_step_penalties.push_back(schedule.values[t] * eff.frobenius_norms[t] - at_tau);
  }
  finalize(r);
  r.wall_time_s = seconds_since(start);
  return r;
}

double architecture_free_bound_nonunital(double target_norm, const Mat2& tau, double relent_final,
                                         const mpo::Mpo& target) {
  if (!(relent_final >= 0.0)) throw DomainError("relative entropy must be non-negative");
  if (!(target_norm >= 0.0)) throw DomainError("operator norm must be non-negative");
  const std::vector<Mat2> taus(static_cast<size_t>(target.n_sites()), tau);
  return mpo::expectation_product_state(target, taus) - target_norm * std::sqrt(relent_final / 2.0);
}

std::vector<mpo::Mpo> ascent_direction(const DualVariables& duals, const circuits::CircuitSpec& circuit,
                                       const mpo::Mpo& target, const noise::BoundSchedule& schedule) {
  check_depths(duals, circuit, target);
  check_schedule(schedule, noise::ScheduleKind::trace_purity, circuit.depth());
  const int d = circuit.depth();
  const auto eff = effective_hamiltonians(duals, circuit, target);
  std::vector<mpo::Mpo> unit(static_cast<size_t>(d));
  for (size_t t = 0; t < unit.size(); ++t) {
    const double norm = eff.frobenius_norms[t];
    unit[t] = norm > 0.0 ? mpo::scale(eff.h_terms[t], 1.0 / norm) : mpo::Mpo::zero(circuit.n_sites);
  }
  std::vector<mpo::Mpo> out;
  for (int t = 1; t <= d; ++t) {
    const auto k = static_cast<size_t>(t - 1);
    mpo::Mpo g = mpo::scale(unit[k], -std::sqrt(schedule.values[k]));
    if (t == 1) {
      const mpo::Mpo state = apply_layer(mpo::Mpo::product(circuit.initial_state), circuit.layers.front());
      g = mpo::subtract(g, state);
    } else {
      const mpo::Mpo fwd = apply_layer(unit[k - 1], circuit.layers[k]);
      g = mpo::add(g, mpo::scale(fwd, std::sqrt(schedule.values[k - 1])));
    }
    out.push_back(std::move(g));
  }
  return out;
}

Refined refine_dual(const DualVariables& initial, const circuits::CircuitSpec& circuit, const mpo::Mpo& target,
                    const noise::BoundSchedule& schedule, const RefineOptions& options) {
  if (options.max_iters < 1) throw DomainError("refine_dual: max_iters must be at least 1");
  const auto start = Clock::now();
  const Index cap = refine_cap(initial);
  Refined out{initial, dual_value_trace(initial, circuit, target, schedule), {}};
  out.duals.bond_cap = cap;
  out.history.push_back(out.report.bound);

  auto candidate = [&](const std::vector<mpo::Mpo>& dir, double alpha) {
    DualVariables c = out.duals;
    c.provenance = DualProvenance::refined;
    for (size_t t = 0; t < c.sigmas.size(); ++t)
      c.sigmas[t] = mpo::compress(mpo::add(c.sigmas[t], mpo::scale(dir[t], alpha)), cap).mpo;
    return c;
  };
  auto value = [&](const DualVariables& c) {
    const double v = dual_value_trace(c, circuit, target, schedule).bound;
    return std::isfinite(v) ? v : -HUGE_VAL;
  };

  double alpha = 0.0;
  for (int it = 0; it < options.max_iters; ++it) {
    std::vector<mpo::Mpo> dir;
    try {
      dir = ascent_direction(out.duals, circuit, target, schedule);
    } catch (const NumericalError&) {
      break;
    }
    double dir_norm2 = 0.0;
    for (const auto& g : dir) dir_norm2 += std::pow(mpo::frobenius_norm(g), 2);
    if (!(dir_norm2 > 0.0) || !std::isfinite(dir_norm2)) break;
    if (alpha == 0.0) alpha = 0.1 * std::max(mpo::frobenius_norm(target), 1e-12) / std::sqrt(dir_norm2);

    const double base = out.report.bound;
    double best_alpha = 0.0, best = base;
    // Grow the step while it keeps improving, otherwise shrink until it does.
    double a = alpha;
    double fa = value(candidate(dir, a));
    if (fa > best) {
      best = fa;
      best_alpha = a;
      for (int k = 0; k < 40; ++k) {
        const double f2 = value(candidate(dir, 2 * a));
        if (!(f2 > best)) break;
        a *= 2;
        best = f2;
        best_alpha = a;
      }
    } else {
      for (int k = 0; k < 60 && best_alpha == 0.0; ++k) {
        a *= 0.5;
        fa = value(candidate(dir, a));
        if (fa > best) {
          best = fa;
          best_alpha = a;
        }
      }
    }
    if (best_alpha == 0.0) break;
    // Golden-section polish on [best_alpha / 2, 2 best_alpha].
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.5 * best_alpha, hi = 2.0 * best_alpha;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = value(candidate(dir, x1)), f2 = value(candidate(dir, x2));
    for (int k = 0; k < 30; ++k) {
      if (f1 > f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = value(candidate(dir, x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = value(candidate(dir, x2));
      }
    }
    if (f1 > best) best = f1, best_alpha = x1;
    if (f2 > best) best = f2, best_alpha = x2;

    DualVariables next = candidate(dir, best_alpha);
    BoundReport report = dual_value_trace(next, circuit, target, schedule);
    if (!(report.bound > base)) break;
    out.duals = std::move(next);
    out.report = std::move(report);
    out.history.push_back(out.report.bound);
    alpha = best_alpha;
    if (out.report.bound - base < options.step_tolerance) break;
  }
  out.report.ansatz = static_cast<long>(cap);
  out.report.wall_time_s = seconds_since(start);
  return out;
}

}  // namespace dualbound::dual
