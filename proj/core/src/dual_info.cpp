#include "dualbound/dual_info.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>

#include "dualbound/errors.hpp"

namespace dualbound::info {

namespace {

constexpr double kLambdaMax = 1e9;
constexpr int kGoldenIters = 200;
constexpr int kMaxEnumeratedSites = 24;

// Maximizes a unimodal f on [log lo, log hi]; returns the argmax in lambda.
template <class F>
double golden_log_max(F f, double lo, double hi) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(lo), b = std::log(hi);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
  for (int k = 0; k < kGoldenIters && b - a > 1e-14; ++k) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(std::exp(x2));
    }
  }
  double best = std::exp(0.5 * (a + b));
  for (double x : {lo, hi})
    if (f(x) > f(best)) best = x;
  return best;
}

Spectrum from_levels(const std::map<double, double>& levels) {
  Spectrum s;
  s.energies.resize(static_cast<Index>(levels.size()));
  s.log_multiplicities.resize(static_cast<Index>(levels.size()));
  Index i = 0;
  for (const auto& [e, m] : levels) {
    s.energies(i) = e;
    s.log_multiplicities(i) = std::log(m);
    ++i;
  }
  return s;
}

}  // namespace

Spectrum dense_spectrum(const MatC& h) {
  if (!is_hermitian(h)) throw DomainError("dense_spectrum: matrix is not Hermitian");
  Spectrum s;
  s.energies = Eigen::SelfAdjointEigenSolver<MatC>(h, Eigen::EigenvaluesOnly).eigenvalues();
  s.log_multiplicities = VecR::Zero(s.energies.size());
  return s;
}

Spectrum commuting_spectrum(const circuits::TargetHamiltonian& target, int n) {
  bool single_equal = !target.terms.empty() && static_cast<int>(target.terms.size()) == n;
  std::vector<int> seen(static_cast<size_t>(n), 0);
  for (const auto& t : target.terms) {
    if (static_cast<int>(t.letters.size()) != n) throw DimensionError("commuting_spectrum: term width differs from n");
    if (t.letters.find_first_not_of("IZ") != std::string::npos)
      throw NotApplicableError("free energy requires spectrum access: target has non-Z terms");
    if (std::count(t.letters.begin(), t.letters.end(), 'Z') != 1 ||
        t.coefficient != target.terms.front().coefficient) {
      single_equal = false;
    } else {
      seen[t.letters.find('Z')]++;
    }
  }
  if (single_equal && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; })) {
    // c sum Z_i has eigenvalue c (n - 2k) with multiplicity C(n, k).
    const double c = target.terms.front().coefficient;
    Spectrum s;
    s.energies.resize(n + 1);
    s.log_multiplicities.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
      s.energies(k) = target.scale * c * (n - 2 * k) + target.shift;
      s.log_multiplicities(k) = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    }
    return s;
  }
  if (n > kMaxEnumeratedSites) throw NotApplicableError("free energy requires spectrum access: too many sites");
  std::map<double, double> levels;
  const std::uint64_t dim = std::uint64_t(1) << n;
  for (std::uint64_t x = 0; x < dim; ++x) {
    double e = 0.0;
    for (const auto& t : target.terms) {
      int parity = 0;
      for (int j = 0; j < n; ++j)
        if (t.letters[static_cast<size_t>(j)] == 'Z' && ((x >> (n - 1 - j)) & 1U)) parity ^= 1;
      e += parity ? -t.coefficient : t.coefficient;
    }
    levels[target.scale * e + target.shift] += 1.0;
  }
  return from_levels(levels);
}

double gibbs_free_energy(const Spectrum& spectrum, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("gibbs_free_energy: lambda must be positive");
  if (spectrum.energies.size() == 0) throw DimensionError("gibbs_free_energy: empty spectrum");
  const double emin = spectrum.energies.minCoeff();
  // log-sum-exp of ln m_i - (e_i - emin) / lambda; the largest exponent is at
  // least ln m at emin, so no overflow.
  const VecR x = spectrum.log_multiplicities.array() - (spectrum.energies.array() - emin) / lambda;
  const double xmax = x.maxCoeff();
  const double lse = xmax + std::log((x.array() - xmax).exp().sum());
  return emin - lambda * lse;
}

double gibbs_free_energy_dense(const MatC& h, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("gibbs_free_energy: lambda must be positive");
  if (h.rows() > (Index(1) << kMaxDenseQubits)) throw DomainError("gibbs_free_energy_dense: matrix too large");
  return gibbs_free_energy(dense_spectrum(h), lambda);
}

InfoBound info_bound(const Spectrum& spectrum, int n, double p, int depth, double lambda_c) {
  const auto start = std::chrono::steady_clock::now();
  if (!(lambda_c > 0.0)) throw DomainError("info_bound: lambda_c must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("info_bound: p must lie in [0, 1]");
  if (depth < 0) throw DomainError("info_bound: depth must be non-negative");
  const double entropy_nats = (n - n * std::pow(1.0 - p, depth)) * std::log(2.0);
  auto objective = [&](double lambda) { return lambda * entropy_nats + gibbs_free_energy(spectrum, lambda); };
  InfoBound out;
  out.lambda = lambda_c >= kLambdaMax ? lambda_c : golden_log_max(objective, lambda_c, kLambdaMax);
  out.report.method = BoundMethod::info_only;
  out.report.n_sites = n;
  out.report.depth = depth;
  out.report.boundary_term = objective(out.lambda);
  finalize(out.report);
  out.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

InfoDual dual_value_info_dense(const dual::DualVariables& duals, const circuits::CircuitSpec& circuit,
                               const mpo::Mpo& target, const noise::BoundSchedule& schedule,
                               const std::vector<double>& lambdas) {
  const auto start = std::chrono::steady_clock::now();
  const int n = circuit.n_sites, d = circuit.depth();
  if (n > 10) throw DomainError("dual_value_info_dense: limited to 10 qubits");
  if (schedule.kind != noise::ScheduleKind::information) throw DomainError("schedule kind does not match the bound");
  if (static_cast<int>(schedule.values.size()) != d) throw DimensionError("schedule length differs from the circuit depth");
  if (!lambdas.empty() && static_cast<int>(lambdas.size()) != d)
    throw DimensionError("one lambda per time step required");
  for (double l : lambdas)
    if (!(l >= 0.0)) throw DomainError("lambda must be non-negative");

  const auto eff = dual::effective_hamiltonians(duals, circuit, target);
  InfoDual out;
  out.report.method = BoundMethod::info_dual;
  out.report.n_sites = n;
  out.report.depth = d;
  out.report.ansatz = static_cast<long>(duals.bond_cap);
  out.report.boundary_term = dual::boundary_term(duals, circuit);
  for (int t = 0; t < d; ++t) {
    const double cap = schedule.values[static_cast<size_t>(t)];
    if (!(cap >= 0.0)) throw DomainError("schedule entries must be non-negative");
    const MatC h = eff.h_terms[static_cast<size_t>(t)].to_dense();
    const Spectrum s = dense_spectrum(0.5 * (h + h.adjoint()));
    const double entropy_nats = (n - cap) * std::log(2.0);
    const double emin = s.energies.minCoeff();
    // lambda -> 0 limit of the step objective is the smallest eigenvalue.
    auto step = [&](double lambda) {
      return lambda > 0.0 ? lambda * entropy_nats + gibbs_free_energy(s, lambda) : emin;
    };
    double lambda;
    if (!lambdas.empty()) {
      lambda = lambdas[static_cast<size_t>(t)];
    } else {
      const double spread = s.energies.maxCoeff() - emin;
      lambda = golden_log_max(step, std::max(1e-12 * spread, 1e-200), kLambdaMax);
      if (step(0.0) >= step(lambda)) lambda = 0.0;
    }
    out.lambdas.push_back(lambda);
    out.report.per_step_penalties.push_back(-step(lambda));
  }
  finalize(out.report);
  out.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace dualbound::info
