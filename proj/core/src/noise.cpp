#include "dualbound/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dualbound/circuits.hpp"
#include "dualbound/errors.hpp"
#include "dualbound/pauli.hpp"

namespace dualbound::noise {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

// vec(W X W^dag) = L vec(X), L[(o,i),(a,b)] = W[o,a] conj(W[i,b])
Mat4 conjugation_superoperator(const Mat2& w) {
  Mat4 l;
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 2; ++i)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) l(o * 2 + i, a * 2 + b) = w(o, a) * std::conj(w(i, b));
  return l;
}

// |vec(rho)><vec(I)|, i.e. X -> Tr(X) rho
Mat4 replacement_superoperator(const Mat2& rho) {
  Mat4 l = Mat4::Zero();
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 2; ++i) {
      l(o * 2 + i, 0) = rho(o, i);
      l(o * 2 + i, 3) = rho(o, i);
    }
  return l;
}

double min_eigenvalue(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Mat4 identity_kron(const Mat2& tau) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<2, 2>() = tau;
  m.bottomRightCorner<2, 2>() = tau;
  return m;
}

Mat2 inverse_sqrt(const Mat2& tau) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(tau);
  if (es.eigenvalues()(0) <= 1e-10)
    throw DomainError("tau is not full rank; the relative-entropy schedule is undefined");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

BoundSchedule decay_schedule(ScheduleKind kind, int n, double p, int depth) {
  if (depth < 1) throw DomainError("schedule depth must be at least 1");
  if (n < 1) throw DomainError("schedule needs at least one site");
  check_probability(p, "noise probability");
  BoundSchedule s{kind, {}, n, depth, p};
  for (int t = 1; t <= depth; ++t) {
    const double survive = std::pow(1.0 - p, t);
    s.values.push_back(kind == ScheduleKind::trace_purity ? std::exp2(-n * (1.0 - survive)) : n * survive);
  }
  return s;
}

}  // namespace

void validate(const NoiseModel& model) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Depolarizing>) {
          check_probability(m.p, "depolarizing p");
        } else if constexpr (std::is_same_v<T, UnitalPauli>) {
          check_probability(m.px, "p_x");
          check_probability(m.py, "p_y");
          check_probability(m.pz, "p_z");
          if (m.px + m.py + m.pz > 1.0) throw DomainError("p_x + p_y + p_z must not exceed 1");
          if (!is_unitary(m.u) || !is_unitary(m.v)) throw DomainError("unital channel rotations must be unitary");
        } else if constexpr (std::is_same_v<T, Replacement>) {
          check_probability(m.q, "replacement q");
          check_density_matrix(m.tau, "replacement tau");
        } else {
          check_choi(m.choi);
        }
      },
      model);
}

std::string kind_name(const NoiseModel& model) {
  static const char* names[] = {"depolarizing", "unital_pauli", "replacement", "general"};
  return names[model.index()];
}

bool is_identity(const NoiseModel& model) {
  const auto* d = std::get_if<Depolarizing>(&model);
  return d != nullptr && d->p == 0.0;
}

Mat4 superoperator(const NoiseModel& model) {
  validate(model);
  return std::visit(
      [](const auto& m) -> Mat4 {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Depolarizing>) {
          return (1.0 - m.p) * Mat4::Identity() + m.p * replacement_superoperator(Mat2::Identity() / 2.0);
        } else if constexpr (std::is_same_v<T, UnitalPauli>) {
          const double p = m.px + m.py + m.pz;
          Mat4 l = (1.0 - p) * Mat4::Identity();
          const double probs[] = {m.px, m.py, m.pz};
          const char letters[] = {'X', 'Y', 'Z'};
          for (int k = 0; k < 3; ++k)
            l += probs[k] * conjugation_superoperator(m.v * pauli_matrix(letters[k]) * m.u);
          return l;
        } else if constexpr (std::is_same_v<T, Replacement>) {
          return (1.0 - m.q) * Mat4::Identity() + m.q * replacement_superoperator(m.tau);
        } else {
          return superoperator_from_choi(m.choi);
        }
      },
      model);
}

ChoiMatrix choi_matrix(const NoiseModel& model) {
  const Mat4 l = superoperator(model);
  Mat4 phi;
  for (int j = 0; j < 2; ++j)
    for (int a = 0; a < 2; ++a)
      for (int k = 0; k < 2; ++k)
        for (int b = 0; b < 2; ++b) phi(j * 2 + a, k * 2 + b) = l(a * 2 + b, j * 2 + k);
  return {phi};
}

Mat4 superoperator_from_choi(const Mat4& choi) {
  Mat4 l;
  for (int j = 0; j < 2; ++j)
    for (int a = 0; a < 2; ++a)
      for (int k = 0; k < 2; ++k)
        for (int b = 0; b < 2; ++b) l(a * 2 + b, j * 2 + k) = choi(j * 2 + a, k * 2 + b);
  return l;
}

void check_choi(const Mat4& choi) {
  if (!is_hermitian(choi, 1e-10)) throw DomainError("Choi matrix is not Hermitian");
  if (min_eigenvalue(choi) < -1e-10) throw DomainError("Choi matrix is not positive semidefinite");
  // Trace over the output factor must give the identity on the input.
  Mat2 reduced;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) reduced(j, k) = choi(j * 2, k * 2) + choi(j * 2 + 1, k * 2 + 1);
  if ((reduced - Mat2::Identity()).norm() > 1e-10) throw DomainError("Choi matrix is not trace preserving");
}

BoundSchedule purity_schedule_depolarizing(int n, double p, int depth) {
  return decay_schedule(ScheduleKind::trace_purity, n, p, depth);
}

BoundSchedule info_schedule_depolarizing(int n, double p, int depth) {
  return decay_schedule(ScheduleKind::information, n, p, depth);
}

BoundSchedule purity_schedule_unital(int n, double px, double py, double pz, int depth) {
  if (px <= 0.0 || py <= 0.0 || pz <= 0.0)
    throw NotApplicableError("unital purity schedule needs p_x, p_y, p_z > 0 (channel not primitive)");
  if (px + py + pz >= 1.0) throw DomainError("p_x + p_y + p_z must be below 1");
  return decay_schedule(ScheduleKind::trace_purity, n, std::min({px, py, pz}), depth);
}

BoundSchedule unit_purity_schedule(int n, int depth) {
  BoundSchedule s{ScheduleKind::trace_purity, std::vector<double>(static_cast<size_t>(depth), 1.0), n, depth, 0.0};
  return s;
}

double max_replacement_fraction(const ChoiMatrix& choi, const Mat2& tau) {
  check_choi(choi.matrix);
  check_density_matrix(tau, "replacement tau");
  {
    Eigen::SelfAdjointEigenSolver<Mat2> es(tau, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 1e-10) throw DomainError("max_replacement_fraction: tau must be full rank");
  }
  const Mat4 itau = identity_kron(tau);
  auto slack = [&](double q) { return min_eigenvalue(choi.matrix - q * itau); };
  if (slack(0.0) <= 1e-12)
    throw NotApplicableError("channel lacks full Kraus rank: no replacement component with q > 0");
  if (slack(1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (slack(mid) >= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

double dinf_term(const Mat2& v, const Mat2& tau) {
  const Mat2 s = inverse_sqrt(tau);
  const Mat2 m = s * v * tau * v.adjoint() * s;
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double bits = std::log2(es.eigenvalues()(1));
  // Rounding residue of an exact fixed point; left in, it would be blown up
  // by the fourth root in the distance schedule.
  return bits < 1e-14 ? 0.0 : bits;
}

double zero_state_relative_entropy(int n, const Mat2& tau) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(tau);
  if (es.eigenvalues()(0) <= 1e-10) throw DomainError("tau is not full rank; relative entropy is infinite");
  double v = 0.0;
  for (int k = 0; k < 2; ++k) v -= std::norm(es.eigenvectors()(0, k)) * std::log2(es.eigenvalues()(k));
  return n * v;
}

RelativeEntropySchedule relative_entropy_schedule(const circuits::CircuitSpec& circuit, const Mat2& tau, double q,
                                                  double rho0_relent) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("relative_entropy_schedule: q must lie in (0, 1)");
  if (!(rho0_relent >= 0.0)) throw DomainError("relative_entropy_schedule: initial relative entropy must be >= 0");
  inverse_sqrt(tau);
  Mat4 tt;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) tt.block<2, 2>(a * 2, b * 2) = tau(a, b) * tau;

  std::vector<double> gate_terms;
  for (const auto& layer : circuit.layers) {
    double g = 0.0;
    for (const auto& stage : layer.stages)
      for (const auto& gate : stage) {
        if (gate.kind == circuits::GateKind::two_site) {
          const Mat4 u = gate.matrix;
          if ((u * tt - tt * u).norm() > 1e-10)
            throw NotApplicableError("two-site gate does not commute with tau (x) tau");
        } else {
          g += dinf_term(Mat2(gate.matrix), tau);
        }
      }
    gate_terms.push_back(g);
  }

  RelativeEntropySchedule out;
  out.distance.kind = ScheduleKind::frobenius_distance;
  out.distance.n_sites = circuit.n_sites;
  out.distance.depth = circuit.depth();
  out.distance.rate = q;
  double d = rho0_relent;
  for (double g : gate_terms) {
    // D_t = (1-q) (D_{t-1} + 2 g_t) unrolls to the closed-form sum.
    d = (1.0 - q) * (d + 2.0 * g);
    out.relative_entropy.push_back(d);
    out.distance.values.push_back(std::pow(2.0 * d, 0.25));
  }
  return out;
}

double purity_only_bound(const VecR& spectrum, double purity) {
  const Index m = spectrum.size();
  if (m == 0) throw DimensionError("purity_only_bound: empty spectrum");
  if (purity < 1.0 / static_cast<double>(m) - 1e-15)
    throw DomainError("purity_only_bound: purity cap below that of the maximally mixed state");
  std::vector<double> e(spectrum.data(), spectrum.data() + m);
  std::sort(e.begin(), e.end());
  if (purity >= 1.0) return e.front();
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (Index k = 1; k <= m; ++k) {
    sum += e[static_cast<size_t>(k - 1)];
    const double kk = static_cast<double>(k);
    const double mean = sum / kk;
    if (purity < 1.0 / kk - 1e-15) continue;
    double spread = 0.0;
    for (Index i = 0; i < k; ++i) spread += (e[static_cast<size_t>(i)] - mean) * (e[static_cast<size_t>(i)] - mean);
    if (spread <= 0.0) {
      best = std::min(best, mean);
      continue;
    }
    const double beta = std::sqrt(std::max(0.0, purity - 1.0 / kk) / spread);
    // Weights x_i = 1/k + beta (mean - e_i) must stay non-negative.
    if (1.0 / kk + beta * (mean - e[static_cast<size_t>(k - 1)]) < -1e-14) continue;
    best = std::min(best, mean - beta * spread);
  }
  return best;
}

}  // namespace dualbound::noise
