#include "dualbound/oracle.hpp"

#include <cmath>

#include "dualbound/errors.hpp"
#include "dualbound/pauli.hpp"

namespace dualbound::oracle {

namespace {

Index bit_of(int site, int n) { return Index(1) << (n - 1 - site); }

// Row indices of the 2^k block that differ only on `sites`, in sub-index order
// (first site most significant).
std::vector<Index> block_indices(Index base, const std::vector<int>& sites, int n) {
  const int k = static_cast<int>(sites.size());
  std::vector<Index> idx(static_cast<size_t>(1) << k);
  for (Index s = 0; s < (Index(1) << k); ++s) {
    Index i = base;
    for (int j = 0; j < k; ++j)
      if (s & (Index(1) << (k - 1 - j))) i |= bit_of(sites[static_cast<size_t>(j)], n);
    idx[static_cast<size_t>(s)] = i;
  }
  return idx;
}

Index site_mask(const std::vector<int>& sites, int n) {
  Index m = 0;
  for (int s : sites) m |= bit_of(s, n);
  return m;
}

void check_dense_size(int n) {
  if (n > kMaxDenseQubits) throw DomainError("dense oracle is limited to " + std::to_string(kMaxDenseQubits) + " qubits");
}

}  // namespace

MatC dense_product_state(const std::vector<Mat2>& local_states) {
  check_dense_size(static_cast<int>(local_states.size()));
  MatC rho = MatC::Ones(1, 1);
  for (const Mat2& s : local_states) {
    MatC next(rho.rows() * 2, rho.cols() * 2);
    for (Index a = 0; a < rho.rows(); ++a)
      for (Index b = 0; b < rho.cols(); ++b) next.block(a * 2, b * 2, 2, 2) = rho(a, b) * s;
    rho = std::move(next);
  }
  return rho;
}

void apply_gate(MatC& rho, const MatC& gate, const std::vector<int>& sites, int n) {
  const Index dim = rho.rows();
  const Index mask = site_mask(sites, n);
  const MatC gd = gate.adjoint();
  const Index k = gate.rows();
  MatC rows(k, dim), cols(dim, k);
  for (Index base = 0; base < dim; ++base) {
    if (base & mask) continue;
    const auto idx = block_indices(base, sites, n);
    for (Index a = 0; a < k; ++a) rows.row(a) = rho.row(idx[static_cast<size_t>(a)]);
    rows = (gate * rows).eval();
    for (Index a = 0; a < k; ++a) rho.row(idx[static_cast<size_t>(a)]) = rows.row(a);
  }
  for (Index base = 0; base < dim; ++base) {
    if (base & mask) continue;
    const auto idx = block_indices(base, sites, n);
    for (Index a = 0; a < k; ++a) cols.col(a) = rho.col(idx[static_cast<size_t>(a)]);
    cols = (cols * gd).eval();
    for (Index a = 0; a < k; ++a) rho.col(idx[static_cast<size_t>(a)]) = cols.col(a);
  }
}

void apply_site_channel(MatC& rho, const Mat4& superop, int site, int n) {
  const Index dim = rho.rows();
  const Index b = bit_of(site, n);
  for (Index r = 0; r < dim; ++r) {
    if (r & b) continue;
    for (Index c = 0; c < dim; ++c) {
      if (c & b) continue;
      Eigen::Vector4cd v(rho(r, c), rho(r, c | b), rho(r | b, c), rho(r | b, c | b));
      const Eigen::Vector4cd w = superop * v;
      rho(r, c) = w(0);
      rho(r, c | b) = w(1);
      rho(r | b, c) = w(2);
      rho(r | b, c | b) = w(3);
    }
  }
}

void apply_layer(MatC& rho, const circuits::Layer& layer, int n) {
  for (const auto& stage : layer.stages)
    for (const auto& g : stage) apply_gate(rho, g.matrix, g.sites, n);
  if (noise::is_identity(layer.noise)) return;
  const Mat4 l = noise::superoperator(layer.noise);
  for (int s = 0; s < n; ++s) apply_site_channel(rho, l, s, n);
}

MatC dense_hamiltonian(const circuits::TargetHamiltonian& target, int n) {
  check_dense_size(n);
  const Index dim = Index(1) << n;
  MatC h = MatC::Zero(dim, dim);
  for (const auto& t : target.terms) h += t.coefficient * pauli_string_dense(t.letters);
  if (target.dressing_layer)
    for (const auto& stage : target.dressing_layer->stages)
      for (const auto& g : stage) apply_gate(h, g.matrix, g.sites, n);
  return target.scale * h + target.shift * MatC::Identity(dim, dim);
}

PurityInfo purity_and_info(const MatC& rho) {
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  const int n = static_cast<int>(std::lround(std::log2(static_cast<double>(rho.rows()))));
  PurityInfo out;
  double neg_entropy = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::max(0.0, es.eigenvalues()(i));
    out.trace_purity += l * l;
    if (l > 0.0) neg_entropy += l * std::log2(l);
  }
  out.info_content_bits = n + neg_entropy;
  return out;
}

DenseSimulation dense_simulate(const circuits::CircuitSpec& circuit, const MatC* hamiltonian,
                               const DenseOptions& options) {
  const int n = circuit.n_sites;
  check_dense_size(n);
  circuits::validate(circuit);
  DenseSimulation out;
  out.rho = dense_product_state(circuit.initial_state);
  MatC reference;
  if (options.reference_local_state)
    reference = dense_product_state(std::vector<Mat2>(static_cast<size_t>(n), *options.reference_local_state));
  for (size_t t = 0; t < circuit.layers.size(); ++t) {
    apply_layer(out.rho, circuit.layers[t], n);
    const cplx tr = out.rho.trace();
    if (std::abs(tr - cplx(1.0, 0.0)) > 1e-10)
      throw NumericalError("dense_simulate: trace drifted to " + std::to_string(tr.real()) + " at layer " +
                           std::to_string(t + 1));
    if (options.record_info) {
      const auto pi = purity_and_info(out.rho);
      out.purities.push_back(pi.trace_purity);
      out.info_contents.push_back(pi.info_content_bits);
    } else {
      out.purities.push_back(out.rho.squaredNorm());
    }
    if (options.reference_local_state) out.distances.push_back((out.rho - reference).norm());
  }
  if (hamiltonian != nullptr) out.energy = (*hamiltonian * out.rho).trace().real();
  return out;
}

namespace {

const char kLetters[] = {'I', 'X', 'Y', 'Z'};

// G^dag P G for a 1- or 2-qubit Pauli P; returns the sign and new letters.
std::pair<double, std::string> conjugate_pauli(const MatC& g, const std::string& sub) {
  MatC p = pauli_string_dense(sub);
  const MatC m = g.adjoint() * p * g;
  const int k = static_cast<int>(sub.size());
  const double dim = static_cast<double>(Index(1) << k);
  std::string cand(static_cast<size_t>(k), 'I');
  const int total = 1 << (2 * k);
  for (int code = 0; code < total; ++code) {
    for (int j = 0; j < k; ++j) cand[static_cast<size_t>(j)] = kLetters[(code >> (2 * (k - 1 - j))) & 3];
    const cplx c = (pauli_string_dense(cand).adjoint() * m).trace() / dim;
    if (std::abs(c) > 0.5) {
      if (std::abs(std::abs(c) - 1.0) > 1e-8 || std::abs(c.imag()) > 1e-8)
        throw DomainError("stabilizer_heisenberg: gate is not Clifford");
      return {c.real(), cand};
    }
  }
  throw DomainError("stabilizer_heisenberg: gate is not Clifford");
}

}  // namespace

SignedPauli stabilizer_heisenberg_from(const circuits::CircuitSpec& circuit, const SignedPauli& initial,
                                       int first_layer) {
  if (static_cast<int>(initial.letters.size()) != circuit.n_sites)
    throw DimensionError("stabilizer_heisenberg: Pauli string length differs from the circuit width");
  SignedPauli p = initial;
  for (int t = circuit.depth(); t >= first_layer; --t) {
    const auto& layer = circuit.layers[static_cast<size_t>(t - 1)];
    const auto* dep = std::get_if<noise::Depolarizing>(&layer.noise);
    if (dep == nullptr) throw DomainError("stabilizer_heisenberg: only depolarizing noise is supported");
    for (char c : p.letters)
      if (c != 'I') p.damping *= 1.0 - dep->p;
    for (auto st = layer.stages.rbegin(); st != layer.stages.rend(); ++st)
      for (const auto& g : *st) {
        std::string sub;
        for (int s : g.sites) sub += p.letters[static_cast<size_t>(s)];
        if (sub.find_first_not_of('I') == std::string::npos) continue;
        const auto [sign, out] = conjugate_pauli(g.matrix, sub);
        p.coefficient *= sign;
        for (size_t j = 0; j < g.sites.size(); ++j) p.letters[static_cast<size_t>(g.sites[j])] = out[j];
      }
  }
  return p;
}

SignedPauli stabilizer_heisenberg(const circuits::CircuitSpec& circuit, const SignedPauli& initial) {
  return stabilizer_heisenberg_from(circuit, initial, 1);
}

double stabilizer_energy(const circuits::CircuitSpec& circuit, const circuits::TargetHamiltonian& target) {
  if (target.dressing_layer) throw DomainError("stabilizer_energy: dressed targets are not supported");
  const auto zero = circuits::zero_product_state(circuit.n_sites);
  for (size_t i = 0; i < zero.size(); ++i)
    if ((circuit.initial_state[i] - zero[i]).norm() > 1e-12)
      throw DomainError("stabilizer_energy: initial state must be |0...0>");
  double e = 0.0;
  for (const auto& term : target.terms) {
    const SignedPauli img = stabilizer_heisenberg(circuit, {term.coefficient, term.letters, 1.0});
    if (img.letters.find_first_of("XY") == std::string::npos) e += img.coefficient * img.damping;
  }
  return target.scale * e + target.shift;
}

}  // namespace dualbound::oracle
