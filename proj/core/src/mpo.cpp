#include "dualbound/mpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualbound/errors.hpp"

namespace dualbound::mpo {

namespace {

struct ThinSvd {
  MatC u;
  VecR s;
  MatC v;
};

bool orthonormal_columns(const MatC& q) {
  return (q.adjoint() * q - MatC::Identity(q.cols(), q.cols())).norm() <= 1e-10;
}

// Divide-and-conquer SVD, checked; falls back to Jacobi when the result does
// not reconstruct the input. The installed Eigen's BDCSVD breaks on some
// highly degenerate spectra (Pauli-sum images of Clifford circuits).
ThinSvd thin_svd(const MatC& a) {
  {
    Eigen::BDCSVD<MatC> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    if (out.u.allFinite() && out.v.allFinite() && out.s.allFinite() && orthonormal_columns(out.u) &&
        orthonormal_columns(out.v) &&
        (out.u * out.s.asDiagonal() * out.v.adjoint() - a).norm() <= 1e-11 * a.norm())
      return out;
  }
  Eigen::JacobiSVD<MatC> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace

SiteTensor::SiteTensor(Index left, Index right) : m_(MatC::Zero(left, 4 * right)) {}

SiteTensor::SiteTensor(MatC right_matrix) : m_(std::move(right_matrix)) {
  if (m_.cols() % 4 != 0) throw DimensionError("SiteTensor: column count must be a multiple of 4");
}

SiteTensor SiteTensor::from_left_matrix(const MatC& m, Index left) {
  if (m.rows() != 4 * left) throw DimensionError("SiteTensor: left matrix row count must be 4 * left");
  return SiteTensor(MatC(Eigen::Map<const MatC>(m.data(), left, 4 * m.cols())));
}

Mpo::Mpo(std::vector<SiteTensor> sites, CanonicalForm form)
    : sites_(std::move(sites)), form_(form) {
  if (sites_.empty()) throw DimensionError("Mpo: at least one site required");
  if (sites_.front().left_dim() != 1 || sites_.back().right_dim() != 1)
    throw DimensionError("Mpo: boundary bonds must have dimension 1");
  for (size_t k = 0; k + 1 < sites_.size(); ++k)
    if (sites_[k].right_dim() != sites_[k + 1].left_dim())
      throw DimensionError("Mpo: adjacent bond dimensions differ at bond " + std::to_string(k));
}

Mpo Mpo::product(const std::vector<Mat2>& ops) {
  std::vector<SiteTensor> sites;
  sites.reserve(ops.size());
  for (const Mat2& op : ops) {
    SiteTensor t(1, 1);
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 2; ++i) t(0, phys(o, i), 0) = op(o, i);
    sites.push_back(std::move(t));
  }
  return Mpo(std::move(sites));
}

Mpo Mpo::identity(int n) { return product(std::vector<Mat2>(static_cast<size_t>(n), Mat2::Identity())); }

Mpo Mpo::zero(int n) { return product(std::vector<Mat2>(static_cast<size_t>(n), Mat2::Zero())); }

std::vector<Index> Mpo::bond_dims() const {
  std::vector<Index> dims;
  for (size_t k = 0; k + 1 < sites_.size(); ++k) dims.push_back(sites_[k].right_dim());
  return dims;
}

Index Mpo::max_bond() const {
  Index m = 1;
  for (const auto& s : sites_) m = std::max(m, s.right_dim());
  return m;
}

MatC Mpo::to_dense() const {
  const int n = n_sites();
  if (n > kMaxDenseQubits) throw DomainError("Mpo::to_dense: too many sites for a dense matrix");
  // Rows enumerate physical strings p_0 ... p_k in base 4, site 0 most significant.
  MatC block = MatC(sites_[0].left_matrix());
  for (int k = 1; k < n; ++k) {
    const SiteTensor& t = sites_[static_cast<size_t>(k)];
    const MatC x = block * t.right_matrix();
    const Index dr = t.right_dim();
    MatC next(block.rows() * 4, dr);
    for (Index row = 0; row < block.rows(); ++row)
      for (int p = 0; p < 4; ++p)
        for (Index r = 0; r < dr; ++r) next(row * 4 + p, r) = x(row, p + 4 * r);
    block = std::move(next);
  }
  const Index dim = Index(1) << n;
  MatC dense(dim, dim);
  for (Index f = 0; f < block.rows(); ++f) {
    Index rest = f, o = 0, i = 0;
    for (int k = n - 1; k >= 0; --k) {
      const Index p = rest % 4;
      rest /= 4;
      o |= (p / 2) << (n - 1 - k);
      i |= (p % 2) << (n - 1 - k);
    }
    dense(o, i) = block(f, 0);
  }
  return dense;
}

Mpo Mpo::adjoint() const {
  std::vector<SiteTensor> out;
  out.reserve(sites_.size());
  for (const auto& s : sites_) {
    SiteTensor t(s.left_dim(), s.right_dim());
    for (Index r = 0; r < s.right_dim(); ++r)
      for (Index l = 0; l < s.left_dim(); ++l)
        for (int o = 0; o < 2; ++o)
          for (int i = 0; i < 2; ++i) t(l, phys(o, i), r) = std::conj(s(l, phys(i, o), r));
    out.push_back(std::move(t));
  }
  return Mpo(std::move(out));
}

namespace {

void require_same_length(const Mpo& a, const Mpo& b, const char* op) {
  if (a.n_sites() != b.n_sites())
    throw DimensionError(std::string(op) + ": site counts differ (" + std::to_string(a.n_sites()) +
                         " vs " + std::to_string(b.n_sites()) + ")");
}

void require_site(const Mpo& a, int site, const char* op) {
  if (site < 0 || site >= a.n_sites())
    throw DimensionError(std::string(op) + ": site " + std::to_string(site) + " out of range");
}

// Contracts each site's physical leg against a weight vector w[p].
cplx contract_with_weights(const Mpo& a, const std::vector<Eigen::Vector4cd>& weights) {
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (int k = 0; k < a.n_sites(); ++k) {
    const SiteTensor& t = a.site(k);
    const Eigen::RowVectorXcd x = v * t.right_matrix();
    const Eigen::Vector4cd& w = weights[static_cast<size_t>(k)];
    Eigen::RowVectorXcd next(t.right_dim());
    for (Index r = 0; r < t.right_dim(); ++r)
      next(r) = x(4 * r) * w(0) + x(4 * r + 1) * w(1) + x(4 * r + 2) * w(2) + x(4 * r + 3) * w(3);
    v = std::move(next);
  }
  return v(0);
}

Mat4 conjugation_map(const Mat2& g) {
  // vec(G^dag A G)[o,i] = sum_{a,b} conj(G[a,o]) G[b,i] A[a,b]
  Mat4 s;
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 2; ++i)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) s(phys(o, i), phys(a, b)) = std::conj(g(a, o)) * g(b, i);
  return s;
}

}  // namespace

Mpo from_pauli_sum(const std::vector<PauliTerm>& terms, int n_sites) {
  if (n_sites < 1) throw DimensionError("from_pauli_sum: n_sites must be at least 1");
  if (terms.empty()) throw DomainError("from_pauli_sum: empty term list");
  for (const auto& t : terms) {
    if (static_cast<int>(t.letters.size()) != n_sites)
      throw DimensionError("from_pauli_sum: term '" + t.letters + "' has length " +
                           std::to_string(t.letters.size()) + ", expected " + std::to_string(n_sites));
    if (!std::isfinite(t.coefficient)) throw DomainError("from_pauli_sum: non-finite coefficient");
  }
  const Index nt = static_cast<Index>(terms.size());
  std::vector<SiteTensor> sites;
  for (int k = 0; k < n_sites; ++k) {
    const Index dl = (k == 0) ? 1 : nt;
    const Index dr = (k == n_sites - 1) ? 1 : nt;
    SiteTensor s(dl, dr);
    for (Index j = 0; j < nt; ++j) {
      const auto& term = terms[static_cast<size_t>(j)];
      const Mat2& p = pauli_matrix(term.letters[static_cast<size_t>(k)]);
      const cplx c = (k == 0) ? cplx(term.coefficient, 0.0) : cplx(1.0, 0.0);
      const Index l = (dl == 1) ? 0 : j;
      const Index r = (dr == 1) ? 0 : j;
      for (int o = 0; o < 2; ++o)
        for (int i = 0; i < 2; ++i) s(l, phys(o, i), r) += c * p(o, i);
    }
    sites.push_back(std::move(s));
  }
  return compress(Mpo(std::move(sites)), nt).mpo;
}

Mpo add(const Mpo& a, const Mpo& b) {
  require_same_length(a, b, "add");
  const int n = a.n_sites();
  if (n == 1) {
    SiteTensor s(1, 1);
    s.right_matrix() = a.site(0).right_matrix() + b.site(0).right_matrix();
    return Mpo({std::move(s)});
  }
  std::vector<SiteTensor> sites;
  sites.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const SiteTensor& x = a.site(k);
    const SiteTensor& y = b.site(k);
    const bool first = (k == 0), last = (k == n - 1);
    const Index dl = first ? 1 : x.left_dim() + y.left_dim();
    const Index dr = last ? 1 : x.right_dim() + y.right_dim();
    SiteTensor s(dl, dr);
    const Index yl = first ? 0 : x.left_dim();
    const Index yr = last ? 0 : x.right_dim();
    for (Index r = 0; r < x.right_dim(); ++r)
      for (Index l = 0; l < x.left_dim(); ++l)
        for (int p = 0; p < 4; ++p) s(l, p, r) = x(l, p, r);
    for (Index r = 0; r < y.right_dim(); ++r)
      for (Index l = 0; l < y.left_dim(); ++l)
        for (int p = 0; p < 4; ++p) s(yl + l, p, yr + r) = y(l, p, r);
    sites.push_back(std::move(s));
  }
  return Mpo(std::move(sites));
}

Mpo scale(const Mpo& a, double c) {
  std::vector<SiteTensor> sites = a.sites();
  sites.front().right_matrix() *= c;
  return Mpo(std::move(sites), a.canonical_form());
}

Mpo subtract(const Mpo& a, const Mpo& b) { return add(a, scale(b, -1.0)); }

cplx trace(const Mpo& a) {
  const Eigen::Vector4cd w(1.0, 0.0, 0.0, 1.0);
  return contract_with_weights(a, std::vector<Eigen::Vector4cd>(static_cast<size_t>(a.n_sites()), w));
}

cplx hs_inner(const Mpo& a, const Mpo& b) {
  require_same_length(a, b, "hs_inner");
  MatC env = MatC::Ones(1, 1);
  for (int k = 0; k < a.n_sites(); ++k) {
    const SiteTensor& x = a.site(k);
    const SiteTensor& y = b.site(k);
    const MatC m = env * y.right_matrix();
    const Eigen::Map<const MatC> mm(m.data(), x.left_dim() * 4, y.right_dim());
    env = x.left_matrix().adjoint() * mm;
  }
  return env(0, 0);
}

double frobenius_norm(const Mpo& a) {
  // Exact left-canonicalization carrying only the R factors; the norm is that
  // of the final tensor. Avoids the cancellation of sqrt(<a,a>).
  MatC carry = MatC::Ones(1, 1);
  const int n = a.n_sites();
  for (int k = 0; k < n; ++k) {
    const SiteTensor& t = a.site(k);
    const MatC cur = carry * t.right_matrix();
    if (k == n - 1) return cur.norm();
    const Eigen::Map<const MatC> left(cur.data(), cur.rows() * 4, t.right_dim());
    const Index kk = std::min(left.rows(), left.cols());
    Eigen::HouseholderQR<MatC> qr(left);
    carry = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
  }
  return 0.0;
}

Compressed compress(const Mpo& a, Index max_bond) {
  if (max_bond < 1) throw DomainError("compress: max_bond must be at least 1");
  std::vector<SiteTensor> sites = a.sites();
  const int n = a.n_sites();
  for (int k = 0; k + 1 < n; ++k) {
    SiteTensor& t = sites[static_cast<size_t>(k)];
    const MatC left = t.left_matrix();
    const Index kk = std::min(left.rows(), left.cols());
    Eigen::HouseholderQR<MatC> qr(left);
    const MatC q = qr.householderQ() * MatC::Identity(left.rows(), kk);
    const MatC r = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
    const Index dl = t.left_dim();
    t = SiteTensor::from_left_matrix(q, dl);
    SiteTensor& next = sites[static_cast<size_t>(k + 1)];
    next.right_matrix() = r * next.right_matrix();
  }
  double discarded = 0.0;
  for (int k = n - 1; k >= 1; --k) {
    SiteTensor& t = sites[static_cast<size_t>(k)];
    const ThinSvd svd = thin_svd(t.right_matrix());
    const VecR& s = svd.s;
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Index keep = 0;
    while (keep < s.size() && keep < max_bond && s(keep) > kSingularFloor * smax) ++keep;
    keep = std::max<Index>(keep, 1);
    for (Index i = keep; i < s.size(); ++i) discarded += s(i) * s(i);
    t = SiteTensor(MatC(svd.v.leftCols(keep).adjoint()));
    SiteTensor& prev = sites[static_cast<size_t>(k - 1)];
    const MatC us = svd.u.leftCols(keep) * s.head(keep).asDiagonal();
    const MatC merged = prev.left_matrix() * us;
    prev = SiteTensor::from_left_matrix(merged, prev.left_dim());
  }
  return {Mpo(std::move(sites), CanonicalForm{CanonicalKind::right, 0}), std::sqrt(discarded)};
}

Mpo apply_site_map(const Mpo& a, const Mat4& map, int site) {
  require_site(a, site, "apply_site_map");
  std::vector<SiteTensor> sites = a.sites();
  MatC& m = sites[static_cast<size_t>(site)].right_matrix();
  const Mat4 mt = map.transpose();
  for (Index r = 0; r < m.cols() / 4; ++r) m.middleCols(4 * r, 4) = (m.middleCols(4 * r, 4) * mt).eval();
  return Mpo(std::move(sites));
}

Mpo apply_depolarizing_adjoint(const Mpo& a, double p, int site) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("apply_depolarizing_adjoint: p must lie in [0, 1]");
  Mat4 m = Mat4::Zero();
  m(0, 0) = 1.0 - p / 2.0;
  m(0, 3) = p / 2.0;
  m(3, 0) = p / 2.0;
  m(3, 3) = 1.0 - p / 2.0;
  m(1, 1) = 1.0 - p;
  m(2, 2) = 1.0 - p;
  return apply_site_map(a, m, site);
}

Mpo apply_gate_adjoint(const Mpo& a, const MatC& gate, const std::vector<int>& sites) {
  for (int s : sites) require_site(a, s, "apply_gate_adjoint");
  if (!is_unitary(gate)) throw DomainError("apply_gate_adjoint: gate is not unitary");
  if (sites.size() == 1) {
    if (gate.rows() != 2) throw DimensionError("apply_gate_adjoint: one site needs a 2x2 gate");
    return apply_site_map(a, conjugation_map(Mat2(gate)), sites[0]);
  }
  if (sites.size() != 2 || gate.rows() != 4)
    throw DimensionError("apply_gate_adjoint: two sites need a 4x4 gate");
  if (std::abs(sites[0] - sites[1]) != 1)
    throw DimensionError("apply_gate_adjoint: two-site gates must act on adjacent sites");

  Mat4 g = gate;
  int k = sites[0];
  if (sites[1] < sites[0]) {
    Mat4 swap = Mat4::Zero();
    swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
    g = swap * g * swap;
    k = sites[1];
  }

  // Superoperator on (p1, p2), index p1 * 4 + p2.
  Eigen::Matrix<cplx, 16, 16> sup;
  for (int o1 = 0; o1 < 2; ++o1)
    for (int i1 = 0; i1 < 2; ++i1)
      for (int o2 = 0; o2 < 2; ++o2)
        for (int i2 = 0; i2 < 2; ++i2)
          for (int a1 = 0; a1 < 2; ++a1)
            for (int b1 = 0; b1 < 2; ++b1)
              for (int a2 = 0; a2 < 2; ++a2)
                for (int b2 = 0; b2 < 2; ++b2) {
                  const int row = phys(o1, i1) * 4 + phys(o2, i2);
                  const int col = phys(a1, b1) * 4 + phys(a2, b2);
                  sup(row, col) = std::conj(g(a1 * 2 + a2, o1 * 2 + o2)) * g(b1 * 2 + b2, i1 * 2 + i2);
                }

  const SiteTensor& x = a.site(k);
  const SiteTensor& y = a.site(k + 1);
  const Index dl = x.left_dim(), dr = y.right_dim();
  MatC theta = x.left_matrix() * y.right_matrix();  // rows l + dl*p1, cols p2 + 4r
  MatC v(16, dl * dr);
  for (Index r = 0; r < dr; ++r)
    for (int p2 = 0; p2 < 4; ++p2)
      for (int p1 = 0; p1 < 4; ++p1)
        for (Index l = 0; l < dl; ++l) v(p1 * 4 + p2, l + dl * r) = theta(l + dl * p1, p2 + 4 * r);
  const MatC w = sup * v;
  for (Index r = 0; r < dr; ++r)
    for (int p2 = 0; p2 < 4; ++p2)
      for (int p1 = 0; p1 < 4; ++p1)
        for (Index l = 0; l < dl; ++l) theta(l + dl * p1, p2 + 4 * r) = w(p1 * 4 + p2, l + dl * r);

  const ThinSvd svd = thin_svd(theta);
  const VecR& s = svd.s;
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Index keep = 0;
  while (keep < s.size() && s(keep) > kSingularFloor * smax) ++keep;
  keep = std::max<Index>(keep, 1);

  std::vector<SiteTensor> out = a.sites();
  out[static_cast<size_t>(k)] = SiteTensor::from_left_matrix(svd.u.leftCols(keep), dl);
  out[static_cast<size_t>(k + 1)] = SiteTensor(MatC(s.head(keep).asDiagonal() * svd.v.leftCols(keep).adjoint()));
  return Mpo(std::move(out));
}

cplx expectation_product_state_complex(const Mpo& a, const std::vector<Mat2>& local_states) {
  if (static_cast<int>(local_states.size()) != a.n_sites())
    throw DimensionError("expectation_product_state: one local state per site required");
  std::vector<Eigen::Vector4cd> w;
  w.reserve(local_states.size());
  for (const Mat2& rho : local_states) {
    check_density_matrix(rho, "expectation_product_state");
    w.emplace_back(rho(0, 0), rho(1, 0), rho(0, 1), rho(1, 1));
  }
  return contract_with_weights(a, w);
}

double expectation_product_state(const Mpo& a, const std::vector<Mat2>& local_states, bool require_real) {
  const cplx v = expectation_product_state_complex(a, local_states);
  if (require_real && std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v)))
    throw NumericalError("expectation_product_state: expectation of a Hermitian operator has an imaginary part");
  return v.real();
}

double hermiticity_residual(const Mpo& a) { return frobenius_norm(subtract(a, a.adjoint())); }

Mpo hermitian_part(const Mpo& a) { return scale(add(a, a.adjoint()), 0.5); }

}  // namespace dualbound::mpo
