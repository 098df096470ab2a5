#pragma once

#include <vector>

#include "dualbound/pauli.hpp"
#include "dualbound/types.hpp"

namespace dualbound::mpo {

// Physical leg index for the (out, in) pair of an operator site.
constexpr int phys(int out, int in) { return out * 2 + in; }

// Rank-4 site tensor (left bond, out, in, right bond) with the (out, in) pair
// fused into one dimension-4 leg. Stored as a left x (4 * right) matrix whose
// column index is phys + 4 * r, so the (4 * left) x right view is a free
// reshape with row index l + left * phys.
class SiteTensor {
 public:
  SiteTensor() = default;
  SiteTensor(Index left, Index right);
  explicit SiteTensor(MatC right_matrix);  // rows = left, cols = 4 * right

  Index left_dim() const { return m_.rows(); }
  Index right_dim() const { return m_.cols() / 4; }

  cplx& operator()(Index l, int p, Index r) { return m_(l, p + 4 * r); }
  cplx operator()(Index l, int p, Index r) const { return m_(l, p + 4 * r); }

  // left x (4 * right)
  MatC& right_matrix() { return m_; }
  const MatC& right_matrix() const { return m_; }

  // (4 * left) x right
  Eigen::Map<MatC> left_matrix() { return {m_.data(), m_.rows() * 4, right_dim()}; }
  Eigen::Map<const MatC> left_matrix() const { return {m_.data(), m_.rows() * 4, right_dim()}; }

  static SiteTensor from_left_matrix(const MatC& m, Index left);

 private:
  MatC m_;
};

enum class CanonicalKind { none, left, right, mixed };

struct CanonicalForm {
  CanonicalKind kind = CanonicalKind::none;
  int center = 0;
};

class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<SiteTensor> sites, CanonicalForm form = {});

  static Mpo identity(int n);
  static Mpo zero(int n);
  static Mpo product(const std::vector<Mat2>& ops);

  int n_sites() const { return static_cast<int>(sites_.size()); }
  const SiteTensor& site(int i) const { return sites_[static_cast<size_t>(i)]; }
  SiteTensor& site(int i) { return sites_[static_cast<size_t>(i)]; }
  const std::vector<SiteTensor>& sites() const { return sites_; }

  // Bond dimensions between sites (n - 1 entries).
  std::vector<Index> bond_dims() const;
  Index max_bond() const;

  CanonicalForm canonical_form() const { return form_; }
  void set_canonical_form(CanonicalForm f) { form_ = f; }

  // Dense 2^n x 2^n matrix, site 0 most significant. n <= kMaxDenseQubits.
  MatC to_dense() const;

  // Conjugate transpose.
  Mpo adjoint() const;

 private:
  std::vector<SiteTensor> sites_;
  CanonicalForm form_;
};

struct Compressed {
  Mpo mpo;
  double truncation_error = 0.0;
};

inline constexpr double kSingularFloor = 1e-14;

Mpo from_pauli_sum(const std::vector<PauliTerm>& terms, int n_sites);

Mpo add(const Mpo& a, const Mpo& b);
Mpo scale(const Mpo& a, double c);
Mpo subtract(const Mpo& a, const Mpo& b);

cplx trace(const Mpo& a);
// Tr(a^dag b)
cplx hs_inner(const Mpo& a, const Mpo& b);
double frobenius_norm(const Mpo& a);

// Left QR sweep followed by a right-to-left truncated SVD sweep. The
// returned error is the exact Frobenius distance to the input.
Compressed compress(const Mpo& a, Index max_bond);

// U^dag a U on one site or two adjacent sites.
Mpo apply_gate_adjoint(const Mpo& a, const MatC& gate, const std::vector<int>& sites);

// (1-p) a + p Tr_site(a) (x) I/2
Mpo apply_depolarizing_adjoint(const Mpo& a, double p, int site);

// Applies a 4x4 map to the physical leg of one site; vec index out*2+in.
Mpo apply_site_map(const Mpo& a, const Mat4& map, int site);

// Tr(a * (x)_k rho_k), real part; the imaginary part must be below 1e-10
// relative when `require_real` is set.
double expectation_product_state(const Mpo& a, const std::vector<Mat2>& local_states,
                                 bool require_real = true);
cplx expectation_product_state_complex(const Mpo& a, const std::vector<Mat2>& local_states);

// |a - a^dag|_F
double hermiticity_residual(const Mpo& a);
Mpo hermitian_part(const Mpo& a);

}  // namespace dualbound::mpo
