#include "dualbound/types.hpp"

#include <string>

#include "dualbound/errors.hpp"

namespace dualbound {

bool is_unitary(const MatC& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const MatC id = MatC::Identity(u.rows(), u.cols());
  return (u.adjoint() * u - id).norm() <= tol * std::max<double>(1.0, static_cast<double>(u.rows()));
}

bool is_hermitian(const MatC& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).norm() <= tol * std::max(1.0, a.norm());
}

void check_density_matrix(const Mat2& rho, const char* what) {
  if (!is_hermitian(rho, 1e-10)) throw DomainError(std::string(what) + ": not Hermitian");
  if (std::abs(rho.trace() - cplx(1.0, 0.0)) > 1e-10)
    throw DomainError(std::string(what) + ": trace is not 1");
  Eigen::SelfAdjointEigenSolver<Mat2> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -1e-10) throw DomainError(std::string(what) + ": not positive semidefinite");
}

}  // namespace dualbound
