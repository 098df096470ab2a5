#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace dualbound {

using cplx = std::complex<double>;
using Index = Eigen::Index;

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

// Dense reconstructions beyond this many qubits are refused.
inline constexpr int kMaxDenseQubits = 12;

bool is_unitary(const MatC& u, double tol = 1e-10);
bool is_hermitian(const MatC& a, double tol = 1e-10);

// Validates a single-qubit density matrix (Hermitian, unit trace, PSD).
void check_density_matrix(const Mat2& rho, const char* what);

}  // namespace dualbound
