#include "dualbound/pauli.hpp"

#include <string>

#include "dualbound/errors.hpp"

namespace dualbound {

namespace {

Mat2 make(cplx a, cplx b, cplx c, cplx d) {
  Mat2 m;
  m << a, b, c, d;
  return m;
}

}  // namespace

const Mat2& pauli_matrix(char letter) {
  static const Mat2 i = make(1, 0, 0, 1);
  static const Mat2 x = make(0, 1, 1, 0);
  static const Mat2 y = make(0, cplx(0, -1), cplx(0, 1), 0);
  static const Mat2 z = make(1, 0, 0, -1);
  switch (letter) {
    case 'I': return i;
    case 'X': return x;
    case 'Y': return y;
    case 'Z': return z;
    default: throw DomainError(std::string("unknown Pauli letter '") + letter + "'");
  }
}

MatC pauli_string_dense(const std::string& letters) {
  if (static_cast<int>(letters.size()) > kMaxDenseQubits)
    throw DomainError("pauli_string_dense: too many qubits for a dense matrix");
  MatC out = MatC::Ones(1, 1);
  for (char c : letters) {
    const Mat2& p = pauli_matrix(c);
    MatC fixed(out.rows() * 2, out.cols() * 2);
    for (Index a = 0; a < out.rows(); ++a)
      for (Index b = 0; b < out.cols(); ++b)
        fixed.block(a * 2, b * 2, 2, 2) = out(a, b) * p;
    out = std::move(fixed);
  }
  return out;
}

}  // namespace dualbound
