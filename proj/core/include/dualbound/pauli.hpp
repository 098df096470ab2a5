#pragma once

#include <string>
#include <vector>

#include "dualbound/types.hpp"

namespace dualbound {

struct PauliTerm {
  double coefficient = 1.0;
  std::string letters;  // one of I, X, Y, Z per site; site 0 first
};

const Mat2& pauli_matrix(char letter);

// Dense Kronecker product of a Pauli string, site 0 most significant.
MatC pauli_string_dense(const std::string& letters);

}  // namespace dualbound
