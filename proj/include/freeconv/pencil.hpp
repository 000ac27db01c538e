#pragma once

#include <vector>

#include "freeconv/common.hpp"

namespace freeconv {

// Hermitian coefficients (a_0, ..., a_r) of size m defining
//   s   = a_0 (x) 1 + sum_p a_p (x) x_p
//   S_n = a_0 (x) 1_n + sum_p a_p (x) X_p.
class CoefficientPencil {
 public:
  CoefficientPencil() = default;
  // coefficients[0] is a_0; all must be m x m, finite and Hermitian.
  explicit CoefficientPencil(std::vector<Matrix> coefficients);

  // Scalar pencil a_0 = c0, a_i = c_i (m = 1).
  static CoefficientPencil scalar(double a0, const std::vector<double>& a);

  int m() const { return static_cast<int>(coeffs_.front().rows()); }
  int r() const { return static_cast<int>(coeffs_.size()) - 1; }
  const Matrix& a0() const { return coeffs_.front(); }
  // 1-based, i in 1..r
  const Matrix& a(int i) const { return coeffs_.at(static_cast<std::size_t>(i)); }
  const std::vector<Matrix>& coefficients() const { return coeffs_; }

 private:
  std::vector<Matrix> coeffs_{Matrix::Zero(1, 1)};
};

}  // namespace freeconv
