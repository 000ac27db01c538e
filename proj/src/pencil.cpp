#include "freeconv/pencil.hpp"

#include <string>

namespace freeconv {

CoefficientPencil::CoefficientPencil(std::vector<Matrix> coefficients) : coeffs_(std::move(coefficients)) {
  if (coeffs_.empty()) throw Error(ErrorKind::invalid_argument, "pencil needs at least a_0");
  const auto m = coeffs_.front().rows();
  if (m < 1) throw Error(ErrorKind::invalid_argument, "pencil block dimension m must be positive");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    const Matrix& a = coeffs_[i];
    const std::string name = "a_" + std::to_string(i);
    if (a.rows() != m || a.cols() != m)
      throw Error(ErrorKind::invalid_argument, name + " is not " + std::to_string(m) + "x" + std::to_string(m));
    if (!a.allFinite()) throw Error(ErrorKind::invalid_argument, name + " has non-finite entries");
    const double scale = op_norm(a);
    if ((a - a.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw Error(ErrorKind::invalid_argument, name + " is not Hermitian");
  }
}

CoefficientPencil CoefficientPencil::scalar(double a0, const std::vector<double>& a) {
  std::vector<Matrix> c;
  c.push_back(Matrix::Constant(1, 1, a0));
  for (double v : a) c.push_back(Matrix::Constant(1, 1, v));
  return CoefficientPencil(std::move(c));
}

}  // namespace freeconv
