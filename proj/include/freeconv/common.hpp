#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace freeconv {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr cplx I{0.0, 1.0};

// Error categories surfaced through the C API as status codes.
enum class ErrorKind {
  invalid_argument = 1,
  parse = 2,
  not_converged = 3,
  solver_failure = 4,
  precondition = 5,
  config = 6,
  io = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Largest singular value.
template <class Derived>
double op_norm(const Eigen::MatrixBase<Derived>& expr) {
  const typename Derived::PlainObject a = expr;
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 && a.cols() == 1) return std::abs(a(0, 0));
  Eigen::JacobiSVD<typename Derived::PlainObject> svd(a);
  return svd.singularValues()(0);
}

// Im(a) := (a - a*) / 2i, a Hermitian matrix.
inline Matrix im_part(const Matrix& a) { return (a - a.adjoint()) / (2.0 * I); }

inline bool is_hermitian(const Matrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// Smallest eigenvalue of the Hermitian part of a Hermitian matrix.
inline double min_eigenvalue(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace freeconv
