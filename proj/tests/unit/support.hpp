#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "freeconv/common.hpp"
#include "freeconv/ncpoly.hpp"

namespace testing_support {

using freeconv::cplx;
using freeconv::Matrix;

inline std::mt19937_64& engine() {
  static std::mt19937_64 eng(20240611);
  return eng;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine()); }

inline int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine()); }

inline cplx random_complex(double scale = 1.0) { return {uniform(-scale, scale), uniform(-scale, scale)}; }

inline Matrix random_matrix(int n, double scale = 1.0) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = random_complex(scale);
  return a;
}

inline Matrix random_hermitian(int n, double scale = 1.0) {
  Matrix a = random_matrix(n, scale);
  return ((a + a.adjoint()) / 2.0).eval();
}

// Random polynomial with up to max_terms words of length <= max_degree.
inline freeconv::ncpoly::NCPolynomial random_polynomial(int r, int max_degree, int max_terms) {
  freeconv::ncpoly::NCPolynomial p(r);
  const int terms = uniform_int(1, max_terms);
  for (int t = 0; t < terms; ++t) {
    freeconv::ncpoly::Word w(static_cast<std::size_t>(uniform_int(0, max_degree)));
    for (int& g : w) g = uniform_int(1, r);
    p.add_term(w, random_complex());
  }
  return p;
}

// p + p*, with at least one generator present.
inline freeconv::ncpoly::NCPolynomial random_self_adjoint(int r, int max_degree, int max_terms) {
  for (;;) {
    auto q = random_polynomial(r, max_degree, max_terms);
    auto p = q + freeconv::ncpoly::adjoint(q);
    if (p.degree() >= 1) return p;
  }
}

// Sorted eigenvalues of a Hermitian matrix.
inline std::vector<double> eigenvalues(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

}  // namespace testing_support
