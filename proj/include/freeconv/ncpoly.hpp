#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freeconv/common.hpp"
#include "freeconv/pencil.hpp"

namespace freeconv::ncpoly {

// Sequence of 1-based generator indices; the empty word is the unit.
using Word = std::vector<int>;

// Shorter words first, then lexicographic in generator index.
struct WordOrder {
  bool operator()(const Word& a, const Word& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

// Coefficients below this magnitude are dropped after arithmetic.
inline constexpr double kDropThreshold = 1e-15;

// A *-polynomial in r self-adjoint non-commuting generators.
class NCPolynomial {
 public:
  using TermMap = std::map<Word, cplx, WordOrder>;

  explicit NCPolynomial(int num_generators);

  static NCPolynomial constant(int num_generators, cplx c);
  static NCPolynomial generator(int num_generators, int index);

  int num_generators() const { return r_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // -1 for the zero polynomial.
  int degree() const;
  cplx coefficient(const Word& w) const;

  void add_term(const Word& w, cplx c);

  NCPolynomial& operator+=(const NCPolynomial& o);
  NCPolynomial& operator-=(const NCPolynomial& o);
  NCPolynomial& operator*=(cplx c);

  friend NCPolynomial operator+(NCPolynomial a, const NCPolynomial& b) { return a += b; }
  friend NCPolynomial operator-(NCPolynomial a, const NCPolynomial& b) { return a -= b; }
  friend NCPolynomial operator*(NCPolynomial a, cplx c) { return a *= c; }
  friend NCPolynomial operator*(cplx c, NCPolynomial a) { return a *= c; }
  // Non-commutative product (word concatenation).
  friend NCPolynomial operator*(const NCPolynomial& a, const NCPolynomial& b);
  friend bool operator==(const NCPolynomial& a, const NCPolynomial& b) {
    return a.r_ == b.r_ && a.terms_ == b.terms_;
  }

 private:
  void check_word(const Word& w) const;

  int r_;
  TermMap terms_;
};

NCPolynomial pow(const NCPolynomial& p, int k);

// Grammar: generators x1..xr, real/imaginary literals (2, 1.5, 1e-3, 1.5i, i),
// operators + - * ^ and parentheses; ^ takes a nonnegative integer.
// Throws Error(parse) with the character position on malformed input.
NCPolynomial parse(std::string_view text, int num_generators);

// Canonical text: terms in WordOrder, coefficient as (a+bi) with 17 significant
// digits, joined by " + ". Reparses to an identical term map.
std::string render(const NCPolynomial& p);

// (w, c) -> (reverse(w), conj(c)).
NCPolynomial adjoint(const NCPolynomial& p);

bool is_self_adjoint(const NCPolynomial& p, double rel_tol = 1e-12);

// Sum of coefficient times ordered matrix product; empty word gives c * 1.
Matrix evaluate(const NCPolynomial& p, std::span<const Matrix> x);

struct LinearizationResult {
  CoefficientPencil pencil;
  // Position (0-based) where the spectral variable z enters.
  std::pair<int, int> output_slot{0, 0};
  int degree = 0;
};

// Self-adjoint Schur-complement linearization: returns Hermitian A_0..A_r such
// that for Hermitian tuples X and real z, z is an eigenvalue of p(X) iff
// z E_11 (x) 1 - (A_0 (x) 1 + sum A_i (x) X_i) is singular.
LinearizationResult linearize(const NCPolynomial& p);

// Spectral-variable matrix z E_11 of the linearization's size.
Matrix output_corner(const LinearizationResult& lin, cplx z, cplx fill = 0.0);

// Sum of |c_w| * edge^|w|, an upper bound for ||p(x)|| when ||x_i|| <= edge.
double norm_bound(const NCPolynomial& p, double edge);

}  // namespace freeconv::ncpoly
