#include <algorithm>
#include <vector>

#include "doctest.h"
#include "freeconv/ncpoly.hpp"
#include "support.hpp"

using namespace freeconv;
using namespace freeconv::ncpoly;
using namespace testing_support;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Matrix pencil_at(const CoefficientPencil& pc, const std::vector<Matrix>& x) {
  const auto n = x.front().rows();
  Matrix s = kron(pc.a0(), Matrix::Identity(n, n));
  for (int i = 1; i <= pc.r(); ++i) s += kron(pc.a(i), x[static_cast<std::size_t>(i - 1)]);
  return s;
}

// Real z with z E_11 (x) 1 - L singular, through the Schur complement onto the
// output block (the remaining block is the invertible part of the pencil).
std::vector<double> pencil_spectrum(const CoefficientPencil& pc, const std::vector<Matrix>& x) {
  const Matrix L = pencil_at(pc, x);
  const auto n = x.front().rows();
  const auto rest = L.rows() - n;
  Matrix schur = L.topLeftCorner(n, n);
  if (rest > 0) {
    schur -= L.topRightCorner(n, rest) * L.bottomRightCorner(rest, rest).partialPivLu().solve(L.bottomLeftCorner(rest, n));
  }
  Eigen::ComplexEigenSolver<Matrix> es(schur, false);
  std::vector<double> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-8 * std::max(1.0, std::abs(es.eigenvalues()(i))));
    ev.push_back(es.eigenvalues()(i).real());
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

void check_correspondence(const NCPolynomial& p, int n) {
  const auto lin = linearize(p);
  for (const auto& a : lin.pencil.coefficients()) CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  std::vector<Matrix> x;
  for (int i = 0; i < p.num_generators(); ++i) x.push_back(random_hermitian(n));
  const auto direct = eigenvalues(evaluate(p, x));
  const auto via_pencil = pencil_spectrum(lin.pencil, x);
  REQUIRE(direct.size() == via_pencil.size());
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(std::abs(direct[i] - via_pencil[i]) <= 1e-8 * std::max(1.0, std::abs(direct[i])));

  // Each eigenvalue makes the full pencil singular.
  const Matrix L = pencil_at(lin.pencil, x);
  for (double z : direct) {
    const Matrix M = kron(output_corner(lin, z), Matrix::Identity(n, n)) - L;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& sv = svd.singularValues();
    CHECK(sv(sv.size() - 1) <= 1e-8 * sv(0));
  }
}

}  // namespace

TEST_CASE("parse expands products without commuting") {
  auto p = parse("x1*x2 + x2*x1", 2);
  CHECK(p.terms().size() == 2);
  CHECK(p.coefficient({1, 2}) == cplx(1.0));
  CHECK(p.coefficient({2, 1}) == cplx(1.0));

  auto q = parse("(x1 + x2)^2", 2);
  CHECK(q.terms().size() == 4);
  for (Word w : {Word{1, 1}, Word{1, 2}, Word{2, 1}, Word{2, 2}}) CHECK(q.coefficient(w) == cplx(1.0));
}

TEST_CASE("parse literals") {
  auto p = parse("2*x1 - 1.5i*x2 + (3+2i) + i*x1*x1 + 1e-1", 2);
  CHECK(p.coefficient({1}) == cplx(2.0));
  CHECK(p.coefficient({2}) == cplx(0.0, -1.5));
  CHECK(std::abs(p.coefficient({}) - cplx(3.1, 2.0)) < 1e-15);
  CHECK(p.coefficient({1, 1}) == cplx(0.0, 1.0));
  CHECK(parse("  x1 ^ 0 ", 1) == NCPolynomial::constant(1, 1.0));
  CHECK(parse("-(x1)", 1).coefficient({1}) == cplx(-1.0));
}

TEST_CASE("parse errors") {
  auto code_of = [](const char* text, int r) {
    try {
      parse(text, r);
    } catch (const Error& e) {
      return std::pair{e.kind(), std::string(e.what())};
    }
    return std::pair{ErrorKind::invalid_argument, std::string("no error")};
  };
  auto [k1, m1] = code_of("x3", 2);
  CHECK(k1 == ErrorKind::parse);
  CHECK(m1.find("out of range") != std::string::npos);
  auto [k2, m2] = code_of("x1^-1", 1);
  CHECK(k2 == ErrorKind::parse);
  CHECK(m2.find("negative") != std::string::npos);
  auto [k3, m3] = code_of("x1^1.5", 1);
  CHECK(k3 == ErrorKind::parse);
  CHECK(m3.find("integer") != std::string::npos);
  auto [k4, m4] = code_of("x1 + * x2", 2);
  CHECK(k4 == ErrorKind::parse);
  CHECK(m4.find("position") != std::string::npos);
  CHECK(code_of("(x1", 1).first == ErrorKind::parse);
  CHECK(code_of("", 1).first == ErrorKind::parse);
  CHECK(code_of("x0", 1).first == ErrorKind::parse);
}

TEST_CASE("canonical form drops cancelled terms") {
  auto p = parse("x1*x2 - x1*x2 + x1", 2);
  CHECK(p.terms().size() == 1);
  auto q = parse("x1 + 1e-16", 1);
  CHECK(q.terms().size() == 1);
  const auto r = random_polynomial(3, 3, 6);
  for (const auto& [w, c] : r.terms()) CHECK(c != cplx(0.0));
}

TEST_CASE("render round trip") {
  for (int t = 0; t < 200; ++t) {
    const int r = uniform_int(1, 3);
    auto p = random_polynomial(r, 4, 6);
    auto text = render(p);
    CHECK(parse(text, r).terms() == p.terms());
  }
  CHECK(render(NCPolynomial(2)) == "0");
  CHECK(parse(render(parse("x1*x2 + x2*x1", 2)), 2) == parse("x2*x1 + x1*x2", 2));
}

TEST_CASE("adjoint") {
  auto p = parse("i*x1*x2", 2);
  auto a = adjoint(p);
  CHECK(a.terms().size() == 1);
  CHECK(a.coefficient({2, 1}) == cplx(0.0, -1.0));
  auto sym = parse("x1*x2 + x2*x1", 2);
  CHECK(adjoint(sym) == sym);
  CHECK(is_self_adjoint(sym));
  CHECK_FALSE(is_self_adjoint(p));
  for (int t = 0; t < 100; ++t) {
    auto q = random_polynomial(uniform_int(1, 3), 4, 6);
    CHECK(adjoint(adjoint(q)) == q);
  }
}

TEST_CASE("evaluate") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  std::vector<Matrix> x1{d};
  Matrix sq = evaluate(parse("x1^2", 1), x1);
  CHECK(std::abs(sq(0, 0) - 1.0) == 0.0);
  CHECK(std::abs(sq(1, 1) - 4.0) == 0.0);
  CHECK(std::abs(sq(0, 1)) == 0.0);

  Matrix a = random_matrix(3);
  std::vector<Matrix> same{a, a};
  CHECK(evaluate(parse("x1*x2 - x2*x1", 2), same).norm() == 0.0);

  std::vector<Matrix> bad{Matrix::Identity(2, 2), Matrix::Identity(3, 3)};
  CHECK_THROWS_AS(evaluate(parse("x1 + x2", 2), bad), Error);
  std::vector<Matrix> short_tuple{Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(evaluate(parse("x2", 2), short_tuple), Error);
  CHECK(evaluate(parse("3", 1), short_tuple).isApprox(3.0 * Matrix::Identity(2, 2)));
}

TEST_CASE("evaluate preserves self-adjointness") {
  for (int t = 0; t < 100; ++t) {
    const int r = uniform_int(1, 3);
    auto p = random_self_adjoint(r, 3, 5);
    std::vector<Matrix> x;
    for (int i = 0; i < r; ++i) x.push_back(random_hermitian(4));
    const Matrix v = evaluate(p, x);
    CHECK((v - v.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, v.norm()));
  }
}

TEST_CASE("evaluate is a ring homomorphism") {
  for (int t = 0; t < 100; ++t) {
    const int r = uniform_int(1, 3);
    auto p = random_polynomial(r, 3, 4);
    auto q = random_polynomial(r, 3, 4);
    std::vector<Matrix> x;
    for (int i = 0; i < r; ++i) x.push_back(random_matrix(4));
    const Matrix ep = evaluate(p, x);
    const Matrix eq = evaluate(q, x);
    const Matrix prod = evaluate(p * q, x);
    const Matrix sum = evaluate(p + q, x);
    CHECK((prod - ep * eq).norm() <= 1e-10 * std::max(1.0, (ep * eq).norm()));
    CHECK((sum - ep - eq).norm() <= 1e-10 * std::max(1.0, (ep + eq).norm()));
  }
}

TEST_CASE("linearize x1 is already linear") {
  auto lin = linearize(parse("x1", 1));
  CHECK(lin.pencil.m() == 1);
  CHECK(lin.pencil.a0()(0, 0) == cplx(0.0));
  CHECK(lin.pencil.a(1)(0, 0) == cplx(1.0));
  CHECK(lin.output_slot == std::pair{0, 0});
  CHECK(lin.degree == 1);
}

TEST_CASE("linearize rejects constants and non-self-adjoint input") {
  CHECK_THROWS_AS(linearize(parse("3", 1)), Error);
  CHECK_THROWS_AS(linearize(parse("i*x1*x2", 2)), Error);
}

TEST_CASE("linearization eigenvalue correspondence for x1^2 and x1x2 + x2x1") {
  for (int t = 0; t < 50; ++t) check_correspondence(parse("x1^2", 1), 3);
  for (int t = 0; t < 50; ++t) check_correspondence(parse("x1*x2 + x2*x1", 2), 3);
}

TEST_CASE("linearization correspondence on random self-adjoint polynomials") {
  for (int t = 0; t < 100; ++t) check_correspondence(random_self_adjoint(uniform_int(1, 3), 3, 5), 3);
}

TEST_CASE("norm bound") {
  CHECK(norm_bound(parse("x1^2 + 2*x2", 2), 2.0) == doctest::Approx(8.0));
}
