#include "freeconv/ncpoly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace freeconv::ncpoly {

NCPolynomial::NCPolynomial(int num_generators) : r_(num_generators) {
  if (num_generators < 1) throw Error(ErrorKind::invalid_argument, "number of generators must be positive");
}

NCPolynomial NCPolynomial::constant(int num_generators, cplx c) {
  NCPolynomial p(num_generators);
  p.add_term({}, c);
  return p;
}

NCPolynomial NCPolynomial::generator(int num_generators, int index) {
  NCPolynomial p(num_generators);
  p.add_term({index}, 1.0);
  return p;
}

int NCPolynomial::degree() const {
  if (terms_.empty()) return -1;
  return static_cast<int>(terms_.rbegin()->first.size());
}

cplx NCPolynomial::coefficient(const Word& w) const {
  auto it = terms_.find(w);
  return it == terms_.end() ? cplx{} : it->second;
}

void NCPolynomial::check_word(const Word& w) const {
  for (int g : w) {
    if (g < 1 || g > r_)
      throw Error(ErrorKind::invalid_argument,
                  "generator index " + std::to_string(g) + " out of range 1.." + std::to_string(r_));
  }
}

void NCPolynomial::add_term(const Word& w, cplx c) {
  check_word(w);
  auto [it, inserted] = terms_.try_emplace(w, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kDropThreshold) terms_.erase(it);
}

NCPolynomial& NCPolynomial::operator+=(const NCPolynomial& o) {
  if (o.r_ != r_) throw Error(ErrorKind::invalid_argument, "generator count mismatch");
  for (const auto& [w, c] : o.terms_) add_term(w, c);
  return *this;
}

NCPolynomial& NCPolynomial::operator-=(const NCPolynomial& o) {
  if (o.r_ != r_) throw Error(ErrorKind::invalid_argument, "generator count mismatch");
  for (const auto& [w, c] : o.terms_) add_term(w, -c);
  return *this;
}

NCPolynomial& NCPolynomial::operator*=(cplx c) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= c;
    if (std::abs(it->second) < kDropThreshold)
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

NCPolynomial operator*(const NCPolynomial& a, const NCPolynomial& b) {
  if (a.r_ != b.r_) throw Error(ErrorKind::invalid_argument, "generator count mismatch");
  NCPolynomial out(a.r_);
  for (const auto& [wa, ca] : a.terms_) {
    for (const auto& [wb, cb] : b.terms_) {
      Word w = wa;
      w.insert(w.end(), wb.begin(), wb.end());
      out.add_term(w, ca * cb);
    }
  }
  return out;
}

NCPolynomial pow(const NCPolynomial& p, int k) {
  if (k < 0) throw Error(ErrorKind::invalid_argument, "negative exponent");
  NCPolynomial out = NCPolynomial::constant(p.num_generators(), 1.0);
  for (int i = 0; i < k; ++i) out = out * p;
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, int r) : s_(text), r_(r) {}

  NCPolynomial run() {
    skip_ws();
    if (pos_ >= s_.size()) fail("empty expression");
    NCPolynomial p = expr();
    skip_ws();
    if (pos_ < s_.size()) fail(std::string("unexpected character '") + s_[pos_] + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::parse, "syntax error at position " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NCPolynomial expr() {
    NCPolynomial acc = term();
    for (;;) {
      if (accept('+'))
        acc += term();
      else if (accept('-'))
        acc -= term();
      else
        return acc;
    }
  }

  NCPolynomial term() {
    NCPolynomial acc = unary();
    while (accept('*')) acc = acc * unary();
    return acc;
  }

  NCPolynomial unary() {
    if (accept('-')) return unary() * cplx{-1.0};
    if (accept('+')) return unary();
    return power();
  }

  NCPolynomial power() {
    NCPolynomial base = primary();
    while (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      if (pos_ < s_.size() && s_[pos_] == '-') fail("negative exponent");
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == start) fail("exponent must be a nonnegative integer");
      if (pos_ < s_.size() && (s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E' || s_[pos_] == 'i'))
        fail("non-integer exponent");
      const std::string digits(s_.substr(start, pos_ - start));
      if (digits.size() > 4) fail("exponent too large");
      base = pow(base, std::stoi(digits));
    }
    return base;
  }

  NCPolynomial primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NCPolynomial inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (c == 'x') {
      const std::size_t at = pos_;
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == start) fail("generator needs an index, e.g. x1");
      const std::string digits(s_.substr(start, pos_ - start));
      const long idx = digits.size() > 6 ? std::numeric_limits<long>::max() : std::stol(digits);
      if (idx < 1 || idx > r_) {
        pos_ = at;
        fail("generator index out of range: x" + digits + " (have " + std::to_string(r_) + " generators)");
      }
      return NCPolynomial::generator(r_, static_cast<int>(idx));
    }
    if (c == 'i') {
      ++pos_;
      return NCPolynomial::constant(r_, I);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    fail(std::string("unexpected character '") + c + "'");
  }

  NCPolynomial number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < s_.size() && (s_[look] == '+' || s_[look] == '-')) ++look;
      if (look < s_.size() && std::isdigit(static_cast<unsigned char>(s_[look]))) {
        pos_ = look;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string lit(s_.substr(start, pos_ - start));
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(lit, &used);
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + lit + "'");
    }
    if (used != lit.size()) {
      pos_ = start;
      fail("malformed number '" + lit + "'");
    }
    if (pos_ < s_.size() && s_[pos_] == 'i') {
      ++pos_;
      return NCPolynomial::constant(r_, cplx{0.0, v});
    }
    return NCPolynomial::constant(r_, cplx{v, 0.0});
  }

  std::string_view s_;
  int r_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NCPolynomial parse(std::string_view text, int num_generators) {
  if (num_generators < 1) throw Error(ErrorKind::invalid_argument, "number of generators must be positive");
  return Parser(text, num_generators).run();
}

std::string render(const NCPolynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [w, c] : p.terms()) {
    if (!first) out += " + ";
    first = false;
    out += "(" + format_double(c.real());
    out += std::signbit(c.imag()) && c.imag() != 0.0 ? "-" : "+";
    out += format_double(std::abs(c.imag())) + "i)";
    for (int g : w) out += "*x" + std::to_string(g);
  }
  return out;
}

NCPolynomial adjoint(const NCPolynomial& p) {
  NCPolynomial out(p.num_generators());
  for (const auto& [w, c] : p.terms()) out.add_term(Word(w.rbegin(), w.rend()), std::conj(c));
  return out;
}

bool is_self_adjoint(const NCPolynomial& p, double rel_tol) {
  double scale = 0.0;
  for (const auto& [w, c] : p.terms()) scale = std::max(scale, std::abs(c));
  const NCPolynomial diff = p - adjoint(p);
  for (const auto& [w, c] : diff.terms())
    if (std::abs(c) > rel_tol * std::max(scale, 1.0)) return false;
  return true;
}

Matrix evaluate(const NCPolynomial& p, std::span<const Matrix> x) {
  if (x.empty()) throw Error(ErrorKind::invalid_argument, "evaluate needs at least one matrix");
  const auto n = x.front().rows();
  for (const Matrix& xi : x) {
    if (xi.rows() != n || xi.cols() != n)
      throw Error(ErrorKind::invalid_argument, "evaluate: matrices must be square and of equal size");
  }
  Matrix out = Matrix::Zero(n, n);
  for (const auto& [w, c] : p.terms()) {
    Matrix prod = Matrix::Identity(n, n);
    for (int g : w) {
      if (static_cast<std::size_t>(g) > x.size())
        throw Error(ErrorKind::invalid_argument, "evaluate: tuple shorter than generator index " + std::to_string(g));
      prod = prod * x[static_cast<std::size_t>(g - 1)];
    }
    out += c * prod;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linearization
//
// p = c0 + sum_i l_i x_i + sum_j (q_j + q_j*), q_j = c_j y_1 ... y_k (k >= 2).
// Each q_j = -u Q^{-1} v with u = (c y_1, 0, .., 0), v = (0, .., 0, y_k)^T and
// Q = -1 + N (N_{j,j+1} = y_{j+1}) of size k-1, so q + q* is the Schur
// complement of the Hermitian block [[0, Q*], [Q, 0]] against [u, v*].

LinearizationResult linearize(const NCPolynomial& p) {
  if (p.degree() < 1) throw Error(ErrorKind::precondition, "linearize: polynomial must have degree >= 1");
  if (!is_self_adjoint(p)) throw Error(ErrorKind::precondition, "linearize: polynomial is not self-adjoint");

  struct Monomial {
    cplx c;
    Word w;
  };
  std::vector<Monomial> blocks;
  double c0 = 0.0;
  std::vector<double> linear(static_cast<std::size_t>(p.num_generators()) + 1, 0.0);
  int m = 1;
  for (const auto& [w, c] : p.terms()) {
    if (w.empty()) {
      c0 = c.real();
      continue;
    }
    if (w.size() == 1) {
      linear[static_cast<std::size_t>(w[0])] += c.real();
      continue;
    }
    const Word rev(w.rbegin(), w.rend());
    if (rev == w) {
      blocks.push_back({cplx{c.real() / 2.0, 0.0}, w});
    } else if (WordOrder{}(w, rev)) {
      // Average with the partner so the pencil is exactly Hermitian.
      blocks.push_back({(c + std::conj(p.coefficient(rev))) / 2.0, w});
    } else {
      continue;
    }
    m += 2 * (static_cast<int>(w.size()) - 1);
  }

  std::vector<Matrix> coeffs(static_cast<std::size_t>(p.num_generators()) + 1, Matrix::Zero(m, m));
  coeffs[0](0, 0) = c0;
  for (int i = 1; i <= p.num_generators(); ++i) coeffs[static_cast<std::size_t>(i)](0, 0) = linear[static_cast<std::size_t>(i)];

  int base = 1;
  for (const Monomial& mono : blocks) {
    const int k = static_cast<int>(mono.w.size());
    auto left = [&](int j) { return base + (j - 1); };           // u side, j = 1..k-1
    auto right = [&](int j) { return base + (k - 1) + (j - 1); };  // v side
    auto gen = [&](int j) -> Matrix& { return coeffs[static_cast<std::size_t>(mono.w[static_cast<std::size_t>(j - 1)])]; };

    gen(1)(0, left(1)) += mono.c;
    gen(1)(left(1), 0) += std::conj(mono.c);
    gen(k)(0, right(k - 1)) += 1.0;
    gen(k)(right(k - 1), 0) += 1.0;
    for (int j = 1; j <= k - 1; ++j) {
      coeffs[0](right(j), left(j)) = -1.0;
      coeffs[0](left(j), right(j)) = -1.0;
    }
    for (int j = 1; j <= k - 2; ++j) {
      gen(j + 1)(right(j), left(j + 1)) += 1.0;
      gen(j + 1)(left(j + 1), right(j)) += 1.0;
    }
    base += 2 * (k - 1);
  }

  LinearizationResult out;
  out.pencil = CoefficientPencil(std::move(coeffs));
  out.output_slot = {0, 0};
  out.degree = p.degree();
  return out;
}

Matrix output_corner(const LinearizationResult& lin, cplx z, cplx fill) {
  const int m = lin.pencil.m();
  Matrix out = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) out(i, i) = fill;
  out(lin.output_slot.first, lin.output_slot.second) = z;
  return out;
}

double norm_bound(const NCPolynomial& p, double edge) {
  double b = 0.0;
  for (const auto& [w, c] : p.terms()) b += std::abs(c) * std::pow(edge, static_cast<double>(w.size()));
  return b;
}

}  // namespace freeconv::ncpoly
