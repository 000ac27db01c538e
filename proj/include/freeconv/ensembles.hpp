#pragma once

#include <string>
#include <string_view>

#include "freeconv/common.hpp"
#include "freeconv/rng.hpp"

namespace freeconv::ensembles {

// Symmetric unit-variance law for Wigner entries.
class EntryDistribution {
 public:
  enum class Kind { gaussian, uniform_symmetric, exp_power };

  static EntryDistribution gaussian();
  // Uniform on [-sqrt 3, sqrt 3].
  static EntryDistribution uniform();
  // Density proportional to exp(-|x / s|^alpha), s chosen for unit variance.
  static EntryDistribution exp_power(double alpha);
  // "gaussian", "uniform" or "exp_power:<alpha>".
  static EntryDistribution parse(std::string_view text);

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  double variance() const { return 1.0; }
  bool poincare() const { return true; }
  std::string name() const;

  double kappa4() const { return kappa4_; }
  // exp_power: standard deviation of the unnormalized law exp(-|y|^alpha); 1 otherwise.
  double shape_scale() const { return sigma_; }
  // E[xi^k], exact (odd k give 0).
  double moment(int k) const;
  // E|xi|^k for real k >= 0.
  double abs_moment(double k) const;
  // k-th cumulant from the moments (odd cumulants vanish).
  double cumulant(int k) const;

  double sample(RngStream& rng) const;

 private:
  EntryDistribution(Kind kind, double exponent);

  Kind kind_;
  double exponent_ = 2.0;
  // exp_power: standard deviation of exp(-|y|^alpha), by quadrature.
  double sigma_ = 1.0;
  double kappa4_ = 0.0;
};

// Fourth cumulant E[xi^4] - 3; exp_power uses quadrature of the normalized law.
double kappa4(const EntryDistribution& dist);

// n x n Hermitian X: sqrt(n) X_ii ~ mu; sqrt(2n) Re X_ij, sqrt(2n) Im X_ij ~ mu (i < j).
Matrix sample_wigner(const EntryDistribution& dist, int n, RngStream& rng);

struct WishartSpec {
  int n = 1;
  double alpha = 1.0;
  int p = 1;

  // p = round(alpha n).
  static WishartSpec from_ratio(int n, double alpha);
  static WishartSpec explicit_size(int n, int p);
  // |p / n - alpha|
  double ratio_error() const { return std::abs(static_cast<double>(p) / n - alpha); }
};

// Y = X* X / n with X p x n, iid standard complex Gaussian entries (E|x|^2 = 1).
Matrix sample_wishart(const WishartSpec& spec, RngStream& rng);

// Test function for the cumulant expansion: phi(t) = 1/(z - t) or a constant.
struct TestFunction {
  enum class Kind { resolvent, constant };
  Kind kind = Kind::resolvent;
  cplx z{0.0, 2.0};
  cplx c{1.0, 0.0};

  static TestFunction resolvent(cplx z);
  static TestFunction constant(cplx c);
  // a-th derivative at t.
  cplx derivative(int a, double t) const;
  // sup over real t of |phi^(a)(t)|.
  double sup_derivative(int a) const;
};

struct CumulantExpansionReport {
  cplx value;
  double standard_error = 0.0;
  // sup|phi^(p+1)| E|xi|^(p+2)
  double bound = 0.0;
  long samples = 0;
  int order = 0;
};

// Monte Carlo estimate of E[xi phi(xi)] - sum_{a=0}^{p} kappa_{a+1}/a! E[phi^(a)(xi)].
// resolution > 0 rejects runs whose standard error exceeds it.
CumulantExpansionReport cumulant_expansion_check(const EntryDistribution& dist, const TestFunction& phi, int order,
                                                 long num_samples, RngStream& rng, double resolution = 0.0);

}  // namespace freeconv::ensembles
