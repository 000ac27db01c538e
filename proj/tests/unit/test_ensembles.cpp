#include <cmath>
#include <vector>

#include "doctest.h"
#include "freeconv/ensembles.hpp"
#include "freeconv/rng.hpp"
#include "support.hpp"

using namespace freeconv;
using namespace freeconv::ensembles;

namespace {

// Unit-variance exp(-|x/s|^a): E xi^k = Gamma((k+1)/a) Gamma(1/a)^(k/2 - 1) / Gamma(3/a)^(k/2).
double exp_power_moment(double a, int k) {
  return std::tgamma((k + 1.0) / a) * std::pow(std::tgamma(1.0 / a), k / 2.0 - 1.0) /
         std::pow(std::tgamma(3.0 / a), k / 2.0);
}

struct Moments {
  double mean, var, third, fourth;
  double fourth_stderr;
};

Moments sample_moments(const EntryDistribution& d, long n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, s8 = 0;
  for (long i = 0; i < n; ++i) {
    const double x = d.sample(rng);
    const double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    s8 += x2 * x2 * x2 * x2;
  }
  const double m4 = s4 / n;
  return {s1 / n, s2 / n, s3 / n, m4, std::sqrt((s8 / n - m4 * m4) / n)};
}

}  // namespace

TEST_CASE("Philox known-answer vectors") {
  using B = RngStream::Block;
  CHECK(RngStream::philox(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(RngStream::philox(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(RngStream::philox(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool differ_c = false, differ_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a();
    CHECK(va == b());
    differ_c = differ_c || va != c();
    differ_d = differ_d || va != d();
  }
  CHECK(differ_c);
  CHECK(differ_d);
  RngStream u(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("distribution parsing and names") {
  CHECK(EntryDistribution::parse("gaussian").kind() == EntryDistribution::Kind::gaussian);
  CHECK(EntryDistribution::parse("uniform").kind() == EntryDistribution::Kind::uniform_symmetric);
  auto e = EntryDistribution::parse("exp_power:1.5");
  CHECK(e.kind() == EntryDistribution::Kind::exp_power);
  CHECK(e.exponent() == 1.5);
  CHECK(EntryDistribution::parse(e.name()).exponent() == 1.5);
  CHECK_THROWS_AS(EntryDistribution::parse("rademacher"), Error);
  CHECK_THROWS_AS(EntryDistribution::parse("exp_power:0.5"), Error);
  CHECK_THROWS_AS(EntryDistribution::parse("exp_power:x"), Error);
}

TEST_CASE("fourth cumulants") {
  CHECK(kappa4(EntryDistribution::gaussian()) == 0.0);
  CHECK(kappa4(EntryDistribution::uniform()) == doctest::Approx(-1.2).epsilon(1e-15));
  CHECK(std::abs(kappa4(EntryDistribution::exp_power(1.0)) - 3.0) < 1e-10);
  for (double a : {1.0, 1.3, 2.0, 3.0, 5.0}) {
    const double oracle = exp_power_moment(a, 4) - 3.0;
    CHECK(std::abs(kappa4(EntryDistribution::exp_power(a)) - oracle) < 1e-10);
    CHECK(std::abs(EntryDistribution::exp_power(a).moment(6) - exp_power_moment(a, 6)) < 1e-9);
  }
  CHECK(std::abs(kappa4(EntryDistribution::exp_power(2.0))) < 1e-10);
  // Sixth cumulants from moments: 0 for gaussian, 27/7 - 27 + 30 for uniform.
  CHECK(std::abs(EntryDistribution::gaussian().cumulant(6)) < 1e-12);
  CHECK(EntryDistribution::uniform().cumulant(6) == doctest::Approx(27.0 / 7.0 + 3.0));
}

TEST_CASE("entry laws: symmetry, unit variance, fourth moment") {
  const long n = 10'000'000;
  std::uint64_t seed = 100;
  for (const auto& d : {EntryDistribution::gaussian(), EntryDistribution::uniform(), EntryDistribution::exp_power(1.0),
                        EntryDistribution::exp_power(3.0)}) {
    CAPTURE(d.name());
    const auto m = sample_moments(d, n, seed++);
    CHECK(std::abs(m.mean) <= 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(m.var - 1.0) <= 0.01);
    CHECK(std::abs(m.third) <= 5.0 * std::sqrt(d.moment(6) / n));
    CHECK(std::abs(m.fourth - 3.0 - d.kappa4()) <= 4.0 * m.fourth_stderr);
  }
}

TEST_CASE("Wigner sampler") {
  RngStream rng(5, 0);
  const Matrix x = sample_wigner(EntryDistribution::uniform(), 50, rng);
  CHECK((x - x.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 50; ++i) CHECK(x(i, i).imag() == 0.0);

  RngStream g(6, 0);
  const Matrix xg = sample_wigner(EntryDistribution::gaussian(), 1000, g);
  const double tr2 = xg.squaredNorm() / 1000.0;
  CHECK(tr2 >= 0.9);
  CHECK(tr2 <= 1.1);

  RngStream u(7, 0);
  const Matrix xu = sample_wigner(EntryDistribution::uniform(), 1000, u);
  const Matrix sq = xu * xu;
  const double tr4 = sq.squaredNorm() / 1000.0;
  CHECK(tr4 >= 1.85);
  CHECK(tr4 <= 2.15);

  RngStream r1(9, 3), r2(9, 3);
  CHECK(sample_wigner(EntryDistribution::exp_power(1.0), 20, r1) == sample_wigner(EntryDistribution::exp_power(1.0), 20, r2));
}

TEST_CASE("Wigner second moment scaling") {
  // E tr_n X^2 = 1 at every n.
  for (int n : {100, 400, 1600}) {
    const int reps = 20;
    double s = 0, s2 = 0;
    for (int k = 0; k < reps; ++k) {
      RngStream rng(11, static_cast<std::uint64_t>(k));
      const double v = sample_wigner(EntryDistribution::uniform(), n, rng).squaredNorm() / n;
      s += v;
      s2 += v * v;
    }
    const double mean = s / reps;
    const double se = std::sqrt((s2 / reps - mean * mean) / (reps - 1));
    CHECK(std::abs(mean - 1.0) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("Wishart sampler") {
  RngStream rng(1, 0);
  const auto spec = WishartSpec::from_ratio(500, 1.0);
  CHECK(spec.p == 500);
  const Matrix y = sample_wishart(spec, rng);
  CHECK((y - y.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  const auto ev = testing_support::eigenvalues(y);
  CHECK(ev.front() >= -1e-10);
  const double tr = y.trace().real() / 500.0;
  CHECK(tr >= 0.9);
  CHECK(tr <= 1.1);

  RngStream rng2(2, 0);
  const auto ev2 = testing_support::eigenvalues(sample_wishart(WishartSpec::from_ratio(500, 2.0), rng2));
  const double edge = std::pow(std::sqrt(2.0) + 1.0, 2);
  CHECK(std::abs(ev2.back() - edge) <= 0.3);
  CHECK(std::abs(ev2.front() - std::pow(std::sqrt(2.0) - 1.0, 2)) <= 0.3);

  double s = 0;
  const int reps = 100000;
  RngStream rng3(3, 0);
  for (int k = 0; k < reps; ++k) s += sample_wishart(WishartSpec::explicit_size(1, 1), rng3)(0, 0).real();
  CHECK(s / reps >= 0.97);
  CHECK(s / reps <= 1.03);

  CHECK(WishartSpec::from_ratio(7, 1.5).p == 11);
  CHECK(WishartSpec::from_ratio(7, 1.5).ratio_error() == doctest::Approx(1.0 / 14.0));
  CHECK_THROWS_AS(WishartSpec::explicit_size(5, 4), Error);
}

TEST_CASE("cumulant expansion") {
  const auto phi = TestFunction::resolvent(2.0 * I);
  RngStream g(21, 0);
  auto rep = cumulant_expansion_check(EntryDistribution::gaussian(), phi, 1, 1'000'000, g);
  CHECK(std::abs(rep.value) <= 3.0 * rep.standard_error);
  CHECK(rep.bound > 0.0);

  // Uniform at order 3: the expansion stops before the nonzero sixth
  // cumulant, so the residual is a fixed nonzero number. Exact value from the
  // closed-form integrals E (z - xi)^{-k} over [-sqrt3, sqrt3].
  const cplx z = 2.0 * I;
  const double s3 = std::sqrt(3.0);
  auto e_pow = [&](int k) {  // E (z - xi)^{-k}, k >= 2
    return (std::pow(z - s3, 1 - k) - std::pow(z + s3, 1 - k)) / (double(k - 1) * 2.0 * s3);
  };
  const cplx e1 = std::log((z + s3) / (z - s3)) / (2.0 * s3);
  const cplx exact = (z * e1 - 1.0) - (e_pow(2) + (-1.2 / 6.0) * 6.0 * e_pow(4));
  RngStream u(22, 0);
  auto ru = cumulant_expansion_check(EntryDistribution::uniform(), phi, 3, 1'000'000, u);
  CHECK(std::abs(ru.value - exact) <= 4.0 * ru.standard_error);
  CHECK(std::abs(exact) <= ru.bound);
  CHECK(std::abs(exact.real() + 0.0225093) < 1e-6);

  RngStream c(23, 0);
  auto rc = cumulant_expansion_check(EntryDistribution::uniform(), TestFunction::constant(2.0), 2, 10000, c);
  // E[xi phi] = E[xi] * 2 and the expansion is kappa_1 * 2 = 0; only sampling noise remains.
  CHECK(std::abs(rc.value) <= 4.0 * rc.standard_error);

  RngStream t(24, 0);
  CHECK_THROWS_AS(cumulant_expansion_check(EntryDistribution::gaussian(), phi, 1, 100, t, 1e-9), Error);
}
