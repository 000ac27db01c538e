#include "freeconv/ensembles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <charconv>
#include <cmath>
#include <random>
#include <vector>

namespace freeconv::ensembles {

namespace {

// E|Y|^k for the unnormalized law exp(-|y|^alpha) dy.
double exp_power_raw_abs_moment(double alpha, double k) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto weight = [alpha](double x) { return std::exp(-std::pow(x, alpha)); };
  auto moment = [alpha, k](double x) { return x == 0.0 ? 0.0 : std::exp(k * std::log(x) - std::pow(x, alpha)); };
  const double z = integrator.integrate(weight, 1e-13);
  const double mk = k == 0.0 ? z : integrator.integrate(moment, 1e-13);
  return mk / z;
}

// Draws entries of one law, keeping distribution objects alive across draws.
class Sampler {
 public:
  Sampler(const EntryDistribution& dist, RngStream& rng) : dist_(dist), rng_(rng) {
    if (dist.kind() == EntryDistribution::Kind::exp_power) {
      gamma_ = std::gamma_distribution<double>(1.0 / dist.exponent(), 1.0);
      scale_ = 1.0 / dist.shape_scale();
    }
  }

  double operator()() {
    switch (dist_.kind()) {
      case EntryDistribution::Kind::gaussian:
        return normal_(rng_);
      case EntryDistribution::Kind::uniform_symmetric:
        return std::sqrt(3.0) * (2.0 * rng_.uniform() - 1.0);
      case EntryDistribution::Kind::exp_power: {
        const double magnitude = std::pow(gamma_(rng_), 1.0 / dist_.exponent()) * scale_;
        return (rng_() & 1u) ? magnitude : -magnitude;
      }
    }
    return 0.0;
  }

 private:
  const EntryDistribution& dist_;
  RngStream& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::gamma_distribution<double> gamma_{1.0, 1.0};
  double scale_ = 1.0;
};

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

}  // namespace

EntryDistribution::EntryDistribution(Kind kind, double exponent) : kind_(kind), exponent_(exponent) {
  switch (kind_) {
    case Kind::gaussian:
      kappa4_ = 0.0;
      break;
    case Kind::uniform_symmetric:
      kappa4_ = -6.0 / 5.0;
      break;
    case Kind::exp_power: {
      const double m2 = exp_power_raw_abs_moment(exponent_, 2.0);
      const double m4 = exp_power_raw_abs_moment(exponent_, 4.0);
      sigma_ = std::sqrt(m2);
      kappa4_ = m4 / (m2 * m2) - 3.0;
      break;
    }
  }
}

EntryDistribution EntryDistribution::gaussian() { return {Kind::gaussian, 2.0}; }

EntryDistribution EntryDistribution::uniform() { return {Kind::uniform_symmetric, 0.0}; }

EntryDistribution EntryDistribution::exp_power(double alpha) {
  if (!std::isfinite(alpha) || alpha < 1.0)
    throw Error(ErrorKind::invalid_argument, "exp_power exponent must be finite and >= 1");
  return {Kind::exp_power, alpha};
}

EntryDistribution EntryDistribution::parse(std::string_view text) {
  if (text == "gaussian") return gaussian();
  if (text == "uniform") return uniform();
  constexpr std::string_view prefix = "exp_power:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string_view num = text.substr(prefix.size());
    double alpha = 0.0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), alpha);
    if (ec != std::errc() || ptr != num.data() + num.size() || num.empty())
      throw Error(ErrorKind::invalid_argument, "bad exp_power exponent in '" + std::string(text) + "'");
    return exp_power(alpha);
  }
  throw Error(ErrorKind::invalid_argument,
              "unknown distribution '" + std::string(text) + "' (expected gaussian, uniform or exp_power:<alpha>)");
}

std::string EntryDistribution::name() const {
  switch (kind_) {
    case Kind::gaussian:
      return "gaussian";
    case Kind::uniform_symmetric:
      return "uniform";
    case Kind::exp_power: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "exp_power:%.17g", exponent_);
      return buf;
    }
  }
  return "";
}

double EntryDistribution::abs_moment(double k) const {
  if (k < 0.0) throw Error(ErrorKind::invalid_argument, "moment order must be nonnegative");
  switch (kind_) {
    case Kind::gaussian:
      return std::pow(2.0, k / 2.0) * std::tgamma((k + 1.0) / 2.0) / std::sqrt(M_PI);
    case Kind::uniform_symmetric:
      return std::pow(3.0, k / 2.0) / (k + 1.0);
    case Kind::exp_power:
      return exp_power_raw_abs_moment(exponent_, k) / std::pow(sigma_, k);
  }
  return 0.0;
}

double EntryDistribution::moment(int k) const {
  if (k < 0) throw Error(ErrorKind::invalid_argument, "moment order must be nonnegative");
  if (k % 2 == 1) return 0.0;
  if (k == 0) return 1.0;
  if (k == 2) return 1.0;
  if (kind_ == Kind::gaussian) {
    double m = 1.0;
    for (int j = k - 1; j > 1; j -= 2) m *= j;
    return m;
  }
  return abs_moment(k);
}

double EntryDistribution::cumulant(int k) const {
  if (k < 1) throw Error(ErrorKind::invalid_argument, "cumulant order must be positive");
  if (k % 2 == 1) return 0.0;
  if (k == 2) return 1.0;
  if (k == 4) return kappa4_;
  std::vector<double> kap(static_cast<std::size_t>(k) + 1, 0.0);
  for (int n = 1; n <= k; ++n) {
    double v = moment(n);
    for (int j = 1; j < n; ++j) v -= binomial(n - 1, j - 1) * kap[static_cast<std::size_t>(j)] * moment(n - j);
    kap[static_cast<std::size_t>(n)] = v;
  }
  return kap[static_cast<std::size_t>(k)];
}

double EntryDistribution::sample(RngStream& rng) const { return Sampler(*this, rng)(); }

double kappa4(const EntryDistribution& dist) { return dist.kappa4(); }

Matrix sample_wigner(const EntryDistribution& dist, int n, RngStream& rng) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "Wigner size n must be positive");
  Sampler draw(dist, rng);
  const double diag = 1.0 / std::sqrt(static_cast<double>(n));
  const double off = 1.0 / std::sqrt(2.0 * n);
  Matrix x(n, n);
  for (int i = 0; i < n; ++i) {
    x(i, i) = draw() * diag;
    for (int j = i + 1; j < n; ++j) {
      const double re = draw();
      const double im = draw();
      x(i, j) = cplx(re, im) * off;
      x(j, i) = std::conj(x(i, j));
    }
  }
  return x;
}

WishartSpec WishartSpec::from_ratio(int n, double alpha) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "Wishart size n must be positive");
  if (!std::isfinite(alpha) || alpha < 1.0) throw Error(ErrorKind::invalid_argument, "Wishart alpha must be >= 1");
  return {n, alpha, static_cast<int>(std::lround(alpha * n))};
}

WishartSpec WishartSpec::explicit_size(int n, int p) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "Wishart size n must be positive");
  if (p < n) throw Error(ErrorKind::invalid_argument, "Wishart parameter p must be >= n");
  return {n, static_cast<double>(p) / n, p};
}

Matrix sample_wishart(const WishartSpec& spec, RngStream& rng) {
  if (spec.n < 1 || spec.p < spec.n) throw Error(ErrorKind::invalid_argument, "invalid Wishart spec (need p >= n >= 1)");
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix x(spec.p, spec.n);
  for (int i = 0; i < spec.p; ++i)
    for (int j = 0; j < spec.n; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      x(i, j) = cplx(re, im);
    }
  Matrix y = Matrix::Zero(spec.n, spec.n);
  y.selfadjointView<Eigen::Lower>().rankUpdate(x.adjoint(), 1.0 / spec.n);
  y.triangularView<Eigen::StrictlyUpper>() = y.adjoint().eval();
  for (int i = 0; i < spec.n; ++i) y(i, i) = y(i, i).real();
  return y;
}

TestFunction TestFunction::resolvent(cplx z) {
  if (z.imag() == 0.0) throw Error(ErrorKind::invalid_argument, "test function pole must be off the real axis");
  TestFunction f;
  f.kind = Kind::resolvent;
  f.z = z;
  return f;
}

TestFunction TestFunction::constant(cplx c) {
  TestFunction f;
  f.kind = Kind::constant;
  f.c = c;
  return f;
}

cplx TestFunction::derivative(int a, double t) const {
  if (kind == Kind::constant) return a == 0 ? c : cplx{};
  return factorial(a) / std::pow(z - t, a + 1);
}

double TestFunction::sup_derivative(int a) const {
  if (kind == Kind::constant) return a == 0 ? std::abs(c) : 0.0;
  return factorial(a) / std::pow(std::abs(z.imag()), a + 1);
}

CumulantExpansionReport cumulant_expansion_check(const EntryDistribution& dist, const TestFunction& phi, int order,
                                                 long num_samples, RngStream& rng, double resolution) {
  if (order < 0 || order > 10) throw Error(ErrorKind::invalid_argument, "expansion order must lie in 0..10");
  if (num_samples < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 samples");
  std::vector<double> coef(static_cast<std::size_t>(order) + 1);
  for (int a = 0; a <= order; ++a) coef[static_cast<std::size_t>(a)] = dist.cumulant(a + 1) / factorial(a);

  Sampler draw(dist, rng);
  cplx sum{};
  double sum_sq_re = 0.0;
  double sum_sq_im = 0.0;
  for (long s = 0; s < num_samples; ++s) {
    const double xi = draw();
    cplx d = xi * phi.derivative(0, xi);
    for (int a = 0; a <= order; ++a) {
      const double k = coef[static_cast<std::size_t>(a)];
      if (k != 0.0) d -= k * phi.derivative(a, xi);
    }
    sum += d;
    sum_sq_re += d.real() * d.real();
    sum_sq_im += d.imag() * d.imag();
  }
  const double n = static_cast<double>(num_samples);
  CumulantExpansionReport rep;
  rep.value = sum / n;
  const double var_re = (sum_sq_re - n * rep.value.real() * rep.value.real()) / (n - 1.0);
  const double var_im = (sum_sq_im - n * rep.value.imag() * rep.value.imag()) / (n - 1.0);
  rep.standard_error = std::sqrt(std::max(0.0, var_re) + std::max(0.0, var_im)) / std::sqrt(n);
  rep.bound = phi.sup_derivative(order + 1) * dist.abs_moment(order + 2);
  rep.samples = num_samples;
  rep.order = order;
  if (resolution > 0.0 && rep.standard_error > resolution)
    throw Error(ErrorKind::precondition, "insufficient samples: standard error " + std::to_string(rep.standard_error) +
                                             " exceeds the requested resolution " + std::to_string(resolution));
  return rep;
}

}  // namespace freeconv::ensembles
