#include <cmath>
#include <vector>

#include "closed_forms.hpp"
#include "doctest.h"
#include "freeconv/montecarlo.hpp"
#include "support.hpp"

using namespace freeconv;
using namespace freeconv::montecarlo;
using ensembles::EntryDistribution;
using testing_support::random_hermitian;

namespace {

// Kronecker a (x) x with rows of a outermost.
Matrix kron(const Matrix& a, const Matrix& x) {
  Matrix k(a.rows() * x.rows(), a.cols() * x.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) k.block(i * x.rows(), j * x.cols(), x.rows(), x.cols()) = a(i, j) * x;
  return k;
}

CoefficientPencil random_pencil(int m, int r) {
  std::vector<Matrix> c;
  for (int i = 0; i <= r; ++i) c.push_back(random_hermitian(m));
  return CoefficientPencil(c);
}

std::vector<Matrix> random_tuple(int r, int n) {
  std::vector<Matrix> xs;
  for (int i = 0; i < r; ++i) xs.push_back(random_hermitian(n));
  return xs;
}

SpectralParameter random_upper(int m) {
  const Matrix h = random_hermitian(m);
  const Matrix b = testing_support::random_matrix(m, m);
  const Matrix im = b * b.adjoint() + 0.5 * Matrix::Identity(m, m);
  return SpectralParameter(h + I * im);
}

const CoefficientPencil kSemicircle = CoefficientPencil::scalar(0.0, {1.0});

}  // namespace

TEST_CASE("assembled operator matches the Kronecker sum") {
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 1 + trial % 3, r = trial % 3, n = 4 + trial;
    const auto pencil = random_pencil(m, r);
    const auto xs = random_tuple(r, n);
    BlockOperator op(pencil, xs, n);
    Matrix expect = kron(pencil.a0(), Matrix::Identity(n, n));
    for (int p = 1; p <= r; ++p) expect += kron(pencil.a(p), xs[static_cast<std::size_t>(p - 1)]);
    CHECK((op.assembled() - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
    CHECK(is_hermitian(op.assembled()));
  }
  CHECK_THROWS_AS(BlockOperator(kSemicircle, {}), Error);
  CHECK_THROWS_AS(BlockOperator(kSemicircle, {testing_support::random_matrix(3, 3)}), Error);
}

TEST_CASE("resolvent statistics and norm bounds") {
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 3, r = 1 + trial % 2, n = 6 + trial;
    const auto pencil = random_pencil(m, r);
    BlockOperator op(pencil, random_tuple(r, n));
    const auto lambda = random_upper(m);
    const auto st = resolvent_stats(op, lambda, true);
    const double bound = lambda.im_inverse_norm();

    Matrix a = -op.assembled();
    a += kron(lambda.value(), Matrix::Identity(n, n));
    const Matrix full = a.inverse();
    CHECK((st.resolvent - full).norm() <= 1e-9 * full.norm());
    CHECK(op_norm(full) <= bound * (1.0 + 1e-9));
    CHECK(op_norm(st.H) <= bound * (1.0 + 1e-9));

    // Partial trace by definition: H_ab = (1/n) sum_k R[(a,k),(b,k)].
    Matrix h = Matrix::Zero(m, m);
    double block_sum = 0.0;
    for (int k = 0; k < n; ++k) {
      h += st.block(k, k) / double(n);
      for (int l = 0; l < n; ++l) {
        const double bn = op_norm(st.block(k, l));
        CHECK(bn <= bound * (1.0 + 1e-9));
        block_sum += bn * bn;
      }
    }
    CHECK((h - st.H).norm() <= 1e-12);
    CHECK(block_sum / n <= m * bound * bound * (1.0 + 1e-9));

    // H(lambda*) = H(lambda)*
    const auto conj = resolvent_stats(op, SpectralParameter(Matrix(lambda.value().adjoint())));
    CHECK((conj.H - st.H.adjoint()).norm() <= 1e-10);
  }
}

TEST_CASE("r = 0 is deterministic") {
  Matrix a0(2, 2);
  a0 << 1.0, cplx(0.5, 0.5), cplx(0.5, -0.5), -2.0;
  const CoefficientPencil pencil({a0});
  const auto lambda = SpectralParameter::scalar(cplx(0.3, 1.5), 2);
  const Matrix exact = (lambda.value() - a0).inverse();
  const auto est = estimate_Gn(pencil, Ensemble::wigner(EntryDistribution::gaussian()), lambda, 10, 5, {1, 1});
  CHECK((est.mean - exact).norm() <= 1e-14);
  CHECK(est.stderr_.maxCoeff() == 0.0);

  const auto res = master_residual_iid(pencil, EntryDistribution::uniform(), lambda, 10, 3, {2, 1});
  CHECK(res.expectation_with_rn.norm <= 1e-14);
  CHECK(res.plugin_without_rn.norm <= 1e-14);

  Matrix w(2, 2);
  w << 2.0, 1.0, 1.0, 0.0;
  const auto ba = block_average_check(pencil, EntryDistribution::gaussian(), w, lambda, 8, 3, {3, 1});
  CHECK((ba.estimate.mean - exact * w * exact).norm() <= 1e-13);

  const auto support = predicted_support(pencil, FreeModel::semicircular());
  REQUIRE(support.size() == 2);
  const auto c = spectrum_containment(pencil, Ensemble::wigner(EntryDistribution::gaussian()), 20, 1e-6, 3, {4, 1},
                                      support);
  CHECK(c.pass_rate == 1.0);
}

TEST_CASE("R_n matches the quadruple sum") {
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 1 + trial % 3, r = 1 + trial % 2, n = 5;
    const auto pencil = random_pencil(m, r);
    BlockOperator op(pencil, random_tuple(r, n));
    const auto st = resolvent_stats(op, random_upper(m), true);
    Matrix brute = Matrix::Zero(m, m);
    for (int p = 1; p <= r; ++p) {
      const Matrix& a = pencil.a(p);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          brute += a * st.block(k, k) * a * st.block(l, l) * a * st.block(k, k) * a * st.block(l, l);
    }
    brute *= -1.2 / 2.0 / double(n * n);
    CHECK((rn_sample(pencil, st, -1.2) - brute).norm() <= 1e-12 * (1.0 + brute.norm()));
    CHECK(rn_sample(pencil, st, 0.0).norm() == 0.0);
  }
}

TEST_CASE("replica mean of H_n approaches G") {
  const auto lambda = SpectralParameter::scalar(2.0 * I, 1);
  const auto est =
      estimate_Gn(kSemicircle, Ensemble::wigner(EntryDistribution::gaussian()), lambda, 200, 200, {11, 1});
  const cplx g = closed_forms::semicircle(2.0 * I);
  CHECK(std::abs(est.mean(0, 0) - g) <= std::max(3.0 * est.stderr_norm(), 5e-3));
  CHECK(est.replicas == 200);
  CHECK(est.n == 200);
  CHECK(est.seed == 11);

  const auto lmp = SpectralParameter::scalar(cplx(2.0, 2.0), 1);
  const auto mp = estimate_Gn(kSemicircle, Ensemble::wishart(1.0), lmp, 200, 200, {12, 1});
  CHECK(std::abs(mp.mean(0, 0) - closed_forms::marchenko_pastur(cplx(2.0, 2.0), 1.0)) <=
        std::max(3.0 * mp.stderr_norm(), 5e-3));

  // Single instance at n = 200 obeys the resolvent bound ||H|| <= 1/2.
  RngStream rng(1, 0);
  BlockOperator op(kSemicircle, {ensembles::sample_wigner(EntryDistribution::gaussian(), 200, rng)});
  CHECK(op_norm(resolvent_stats(op, lambda).H) <= 0.5);
}

TEST_CASE("determinism and reduction invariance") {
  const auto lambda = SpectralParameter::scalar(cplx(0.5, 1.0), 1);
  const auto ens = Ensemble::wigner(EntryDistribution::uniform());
  const auto a = estimate_Gn(kSemicircle, ens, lambda, 30, 40, {99, 1});
  const auto b = estimate_Gn(kSemicircle, ens, lambda, 30, 40, {99, 1});
  const auto c = estimate_Gn(kSemicircle, ens, lambda, 30, 40, {99, 4});
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
  CHECK(a.mean == c.mean);
  CHECK(a.stderr_ == c.stderr_);
  const auto d = estimate_Gn(kSemicircle, ens, lambda, 30, 40, {100, 1});
  CHECK(a.mean != d.mean);
}

TEST_CASE("standard errors shrink like replicas^-1/2") {
  const auto lambda = SpectralParameter::scalar(2.0 * I, 1);
  const auto ens = Ensemble::wigner(EntryDistribution::gaussian());
  const auto a = estimate_Gn(kSemicircle, ens, lambda, 40, 2000, {5, 1});
  const auto b = estimate_Gn(kSemicircle, ens, lambda, 40, 4000, {6, 1});
  const double ratio = b.stderr_norm() / a.stderr_norm();
  CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("summarize uses the unbiased entrywise variance") {
  std::vector<Matrix> xs;
  for (double v : {1.0, 2.0, 4.0}) {
    Matrix s(1, 1);
    s(0, 0) = cplx(v, -v);
    xs.push_back(s);
  }
  const auto e = summarize(xs);
  CHECK(e.mean(0, 0) == cplx(7.0 / 3.0, -7.0 / 3.0));
  // sample variance 7/3 for each part; stderr = sqrt((7/3 + 7/3) / 3)
  CHECK(e.stderr_(0, 0) == doctest::Approx(std::sqrt(14.0 / 9.0)));
}

TEST_CASE("master residual: forms agree and are small") {
  const auto lambda = SpectralParameter::scalar(2.0 * I, 1);
  const auto rep = master_residual_iid(kSemicircle, EntryDistribution::uniform(), lambda, 60, 400, {7, 1});
  CHECK(rep.kappa4 == doctest::Approx(-1.2));
  // The plug-in form differs from the expectation form by the covariance of H, O(1/n^2).
  const Matrix diff = rep.expectation_without_rn.value - rep.plugin_without_rn.value;
  CHECK(std::abs(diff(0, 0)) <= 1.0 / (60.0 * 60.0));
  CHECK(rep.expectation_without_rn.norm <= 0.05);
  // R_n approaches R = kappa4/2 G^4.
  const cplx g = closed_forms::semicircle(2.0 * I);
  CHECK(std::abs(rep.rn.mean(0, 0) - (-0.6) * std::pow(g, 4)) <= 0.05 * std::abs(std::pow(g, 4)));
  CHECK(rep.expectation_with_rn.stderr_ > 0.0);
  CHECK(rep.plugin_with_rn.stderr_ > 0.0);
}

TEST_CASE("Wishart master residual") {
  const auto lambda = SpectralParameter::scalar(cplx(2.0, 4.0), 1);
  const CoefficientPencil zero = CoefficientPencil::scalar(0.5, {0.0});
  const auto z = master_residual_wishart(zero, 1.0, lambda, 20, 3, {1, 1});
  CHECK(z.residual.norm <= 1e-14);

  const auto rep = master_residual_wishart(kSemicircle, 1.0, lambda, 100, 100, {2, 1});
  CHECK(rep.branch == "im_bound");
  CHECK(rep.p == 100);
  CHECK(rep.residual.norm <= 4.0 * rep.residual.stderr_ + 1e-3);

  const auto inv = master_residual_wishart(CoefficientPencil::scalar(0.0, {3.0}), 2.0,
                                           SpectralParameter::scalar(cplx(3.0, 1.0), 1), 30, 10, {3, 1});
  CHECK(inv.branch == "invertible");

  Matrix a1 = Matrix::Zero(2, 2);
  a1(0, 0) = 1.0;
  const CoefficientPencil singular({Matrix::Zero(2, 2), a1});
  CHECK_THROWS_WITH_AS(master_residual_wishart(singular, 1.0, SpectralParameter::scalar(cplx(0.0, 1.0), 2), 10, 5,
                                               {1, 1}),
                       doctest::Contains("1/(2 max_l ||a_l||)"), Error);
}

TEST_CASE("block averages and corrections") {
  const auto lambda = SpectralParameter::scalar(2.0 * I, 1);
  const auto ba = block_average_check(kSemicircle, EntryDistribution::gaussian(), Matrix::Identity(1, 1), lambda,
                                      200, 40, {8, 1});
  const cplx g = closed_forms::semicircle(2.0 * I);
  CHECK(std::abs(ba.reference(0, 0) - g * g) <= 1e-10);
  CHECK(ba.deviation <= std::max(3.0 * ba.stderr_, 0.02));

  const auto cr = correction_check(kSemicircle, EntryDistribution::gaussian(), lambda, {50, 100}, 50, {9, 1});
  CHECK(cr.L.norm() == 0.0);
  CHECK(cr.points.size() == 2);
  CHECK(std::abs(cr.G(0, 0) - g) <= 1e-10);
  for (const auto& p : cr.points) CHECK(p.deviation <= 4.0 * p.stderr_ + 0.05);
  CHECK_THROWS_AS(correction_check(kSemicircle, EntryDistribution::gaussian(), SpectralParameter::scalar(0.001 * I, 1),
                                   {10}, 5, {1, 1}),
                  Error);
}

TEST_CASE("scaling fits") {
  std::vector<ScalingPoint> exact;
  for (int n : {50, 100, 200, 400}) exact.push_back({n, 3.0 / (double(n) * n), 0.0});
  const auto a = fit_scaling(exact);
  REQUIRE(a.has_slope);
  CHECK(a.slope == doctest::Approx(-2.0).epsilon(1e-12));

  std::vector<ScalingPoint> noisy;
  for (int n : {50, 100, 200}) noisy.push_back({n, 1.0 / n, 0.1 / n});
  const auto b = fit_scaling(noisy);
  REQUIRE(b.has_slope);
  CHECK(b.slope == doctest::Approx(-1.0));
  // Weighted fit of exact data: slope variance 1 / sum w (x - xbar)^2 with w = 100.
  const double x0 = std::log(50.0), x1 = std::log(100.0), x2 = std::log(200.0);
  const double xm = (x0 + x1 + x2) / 3.0;
  const double sxx = 100.0 * ((x0 - xm) * (x0 - xm) + (x1 - xm) * (x1 - xm) + (x2 - xm) * (x2 - xm));
  CHECK(b.slope_stderr == doctest::Approx(1.0 / std::sqrt(sxx)));

  noisy[1].stderr_ = noisy[1].value / 2.0;
  CHECK_FALSE(fit_scaling(noisy).has_slope);
  CHECK_FALSE(fit_scaling({{10, 1.0, 0.0}, {20, 0.5, 0.0}}).has_slope);
  CHECK_FALSE(fit_scaling({{10, 1.0, 0.0}, {10, 0.5, 0.0}, {20, 0.2, 0.0}}).has_slope);
}

TEST_CASE("variance checks") {
  CHECK(trace_word_variance({}, 1, EntryDistribution::gaussian(), 10, 50, {1, 1}).value == 0.0);
  CHECK_THROWS_AS(trace_word_variance({1, 1, 1, 1, 1, 1, 1}, 1, EntryDistribution::gaussian(), 10, 50, {1, 1}), Error);
  CHECK_THROWS_AS(trace_word_variance({1}, 1, EntryDistribution::gaussian(), 10, 49, {1, 1}), Error);

  // V[tr_n X^2] for Gaussian entries: 2/n^2 exactly (chi-square count over n^2 real parameters).
  std::vector<ScalingPoint> pts;
  for (int n : {20, 40, 80}) {
    const auto p = trace_word_variance({1, 1}, 1, EntryDistribution::gaussian(), n, 2000, {3, 1});
    CHECK(std::abs(p.value - 2.0 / (double(n) * n)) <= 4.0 * p.stderr_);
    pts.push_back(p);
  }
  const auto fit = fit_scaling(pts);
  REQUIRE(fit.has_slope);
  CHECK(fit.slope >= -2.6);
  CHECK(fit.slope <= -1.4);

  // Split-product trace agrees with a direct product: words of odd length.
  const auto odd = trace_word_variance({1, 2, 1}, 2, EntryDistribution::uniform(), 15, 60, {4, 1});
  CHECK(odd.value > 0.0);

  const auto e = resolvent_entry_variance(kSemicircle, EntryDistribution::uniform(),
                                          SpectralParameter::scalar(2.0 * I, 1), 0, 0, 40, 200, {5, 1});
  CHECK(e.value > 0.0);
  CHECK(e.value <= 1.0 / (40.0 * 40.0));
  CHECK(e.stderr_ < e.value / 3.0);
}

TEST_CASE("Wishart integration by parts") {
  const auto spec = ensembles::WishartSpec::explicit_size(4, 8);
  const Matrix h = hermitian_basis(4, 0, 0);
  CHECK(wishart_ibp_check(spec, IbpFunction::zero(), h, 10, {1, 1}).value == cplx{});

  Matrix a = Matrix::Zero(4, 4);
  a(0, 0) = 1.0;
  const auto t = wishart_ibp_check(spec, IbpFunction::trace(a), h, 40000, {2, 1});
  CHECK(std::abs(t.value) <= 4.0 * t.stderr_);
  CHECK(t.stderr_ > 0.0);

  const auto r = wishart_ibp_check(ensembles::WishartSpec::explicit_size(4, 6), IbpFunction::resolvent(3.0 * I, 0, 0),
                                   hermitian_basis(4, 0, 1), 40000, {3, 1});
  CHECK(std::abs(r.value) <= 4.0 * r.stderr_);

  const auto ri = wishart_ibp_check(spec, IbpFunction::resolvent(cplx(1.0, 2.0), 1, 2), hermitian_basis(4, 1, 2, true),
                                    40000, {4, 1});
  CHECK(std::abs(ri.value) <= 4.0 * ri.stderr_);

  const auto full_h = wishart_ibp_check(spec, IbpFunction::trace(a), Matrix::Identity(4, 4), 40000, {5, 1});
  CHECK(std::abs(full_h.value) <= 4.0 * full_h.stderr_);

  CHECK_THROWS_AS(wishart_ibp_check(ensembles::WishartSpec::explicit_size(4, 5), IbpFunction::trace(a), h, 10, {1, 1}),
                  Error);
  CHECK_THROWS_AS(IbpFunction::resolvent(cplx(0.0, 0.5), 0, 0), Error);
  CHECK(hermitian_basis(3, 0, 1)(1, 0) == 1.0);
  CHECK(hermitian_basis(3, 0, 1, true)(0, 1) == I);
}

TEST_CASE("containment and operator norms") {
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = testing_support::random_matrix(6, 6);
    Eigen::JacobiSVD<Matrix> svd(m);
    CHECK(operator_norm(m) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-10));
    const Matrix h = random_hermitian(6);
    CHECK(operator_norm(h) == doctest::Approx(op_norm(h)).epsilon(1e-10));
  }

  const auto support = predicted_support(kSemicircle, FreeModel::semicircular(), 401);
  REQUIRE(support.size() == 1);
  CHECK(std::abs(support[0].lo + 2.0) <= 1e-2);
  CHECK(std::abs(support[0].hi - 2.0) <= 1e-2);
  const auto c = spectrum_containment(kSemicircle, Ensemble::wigner(EntryDistribution::gaussian()), 200, 0.2, 5,
                                      {1, 1}, support);
  CHECK(c.seeds.size() == 5);
  CHECK(c.pass_rate == 1.0);
  const auto tight = spectrum_containment(kSemicircle, Ensemble::wigner(EntryDistribution::gaussian()), 200, 0.2, 5,
                                          {1, 1}, {{-1.0, 1.0}});
  CHECK(tight.pass_rate == 0.0);
}

TEST_CASE("norm convergence summary") {
  const auto x1 = ncpoly::NCPolynomial::generator(1, 1);
  const auto rep =
      norm_convergence(x1, Ensemble::wigner(EntryDistribution::gaussian()), {50, 200}, 9, {1, 1}, 2.0);
  REQUIRE(rep.points.size() == 2);
  CHECK(rep.points[0].norms.size() == 9);
  CHECK(rep.points[1].median_deviation <= 0.3);
  for (const auto& p : rep.points)
    for (double v : p.norms) CHECK(v > 1.0);

  // Non-Hermitian polynomial: i x1 has the same norm as x1 on the same streams.
  const auto ix = ncpoly::NCPolynomial::generator(1, 1) * I;
  const auto rep_i = norm_convergence(ix, Ensemble::wigner(EntryDistribution::gaussian()), {50}, 3, {1, 1}, 2.0);
  for (int s = 0; s < 3; ++s)
    CHECK(rep_i.points[0].norms[static_cast<std::size_t>(s)] ==
          doctest::Approx(rep.points[0].norms[static_cast<std::size_t>(s)]).epsilon(1e-10));
}
