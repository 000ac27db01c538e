#include "freeconv/montecarlo.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "freeconv/parallel.hpp"

namespace freeconv::montecarlo {

namespace {

void check_replicas(long replicas, long minimum = 2) {
  if (replicas < minimum)
    throw Error(ErrorKind::invalid_argument, "replicas must be >= " + std::to_string(minimum));
}

void check_size(int n) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "matrix size n must be positive");
}

void check_upper(const SpectralParameter& lambda) {
  if (lambda.half_plane() != freeprob::HalfPlane::upper)
    throw Error(ErrorKind::invalid_argument, "Im(lambda) must be positive definite");
}

void check_lambda(const CoefficientPencil& pencil, const SpectralParameter& lambda) {
  if (lambda.m() != pencil.m())
    throw Error(ErrorKind::invalid_argument, "lambda size does not match the pencil size m");
  check_upper(lambda);
}

Matrix pairwise_sum(const std::vector<Matrix>& xs, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return xs[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

RealMatrix pairwise_sum(const std::vector<RealMatrix>& xs, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return xs[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

std::vector<Matrix> sample_matrices(const Ensemble& ensemble, int r, int n, RngStream& rng) {
  std::vector<Matrix> xs;
  xs.reserve(static_cast<std::size_t>(r));
  for (int p = 0; p < r; ++p) xs.push_back(ensemble.sample(n, rng));
  return xs;
}

template <class F>
std::vector<Matrix> run_replicas(long replicas, int n, const RunOptions& run, F&& per_replica) {
  return parallel_map<Matrix>(static_cast<std::size_t>(replicas), run.workers, [&](std::size_t i) {
    RngStream rng = replica_stream(run.seed, n, i);
    return per_replica(rng);
  });
}

MonteCarloEstimate tagged(MonteCarloEstimate e, const RunOptions& run, int n) {
  e.seed = run.seed;
  e.n = n;
  return e;
}

ResidualValue residual_value(const Matrix& value, const RealMatrix& stderr_entries) {
  return {value, op_norm(value), stderr_entries.norm()};
}

Matrix scalar_sample(cplx v) {
  Matrix s(1, 1);
  s(0, 0) = v;
  return s;
}

Matrix semicircle_G(const CoefficientPencil& pencil, const SpectralParameter& lambda) {
  const auto sol = freeprob::solve_G(pencil, FreeModel::semicircular(), lambda);
  if (!sol.converged) throw Error(ErrorKind::not_converged, "limiting G(lambda) did not converge");
  return sol.G;
}

}  // namespace

Ensemble Ensemble::wigner(ensembles::EntryDistribution dist) { return {Kind::wigner, std::move(dist), 1.0}; }

Ensemble Ensemble::wishart(double alpha) {
  if (!std::isfinite(alpha) || alpha < 1.0) throw Error(ErrorKind::invalid_argument, "Wishart alpha must be >= 1");
  return {Kind::wishart, ensembles::EntryDistribution::gaussian(), alpha};
}

FreeModel Ensemble::model() const {
  return kind_ == Kind::wigner ? FreeModel::semicircular() : FreeModel::marchenko_pastur(alpha_);
}

std::string Ensemble::name() const {
  if (kind_ == Kind::wigner) return "wigner(" + dist_.name() + ")";
  char buf[64];
  std::snprintf(buf, sizeof buf, "wishart(%.17g)", alpha_);
  return buf;
}

Matrix Ensemble::sample(int n, RngStream& rng) const {
  if (kind_ == Kind::wigner) return ensembles::sample_wigner(dist_, n, rng);
  return ensembles::sample_wishart(ensembles::WishartSpec::from_ratio(n, alpha_), rng);
}

RngStream replica_stream(std::uint64_t seed, int n, std::uint64_t replica) {
  if (replica >> 32) throw Error(ErrorKind::invalid_argument, "replica index exceeds 2^32");
  return RngStream(seed, (static_cast<std::uint64_t>(static_cast<std::uint32_t>(n)) << 32) | replica);
}

BlockOperator::BlockOperator(CoefficientPencil pencil, std::vector<Matrix> matrices, int n)
    : pencil_(std::move(pencil)), matrices_(std::move(matrices)) {
  if (static_cast<int>(matrices_.size()) != pencil_.r())
    throw Error(ErrorKind::invalid_argument, "need one matrix per pencil coefficient a_1..a_r");
  n_ = n > 0 ? n : (matrices_.empty() ? 1 : static_cast<int>(matrices_.front().rows()));
  for (const auto& x : matrices_) {
    if (x.rows() != n_ || x.cols() != n_) throw Error(ErrorKind::invalid_argument, "matrices must all be n x n");
    if (!is_hermitian(x)) throw Error(ErrorKind::invalid_argument, "matrices must be Hermitian");
  }
}

const Matrix& BlockOperator::assembled() const {
  if (!assembled_) {
    const int m = this->m();
    Matrix s = Matrix::Zero(m * n_, m * n_);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        auto blk = s.block(a * n_, b * n_, n_, n_);
        blk.diagonal().setConstant(pencil_.a0()(a, b));
        for (int p = 1; p <= pencil_.r(); ++p) {
          const cplx c = pencil_.a(p)(a, b);
          if (c != 0.0) blk += c * matrices_[static_cast<std::size_t>(p - 1)];
        }
      }
    assembled_ = std::move(s);
  }
  return *assembled_;
}

Matrix BlockOperator::resolvent(const Matrix& lambda) const {
  const int m = this->m();
  if (lambda.rows() != m || lambda.cols() != m) throw Error(ErrorKind::invalid_argument, "lambda must be m x m");
  Matrix a = -assembled();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a.block(i * n_, j * n_, n_, n_).diagonal().array() += lambda(i, j);
  return Eigen::PartialPivLU<Matrix>(a).inverse();
}

Matrix ResolventStats::block(int k, int l) const {
  if (!has_blocks()) throw Error(ErrorKind::precondition, "resolvent blocks were not kept");
  if (k < 0 || k >= n || l < 0 || l >= n) throw Error(ErrorKind::invalid_argument, "block index out of range");
  Matrix b(m, m);
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c) b(a, c) = resolvent(a * n + k, c * n + l);
  return b;
}

ResolventStats resolvent_stats(const BlockOperator& op, const SpectralParameter& lambda, bool keep_blocks) {
  if (lambda.m() != op.m()) throw Error(ErrorKind::invalid_argument, "lambda size does not match the pencil size m");
  ResolventStats st;
  st.m = op.m();
  st.n = op.n();
  Matrix r = op.resolvent(lambda.value());
  st.H.resize(st.m, st.m);
  for (int a = 0; a < st.m; ++a)
    for (int c = 0; c < st.m; ++c) st.H(a, c) = r.block(a * st.n, c * st.n, st.n, st.n).trace() / double(st.n);
  if (keep_blocks) st.resolvent = std::move(r);
  return st;
}

double MonteCarloEstimate::stderr_norm() const { return stderr_.norm(); }

MonteCarloEstimate summarize(const std::vector<Matrix>& samples) {
  if (samples.empty()) throw Error(ErrorKind::invalid_argument, "no samples to summarize");
  const double n = static_cast<double>(samples.size());
  MonteCarloEstimate e;
  e.replicas = static_cast<long>(samples.size());
  const bool constant = std::all_of(samples.begin(), samples.end(), [&](const Matrix& s) { return s == samples[0]; });
  e.mean = constant ? samples[0] : Matrix(pairwise_sum(samples, 0, samples.size()) / n);
  if (samples.size() < 2 || constant) {
    e.stderr_ = RealMatrix::Zero(e.mean.rows(), e.mean.cols());
    return e;
  }
  std::vector<RealMatrix> sq;
  sq.reserve(samples.size());
  for (const auto& s : samples) sq.push_back((s - e.mean).cwiseAbs2());
  e.stderr_ = (pairwise_sum(sq, 0, sq.size()) / ((n - 1.0) * n)).cwiseSqrt();
  return e;
}

MonteCarloEstimate estimate_Gn(const CoefficientPencil& pencil, const Ensemble& ensemble,
                               const SpectralParameter& lambda, int n, long replicas, const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_size(n);
  check_replicas(replicas);
  auto hs = run_replicas(replicas, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ensemble, pencil.r(), n, rng), n);
    return resolvent_stats(op, lambda).H;
  });
  return tagged(summarize(hs), run, n);
}

Matrix rn_sample(const CoefficientPencil& pencil, const ResolventStats& stats, double kappa4) {
  const int m = stats.m;
  const int n = stats.n;
  Matrix total = Matrix::Zero(m, m);
  if (kappa4 == 0.0) return total;
  std::vector<Matrix> diag;
  diag.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) diag.push_back(stats.block(k, k));
  for (int p = 1; p <= pencil.r(); ++p) {
    const Matrix& a = pencil.a(p);
    std::vector<Matrix> b;
    b.reserve(diag.size());
    for (const auto& rkk : diag) b.push_back(a * rkk);
    if (m == 1) {
      cplx s2 = 0.0;
      for (const auto& bk : b) s2 += bk(0, 0) * bk(0, 0);
      total(0, 0) += s2 * s2;
      continue;
    }
    // sum_l B_l M B_l = unvec(K vec M), K = sum_l B_l^T (x) B_l.
    Matrix K = Matrix::Zero(m * m, m * m);
    for (const auto& bl : b)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) K.block(i * m, j * m, m, m) += bl(j, i) * bl;
    for (const auto& bk : b) {
      const Eigen::Map<const Eigen::VectorXcd> vb(bk.data(), m * m);
      const Eigen::VectorXcd inner = K * vb;
      total += bk * Eigen::Map<const Matrix>(inner.data(), m, m);
    }
  }
  return total * (kappa4 / (2.0 * double(n) * double(n)));
}

MasterResidualReport master_residual_iid(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                         const SpectralParameter& lambda, int n, long replicas,
                                         const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_size(n);
  check_replicas(replicas);
  const double kappa4 = dist.kappa4();
  const Ensemble ens = Ensemble::wigner(dist);
  const int m = pencil.m();
  const Matrix shift = pencil.a0() - lambda.value();

  // Each replica yields [H | Z | R_hat] side by side.
  auto packed = run_replicas(replicas, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ens, pencil.r(), n, rng), n);
    const ResolventStats st = resolvent_stats(op, lambda, kappa4 != 0.0);
    Matrix z = shift * st.H + Matrix::Identity(m, m);
    for (int p = 1; p <= pencil.r(); ++p) z += pencil.a(p) * st.H * pencil.a(p) * st.H;
    Matrix out(m, 3 * m);
    out << st.H, z, rn_sample(pencil, st, kappa4);
    return out;
  });

  std::vector<Matrix> hs, zs, rs, zr;
  for (const auto& s : packed) {
    hs.push_back(s.leftCols(m));
    zs.push_back(s.middleCols(m, m));
    rs.push_back(s.rightCols(m));
    zr.push_back(zs.back() + rs.back() / double(n));
  }

  MasterResidualReport rep;
  rep.n = n;
  rep.replicas = replicas;
  rep.kappa4 = kappa4;
  rep.gn = tagged(summarize(hs), run, n);
  rep.rn = tagged(summarize(rs), run, n);
  const auto ez = summarize(zs);
  const auto ezr = summarize(zr);
  rep.expectation_without_rn = residual_value(ez.mean, ez.stderr_);
  rep.expectation_with_rn = residual_value(ezr.mean, ezr.stderr_);

  const Matrix& g = rep.gn.mean;
  Matrix f = shift * g + Matrix::Identity(m, m);
  for (int p = 1; p <= pencil.r(); ++p) f += pencil.a(p) * g * pencil.a(p) * g;
  std::vector<Matrix> lin, lin_r;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    Matrix d = shift * hs[i];
    for (int p = 1; p <= pencil.r(); ++p) {
      const Matrix& a = pencil.a(p);
      d += a * hs[i] * a * g + a * g * a * hs[i];
    }
    lin_r.push_back(d + rs[i] / double(n));
    lin.push_back(std::move(d));
  }
  rep.plugin_without_rn = residual_value(f, summarize(lin).stderr_);
  rep.plugin_with_rn = residual_value(f + rep.rn.mean / double(n), summarize(lin_r).stderr_);
  return rep;
}

WishartResidualReport master_residual_wishart(const CoefficientPencil& pencil, double alpha,
                                              const SpectralParameter& lambda, int n, long replicas,
                                              const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_size(n);
  check_replicas(replicas);
  const Ensemble ens = Ensemble::wishart(alpha);
  const auto spec = ensembles::WishartSpec::from_ratio(n, alpha);
  const int m = pencil.m();

  double max_a = 0.0;
  bool all_invertible = true;
  for (int l = 1; l <= pencil.r(); ++l) {
    max_a = std::max(max_a, op_norm(pencil.a(l)));
    Eigen::JacobiSVD<Matrix> svd(pencil.a(l));
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0))) all_invertible = false;
  }
  WishartResidualReport rep;
  if (max_a == 0.0 || lambda.im_inverse_norm() < 1.0 / (2.0 * max_a)) {
    rep.branch = "im_bound";
  } else if (all_invertible) {
    rep.branch = "invertible";
  } else {
    throw Error(ErrorKind::precondition,
                "Wishart master residual needs ||Im(lambda)^{-1}|| < 1/(2 max_l ||a_l||) = " +
                    std::to_string(1.0 / (2.0 * max_a)) + " (got " + std::to_string(lambda.im_inverse_norm()) +
                    ") or every a_l invertible");
  }

  auto hs = run_replicas(replicas, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ens, pencil.r(), n, rng), n);
    return resolvent_stats(op, lambda).H;
  });
  rep.n = n;
  rep.p = spec.p;
  rep.replicas = replicas;
  rep.gn = tagged(summarize(hs), run, n);

  const Matrix& g = rep.gn.mean;
  const Matrix id = Matrix::Identity(m, m);
  const double ratio = double(spec.p) / double(n);
  const Matrix shift = lambda.value() - pencil.a0();
  Matrix res = shift * g - id;
  std::vector<Matrix> inv;
  for (int l = 1; l <= pencil.r(); ++l) {
    inv.push_back(Eigen::PartialPivLU<Matrix>(id - pencil.a(l) * g).inverse());
    res -= ratio * inv.back() * pencil.a(l) * g;
  }
  // d/dG of (1 - aG)^{-1} a G is (1 - aG)^{-1} a dG (1 - aG)^{-1}.
  std::vector<Matrix> lin;
  for (const auto& h : hs) {
    Matrix d = shift * h;
    for (int l = 1; l <= pencil.r(); ++l) {
      const Matrix& w = inv[static_cast<std::size_t>(l - 1)];
      d -= ratio * w * pencil.a(l) * h * w;
    }
    lin.push_back(std::move(d));
  }
  rep.residual = residual_value(res, summarize(lin).stderr_);
  return rep;
}

CorrectionReport correction_from_estimates(const CoefficientPencil& pencil, double kappa4,
                                           const SpectralParameter& lambda,
                                           const std::vector<MonteCarloEstimate>& estimates) {
  check_lambda(pencil, lambda);
  if (estimates.empty()) throw Error(ErrorKind::invalid_argument, "n_values must not be empty");
  CorrectionReport rep;
  rep.kappa4 = kappa4;
  rep.G = semicircle_G(pencil, lambda);
  rep.L = freeprob::corrections(pencil, lambda, kappa4).L;
  const int m = pencil.m();
  rep.im_trace_L = rep.L.trace().imag() / m;
  for (const auto& gn : estimates) {
    const double n = gn.n;
    CorrectionPoint pt;
    pt.n = gn.n;
    pt.gn = gn;
    pt.scaled = n * (gn.mean - rep.G);
    pt.deviation = op_norm(pt.scaled - rep.L);
    pt.stderr_ = n * gn.stderr_norm();
    pt.im_trace = pt.scaled.trace().imag() / m;
    pt.im_trace_stderr = n * gn.stderr_.diagonal().norm() / m;
    rep.inconclusive = rep.inconclusive || pt.stderr_ >= pt.deviation / 3.0;
    rep.points.push_back(std::move(pt));
  }
  const auto by_n = [](const CorrectionPoint& a, const CorrectionPoint& b) { return a.n < b.n; };
  const auto lo = std::min_element(rep.points.begin(), rep.points.end(), by_n);
  const auto hi = std::max_element(rep.points.begin(), rep.points.end(), by_n);
  rep.decreasing = hi->n > lo->n && hi->deviation < lo->deviation;
  return rep;
}

CorrectionReport correction_check(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                  const SpectralParameter& lambda, const std::vector<int>& n_values, long replicas,
                                  const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_replicas(replicas);
  if (n_values.empty()) throw Error(ErrorKind::invalid_argument, "n_values must not be empty");
  // Fail on the L precondition before any sampling.
  freeprob::corrections(pencil, lambda, dist.kappa4());
  const Ensemble ens = Ensemble::wigner(dist);
  std::vector<MonteCarloEstimate> estimates;
  for (int n : n_values) estimates.push_back(estimate_Gn(pencil, ens, lambda, n, replicas, run));
  return correction_from_estimates(pencil, dist.kappa4(), lambda, estimates);
}

BlockAverageReport block_average_check(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                       const Matrix& a, const SpectralParameter& lambda, int n, long replicas,
                                       const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_size(n);
  check_replicas(replicas);
  const int m = pencil.m();
  if (a.rows() != m || a.cols() != m) throw Error(ErrorKind::invalid_argument, "block-average weight a must be m x m");
  const Ensemble ens = Ensemble::wigner(dist);
  auto ds = run_replicas(replicas, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ens, pencil.r(), n, rng), n);
    const ResolventStats st = resolvent_stats(op, lambda, true);
    Matrix d = Matrix::Zero(m, m);
    for (int k = 0; k < n; ++k) {
      const Matrix rkk = st.block(k, k);
      d += rkk * a * rkk;
    }
    return Matrix(d / double(n));
  });
  BlockAverageReport rep;
  rep.n = n;
  rep.estimate = tagged(summarize(ds), run, n);
  const Matrix g = semicircle_G(pencil, lambda);
  rep.reference = g * a * g;
  rep.deviation = op_norm(rep.estimate.mean - rep.reference);
  rep.stderr_ = rep.estimate.stderr_norm();
  return rep;
}

ScalingReport fit_scaling(std::vector<ScalingPoint> points) {
  ScalingReport rep;
  rep.points = std::move(points);
  const auto& pts = rep.points;
  if (pts.size() < 3) {
    rep.note = "need at least 3 points for a slope";
    return rep;
  }
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].n <= pts[i - 1].n) {
      rep.note = "n values must be strictly increasing";
      return rep;
    }
  for (const auto& p : pts) {
    if (!(p.value > 0.0)) {
      rep.note = "nonpositive value at n = " + std::to_string(p.n);
      return rep;
    }
    if (!(p.stderr_ < p.value / 3.0)) {
      rep.note = "stderr >= value/3 at n = " + std::to_string(p.n);
      return rep;
    }
  }
  const bool exact = std::all_of(pts.begin(), pts.end(), [](const ScalingPoint& p) { return p.stderr_ == 0.0; });
  std::vector<double> x, y, w;
  for (const auto& p : pts) {
    x.push_back(std::log(double(p.n)));
    y.push_back(std::log(p.value));
    const double s = p.stderr_ / p.value;
    w.push_back(exact ? 1.0 : 1.0 / std::max(s * s, 1e-300));
  }
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += w[i] * x[i];
    ym += w[i] * y[i];
  }
  xm /= sw;
  ym /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  rep.has_slope = true;
  rep.slope = sxy / sxx;
  if (exact) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - ym - rep.slope * (x[i] - xm);
      rss += e * e;
    }
    rep.slope_stderr = std::sqrt(rss / double(x.size() - 2) / sxx);
  } else {
    rep.slope_stderr = std::sqrt(1.0 / sxx);
  }
  return rep;
}

namespace {

ScalingPoint variance_point(const std::vector<cplx>& values, int n) {
  const double N = static_cast<double>(values.size());
  std::vector<Matrix> ms;
  for (cplx v : values) ms.push_back(scalar_sample(v));
  const cplx mean = summarize(ms).mean(0, 0);
  std::vector<Matrix> d2, d4;
  for (cplx v : values) {
    const double a = std::norm(v - mean);
    d2.push_back(scalar_sample(a));
    d4.push_back(scalar_sample(a * a));
  }
  const double m2 = summarize(d2).mean(0, 0).real();
  const double m4 = summarize(d4).mean(0, 0).real();
  ScalingPoint pt;
  pt.n = n;
  pt.value = m2 * N / (N - 1.0);
  pt.stderr_ = std::sqrt(std::max(0.0, m4 - m2 * m2) / N);
  return pt;
}

}  // namespace

ScalingPoint trace_word_variance(const ncpoly::Word& word, int num_generators,
                                 const ensembles::EntryDistribution& dist, int n, long replicas,
                                 const RunOptions& run) {
  check_size(n);
  check_replicas(replicas, kMinVarianceReplicas);
  if (static_cast<int>(word.size()) > kMaxVarianceWordLength)
    throw Error(ErrorKind::invalid_argument, "word length must be <= " + std::to_string(kMaxVarianceWordLength));
  for (int g : word)
    if (g < 1 || g > num_generators) throw Error(ErrorKind::invalid_argument, "word letter out of range 1..r");
  if (word.empty()) return {n, 0.0, 0.0};
  const Ensemble ens = Ensemble::wigner(dist);
  const std::size_t half = (word.size() + 1) / 2;
  auto ts = run_replicas(replicas, n, run, [&](RngStream& rng) {
    const auto xs = sample_matrices(ens, num_generators, n, rng);
    auto product = [&](std::size_t lo, std::size_t hi) {
      Matrix p = xs[static_cast<std::size_t>(word[lo] - 1)];
      for (std::size_t i = lo + 1; i < hi; ++i) p = p * xs[static_cast<std::size_t>(word[i] - 1)];
      return p;
    };
    const Matrix left = product(0, half);
    cplx tr;
    if (half == word.size()) {
      tr = left.trace();
    } else {
      // Tr(A B) = sum_ij A_ij B_ji
      tr = left.cwiseProduct(product(half, word.size()).transpose()).sum();
    }
    return scalar_sample(tr / double(n));
  });
  std::vector<cplx> values;
  for (const auto& t : ts) values.push_back(t(0, 0));
  return variance_point(values, n);
}

ScalingPoint resolvent_entry_variance(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                      const SpectralParameter& lambda, int row, int col, int n, long replicas,
                                      const RunOptions& run) {
  check_lambda(pencil, lambda);
  check_size(n);
  check_replicas(replicas, kMinVarianceReplicas);
  if (row < 0 || row >= pencil.m() || col < 0 || col >= pencil.m())
    throw Error(ErrorKind::invalid_argument, "resolvent entry index out of range");
  const Ensemble ens = Ensemble::wigner(dist);
  auto hs = run_replicas(replicas, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ens, pencil.r(), n, rng), n);
    return scalar_sample(resolvent_stats(op, lambda).H(row, col));
  });
  std::vector<cplx> values;
  for (const auto& h : hs) values.push_back(h(0, 0));
  return variance_point(values, n);
}

IbpFunction IbpFunction::zero() { return {}; }

IbpFunction IbpFunction::trace(Matrix A) {
  IbpFunction f;
  f.kind = Kind::trace;
  f.A = std::move(A);
  return f;
}

IbpFunction IbpFunction::resolvent(cplx z, int j, int k) {
  if (z.imag() < 1.0) throw Error(ErrorKind::invalid_argument, "resolvent test function needs Im z >= 1");
  IbpFunction f;
  f.kind = Kind::resolvent;
  f.z = z;
  f.j = j;
  f.k = k;
  return f;
}

Matrix hermitian_basis(int n, int j, int k, bool imaginary) {
  if (j < 0 || j >= n || k < 0 || k >= n) throw Error(ErrorKind::invalid_argument, "basis index out of range");
  Matrix h = Matrix::Zero(n, n);
  if (j == k) {
    if (imaginary) throw Error(ErrorKind::invalid_argument, "imaginary basis element needs j != k");
    h(j, j) = 1.0;
  } else if (imaginary) {
    h(j, k) = I;
    h(k, j) = -I;
  } else {
    h(j, k) = 1.0;
    h(k, j) = 1.0;
  }
  return h;
}

IbpReport wishart_ibp_check(const ensembles::WishartSpec& spec, const IbpFunction& phi, const Matrix& H,
                            long replicas, const RunOptions& run) {
  check_replicas(replicas);
  const int n = spec.n;
  if (spec.p < n + 2)
    throw Error(ErrorKind::precondition, "Wishart integration by parts needs p >= n + 2 (got n = " +
                                             std::to_string(n) + ", p = " + std::to_string(spec.p) + ")");
  if (H.rows() != n || H.cols() != n || !is_hermitian(H))
    throw Error(ErrorKind::invalid_argument, "H must be a Hermitian n x n matrix");
  if (phi.kind == IbpFunction::Kind::trace && (phi.A.rows() != n || phi.A.cols() != n))
    throw Error(ErrorKind::invalid_argument, "trace test function needs an n x n matrix A");
  if (phi.kind == IbpFunction::Kind::resolvent && (phi.j < 0 || phi.j >= n || phi.k < 0 || phi.k >= n))
    throw Error(ErrorKind::invalid_argument, "resolvent test function index out of range");

  IbpReport rep;
  rep.replicas = replicas;
  rep.n = n;
  rep.p = spec.p;
  if (phi.kind == IbpFunction::Kind::zero) return rep;

  const cplx tr_h = H.trace();
  auto vs = run_replicas(replicas, n, run, [&](RngStream& rng) {
    const Matrix y = ensembles::sample_wishart(spec, rng);
    const cplx tr_yinv_h = y.llt().solve(H).trace();
    cplx value, derivative;
    if (phi.kind == IbpFunction::Kind::trace) {
      value = (y * phi.A).trace();
      derivative = (H * phi.A).trace();
    } else {
      const Matrix r = Eigen::PartialPivLU<Matrix>(phi.z * Matrix::Identity(n, n) - y).inverse();
      value = r(phi.j, phi.k) - (phi.j == phi.k ? 1.0 / phi.z : cplx{});
      derivative = (r.row(phi.j) * H * r.col(phi.k))(0, 0);
    }
    return scalar_sample(derivative - double(n) * value * tr_h + double(spec.p - n) * value * tr_yinv_h);
  });
  const auto est = summarize(vs);
  rep.value = est.mean(0, 0);
  rep.stderr_ = est.stderr_(0, 0);
  return rep;
}

std::vector<freeprob::SupportInterval> predicted_support(const CoefficientPencil& pencil, const FreeModel& model,
                                                         int grid_points, const freeprob::DensityOptions& opts) {
  if (pencil.r() == 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(pencil.a0(), Eigen::EigenvaluesOnly);
    std::vector<freeprob::SupportInterval> out;
    for (int i = 0; i < es.eigenvalues().size(); ++i) out.push_back({es.eigenvalues()(i), es.eigenvalues()(i)});
    return out;
  }
  double bound = op_norm(pencil.a0());
  for (int p = 1; p <= pencil.r(); ++p) bound += op_norm(pencil.a(p)) * model.edge();
  const auto grid = freeprob::linspace(-bound - 0.5, bound + 0.5, grid_points);
  return freeprob::density(pencil, model, grid, opts).support;
}

ContainmentReport spectrum_containment(const CoefficientPencil& pencil, const Ensemble& ensemble, int n,
                                       double epsilon, int seeds, const RunOptions& run,
                                       const std::vector<freeprob::SupportInterval>& support) {
  check_size(n);
  if (!(epsilon > 0.0)) throw Error(ErrorKind::invalid_argument, "epsilon must be positive");
  if (seeds < 1) throw Error(ErrorKind::invalid_argument, "seeds must be positive");
  if (support.empty()) throw Error(ErrorKind::precondition, "predicted support is empty");
  ContainmentReport rep;
  rep.support = support;
  rep.epsilon = epsilon;
  rep.n = n;
  auto rows = run_replicas(seeds, n, run, [&](RngStream& rng) {
    BlockOperator op(pencil, sample_matrices(ensemble, pencil.r(), n, rng), n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(op.assembled(), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    double excess = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& iv : support) {
        const double x = ev(i);
        d = std::min(d, x < iv.lo ? iv.lo - x : (x > iv.hi ? x - iv.hi : 0.0));
      }
      excess = std::max(excess, d);
    }
    Matrix row(1, 3);
    row << ev.minCoeff(), ev.maxCoeff(), excess;
    return row;
  });
  int passed = 0;
  for (const auto& r : rows) {
    ContainmentSeed s;
    s.min_eigenvalue = r(0, 0).real();
    s.max_eigenvalue = r(0, 1).real();
    s.max_excess = r(0, 2).real();
    s.contained = s.max_excess < epsilon;
    passed += s.contained ? 1 : 0;
    rep.seeds.push_back(s);
  }
  rep.pass_rate = double(passed) / double(seeds);
  return rep;
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (is_hermitian(m)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  const Matrix g = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

NormConvergenceReport norm_convergence(const ncpoly::NCPolynomial& p, const Ensemble& ensemble,
                                       const std::vector<int>& n_values, int seeds, const RunOptions& run,
                                       double prediction) {
  if (seeds < 1) throw Error(ErrorKind::invalid_argument, "seeds must be positive");
  if (n_values.empty()) throw Error(ErrorKind::invalid_argument, "n_values must not be empty");
  NormConvergenceReport rep;
  rep.prediction = prediction;
  for (int n : n_values) {
    check_size(n);
    auto norms = run_replicas(seeds, n, run, [&](RngStream& rng) {
      const auto xs = sample_matrices(ensemble, p.num_generators(), n, rng);
      return scalar_sample(operator_norm(ncpoly::evaluate(p, xs)));
    });
    NormPoint pt;
    pt.n = n;
    std::vector<double> dev;
    for (const auto& v : norms) {
      pt.norms.push_back(v(0, 0).real());
      dev.push_back(std::abs(pt.norms.back() - prediction));
    }
    const double mean = std::accumulate(dev.begin(), dev.end(), 0.0) / double(dev.size());
    double ss = 0.0;
    for (double d : dev) ss += (d - mean) * (d - mean);
    const double sd = dev.size() > 1 ? std::sqrt(ss / double(dev.size() - 1)) : 0.0;
    std::sort(dev.begin(), dev.end());
    const std::size_t k = dev.size();
    pt.median_deviation = k % 2 ? dev[k / 2] : 0.5 * (dev[k / 2 - 1] + dev[k / 2]);
    pt.median_stderr = std::sqrt(M_PI / 2.0) * sd / std::sqrt(double(k));
    rep.points.push_back(std::move(pt));
  }
  rep.non_increasing = true;
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const auto& a = rep.points[i - 1];
    const auto& b = rep.points[i];
    if (b.median_deviation > a.median_deviation + std::hypot(a.median_stderr, b.median_stderr))
      rep.non_increasing = false;
  }
  return rep;
}

}  // namespace freeconv::montecarlo
