#include "freeconv/freeprob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace freeconv::freeprob {

namespace {

// Largest m for which Newton builds the dense m^2 x m^2 Jacobian.
constexpr int kDenseJacobianMax = 32;

Matrix checked_inverse(const Matrix& a, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorKind::solver_failure, std::string("singular ") + what);
  return lu.inverse();
}

Matrix kron(const Matrix& x, const Matrix& y) {
  const Eigen::Index p = y.rows();
  const Eigen::Index q = y.cols();
  Matrix k(x.rows() * p, x.cols() * q);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) k.block(i * p, j * q, p, q) = x(i, j) * y;
  return k;
}

double pencil_scale(const CoefficientPencil& pencil, const FreeModel& model) {
  double s = op_norm(pencil.a0());
  for (int i = 1; i <= pencil.r(); ++i) s += op_norm(pencil.a(i)) * model.edge();
  return s;
}

class Solver {
 public:
  Solver(const CoefficientPencil& pencil, const FreeModel& model, const SolverOptions& opts)
      : pc_(pencil), model_(model), opts_(opts), m_(pencil.m()) {
    if (!(opts.tol > 0.0)) throw Error(ErrorKind::invalid_argument, "tol must be positive");
    if (opts.max_iter < 1) throw Error(ErrorKind::invalid_argument, "max_iter must be positive");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0))
      throw Error(ErrorKind::invalid_argument, "damping must lie in (0, 1]");
  }

  // lambda with Im(lambda) >= 0; definite selects the ||G|| <= ||Im(lambda)^{-1}|| check.
  StieltjesSolution solve(const Matrix& lambda, bool definite) {
    StieltjesSolution best;
    best.residual_norm = std::numeric_limits<double>::infinity();
    bound_ = definite ? 1.0 / min_eigenvalue(im_part(lambda)) : std::numeric_limits<double>::infinity();

    if (pc_.r() == 0) {
      best.G = checked_inverse(lambda - pc_.a0(), "lambda - a_0");
      best.residual_norm = residual_norm(lambda, best.G);
      best.converged = best.residual_norm <= opts_.tol;
      return best;
    }

    if (auto g = direct(lambda, best)) return finish(lambda, *g);
    if (auto g = continuation(lambda)) return finish(lambda, *g);
    best.iterations = iterations_;
    best.converged = false;
    if (best.G.size() == 0) best.G = Matrix::Zero(m_, m_);
    return best;
  }

  Matrix residual(const Matrix& lambda, const Matrix& G) const {
    const Matrix Ginv = checked_inverse(G, "G");
    if (model_.kind == FreeModel::Kind::semicircular) {
      Matrix f = pc_.a0() - lambda + Ginv;
      for (int i = 1; i <= pc_.r(); ++i) f += pc_.a(i) * G * pc_.a(i);
      return f;
    }
    const Matrix one = Matrix::Identity(m_, m_);
    Matrix f = pc_.a0() - lambda + Ginv;
    for (int i = 1; i <= pc_.r(); ++i)
      f += model_.alpha * checked_inverse(one - pc_.a(i) * G, "1 - a_i G") * pc_.a(i);
    return f;
  }

  // Matrix of H -> DF(G)[H] acting on column-major vec(H).
  Matrix jacobian(const Matrix& G) const {
    const Matrix Ginv = checked_inverse(G, "G");
    Matrix J = -kron(Ginv.transpose(), Ginv);
    const Matrix one = Matrix::Identity(m_, m_);
    for (int i = 1; i <= pc_.r(); ++i) {
      const Matrix& a = pc_.a(i);
      if (model_.kind == FreeModel::Kind::semicircular) {
        J += kron(a.transpose(), a);
      } else {
        const Matrix P = checked_inverse(one - a * G, "1 - a_i G") * a;
        J += model_.alpha * kron(P.transpose(), P);
      }
    }
    return J;
  }

 private:
  double residual_norm(const Matrix& lambda, const Matrix& G) const { return op_norm(residual(lambda, G)); }

  Matrix fixed_point_map(const Matrix& lambda, const Matrix& G) const {
    Matrix d = lambda - pc_.a0();
    if (model_.kind == FreeModel::Kind::semicircular) {
      for (int i = 1; i <= pc_.r(); ++i) d -= pc_.a(i) * G * pc_.a(i);
    } else {
      const Matrix one = Matrix::Identity(m_, m_);
      for (int i = 1; i <= pc_.r(); ++i)
        d -= model_.alpha * checked_inverse(one - pc_.a(i) * G, "1 - a_i G") * pc_.a(i);
    }
    return checked_inverse(d, "fixed-point denominator");
  }

  bool budget_left() const { return iterations_ < opts_.max_iter; }

  bool on_branch(const Matrix& G) const {
    if (!G.allFinite()) return false;
    const double scale = std::max(1.0, op_norm(G));
    if (max_eigenvalue(im_part(G)) > 1e-10 * scale) return false;
    if (std::isfinite(bound_) && op_norm(G) > bound_ * (1.0 + 1e-8)) return false;
    return true;
  }

  // Damped fixed point; returns the best iterate and its residual.
  std::pair<Matrix, double> damped_iteration(const Matrix& lambda, Matrix G, int max_steps) {
    const double th = opts_.damping;
    double res = residual_norm(lambda, G);
    Matrix best = G;
    double best_res = res;
    int since_improvement = 0;
    double reference = res;
    for (int k = 0; k < max_steps && budget_left() && res > opts_.tol; ++k) {
      ++iterations_;
      G = (1.0 - th) * G + th * fixed_point_map(lambda, G);
      res = residual_norm(lambda, G);
      if (res < best_res) {
        best = G;
        best_res = res;
      }
      if (res < 0.9 * reference) {
        reference = res;
        since_improvement = 0;
      } else if (++since_improvement > 50) {
        break;
      }
    }
    return {best, best_res};
  }

  // Newton with backtracking; polishes one step past tol.
  std::optional<Matrix> newton(const Matrix& lambda, Matrix G, int max_steps = 60) {
    if (m_ > kDenseJacobianMax) {
      auto [g, res] = damped_iteration(lambda, G, opts_.max_iter);
      if (res <= opts_.tol) return g;
      return std::nullopt;
    }
    Matrix F = residual(lambda, G);
    double res = op_norm(F);
    bool polished = false;
    for (int k = 0; k < max_steps && budget_left(); ++k) {
      if (res <= opts_.tol) {
        if (polished) break;
        polished = true;
      }
      ++iterations_;
      Eigen::PartialPivLU<Matrix> lu(jacobian(G));
      if (!(lu.rcond() > 1e-15)) break;
      const Eigen::VectorXcd step = lu.solve(-Eigen::Map<const Eigen::VectorXcd>(F.data(), F.size()));
      const Matrix delta = Eigen::Map<const Matrix>(step.data(), m_, m_);
      double s = 1.0;
      bool accepted = false;
      for (int h = 0; h < 30; ++h, s *= 0.5) {
        const Matrix Gt = G + s * delta;
        try {
          const Matrix Ft = residual(lambda, Gt);
          const double rt = op_norm(Ft);
          if (std::isfinite(rt) && rt < res) {
            G = Gt;
            F = Ft;
            res = rt;
            accepted = true;
            break;
          }
        } catch (const Error&) {
        }
      }
      if (!accepted) break;
    }
    if (res <= opts_.tol) return G;
    return std::nullopt;
  }

  std::optional<Matrix> direct(const Matrix& lambda, StieltjesSolution& best) {
    try {
      Matrix G0 = checked_inverse(lambda - pc_.a0(), "lambda - a_0");
      auto [g, res] = damped_iteration(lambda, G0, std::min(opts_.max_iter, 500));
      best.G = g;
      best.residual_norm = res;
      if (res <= 1e-2 || res <= opts_.tol) {
        if (auto polished = newton(lambda, g); polished && on_branch(*polished)) return polished;
      }
    } catch (const Error&) {
    }
    return std::nullopt;
  }

  // Track the solution from lambda + i t 1 with t large down to t = 0.
  std::optional<Matrix> continuation(const Matrix& lambda) {
    const Matrix one = Matrix::Identity(m_, m_);
    const double scale = std::max({1.0, pencil_scale(pc_, model_), op_norm(lambda)});
    const double t0 = 10.0 * scale;
    const double im_min = std::max(0.0, min_eigenvalue(im_part(lambda)));
    const double t_floor = std::max(1e-14 * scale, 1e-3 * im_min);

    const double saved_bound = bound_;
    auto stage_bound = [&](double t) {
      bound_ = 1.0 / (t + im_min);
      if (!std::isfinite(bound_)) bound_ = std::numeric_limits<double>::infinity();
    };

    Matrix G;
    try {
      const Matrix lt = lambda + I * t0 * one;
      stage_bound(t0);
      auto [g, res] = damped_iteration(lt, checked_inverse(lt - pc_.a0(), "lambda - a_0"), 2000);
      auto n = newton(lt, g);
      if (!n || !on_branch(*n)) {
        bound_ = saved_bound;
        return std::nullopt;
      }
      G = *n;
    } catch (const Error&) {
      bound_ = saved_bound;
      return std::nullopt;
    }

    double t = t0;
    double factor = 0.25;
    while (t > 0.0 && budget_left()) {
      const double t_next = t > t_floor ? std::max(t * factor, t_floor) : 0.0;
      stage_bound(t_next);
      std::optional<Matrix> next;
      try {
        next = newton(lambda + I * t_next * one, G);
      } catch (const Error&) {
        next.reset();
      }
      if (next && on_branch(*next)) {
        G = *next;
        t = t_next;
        factor = std::max(0.25, 1.0 - 2.0 * (1.0 - factor));
      } else {
        factor = 1.0 - (1.0 - factor) * 0.5;
        if (factor > 0.999) break;
      }
    }
    bound_ = saved_bound;
    if (t == 0.0) return G;
    return std::nullopt;
  }

  StieltjesSolution finish(const Matrix& lambda, const Matrix& G) const {
    StieltjesSolution sol;
    sol.G = G;
    sol.residual_norm = residual_norm(lambda, G);
    sol.iterations = iterations_;
    sol.converged = sol.residual_norm <= opts_.tol;
    return sol;
  }

  const CoefficientPencil& pc_;
  const FreeModel& model_;
  const SolverOptions& opts_;
  int m_;
  int iterations_ = 0;
  double bound_ = std::numeric_limits<double>::infinity();
};

void check_dims(const CoefficientPencil& pencil, const Matrix& lambda) {
  if (lambda.rows() != pencil.m() || lambda.cols() != pencil.m())
    throw Error(ErrorKind::invalid_argument, "lambda must be " + std::to_string(pencil.m()) + "x" +
                                                 std::to_string(pencil.m()) + " to match the pencil");
}

// Neville evaluation at 0 of the polynomial through (x_j, f_j).
double extrapolate_to_zero(const std::vector<double>& x, std::vector<double> f) {
  const std::size_t n = f.size();
  for (std::size_t k = 1; k < n; ++k)
    for (std::size_t j = 0; j + k < n; ++j) f[j] = (x[j + k] * f[j] - x[j] * f[j + 1]) / (x[j + k] - x[j]);
  return f[0];
}

constexpr double kMonotoneTol = 1e-6;

template <class RawDensity>
SpectralDensityEstimate estimate_density(const std::vector<double>& grid, const DensityOptions& opts,
                                         RawDensity&& raw) {
  if (grid.empty()) throw Error(ErrorKind::invalid_argument, "density grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error(ErrorKind::invalid_argument, "density grid must be increasing");
  const auto& ys = opts.y_levels;
  if (ys.size() < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 y levels");
  for (std::size_t j = 0; j < ys.size(); ++j) {
    if (!(ys[j] > 0.0)) throw Error(ErrorKind::invalid_argument, "y levels must be positive");
    if (j > 0 && !(ys[j] < ys[j - 1])) throw Error(ErrorKind::invalid_argument, "y levels must be decreasing");
  }
  if (!(opts.threshold > 0.0)) throw Error(ErrorKind::invalid_argument, "threshold must be positive");
  if (!(opts.edge_y > 0.0)) throw Error(ErrorKind::invalid_argument, "edge_y must be positive");

  SpectralDensityEstimate est;
  est.grid = grid;
  est.y_levels = ys;
  est.threshold = opts.threshold;
  est.density.resize(grid.size());
  est.unstable.assign(grid.size(), false);

  std::vector<double> f(ys.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) f[j] = raw(grid[i], ys[j]);
    double v = extrapolate_to_zero(ys, f);
    bool monotone = true;
    for (std::size_t j = 2; j < f.size(); ++j) {
      const double d1 = f[j - 1] - f[j - 2];
      const double d2 = f[j] - f[j - 1];
      if (d1 * d2 < 0.0 && std::min(std::abs(d1), std::abs(d2)) > kMonotoneTol) monotone = false;
    }
    const bool decaying = f.back() <= f.front();
    if (!std::isfinite(v) || !monotone) {
      est.unstable[i] = true;
      v = f.back();
    } else if (v < -kMonotoneTol) {
      // Overshoot below zero: a tail decaying with y is outside the support.
      est.unstable[i] = true;
      v = decaying ? 0.0 : f.back();
    }
    est.density[i] = std::max(0.0, v);
  }

  for (std::size_t i = 1; i < grid.size(); ++i)
    est.mass += 0.5 * (grid[i] - grid[i - 1]) * (est.density[i] + est.density[i - 1]);

  auto inside = [&](double x) { return raw(x, opts.edge_y) > opts.threshold; };
  const double lo_limit = grid.front();
  const double hi_limit = grid.back();
  auto bisect = [&](double in, double out) {
    while (std::abs(out - in) > opts.edge_tol) {
      const double mid = 0.5 * (in + out);
      if (inside(mid))
        in = mid;
      else
        out = mid;
    }
    return 0.5 * (in + out);
  };

  const std::size_t n = grid.size();
  std::size_t i = 0;
  std::vector<SupportInterval> intervals;
  while (i < n) {
    if (est.density[i] <= opts.threshold) {
      ++i;
      continue;
    }
    std::size_t first = i;
    while (i + 1 < n && est.density[i + 1] > opts.threshold) ++i;
    std::size_t last = i;
    ++i;

    // Find grid points inside and outside at the edge offset, then bisect.
    std::size_t a = first;
    while (a <= last && !inside(grid[a])) ++a;
    if (a > last) continue;
    std::size_t b = last;
    while (b > a && !inside(grid[b])) --b;

    double lo = lo_limit;
    std::size_t out_l = a;
    while (out_l > 0 && inside(grid[out_l - 1])) --out_l;
    if (out_l > 0) lo = bisect(grid[out_l], grid[out_l - 1]);

    double hi = hi_limit;
    std::size_t out_r = b;
    while (out_r + 1 < n && inside(grid[out_r + 1])) ++out_r;
    if (out_r + 1 < n) hi = bisect(grid[out_r], grid[out_r + 1]);

    if (!intervals.empty() && lo <= intervals.back().hi) {
      intervals.back().hi = std::max(intervals.back().hi, hi);
    } else {
      intervals.push_back({lo, hi});
    }
    while (i < n && grid[i] <= hi) ++i;
  }
  est.support = std::move(intervals);
  return est;
}

}  // namespace

SpectralParameter::SpectralParameter(Matrix lambda) : lambda_(std::move(lambda)) {
  if (lambda_.rows() < 1 || lambda_.rows() != lambda_.cols())
    throw Error(ErrorKind::invalid_argument, "lambda must be a nonempty square matrix");
  if (!lambda_.allFinite()) throw Error(ErrorKind::invalid_argument, "lambda has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> es(im_part(lambda_), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (lo > 0.0) {
    half_ = HalfPlane::upper;
    im_inv_norm_ = 1.0 / lo;
  } else if (hi < 0.0) {
    half_ = HalfPlane::lower;
    im_inv_norm_ = -1.0 / hi;
  } else {
    throw Error(ErrorKind::invalid_argument, "Im(lambda) is neither positive nor negative definite");
  }
}

SpectralParameter SpectralParameter::scalar(cplx z, int m) {
  if (m < 1) throw Error(ErrorKind::invalid_argument, "m must be positive");
  return SpectralParameter(z * Matrix::Identity(m, m));
}

FreeModel FreeModel::marchenko_pastur(double alpha) {
  if (!std::isfinite(alpha) || alpha < 1.0)
    throw Error(ErrorKind::invalid_argument, "Marchenko-Pastur alpha must be finite and >= 1");
  return {Kind::marchenko_pastur, alpha};
}

double FreeModel::edge() const {
  if (kind == Kind::semicircular) return 2.0;
  const double s = std::sqrt(alpha) + 1.0;
  return s * s;
}

Matrix equation_residual(const CoefficientPencil& pencil, const FreeModel& model, const Matrix& lambda,
                         const Matrix& G) {
  check_dims(pencil, lambda);
  if (G.rows() != pencil.m() || G.cols() != pencil.m())
    throw Error(ErrorKind::invalid_argument, "G has the wrong dimension");
  SolverOptions opts;
  return Solver(pencil, model, opts).residual(lambda, G);
}

StieltjesSolution solve_G(const CoefficientPencil& pencil, const FreeModel& model, const SpectralParameter& lambda,
                          const SolverOptions& opts) {
  check_dims(pencil, lambda.value());
  Solver solver(pencil, model, opts);
  if (lambda.half_plane() == HalfPlane::upper) return solver.solve(lambda.value(), true);
  StieltjesSolution sol = solver.solve(lambda.value().adjoint(), true);
  sol.G = sol.G.adjoint().eval();
  return sol;
}

StieltjesSolution solve_G_semidefinite(const CoefficientPencil& pencil, const FreeModel& model, const Matrix& lambda,
                                       const SolverOptions& opts) {
  check_dims(pencil, lambda);
  if (min_eigenvalue(im_part(lambda)) < -1e-14 * std::max(1.0, op_norm(lambda)))
    throw Error(ErrorKind::invalid_argument, "Im(lambda) must be positive semidefinite");
  Solver solver(pencil, model, opts);
  StieltjesSolution sol = solver.solve(lambda, false);
  if (!sol.converged)
    throw Error(ErrorKind::not_converged,
                "Stieltjes solver did not converge (residual " + std::to_string(sol.residual_norm) + ")");
  return sol;
}

cplx g_scalar(const CoefficientPencil& pencil, const FreeModel& model, cplx z, const SolverOptions& opts) {
  if (z.imag() == 0.0) throw Error(ErrorKind::invalid_argument, "g(z) needs Im(z) != 0");
  const StieltjesSolution sol = solve_G(pencil, model, SpectralParameter::scalar(z, pencil.m()), opts);
  if (!sol.converged)
    throw Error(ErrorKind::not_converged,
                "Stieltjes solver did not converge (residual " + std::to_string(sol.residual_norm) + ")");
  return sol.G.trace() / static_cast<double>(pencil.m());
}

cplx g_polynomial(const ncpoly::LinearizationResult& lin, const FreeModel& model, cplx z, const SolverOptions& opts) {
  if (z.imag() == 0.0) throw Error(ErrorKind::invalid_argument, "g(z) needs Im(z) != 0");
  const bool lower = z.imag() < 0.0;
  const cplx zu = lower ? std::conj(z) : z;
  const auto [r, c] = lin.output_slot;
  if (lin.pencil.m() == 1) {
    const cplx g = g_scalar(lin.pencil, model, zu, opts);
    return lower ? std::conj(g) : g;
  }
  const StieltjesSolution sol = solve_G_semidefinite(lin.pencil, model, ncpoly::output_corner(lin, zu), opts);
  const cplx g = sol.G(r, c);
  return lower ? std::conj(g) : g;
}

Matrix directional_derivative(const CoefficientPencil& pencil, const FreeModel& model,
                              const SpectralParameter& lambda, const Matrix& h, const SolverOptions& opts) {
  const int m = pencil.m();
  if (h.rows() != m || h.cols() != m) throw Error(ErrorKind::invalid_argument, "h has the wrong dimension");
  if (m > kDenseJacobianMax)
    throw Error(ErrorKind::invalid_argument, "directional derivative supports m <= " +
                                                 std::to_string(kDenseJacobianMax));
  const StieltjesSolution sol = solve_G(pencil, model, lambda, opts);
  if (!sol.converged) throw Error(ErrorKind::not_converged, "solve_G did not converge at lambda");
  if (h.isZero(0.0)) return Matrix::Zero(m, m);
  Solver solver(pencil, model, opts);
  Eigen::PartialPivLU<Matrix> lu(solver.jacobian(sol.G));
  if (!(lu.rcond() > 1e-15)) throw Error(ErrorKind::solver_failure, "singular linearized equation");
  const Eigen::VectorXcd d = lu.solve(Eigen::Map<const Eigen::VectorXcd>(h.data(), h.size()));
  return Eigen::Map<const Matrix>(d.data(), m, m);
}

CorrectionTerm corrections(const CoefficientPencil& pencil, const SpectralParameter& lambda, double kappa4,
                           const SolverOptions& opts) {
  if (!std::isfinite(kappa4)) throw Error(ErrorKind::invalid_argument, "kappa4 must be finite");
  if (lambda.im_inverse_norm() > kMaxCorrectionImInverse)
    throw Error(ErrorKind::precondition, "L(lambda) is evaluated only for ||Im(lambda)^{-1}|| <= 100 (got " +
                                             std::to_string(lambda.im_inverse_norm()) + ")");
  check_dims(pencil, lambda.value());
  const int m = pencil.m();
  CorrectionTerm c;
  c.kappa4 = kappa4;
  if (kappa4 == 0.0) {
    c.R = Matrix::Zero(m, m);
    c.L = Matrix::Zero(m, m);
    return c;
  }
  const FreeModel model = FreeModel::semicircular();
  const StieltjesSolution sol = solve_G(pencil, model, lambda, opts);
  if (!sol.converged) throw Error(ErrorKind::not_converged, "solve_G did not converge at lambda");
  const Matrix& G = sol.G;
  c.R = Matrix::Zero(m, m);
  for (int p = 1; p <= pencil.r(); ++p) {
    const Matrix aG = pencil.a(p) * G;
    c.R += aG * aG * aG * aG;
  }
  c.R *= kappa4 / 2.0;
  c.L = -directional_derivative(pencil, model, lambda, c.R * checked_inverse(G, "G"), opts);
  return c;
}

SpectralDensityEstimate density(const CoefficientPencil& pencil, const FreeModel& model,
                                const std::vector<double>& grid, const DensityOptions& opts) {
  auto raw = [&](double x, double y) { return -g_scalar(pencil, model, cplx(x, y), opts.solver).imag() / M_PI; };
  return estimate_density(grid, opts, raw);
}

SpectralDensityEstimate polynomial_density(const ncpoly::LinearizationResult& lin, const FreeModel& model,
                                           const std::vector<double>& grid, const DensityOptions& opts) {
  auto raw = [&](double x, double y) { return -g_polynomial(lin, model, cplx(x, y), opts.solver).imag() / M_PI; };
  return estimate_density(grid, opts, raw);
}

double norm_prediction(const ncpoly::NCPolynomial& p, const FreeModel& model, const NormOptions& opts) {
  if (p.degree() <= 0) return std::abs(p.coefficient({}));
  if (!ncpoly::is_self_adjoint(p)) return std::sqrt(norm_prediction(ncpoly::adjoint(p) * p, model, opts));
  if (opts.grid_points < 3) throw Error(ErrorKind::invalid_argument, "norm prediction needs >= 3 grid points");
  const auto lin = ncpoly::linearize(p);
  const double bound = ncpoly::norm_bound(p, model.edge());
  const double reach = 1.05 * bound + 0.1;
  const auto est = polynomial_density(lin, model, linspace(-reach, reach, opts.grid_points), opts.density);
  if (est.support.empty()) throw Error(ErrorKind::solver_failure, "no spectrum detected for the polynomial");
  return std::max(std::abs(est.support.front().lo), std::abs(est.support.back().hi));
}

std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 2) throw Error(ErrorKind::invalid_argument, "linspace needs at least 2 points");
  std::vector<double> v(static_cast<std::size_t>(points));
  const double h = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = lo + h * i;
  v.back() = hi;
  return v;
}

}  // namespace freeconv::freeprob
