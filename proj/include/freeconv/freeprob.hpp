#pragma once

#include <vector>

#include "freeconv/common.hpp"
#include "freeconv/ncpoly.hpp"
#include "freeconv/pencil.hpp"

namespace freeconv::freeprob {

enum class HalfPlane { upper, lower };

// lambda in M_m(C) with Im(lambda) positive (upper) or negative (lower) definite.
class SpectralParameter {
 public:
  explicit SpectralParameter(Matrix lambda);
  static SpectralParameter scalar(cplx z, int m);

  const Matrix& value() const { return lambda_; }
  int m() const { return static_cast<int>(lambda_.rows()); }
  HalfPlane half_plane() const { return half_; }
  // ||Im(lambda)^{-1}||
  double im_inverse_norm() const { return im_inv_norm_; }

 private:
  Matrix lambda_;
  HalfPlane half_ = HalfPlane::upper;
  double im_inv_norm_ = 0.0;
};

struct FreeModel {
  enum class Kind { semicircular, marchenko_pastur };
  Kind kind = Kind::semicircular;
  double alpha = 1.0;  // marchenko_pastur only, >= 1

  static FreeModel semicircular() { return {}; }
  static FreeModel marchenko_pastur(double alpha);

  // Right edge of the generator's spectrum: 2 or (sqrt(alpha) + 1)^2.
  double edge() const;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  double damping = 0.5;
};

struct StieltjesSolution {
  Matrix G;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Defining equation of the model, evaluated at (lambda, G):
//   semicircular:      sum a_i G a_i + (a_0 - lambda) + G^{-1}
//   marchenko_pastur:  a_0 + alpha sum (1 - a_i G)^{-1} a_i + G^{-1} - lambda
Matrix equation_residual(const CoefficientPencil& pencil, const FreeModel& model, const Matrix& lambda,
                         const Matrix& G);

// G(lambda) = (id (x) tau)[(lambda (x) 1 - s)^{-1}]. Damped fixed point from
// (lambda - a_0)^{-1}, then Newton with continuation in Im(lambda).
StieltjesSolution solve_G(const CoefficientPencil& pencil, const FreeModel& model, const SpectralParameter& lambda,
                          const SolverOptions& opts = {});

// Same, for lambda with positive semidefinite imaginary part (e.g. the
// linearization corner z E_11). Throws Error(not_converged) on failure.
StieltjesSolution solve_G_semidefinite(const CoefficientPencil& pencil, const FreeModel& model, const Matrix& lambda,
                                       const SolverOptions& opts = {});

// g(z) = tr_m G(z 1_m).
cplx g_scalar(const CoefficientPencil& pencil, const FreeModel& model, cplx z, const SolverOptions& opts = {});

// Stieltjes transform of p(x) read from the (1,1) corner of the linearization.
cplx g_polynomial(const ncpoly::LinearizationResult& lin, const FreeModel& model, cplx z,
                  const SolverOptions& opts = {});

// DG(lambda)[h], from the linearized model equation.
Matrix directional_derivative(const CoefficientPencil& pencil, const FreeModel& model,
                              const SpectralParameter& lambda, const Matrix& h, const SolverOptions& opts = {});

struct CorrectionTerm {
  Matrix R;
  Matrix L;
  double kappa4 = 0.0;
};

// Largest ||Im(lambda)^{-1}|| at which L is evaluated.
inline constexpr double kMaxCorrectionImInverse = 100.0;

// R = kappa4/2 sum a_p G a_p G a_p G a_p G and L = -DG(lambda)[R G^{-1}]
// (semicircular model).
CorrectionTerm corrections(const CoefficientPencil& pencil, const SpectralParameter& lambda, double kappa4,
                           const SolverOptions& opts = {});

struct SupportInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DensityOptions {
  std::vector<double> y_levels{0.05, 0.025, 0.0125};
  double threshold = 1e-3;
  // Imaginary offset used when bisecting support edges.
  double edge_y = 1e-7;
  double edge_tol = 1e-9;
  SolverOptions solver{};
};

struct SpectralDensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> y_levels;
  std::vector<SupportInterval> support;
  double threshold = 0.0;
  // Trapezoid integral of density over the grid.
  double mass = 0.0;
  // Points where the y -> 0 extrapolation was unstable; their density is the
  // smallest-y value.
  std::vector<bool> unstable;
};

// Density of tr_m (x) tau composed with s, by extrapolating -Im g(x+iy)/pi to y = 0.
SpectralDensityEstimate density(const CoefficientPencil& pencil, const FreeModel& model,
                                const std::vector<double>& grid, const DensityOptions& opts = {});

// Density of p(x) through its linearization.
SpectralDensityEstimate polynomial_density(const ncpoly::LinearizationResult& lin, const FreeModel& model,
                                           const std::vector<double>& grid, const DensityOptions& opts = {});

struct NormOptions {
  int grid_points = 801;
  DensityOptions density{};
};

// ||p(x_1, ..., x_r)||: largest |z| over the detected support of p(x).
// Non-self-adjoint p goes through sqrt(||p* p||); constants give |c|.
double norm_prediction(const ncpoly::NCPolynomial& p, const FreeModel& model, const NormOptions& opts = {});

// Evenly spaced abscissae, endpoints included.
std::vector<double> linspace(double lo, double hi, int points);

}  // namespace freeconv::freeprob
