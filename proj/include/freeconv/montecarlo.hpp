#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "freeconv/common.hpp"
#include "freeconv/ensembles.hpp"
#include "freeconv/freeprob.hpp"
#include "freeconv/ncpoly.hpp"
#include "freeconv/pencil.hpp"
#include "freeconv/rng.hpp"

namespace freeconv::montecarlo {

using freeprob::FreeModel;
using freeprob::SpectralParameter;

// Random matrix family paired with its free limit.
class Ensemble {
 public:
  enum class Kind { wigner, wishart };

  static Ensemble wigner(ensembles::EntryDistribution dist);
  static Ensemble wishart(double alpha);

  Kind kind() const { return kind_; }
  const ensembles::EntryDistribution& distribution() const { return dist_; }
  double alpha() const { return alpha_; }
  FreeModel model() const;
  std::string name() const;

  Matrix sample(int n, RngStream& rng) const;

 private:
  Ensemble(Kind kind, ensembles::EntryDistribution dist, double alpha)
      : kind_(kind), dist_(std::move(dist)), alpha_(alpha) {}

  Kind kind_;
  ensembles::EntryDistribution dist_;
  double alpha_;
};

// Generator for replica `replica` of a size-n run under `seed`.
RngStream replica_stream(std::uint64_t seed, int n, std::uint64_t replica);

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
};

// S_n = a_0 (x) 1_n + sum_p a_p (x) X_p. Row (alpha, k) of the mn x mn
// matrix sits at alpha n + k.
class BlockOperator {
 public:
  // n may be omitted when r >= 1.
  BlockOperator(CoefficientPencil pencil, std::vector<Matrix> matrices, int n = 0);

  const CoefficientPencil& pencil() const { return pencil_; }
  const std::vector<Matrix>& matrices() const { return matrices_; }
  int m() const { return pencil_.m(); }
  int n() const { return n_; }

  const Matrix& assembled() const;
  // (lambda (x) 1_n - S_n)^{-1}
  Matrix resolvent(const Matrix& lambda) const;

 private:
  CoefficientPencil pencil_;
  std::vector<Matrix> matrices_;
  int n_;
  mutable std::optional<Matrix> assembled_;
};

struct ResolventStats {
  // (id_m (x) tr_n) of the resolvent.
  Matrix H;
  // Full resolvent, kept only when blocks are requested.
  Matrix resolvent;
  int m = 0;
  int n = 0;

  bool has_blocks() const { return resolvent.size() > 0; }
  // m x m block (k, l), 0-based.
  Matrix block(int k, int l) const;
};

ResolventStats resolvent_stats(const BlockOperator& op, const SpectralParameter& lambda, bool keep_blocks = false);

struct MonteCarloEstimate {
  Matrix mean;
  // Entrywise standard error of the mean.
  RealMatrix stderr_;
  long replicas = 0;
  std::uint64_t seed = 0;
  int n = 0;

  // Frobenius norm of the entrywise standard errors.
  double stderr_norm() const;
};

// Mean and entrywise standard error of samples, summed pairwise in index order.
MonteCarloEstimate summarize(const std::vector<Matrix>& samples);

MonteCarloEstimate estimate_Gn(const CoefficientPencil& pencil, const Ensemble& ensemble,
                               const SpectralParameter& lambda, int n, long replicas, const RunOptions& run);

// kappa4/2 (1/n^2) sum_p sum_{k,l} a_p R_kk a_p R_ll a_p R_kk a_p R_ll for one
// sampled resolvent.
Matrix rn_sample(const CoefficientPencil& pencil, const ResolventStats& stats, double kappa4);

struct ResidualValue {
  Matrix value;
  double norm = 0.0;
  // Standard error of value, as the Frobenius norm of entrywise errors.
  double stderr_ = 0.0;
};

struct MasterResidualReport {
  int n = 0;
  long replicas = 0;
  double kappa4 = 0.0;
  MonteCarloEstimate gn;
  MonteCarloEstimate rn;
  // E[sum a H a H + (a_0 - lambda) H + 1], with and without R_n / n.
  ResidualValue expectation_with_rn;
  ResidualValue expectation_without_rn;
  // sum a G_n a G_n + (a_0 - lambda) G_n + 1 at the replica mean, with and
  // without R_n / n; errors by the delta method.
  ResidualValue plugin_with_rn;
  ResidualValue plugin_without_rn;
};

MasterResidualReport master_residual_iid(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                         const SpectralParameter& lambda, int n, long replicas, const RunOptions& run);

struct WishartResidualReport {
  int n = 0;
  int p = 0;
  long replicas = 0;
  // "im_bound" or "invertible".
  std::string branch;
  MonteCarloEstimate gn;
  ResidualValue residual;
};

// -a_0 G_n + lambda G_n - (p/n) sum_l (1 - a_l G_n)^{-1} a_l G_n - 1.
WishartResidualReport master_residual_wishart(const CoefficientPencil& pencil, double alpha,
                                              const SpectralParameter& lambda, int n, long replicas,
                                              const RunOptions& run);

struct CorrectionPoint {
  int n = 0;
  MonteCarloEstimate gn;
  // n (G_n - G)
  Matrix scaled;
  // ||n (G_n - G) - L||
  double deviation = 0.0;
  double stderr_ = 0.0;
  // Im tr_m of n (G_n - G); its error bound adds the diagonal entry errors.
  double im_trace = 0.0;
  double im_trace_stderr = 0.0;
};

struct CorrectionReport {
  Matrix G;
  Matrix L;
  double kappa4 = 0.0;
  double im_trace_L = 0.0;
  std::vector<CorrectionPoint> points;
  // deviation at the largest n below the one at the smallest n.
  bool decreasing = false;
  // Some point has stderr >= deviation / 3.
  bool inconclusive = false;
};

// Correction report from existing replica means of H_n (one per n).
CorrectionReport correction_from_estimates(const CoefficientPencil& pencil, double kappa4,
                                           const SpectralParameter& lambda,
                                           const std::vector<MonteCarloEstimate>& estimates);

CorrectionReport correction_check(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                  const SpectralParameter& lambda, const std::vector<int>& n_values, long replicas,
                                  const RunOptions& run);

struct BlockAverageReport {
  int n = 0;
  MonteCarloEstimate estimate;
  // G a G
  Matrix reference;
  double deviation = 0.0;
  double stderr_ = 0.0;
};

// E[(1/n) sum_k R_kk a R_kk] against G a G (semicircular).
BlockAverageReport block_average_check(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                       const Matrix& a, const SpectralParameter& lambda, int n, long replicas,
                                       const RunOptions& run);

struct ScalingPoint {
  int n = 0;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  bool has_slope = false;
  double slope = 0.0;
  double slope_stderr = 0.0;
  // Why no slope was reported, empty otherwise.
  std::string note;
};

// Weighted least squares of log value on log n, weights (value / stderr)^2.
// The slope is reported only for >= 3 strictly increasing n with every
// stderr < value / 3.
ScalingReport fit_scaling(std::vector<ScalingPoint> points);

inline constexpr int kMaxVarianceWordLength = 6;
inline constexpr long kMinVarianceReplicas = 50;

// V[tr_n w(X_1, ..., X_r)] = E|T - E T|^2 for a word in Wigner matrices.
ScalingPoint trace_word_variance(const ncpoly::Word& word, int num_generators,
                                 const ensembles::EntryDistribution& dist, int n, long replicas,
                                 const RunOptions& run);

// V[H_n(lambda)_{row,col}] (0-based entry).
ScalingPoint resolvent_entry_variance(const CoefficientPencil& pencil, const ensembles::EntryDistribution& dist,
                                      const SpectralParameter& lambda, int row, int col, int n, long replicas,
                                      const RunOptions& run);

// Test functions for the Wishart integration-by-parts identity.
struct IbpFunction {
  enum class Kind { zero, trace, resolvent };
  Kind kind = Kind::zero;
  // trace: Phi(Y) = Tr(Y A)
  Matrix A;
  // resolvent: Phi(Y) = (z - Y)^{-1}_{jk}, 0-based
  cplx z{0.0, 1.0};
  int j = 0;
  int k = 0;

  static IbpFunction zero();
  static IbpFunction trace(Matrix A);
  static IbpFunction resolvent(cplx z, int j, int k);
};

// Hermitian basis element: E_jj, E_jk + E_kj, or i(E_jk - E_kj) when imaginary (0-based).
Matrix hermitian_basis(int n, int j, int k, bool imaginary = false);

struct IbpReport {
  cplx value;
  double stderr_ = 0.0;
  long replicas = 0;
  int n = 0;
  int p = 0;
};

// E[Phi'(Y).H] - n E[Phi(Y) Tr H] + (p - n) E[Phi(Y) Tr(Y^{-1} H)], with Phi
// shifted so that Phi(0) = 0.
IbpReport wishart_ibp_check(const ensembles::WishartSpec& spec, const IbpFunction& phi, const Matrix& H,
                            long replicas, const RunOptions& run);

struct ContainmentSeed {
  bool contained = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  // Largest distance of an eigenvalue to the predicted support.
  double max_excess = 0.0;
};

struct ContainmentReport {
  std::vector<freeprob::SupportInterval> support;
  double epsilon = 0.0;
  int n = 0;
  std::vector<ContainmentSeed> seeds;
  double pass_rate = 0.0;
};

// Support of s predicted by freeprob.density; r = 0 gives the eigenvalues of a_0.
std::vector<freeprob::SupportInterval> predicted_support(const CoefficientPencil& pencil, const FreeModel& model,
                                                         int grid_points = 801,
                                                         const freeprob::DensityOptions& opts = {});

ContainmentReport spectrum_containment(const CoefficientPencil& pencil, const Ensemble& ensemble, int n,
                                       double epsilon, int seeds, const RunOptions& run,
                                       const std::vector<freeprob::SupportInterval>& support);

// ||M||: largest |eigenvalue| when Hermitian, sqrt of the largest eigenvalue of M* M otherwise.
double operator_norm(const Matrix& m);

struct NormPoint {
  int n = 0;
  std::vector<double> norms;
  double median_deviation = 0.0;
  // sqrt(pi/2) sd / sqrt(seeds)
  double median_stderr = 0.0;
};

struct NormConvergenceReport {
  double prediction = 0.0;
  std::vector<NormPoint> points;
  // Medians non-increasing in n up to the combined standard error.
  bool non_increasing = false;
};

NormConvergenceReport norm_convergence(const ncpoly::NCPolynomial& p, const Ensemble& ensemble,
                                       const std::vector<int>& n_values, int seeds, const RunOptions& run,
                                       double prediction);

}  // namespace freeconv::montecarlo
