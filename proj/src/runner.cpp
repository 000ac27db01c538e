#include "freeconv/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "freeconv/common.hpp"
#include "freeconv/ensembles.hpp"
#include "freeconv/freeprob.hpp"
#include "freeconv/montecarlo.hpp"
#include "freeconv/ncpoly.hpp"
#include "freeconv/parallel.hpp"

namespace freeconv::runner {

namespace mc = montecarlo;
using ensembles::EntryDistribution;
using freeprob::FreeModel;
using freeprob::SpectralParameter;

namespace {

struct Tolerance {
  std::string key;
  double value;
  std::string meaning;
};

struct Parameter {
  std::string key;
  std::string fallback;
  std::string meaning;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::string contract;
  std::string claim;
  std::vector<Parameter> parameters;
  std::vector<Tolerance> tolerances;
};

const std::vector<ExperimentInfo>& catalog() {
  static const std::vector<ExperimentInfo> info = {
      {"solve",
       "Solve the operator-valued equation for G(lambda) of a pencil.",
       "solver converged and ||residual|| <= residual_max at every lambda.",
       "[operator-valued Stieltjes transform] G(lambda) = (id (x) tau)[(lambda (x) 1 - s)^-1] is the unique solution "
       "of sum a_i G a_i + (a_0 - lambda) + G^-1 = 0 (semicircular) or a_0 + alpha sum (1 - a_i G)^-1 a_i + G^-1 = "
       "lambda (Marchenko-Pastur) with Im G < 0.",
       {{"pencil", "required", "{\"scalar\": [a0, a1, ...]} or {\"coefficients\": [M0, M1, ...]}, M row-major [re,im]"},
        {"model", "semicircular", "\"semicircular\" or {\"type\": \"marchenko_pastur\", \"alpha\": a}"},
        {"lambda", "required", "[re, im] (times 1_m), {\"z\": [re, im]}, {\"matrix\": [...]}, or a list of these"}},
       {{"residual_max", 1e-10, "largest admissible equation residual"}}},
      {"density",
       "Spectral density and support of s (pencil) or p(x) (polynomial) by Stieltjes inversion.",
       "support found; density >= negative_min; optional expected density values and support edges.",
       "[Stieltjes inversion] density(x) = -Im g(x + i0)/pi, with the y -> 0 limit extrapolated from y_levels.",
       {{"pencil | polynomial", "required", "pencil spec, or a *-polynomial string with optional \"generators\""},
        {"model", "semicircular", "free model of the generators"},
        {"grid", "+-ceil(bound + 0.5), step 0.01", "{\"lo\": a, \"hi\": b, \"points\": k}"},
        {"y_levels", "[0.05, 0.025, 0.0125]", "imaginary offsets extrapolated to 0"},
        {"threshold", "1e-3", "support threshold on the density"},
        {"expect", "none", "{\"density\": [[x, value], ...], \"support\": [[lo, hi], ...]}"}},
       {{"negative_min", -1e-6, "smallest admissible density value"},
        {"density_abs", 5e-3, "tolerance on expected density values"},
        {"edge_abs", 1e-2, "tolerance on expected support edges"}}},
      {"norm-predict",
       "Predicted operator norm ||p(x_1, ..., x_r)|| from the support of p(x).",
       "prediction finite; |prediction - expected| <= abs_tol when expected is given.",
       "[strong convergence] ||p(X_n)|| -> ||p(x)||, the largest |t| in the support of p(x) (self-adjoint p) or "
       "sqrt(||p* p||).",
       {{"polynomial", "required", "*-polynomial string"},
        {"generators", "largest index used", "number of generators r"},
        {"model", "semicircular", "free model of the generators"},
        {"grid_points", "801", "density grid size"},
        {"expected", "none", "reference norm"}},
       {{"abs_tol", 1e-3, "tolerance on the expected norm"}}},
      {"converge",
       "Operator norm of p(X_n) for random X_n against the predicted norm, across n.",
       "median |‖p(X_n)‖ - prediction| non-increasing in n (ties within stderr) and <= median_final_max at the "
       "largest n.",
       "[strong convergence] almost surely ||p(X_n)|| -> ||p(x)|| for every polynomial p.",
       {{"polynomial", "required", "*-polynomial string"},
        {"generators", "largest index used", "number of generators r"},
        {"model", "semicircular", "semicircular: Wigner matrices; marchenko_pastur: Wishart matrices"},
        {"distribution", "gaussian", "Wigner entry law: gaussian, uniform, exp_power:<alpha>"},
        {"n_values", "required", "strictly increasing sizes"},
        {"seeds", "20", "independent samples per n"},
        {"prediction", "norm-predict value", "reference norm"}},
       {{"median_final_max", 0.2, "largest admissible median deviation at the largest n"}}},
      {"master-check-iid",
       "Monte Carlo residual of the finite-n master equation for Wigner matrices, with and without the kappa4 term "
       "R_n/n.",
       "log-log slope of the residual WITH R_n/n in [slope_with_min, slope_with_max] (n^-2); when kappa4 != 0 the "
       "residual WITHOUT R_n/n has slope in [slope_without_min, slope_without_max] (n^-1). Slopes count only if "
       "every point has stderr < value/3.",
       "[master equation] E[sum a_i H_n a_i H_n + (a_0 - lambda) H_n + 1] + R_n/n = O(n^-2), where "
       "R_n = kappa4/2 E[sum_p n^-2 sum_{k,l} a_p R_kk a_p R_ll a_p R_kk a_p R_ll] carries the fourth cumulant.",
       {{"pencil", "{\"scalar\": [0, 1]}", "pencil spec"},
        {"distribution", "gaussian", "Wigner entry law"},
        {"lambda", "2i 1_m", "spectral parameter"},
        {"n_values", "required", "strictly increasing sizes (>= 3 for a slope)"},
        {"replicas", "400", "replicas per n"},
        {"form", "plugin", "\"plugin\": F(mean H) + R_n/n; \"expectation\": mean of F(H) + R_n/n"}},
       {{"slope_with_min", -2.6, ""},
        {"slope_with_max", -1.4, ""},
        {"slope_without_min", -1.6, ""},
        {"slope_without_max", -0.6, ""}}},
      {"master-check-wishart",
       "Monte Carlo residual of the finite-n master equation for independent Wishart matrices.",
       "with >= 3 sizes: log-log slope in [slope_min, slope_max]; otherwise residual <= factor (stderr + "
       "calibration/n^2) at every n.",
       "[Wishart master inequality] ||-a_0 G_n + lambda G_n - (p/n) sum_l (1 - a_l G_n)^-1 a_l G_n - 1|| = "
       "O(n^-2) on the branch ||Im(lambda)^-1|| < 1/(2 max ||a_l||) or all a_l invertible.",
       {{"pencil", "{\"scalar\": [0, 1]}", "pencil spec"},
        {"alpha", "1", "p/n ratio, p = round(alpha n)"},
        {"lambda", "2+4i", "spectral parameter"},
        {"n_values", "required", "strictly increasing sizes"},
        {"replicas", "200", "replicas per n"}},
       {{"slope_min", -2.6, ""}, {"slope_max", -1.4, ""}, {"calibration", 1.0, ""}, {"factor", 10.0, ""}}},
      {"correction-check",
       "Compare n (G_n - G) with the 1/n correction L(lambda) for Wigner matrices.",
       "||n (G_n - G) - L|| at the largest n below its value at the smallest n; when kappa4 != 0, sign of "
       "Im tr n (G_n - G) at the largest n agrees with Im tr L within sign_sigmas stderr. Runs whose stderr reaches "
       "a third of the deviation are flagged inconclusive.",
       "[1/n expansion] G_n = G + L/n + O(n^-2) with L = -DG[R G^-1], R = kappa4/2 sum a_p G a_p G a_p G a_p G.",
       {{"pencil", "{\"scalar\": [0, 1]}", "pencil spec"},
        {"distribution", "gaussian", "Wigner entry law"},
        {"lambda", "2i 1_m", "spectral parameter, ||Im(lambda)^-1|| <= 100"},
        {"n_values", "required", "sizes"},
        {"replicas", "400", "replicas per n"}},
       {{"sign_sigmas", 3.0, ""}}},
      {"variance-check",
       "Variance of tr_n of a word in Wigner matrices, or of one entry of H_n(lambda), across n.",
       "log-log slope in [slope_min, slope_max] (n^-2); an empty word has variance exactly 0.",
       "[Poincare concentration] V[tr_n w(X)] <= C/n^2 and V[H_n(lambda)_ij] = O(n^-2).",
       {{"word | entry", "required",
         "word: list of generator indices, e.g. [1, 1]; entry: {\"row\": i, \"col\": j} (1-based) of H_n"},
        {"generators", "largest index in word", "number of Wigner matrices (word mode)"},
        {"pencil", "{\"scalar\": [0, 1]}", "pencil spec (entry mode)"},
        {"lambda", "2i 1_m", "spectral parameter (entry mode)"},
        {"distribution", "gaussian", "Wigner entry law"},
        {"n_values", "required", "strictly increasing sizes"},
        {"replicas", "200", "replicas per n (>= 50)"}},
       {{"slope_min", -2.6, ""}, {"slope_max", -1.4, ""}}},
      {"wishart-ibp",
       "Monte Carlo check of the Wishart integration-by-parts identity.",
       "|value| <= sigmas stderr.",
       "[Wishart integration by parts] E[Phi'(Y).H] - n E[Phi(Y) Tr H] + (p - n) E[Phi(Y) Tr(Y^-1 H)] = 0 for "
       "Phi with Phi(0) = 0.",
       {{"n", "required", "matrix size"},
        {"p", "required", "Wishart parameter, p >= n + 2"},
        {"phi", "required",
         "{\"type\": \"zero\"}, {\"type\": \"trace\", \"row\": j, \"col\": k} for Tr(Y E_jk), or "
         "{\"type\": \"resolvent\", \"z\": [re, im], \"row\": j, \"col\": k} for (z - Y)^-1_jk, Im z >= 1"},
        {"h", "required", "{\"row\": j, \"col\": k, \"imaginary\": false}: Hermitian basis element (1-based)"},
        {"replicas", "100000", "replicas"}},
       {{"sigmas", 4.0, ""}}},
      {"containment",
       "Spectrum of S_n against the epsilon-thickened predicted support.",
       "fraction of seeds with every eigenvalue within epsilon of the predicted support >= min_pass_rate.",
       "[spectrum containment] eventually Spect(S_n) is contained in the epsilon-thickened support Spect(s) + "
       "(-epsilon, epsilon), almost surely.",
       {{"pencil", "{\"scalar\": [0, 1]}", "pencil spec"},
        {"model", "semicircular", "semicircular: Wigner matrices; marchenko_pastur: Wishart matrices"},
        {"distribution", "gaussian", "Wigner entry law"},
        {"n", "400", "matrix size"},
        {"epsilon", "0.2", "thickening"},
        {"seeds", "20", "independent samples"},
        {"grid_points", "801", "density grid size for the predicted support"}},
       {{"min_pass_rate", 0.95, ""}}},
  };
  return info;
}

const ExperimentInfo& info_for(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  std::string valid;
  for (const auto& e : catalog()) valid += (valid.empty() ? "" : ", ") + e.name;
  throw Error(ErrorKind::config, "unknown experiment '" + name + "' (valid: " + valid + ")");
}

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::config, "config field '" + field + "': " + msg);
}

// Reads one JSON object; every key must be consumed before finish().
class Fields {
 public:
  Fields(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) field_error(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) field_error(path(key), "is required");
    return *v;
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!used_.count(item.key())) field_error(path(item.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> used_;
};

double as_double(const json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) field_error(field, "must be finite");
  return x;
}

long long as_int(const json& v, const std::string& field, long long lo, long long hi = (1LL << 62)) {
  if (!v.is_number_integer()) field_error(field, "expected an integer");
  const long long x = v.get<long long>();
  if (x < lo || x > hi) field_error(field, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) field_error(field, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) field_error(field, "expected true or false");
  return v.get<bool>();
}

cplx as_complex(const json& v, const std::string& field) {
  if (v.is_number()) return as_double(v, field);
  if (!v.is_array() || v.size() != 2) field_error(field, "expected a number or a [re, im] pair");
  return {as_double(v[0], field + "[0]"), as_double(v[1], field + "[1]")};
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Matrix& a) {
  json out = json::array();
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.push_back(complex_json(a(i, j)));
  return out;
}

// Row-major list of m^2 entries, each a number or [re, im].
Matrix as_matrix(const json& v, const std::string& field, int m = -1) {
  if (!v.is_array() || v.empty()) field_error(field, "expected a non-empty row-major list of entries");
  const int k = static_cast<int>(std::lround(std::sqrt(double(v.size()))));
  if (k * k != static_cast<int>(v.size())) field_error(field, "entry count is not a perfect square");
  if (m > 0 && k != m) field_error(field, "expected " + std::to_string(m * m) + " entries");
  Matrix a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      a(i, j) = as_complex(v[static_cast<std::size_t>(i * k + j)], field + "[" + std::to_string(i * k + j) + "]");
  return a;
}

std::vector<int> as_sizes(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) field_error(field, "expected a non-empty list of sizes");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<int>(as_int(v[i], field + "[" + std::to_string(i) + "]", 1, 1 << 20)));
    if (i > 0 && out[i] <= out[i - 1]) field_error(field, "sizes must be strictly increasing");
  }
  return out;
}

// All parsed settings of one experiment, plus the normalized config.
struct Config {
  json norm = json::object();
  std::uint64_t seed = 0;
  std::optional<CoefficientPencil> pencil;
  std::optional<ncpoly::NCPolynomial> polynomial;
  FreeModel model;
  EntryDistribution dist = EntryDistribution::gaussian();
  std::vector<SpectralParameter> lambdas;
  std::vector<int> n_values;
  long replicas = 0;
  int seeds = 0;
  int n = 0;
  int p = 0;
  double alpha = 1.0;
  double epsilon = 0.0;
  int grid_points = 801;
  std::string form;
  std::optional<double> expected;
  freeprob::DensityOptions density;
  std::optional<std::vector<double>> grid;
  json expect;
  ncpoly::Word word;
  int generators = 0;
  bool entry_mode = false;
  int row = 0;
  int col = 0;
  mc::IbpFunction phi;
  Matrix h;
  std::map<std::string, double> tol;
};

CoefficientPencil parse_pencil(const json& v, const std::string& field, json& norm) {
  Fields f(v, field);
  std::vector<Matrix> coeffs;
  const json* scalar = f.find("scalar");
  const json* full = f.find("coefficients");
  if ((scalar != nullptr) == (full != nullptr)) field_error(field, "give exactly one of 'scalar' or 'coefficients'");
  if (scalar) {
    if (!scalar->is_array() || scalar->empty()) field_error(f.path("scalar"), "expected a list [a0, a1, ...]");
    for (std::size_t i = 0; i < scalar->size(); ++i) {
      Matrix a(1, 1);
      a(0, 0) = as_double((*scalar)[i], f.path("scalar") + "[" + std::to_string(i) + "]");
      coeffs.push_back(a);
    }
  } else {
    if (!full->is_array() || full->empty()) field_error(f.path("coefficients"), "expected a list [M0, M1, ...]");
    int m = -1;
    for (std::size_t i = 0; i < full->size(); ++i) {
      coeffs.push_back(as_matrix((*full)[i], f.path("coefficients") + "[" + std::to_string(i) + "]", m));
      m = static_cast<int>(coeffs.back().rows());
    }
  }
  f.finish();
  CoefficientPencil pencil;
  try {
    pencil = CoefficientPencil(coeffs);
  } catch (const Error& e) {
    field_error(field, e.what());
  }
  json cs = json::array();
  for (const auto& c : pencil.coefficients()) cs.push_back(matrix_json(c));
  norm = {{"coefficients", cs}};
  return pencil;
}

SpectralParameter parse_lambda_one(const json& v, const std::string& field, int m) {
  Matrix lam;
  if (v.is_number() || v.is_array()) {
    lam = as_complex(v, field) * Matrix::Identity(m, m);
  } else if (v.is_object()) {
    Fields f(v, field);
    const json* z = f.find("z");
    const json* mat = f.find("matrix");
    if ((z != nullptr) == (mat != nullptr)) field_error(field, "give exactly one of 'z' or 'matrix'");
    lam = z ? Matrix(as_complex(*z, f.path("z")) * Matrix::Identity(m, m)) : as_matrix(*mat, f.path("matrix"), m);
    f.finish();
  } else {
    field_error(field, "expected [re, im], {\"z\": ...} or {\"matrix\": ...}");
  }
  try {
    return SpectralParameter(lam);
  } catch (const Error& e) {
    field_error(field, e.what());
  }
}

std::vector<SpectralParameter> parse_lambdas(Fields& f, int m, std::optional<cplx> fallback, bool allow_list,
                                             json& norm) {
  const json* v = f.find("lambda");
  std::vector<SpectralParameter> out;
  if (!v) {
    if (!fallback) f.require("lambda");
    out.push_back(SpectralParameter::scalar(*fallback, m));
  } else if (allow_list && v->is_array() && !v->empty() && !v->at(0).is_number()) {
    for (std::size_t i = 0; i < v->size(); ++i)
      out.push_back(parse_lambda_one(v->at(i), f.path("lambda") + "[" + std::to_string(i) + "]", m));
  } else {
    out.push_back(parse_lambda_one(*v, f.path("lambda"), m));
  }
  if (!allow_list && out.front().half_plane() != freeprob::HalfPlane::upper)
    field_error(f.path("lambda"), "Im(lambda) must be positive definite");
  json ls = json::array();
  for (const auto& l : out) ls.push_back(matrix_json(l.value()));
  norm["lambda"] = ls;
  return out;
}

FreeModel parse_model(Fields& f, json& norm) {
  const json* v = f.find("model");
  FreeModel model = FreeModel::semicircular();
  if (v) {
    std::string type;
    std::optional<double> alpha;
    if (v->is_string()) {
      type = v->get<std::string>();
    } else {
      Fields mf(*v, f.path("model"));
      type = as_string(mf.require("type"), mf.path("type"));
      if (const json* a = mf.find("alpha")) alpha = as_double(*a, mf.path("alpha"));
      mf.finish();
    }
    if (type == "semicircular") {
      if (alpha) field_error(f.path("model.alpha"), "only applies to marchenko_pastur");
    } else if (type == "marchenko_pastur") {
      try {
        model = FreeModel::marchenko_pastur(alpha.value_or(1.0));
      } catch (const Error& e) {
        field_error(f.path("model.alpha"), e.what());
      }
    } else {
      field_error(f.path("model"), "expected semicircular or marchenko_pastur");
    }
  }
  norm["model"] = model.kind == FreeModel::Kind::semicircular
                      ? json{{"type", "semicircular"}}
                      : json{{"type", "marchenko_pastur"}, {"alpha", model.alpha}};
  return model;
}

EntryDistribution parse_distribution(Fields& f, json& norm) {
  const json* v = f.find("distribution");
  EntryDistribution d = EntryDistribution::gaussian();
  if (v) {
    try {
      d = EntryDistribution::parse(as_string(*v, f.path("distribution")));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      field_error(f.path("distribution"), e.what());
    }
  }
  norm["distribution"] = d.name();
  return d;
}

int generators_in(const std::string& text) {
  static const std::regex gen("x([0-9]+)");
  int r = 1;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), gen); it != std::sregex_iterator(); ++it)
    r = std::max(r, std::stoi((*it)[1].str()));
  return r;
}

ncpoly::NCPolynomial parse_polynomial(Fields& f, json& norm) {
  const std::string text = as_string(f.require("polynomial"), f.path("polynomial"));
  int r = generators_in(text);
  if (const json* g = f.find("generators")) r = static_cast<int>(as_int(*g, f.path("generators"), 1, 64));
  try {
    auto p = ncpoly::parse(text, r);
    norm["polynomial"] = ncpoly::render(p);
    norm["generators"] = r;
    return p;
  } catch (const Error& e) {
    field_error(f.path("polynomial"), e.what());
  }
}

CoefficientPencil default_pencil() { return CoefficientPencil::scalar(0.0, {1.0}); }

CoefficientPencil pencil_or_default(Fields& f, json& norm) {
  json pn;
  CoefficientPencil p = default_pencil();
  if (const json* v = f.find("pencil")) {
    p = parse_pencil(*v, f.path("pencil"), pn);
  } else {
    pn = {{"coefficients", json::array({matrix_json(p.a0()), matrix_json(p.a(1))})}};
  }
  norm["pencil"] = pn;
  return p;
}

long parse_count(Fields& f, const std::string& key, long fallback, long minimum, json& norm) {
  long v = fallback;
  if (const json* j = f.find(key)) v = static_cast<long>(as_int(*j, f.path(key), minimum));
  norm[key] = v;
  return v;
}

std::vector<int> parse_n_values(Fields& f, json& norm) {
  auto v = as_sizes(f.require("n_values"), f.path("n_values"));
  norm["n_values"] = v;
  return v;
}

mc::Ensemble ensemble_for(const FreeModel& model, const EntryDistribution& dist, Fields& f) {
  if (model.kind == FreeModel::Kind::semicircular) return mc::Ensemble::wigner(dist);
  if (dist.kind() != EntryDistribution::Kind::gaussian)
    field_error(f.path("distribution"), "Wishart matrices are complex Gaussian; only gaussian applies");
  return mc::Ensemble::wishart(model.alpha);
}

Config parse(const std::string& experiment, const json& raw, const RunSettings& settings) {
  const ExperimentInfo& info = info_for(experiment);
  Fields f(raw, "");
  Config c;
  json& norm = c.norm;
  if (const json* e = f.find("experiment")) {
    if (as_string(*e, "experiment") != experiment)
      field_error("experiment", "config is for '" + e->get<std::string>() + "', not '" + experiment + "'");
  }
  f.find("output");
  if (const json* s = f.find("seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
      field_error("seed", "expected a nonnegative integer");
    c.seed = s->get<std::uint64_t>();
  }
  if (settings.seed) c.seed = *settings.seed;
  norm["seed"] = c.seed;

  for (const auto& t : info.tolerances) c.tol[t.key] = t.value;
  if (const json* t = f.find("tolerances")) {
    Fields tf(*t, "tolerances");
    for (const auto& tol : info.tolerances)
      if (const json* v = tf.find(tol.key)) c.tol[tol.key] = as_double(*v, tf.path(tol.key));
    tf.finish();
  }
  norm["tolerances"] = c.tol;

  if (experiment == "solve") {
    json pn;
    c.pencil = parse_pencil(f.require("pencil"), "pencil", pn);
    norm["pencil"] = pn;
    c.model = parse_model(f, norm);
    c.lambdas = parse_lambdas(f, c.pencil->m(), std::nullopt, true, norm);
  } else if (experiment == "density") {
    const json* pv = f.find("pencil");
    const json* qv = f.find("polynomial");
    if ((pv != nullptr) == (qv != nullptr)) field_error("pencil", "give exactly one of 'pencil' or 'polynomial'");
    if (pv) {
      json pn;
      c.pencil = parse_pencil(*pv, "pencil", pn);
      norm["pencil"] = pn;
    } else {
      c.polynomial = parse_polynomial(f, norm);
      if (!ncpoly::is_self_adjoint(*c.polynomial)) field_error("polynomial", "must be self-adjoint for a density");
    }
    c.model = parse_model(f, norm);
    if (const json* g = f.find("grid")) {
      Fields gf(*g, "grid");
      const double lo = as_double(gf.require("lo"), "grid.lo");
      const double hi = as_double(gf.require("hi"), "grid.hi");
      const int pts = static_cast<int>(as_int(gf.require("points"), "grid.points", 2, 1 << 20));
      gf.finish();
      if (!(hi > lo)) field_error("grid", "need hi > lo");
      c.grid = freeprob::linspace(lo, hi, pts);
      norm["grid"] = {{"lo", lo}, {"hi", hi}, {"points", pts}};
    }
    if (const json* y = f.find("y_levels")) {
      if (!y->is_array() || y->empty()) field_error("y_levels", "expected a non-empty list");
      c.density.y_levels.clear();
      for (std::size_t i = 0; i < y->size(); ++i) {
        const double v = as_double(y->at(i), "y_levels[" + std::to_string(i) + "]");
        if (!(v > 0.0)) field_error("y_levels", "levels must be positive");
        c.density.y_levels.push_back(v);
      }
    }
    norm["y_levels"] = c.density.y_levels;
    if (const json* t = f.find("threshold")) c.density.threshold = as_double(*t, "threshold");
    norm["threshold"] = c.density.threshold;
    if (const json* e = f.find("expect")) {
      Fields ef(*e, "expect");
      if (const json* d = ef.find("density")) {
        if (!d->is_array()) field_error("expect.density", "expected [[x, value], ...]");
        for (std::size_t i = 0; i < d->size(); ++i) {
          const std::string fld = "expect.density[" + std::to_string(i) + "]";
          if (!d->at(i).is_array() || d->at(i).size() != 2) field_error(fld, "expected [x, value]");
          c.expect["density"].push_back({as_double(d->at(i)[0], fld), as_double(d->at(i)[1], fld)});
        }
      }
      if (const json* s = ef.find("support")) {
        if (!s->is_array()) field_error("expect.support", "expected [[lo, hi], ...]");
        c.expect["support"] = json::array();
        for (std::size_t i = 0; i < s->size(); ++i) {
          const std::string fld = "expect.support[" + std::to_string(i) + "]";
          if (!s->at(i).is_array() || s->at(i).size() != 2) field_error(fld, "expected [lo, hi]");
          c.expect["support"].push_back({as_double(s->at(i)[0], fld), as_double(s->at(i)[1], fld)});
        }
      }
      ef.finish();
      norm["expect"] = c.expect;
    }
  } else if (experiment == "norm-predict") {
    c.polynomial = parse_polynomial(f, norm);
    c.model = parse_model(f, norm);
    c.grid_points = static_cast<int>(parse_count(f, "grid_points", 801, 11, norm));
    if (const json* e = f.find("expected")) {
      c.expected = as_double(*e, "expected");
      norm["expected"] = *c.expected;
    }
  } else if (experiment == "converge") {
    c.polynomial = parse_polynomial(f, norm);
    c.model = parse_model(f, norm);
    c.dist = parse_distribution(f, norm);
    ensemble_for(c.model, c.dist, f);
    c.n_values = parse_n_values(f, norm);
    c.seeds = static_cast<int>(parse_count(f, "seeds", 20, 1, norm));
    if (const json* e = f.find("prediction")) {
      c.expected = as_double(*e, "prediction");
      norm["prediction"] = *c.expected;
    }
  } else if (experiment == "master-check-iid") {
    c.pencil = pencil_or_default(f, norm);
    c.dist = parse_distribution(f, norm);
    c.lambdas = parse_lambdas(f, c.pencil->m(), cplx(0.0, 2.0), false, norm);
    c.n_values = parse_n_values(f, norm);
    c.replicas = parse_count(f, "replicas", 400, 2, norm);
    c.form = "plugin";
    if (const json* v = f.find("form")) c.form = as_string(*v, "form");
    if (c.form != "plugin" && c.form != "expectation") field_error("form", "expected plugin or expectation");
    norm["form"] = c.form;
  } else if (experiment == "master-check-wishart") {
    c.pencil = pencil_or_default(f, norm);
    if (const json* a = f.find("alpha")) c.alpha = as_double(*a, "alpha");
    if (!(c.alpha >= 1.0)) field_error("alpha", "must be >= 1");
    norm["alpha"] = c.alpha;
    c.lambdas = parse_lambdas(f, c.pencil->m(), cplx(2.0, 4.0), false, norm);
    c.n_values = parse_n_values(f, norm);
    c.replicas = parse_count(f, "replicas", 200, 2, norm);
  } else if (experiment == "correction-check") {
    c.pencil = pencil_or_default(f, norm);
    c.dist = parse_distribution(f, norm);
    c.lambdas = parse_lambdas(f, c.pencil->m(), cplx(0.0, 2.0), false, norm);
    if (c.lambdas.front().im_inverse_norm() > freeprob::kMaxCorrectionImInverse)
      field_error("lambda", "||Im(lambda)^-1|| exceeds 100, outside the range where L is evaluated");
    c.n_values = parse_n_values(f, norm);
    c.replicas = parse_count(f, "replicas", 400, 2, norm);
  } else if (experiment == "variance-check") {
    const json* w = f.find("word");
    const json* e = f.find("entry");
    if ((w != nullptr) == (e != nullptr)) field_error("word", "give exactly one of 'word' or 'entry'");
    c.dist = parse_distribution(f, norm);
    if (w) {
      if (!w->is_array()) field_error("word", "expected a list of generator indices");
      int r = 1;
      for (std::size_t i = 0; i < w->size(); ++i) {
        c.word.push_back(static_cast<int>(as_int(w->at(i), "word[" + std::to_string(i) + "]", 1, 64)));
        r = std::max(r, c.word.back());
      }
      if (static_cast<int>(c.word.size()) > mc::kMaxVarianceWordLength)
        field_error("word", "length must be <= " + std::to_string(mc::kMaxVarianceWordLength));
      if (const json* g = f.find("generators")) r = static_cast<int>(as_int(*g, "generators", r, 64));
      c.generators = r;
      norm["word"] = c.word;
      norm["generators"] = r;
    } else {
      c.entry_mode = true;
      c.pencil = pencil_or_default(f, norm);
      Fields ef(*e, "entry");
      c.row = static_cast<int>(as_int(ef.require("row"), "entry.row", 1, c.pencil->m())) - 1;
      c.col = static_cast<int>(as_int(ef.require("col"), "entry.col", 1, c.pencil->m())) - 1;
      ef.finish();
      norm["entry"] = {{"row", c.row + 1}, {"col", c.col + 1}};
      c.lambdas = parse_lambdas(f, c.pencil->m(), cplx(0.0, 2.0), false, norm);
    }
    c.n_values = parse_n_values(f, norm);
    c.replicas = parse_count(f, "replicas", 200, mc::kMinVarianceReplicas, norm);
  } else if (experiment == "wishart-ibp") {
    c.n = static_cast<int>(as_int(f.require("n"), "n", 1, 4096));
    c.p = static_cast<int>(as_int(f.require("p"), "p", 1, 1 << 20));
    if (c.p < c.n + 2) field_error("p", "integration by parts needs p >= n + 2");
    norm["n"] = c.n;
    norm["p"] = c.p;
    Fields pf(f.require("phi"), "phi");
    const std::string type = as_string(pf.require("type"), "phi.type");
    json pn = {{"type", type}};
    if (type == "zero") {
      c.phi = mc::IbpFunction::zero();
    } else if (type == "trace" || type == "resolvent") {
      const int j = static_cast<int>(as_int(pf.require("row"), "phi.row", 1, c.n)) - 1;
      const int k = static_cast<int>(as_int(pf.require("col"), "phi.col", 1, c.n)) - 1;
      pn["row"] = j + 1;
      pn["col"] = k + 1;
      if (type == "trace") {
        Matrix a = Matrix::Zero(c.n, c.n);
        a(j, k) = 1.0;
        c.phi = mc::IbpFunction::trace(a);
      } else {
        const cplx z = as_complex(pf.require("z"), "phi.z");
        if (z.imag() < 1.0) field_error("phi.z", "needs Im z >= 1");
        c.phi = mc::IbpFunction::resolvent(z, j, k);
        pn["z"] = complex_json(z);
      }
    } else {
      field_error("phi.type", "expected zero, trace or resolvent");
    }
    pf.finish();
    norm["phi"] = pn;
    Fields hf(f.require("h"), "h");
    const int j = static_cast<int>(as_int(hf.require("row"), "h.row", 1, c.n)) - 1;
    const int k = static_cast<int>(as_int(hf.require("col"), "h.col", 1, c.n)) - 1;
    bool imaginary = false;
    if (const json* im = hf.find("imaginary")) imaginary = as_bool(*im, "h.imaginary");
    hf.finish();
    if (imaginary && j == k) field_error("h.imaginary", "needs row != col");
    c.h = mc::hermitian_basis(c.n, j, k, imaginary);
    norm["h"] = {{"row", j + 1}, {"col", k + 1}, {"imaginary", imaginary}};
    c.replicas = parse_count(f, "replicas", 100000, 2, norm);
  } else if (experiment == "containment") {
    c.pencil = pencil_or_default(f, norm);
    c.model = parse_model(f, norm);
    c.dist = parse_distribution(f, norm);
    ensemble_for(c.model, c.dist, f);
    c.n = static_cast<int>(parse_count(f, "n", 400, 1, norm));
    c.epsilon = 0.2;
    if (const json* e = f.find("epsilon")) c.epsilon = as_double(*e, "epsilon");
    if (!(c.epsilon > 0.0)) field_error("epsilon", "must be positive");
    norm["epsilon"] = c.epsilon;
    c.seeds = static_cast<int>(parse_count(f, "seeds", 20, 1, norm));
    c.grid_points = static_cast<int>(parse_count(f, "grid_points", 801, 11, norm));
  }
  f.finish();
  return c;
}

Contract range_contract(const std::string& name, std::optional<double> value, std::optional<double> lower,
                        std::optional<double> upper, std::string detail = {}) {
  Contract c;
  c.name = name;
  c.value = value;
  c.lower = lower;
  c.upper = upper;
  c.detail = std::move(detail);
  c.passed = value.has_value() && std::isfinite(*value) && (!lower || *value >= *lower) && (!upper || *value <= *upper);
  return c;
}

json slope_json(const mc::ScalingReport& s) {
  json j = {{"has_slope", s.has_slope}, {"note", s.note}};
  j["slope"] = s.has_slope ? json(s.slope) : json(nullptr);
  j["slope_stderr"] = s.has_slope ? json(s.slope_stderr) : json(nullptr);
  j["points"] = json::array();
  for (const auto& p : s.points) j["points"].push_back({{"n", p.n}, {"value", p.value}, {"stderr", p.stderr_}});
  return j;
}

Contract slope_contract(const std::string& name, const mc::ScalingReport& s, double lo, double hi) {
  return range_contract(name, s.has_slope ? std::optional<double>(s.slope) : std::nullopt, lo, hi,
                        s.has_slope ? "" : "no slope: " + s.note);
}

std::string fmt_int(long long v) { return std::to_string(v); }

double bound_for(const CoefficientPencil& pencil, const FreeModel& model) {
  double b = op_norm(pencil.a0());
  for (int p = 1; p <= pencil.r(); ++p) b += op_norm(pencil.a(p)) * model.edge();
  return b;
}

std::vector<double> default_grid(double bound) {
  const double half = std::ceil(bound + 0.5);
  const int points = static_cast<int>(std::lround(2.0 * half / 0.01)) + 1;
  return freeprob::linspace(-half, half, points);
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

void run_solve(const Config& c, ResultRecord& rec) {
  rec.csv_header = {"lambda_index", "row", "col", "G_re", "G_im", "residual", "iterations"};
  rec.results["solutions"] = json::array();
  double worst = 0.0;
  bool all_converged = true;
  for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
    const auto sol = freeprob::solve_G(*c.pencil, c.model, c.lambdas[i]);
    worst = std::max(worst, sol.residual_norm);
    all_converged = all_converged && sol.converged;
    rec.results["solutions"].push_back({{"lambda", matrix_json(c.lambdas[i].value())},
                                        {"G", matrix_json(sol.G)},
                                        {"residual", sol.residual_norm},
                                        {"iterations", sol.iterations},
                                        {"converged", sol.converged}});
    for (int a = 0; a < sol.G.rows(); ++a)
      for (int b = 0; b < sol.G.cols(); ++b)
        rec.csv_rows.push_back({fmt_int(static_cast<long long>(i)), fmt_int(a + 1), fmt_int(b + 1),
                                format_double(sol.G(a, b).real()), format_double(sol.G(a, b).imag()),
                                format_double(sol.residual_norm), fmt_int(sol.iterations)});
  }
  rec.contracts.push_back(range_contract("converged", all_converged ? 1.0 : 0.0, 1.0, std::nullopt));
  rec.contracts.push_back(range_contract("residual", worst, std::nullopt, c.tol.at("residual_max")));
}

void run_density(const Config& c, ResultRecord& rec) {
  freeprob::SpectralDensityEstimate est;
  if (c.pencil) {
    const auto grid = c.grid ? *c.grid : default_grid(bound_for(*c.pencil, c.model));
    est = freeprob::density(*c.pencil, c.model, grid, c.density);
  } else {
    const auto lin = ncpoly::linearize(*c.polynomial);
    const auto grid = c.grid ? *c.grid : default_grid(ncpoly::norm_bound(*c.polynomial, c.model.edge()));
    est = freeprob::polynomial_density(lin, c.model, grid, c.density);
  }
  rec.csv_header = {"x", "density", "unstable"};
  for (std::size_t i = 0; i < est.grid.size(); ++i)
    rec.csv_rows.push_back({format_double(est.grid[i]), format_double(est.density[i]), est.unstable[i] ? "1" : "0"});
  json support = json::array();
  for (const auto& s : est.support) support.push_back({s.lo, s.hi});
  const auto unstable = std::count(est.unstable.begin(), est.unstable.end(), true);
  rec.results = {{"support", support},
                 {"mass", est.mass},
                 {"threshold", est.threshold},
                 {"y_levels", est.y_levels},
                 {"unstable_points", unstable},
                 {"grid_points", est.grid.size()}};

  rec.contracts.push_back(range_contract("support_intervals", double(est.support.size()), 1.0, std::nullopt));
  const double min_density = *std::min_element(est.density.begin(), est.density.end());
  rec.contracts.push_back(range_contract("density_min", min_density, c.tol.at("negative_min"), std::nullopt));
  if (c.expect.contains("density")) {
    for (const auto& pt : c.expect["density"]) {
      const double x = pt[0].get<double>(), want = pt[1].get<double>();
      const double got = interpolate(est.grid, est.density, x);
      rec.contracts.push_back(range_contract("density_at_" + format_double(x), got, want - c.tol.at("density_abs"),
                                             want + c.tol.at("density_abs"), "expected " + format_double(want)));
    }
  }
  if (c.expect.contains("support")) {
    const auto& want = c.expect["support"];
    rec.contracts.push_back(
        range_contract("support_count", double(est.support.size()), double(want.size()), double(want.size())));
    for (std::size_t i = 0; i < want.size() && i < est.support.size(); ++i) {
      const double lo = want[i][0].get<double>(), hi = want[i][1].get<double>();
      const double tol = c.tol.at("edge_abs");
      rec.contracts.push_back(range_contract("support_" + std::to_string(i) + "_lo", est.support[i].lo, lo - tol,
                                             lo + tol, "expected " + format_double(lo)));
      rec.contracts.push_back(range_contract("support_" + std::to_string(i) + "_hi", est.support[i].hi, hi - tol,
                                             hi + tol, "expected " + format_double(hi)));
    }
  }
}

void run_norm_predict(const Config& c, ResultRecord& rec) {
  freeprob::NormOptions opts;
  opts.grid_points = c.grid_points;
  const double pred = freeprob::norm_prediction(*c.polynomial, c.model, opts);
  rec.results = {{"prediction", pred}, {"polynomial", ncpoly::render(*c.polynomial)}};
  rec.csv_header = {"polynomial", "prediction"};
  rec.csv_rows.push_back({ncpoly::render(*c.polynomial), format_double(pred)});
  rec.contracts.push_back(range_contract("prediction_finite", std::isfinite(pred) ? 1.0 : 0.0, 1.0, std::nullopt));
  if (c.expected)
    rec.contracts.push_back(range_contract("prediction", pred, *c.expected - c.tol.at("abs_tol"),
                                           *c.expected + c.tol.at("abs_tol"),
                                           "expected " + format_double(*c.expected)));
}

void run_converge(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  Fields dummy(json::object(), "");
  const auto ens = ensemble_for(c.model, c.dist, dummy);
  const double pred = c.expected ? *c.expected : freeprob::norm_prediction(*c.polynomial, c.model);
  const auto rep = mc::norm_convergence(*c.polynomial, ens, c.n_values, c.seeds, run, pred);
  rec.csv_header = {"n", "seed_index", "norm", "deviation"};
  json pts = json::array();
  for (const auto& p : rep.points) {
    for (std::size_t s = 0; s < p.norms.size(); ++s)
      rec.csv_rows.push_back({fmt_int(p.n), fmt_int(static_cast<long long>(s)), format_double(p.norms[s]),
                              format_double(std::abs(p.norms[s] - pred))});
    pts.push_back({{"n", p.n}, {"median_deviation", p.median_deviation}, {"median_stderr", p.median_stderr}});
  }
  rec.results = {{"prediction", pred}, {"ensemble", ens.name()}, {"points", pts}};
  rec.contracts.push_back(range_contract("medians_non_increasing", rep.non_increasing ? 1.0 : 0.0, 1.0, std::nullopt,
                                         "each median <= previous + combined stderr"));
  rec.contracts.push_back(range_contract("median_at_largest_n", rep.points.back().median_deviation, std::nullopt,
                                         c.tol.at("median_final_max")));
}

json residual_json(const mc::ResidualValue& r) {
  return {{"value", matrix_json(r.value)}, {"norm", r.norm}, {"stderr", r.stderr_}};
}

void run_master_iid(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  const auto& lambda = c.lambdas.front();
  std::vector<mc::ScalingPoint> with, without;
  rec.csv_header = {"n",           "replicas",          "expectation_with",  "expectation_with_stderr",
                    "expectation_without", "expectation_without_stderr", "plugin_with", "plugin_with_stderr",
                    "plugin_without", "plugin_without_stderr", "rn_norm", "rn_stderr"};
  json pts = json::array();
  double kappa4 = c.dist.kappa4();
  for (int n : c.n_values) {
    const auto r = mc::master_residual_iid(*c.pencil, c.dist, lambda, n, c.replicas, run);
    const bool plugin = c.form == "plugin";
    const auto& w = plugin ? r.plugin_with_rn : r.expectation_with_rn;
    const auto& wo = plugin ? r.plugin_without_rn : r.expectation_without_rn;
    with.push_back({n, w.norm, w.stderr_});
    without.push_back({n, wo.norm, wo.stderr_});
    rec.csv_rows.push_back({fmt_int(n), fmt_int(r.replicas), format_double(r.expectation_with_rn.norm),
                            format_double(r.expectation_with_rn.stderr_), format_double(r.expectation_without_rn.norm),
                            format_double(r.expectation_without_rn.stderr_), format_double(r.plugin_with_rn.norm),
                            format_double(r.plugin_with_rn.stderr_), format_double(r.plugin_without_rn.norm),
                            format_double(r.plugin_without_rn.stderr_), format_double(op_norm(r.rn.mean)),
                            format_double(r.rn.stderr_norm())});
    pts.push_back({{"n", n},
                   {"Gn", matrix_json(r.gn.mean)},
                   {"Gn_stderr", r.gn.stderr_norm()},
                   {"Rn", matrix_json(r.rn.mean)},
                   {"expectation_with_rn", residual_json(r.expectation_with_rn)},
                   {"expectation_without_rn", residual_json(r.expectation_without_rn)},
                   {"plugin_with_rn", residual_json(r.plugin_with_rn)},
                   {"plugin_without_rn", residual_json(r.plugin_without_rn)}});
  }
  const auto sw = mc::fit_scaling(with);
  const auto swo = mc::fit_scaling(without);
  rec.results = {{"kappa4", kappa4},  {"form", c.form},          {"points", pts},
                 {"slope_with_rn", slope_json(sw)}, {"slope_without_rn", slope_json(swo)}};
  rec.contracts.push_back(slope_contract("slope_with_rn", sw, c.tol.at("slope_with_min"), c.tol.at("slope_with_max")));
  if (kappa4 != 0.0)
    rec.contracts.push_back(
        slope_contract("slope_without_rn", swo, c.tol.at("slope_without_min"), c.tol.at("slope_without_max")));
}

void run_master_wishart(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  const auto& lambda = c.lambdas.front();
  std::vector<mc::ScalingPoint> pts;
  json out = json::array();
  rec.csv_header = {"n", "p", "replicas", "residual", "stderr", "branch"};
  std::vector<mc::WishartResidualReport> reps;
  for (int n : c.n_values) {
    reps.push_back(mc::master_residual_wishart(*c.pencil, c.alpha, lambda, n, c.replicas, run));
    const auto& r = reps.back();
    pts.push_back({n, r.residual.norm, r.residual.stderr_});
    rec.csv_rows.push_back({fmt_int(n), fmt_int(r.p), fmt_int(r.replicas), format_double(r.residual.norm),
                            format_double(r.residual.stderr_), r.branch});
    out.push_back({{"n", n}, {"p", r.p}, {"branch", r.branch}, {"residual", residual_json(r.residual)},
                   {"Gn", matrix_json(r.gn.mean)}});
  }
  const auto s = mc::fit_scaling(pts);
  rec.results = {{"points", out}, {"slope", slope_json(s)}, {"branch", reps.front().branch}};
  if (c.n_values.size() >= 3) {
    rec.contracts.push_back(slope_contract("slope", s, c.tol.at("slope_min"), c.tol.at("slope_max")));
  } else {
    for (const auto& r : reps) {
      const double bound =
          c.tol.at("factor") * (r.residual.stderr_ + c.tol.at("calibration") / (double(r.n) * double(r.n)));
      rec.contracts.push_back(range_contract("residual_n" + std::to_string(r.n), r.residual.norm, std::nullopt, bound));
    }
  }
}

void run_correction(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  const auto rep = mc::correction_check(*c.pencil, c.dist, c.lambdas.front(), c.n_values, c.replicas, run);
  rec.csv_header = {"n", "replicas", "deviation", "stderr", "im_trace", "im_trace_stderr", "im_trace_L"};
  json pts = json::array();
  for (const auto& p : rep.points) {
    rec.csv_rows.push_back({fmt_int(p.n), fmt_int(p.gn.replicas), format_double(p.deviation), format_double(p.stderr_),
                            format_double(p.im_trace), format_double(p.im_trace_stderr),
                            format_double(rep.im_trace_L)});
    pts.push_back({{"n", p.n},
                   {"scaled", matrix_json(p.scaled)},
                   {"deviation", p.deviation},
                   {"stderr", p.stderr_},
                   {"im_trace", p.im_trace},
                   {"im_trace_stderr", p.im_trace_stderr}});
  }
  rec.results = {{"kappa4", rep.kappa4},      {"G", matrix_json(rep.G)}, {"L", matrix_json(rep.L)},
                 {"im_trace_L", rep.im_trace_L}, {"points", pts},       {"inconclusive", rep.inconclusive}};
  const auto& first = rep.points.front();
  const auto& last = rep.points.back();
  rec.contracts.push_back(range_contract("deviation_drop", last.deviation - first.deviation, std::nullopt, 0.0,
                                         rep.inconclusive ? "inconclusive: stderr >= deviation/3 at some n" : ""));
  if (rep.kappa4 != 0.0) {
    const double sign = rep.im_trace_L >= 0.0 ? 1.0 : -1.0;
    // Agreement in sign, allowing sign_sigmas standard errors the wrong way.
    rec.contracts.push_back(range_contract("im_trace_sign", sign * last.im_trace,
                                           -c.tol.at("sign_sigmas") * last.im_trace_stderr, std::nullopt,
                                           "sign(Im tr L) * Im tr n(G_n - G) at n = " + std::to_string(last.n)));
  }
}

void run_variance(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  std::vector<mc::ScalingPoint> pts;
  for (int n : c.n_values) {
    if (c.entry_mode)
      pts.push_back(
          mc::resolvent_entry_variance(*c.pencil, c.dist, c.lambdas.front(), c.row, c.col, n, c.replicas, run));
    else
      pts.push_back(mc::trace_word_variance(c.word, c.generators, c.dist, n, c.replicas, run));
  }
  rec.csv_header = {"n", "replicas", "variance", "stderr"};
  for (const auto& p : pts)
    rec.csv_rows.push_back({fmt_int(p.n), fmt_int(c.replicas), format_double(p.value), format_double(p.stderr_)});
  const auto s = mc::fit_scaling(pts);
  rec.results = {{"slope", slope_json(s)}, {"mode", c.entry_mode ? "entry" : "word"}};
  const bool all_zero = std::all_of(pts.begin(), pts.end(), [](const mc::ScalingPoint& p) { return p.value == 0.0; });
  if (all_zero)
    rec.contracts.push_back(range_contract("variance_zero", 0.0, 0.0, 0.0, "constant word"));
  else
    rec.contracts.push_back(slope_contract("slope", s, c.tol.at("slope_min"), c.tol.at("slope_max")));
}

void run_ibp(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  const auto spec = ensembles::WishartSpec::explicit_size(c.n, c.p);
  const auto rep = mc::wishart_ibp_check(spec, c.phi, c.h, c.replicas, run);
  rec.csv_header = {"n", "p", "replicas", "value_re", "value_im", "stderr"};
  rec.csv_rows.push_back({fmt_int(c.n), fmt_int(c.p), fmt_int(rep.replicas), format_double(rep.value.real()),
                          format_double(rep.value.imag()), format_double(rep.stderr_)});
  rec.results = {{"value", complex_json(rep.value)}, {"stderr", rep.stderr_}, {"abs_value", std::abs(rep.value)}};
  rec.contracts.push_back(range_contract("abs_value", std::abs(rep.value), std::nullopt,
                                         c.tol.at("sigmas") * rep.stderr_, "bound = sigmas * stderr"));
}

void run_containment(const Config& c, const mc::RunOptions& run, ResultRecord& rec) {
  Fields dummy(json::object(), "");
  const auto ens = ensemble_for(c.model, c.dist, dummy);
  const auto support = mc::predicted_support(*c.pencil, c.model, c.grid_points);
  const auto rep = mc::spectrum_containment(*c.pencil, ens, c.n, c.epsilon, c.seeds, run, support);
  rec.csv_header = {"seed_index", "contained", "min_eigenvalue", "max_eigenvalue", "max_excess"};
  for (std::size_t s = 0; s < rep.seeds.size(); ++s) {
    const auto& r = rep.seeds[s];
    rec.csv_rows.push_back({fmt_int(static_cast<long long>(s)), r.contained ? "1" : "0", format_double(r.min_eigenvalue),
                            format_double(r.max_eigenvalue), format_double(r.max_excess)});
  }
  json sup = json::array();
  for (const auto& s : support) sup.push_back({s.lo, s.hi});
  rec.results = {{"support", sup}, {"epsilon", c.epsilon}, {"pass_rate", rep.pass_rate}, {"ensemble", ens.name()}};
  rec.contracts.push_back(range_contract("pass_rate", rep.pass_rate, c.tol.at("min_pass_rate"), std::nullopt,
                                         "seed passes when max_excess < epsilon"));
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool ResultRecord::passed() const {
  return std::all_of(contracts.begin(), contracts.end(), [](const Contract& c) { return c.passed; });
}

std::string ResultRecord::to_json() const {
  json cs = json::array();
  for (const auto& c : contracts)
    cs.push_back({{"name", c.name},
                  {"passed", c.passed},
                  {"value", optional_json(c.value)},
                  {"lower", optional_json(c.lower)},
                  {"upper", optional_json(c.upper)},
                  {"detail", c.detail}});
  const json j = {{"experiment", experiment}, {"config_hash", config_hash}, {"seed", seed}, {"config", config},
                  {"results", results},       {"contracts", cs},            {"passed", passed()}};
  return j.dump(2) + "\n";
}

std::string ResultRecord::to_csv() const {
  std::ostringstream out;
  out << "# config-hash: " << config_hash << "\n";
  for (std::size_t i = 0; i < csv_header.size(); ++i) out << (i ? "," : "") << csv_escape(csv_header[i]);
  out << "\n";
  for (const auto& row : csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(row[i]);
    out << "\n";
  }
  return out.str();
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : catalog()) out.push_back(e.name);
    return out;
  }();
  return names;
}

std::string describe(const std::string& experiment) {
  const auto& e = info_for(experiment);
  std::ostringstream out;
  out << e.name << ": " << e.summary << "\n\n";
  out << "claim: " << e.claim << "\n\n";
  out << "contract: " << e.contract << "\n\n";
  out << "parameters (default):\n";
  for (const auto& p : e.parameters) out << "  " << p.key << " (" << p.fallback << "): " << p.meaning << "\n";
  out << "  seed (0): master seed; --seed overrides\n";
  out << "\ntolerances (default):\n";
  for (const auto& t : e.tolerances) {
    out << "  " << t.key << " = " << format_double(t.value);
    if (!t.meaning.empty()) out << ": " << t.meaning;
    out << "\n";
  }
  return out.str();
}

json normalize_config(const std::string& experiment, const json& config, const RunSettings& settings) {
  return parse(experiment, config, settings).norm;
}

std::string config_hash(const std::string& experiment, const json& normalized) {
  const std::string text = experiment + "\n" + normalized.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ResultRecord run(const std::string& experiment, const json& config, const RunSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const Config c = parse(experiment, config, settings);
  ResultRecord rec;
  rec.experiment = experiment;
  rec.config = c.norm;
  rec.config_hash = config_hash(experiment, c.norm);
  rec.seed = c.seed;
  const mc::RunOptions run{c.seed, settings.workers > 0 ? settings.workers : hardware_workers()};

  if (experiment == "solve") run_solve(c, rec);
  else if (experiment == "density") run_density(c, rec);
  else if (experiment == "norm-predict") run_norm_predict(c, rec);
  else if (experiment == "converge") run_converge(c, run, rec);
  else if (experiment == "master-check-iid") run_master_iid(c, run, rec);
  else if (experiment == "master-check-wishart") run_master_wishart(c, run, rec);
  else if (experiment == "correction-check") run_correction(c, run, rec);
  else if (experiment == "variance-check") run_variance(c, run, rec);
  else if (experiment == "wishart-ibp") run_ibp(c, run, rec);
  else if (experiment == "containment") run_containment(c, run, rec);

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<std::string> write_outputs(const ResultRecord& record, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + out_dir + "': " + ec.message());
  const fs::path base = fs::path(out_dir) / (record.experiment + "-" + record.config_hash);
  std::vector<std::string> paths;
  for (const auto& [ext, text] : {std::pair{".json", record.to_json()}, std::pair{".csv", record.to_csv()}}) {
    const std::string path = base.string() + ext;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
    f << text;
    if (!f.flush()) throw Error(ErrorKind::io, "write failed for '" + path + "'");
    paths.push_back(path);
  }
  return paths;
}

}  // namespace freeconv::runner
