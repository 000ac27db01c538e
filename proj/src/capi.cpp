#include "freeconv/freeconv.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "freeconv/common.hpp"
#include "freeconv/ensembles.hpp"
#include "freeconv/freeprob.hpp"
#include "freeconv/ncpoly.hpp"
#include "freeconv/pencil.hpp"
#include "freeconv/runner.hpp"

struct fc_pencil {
  freeconv::CoefficientPencil pencil;
};

struct fc_result {
  freeconv::runner::ResultRecord record;
  std::string json;
  std::string csv;
  std::string output_dir;
  std::string summary;
};

namespace {

thread_local std::string last_error;

fc_status fail(fc_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
fc_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return FC_OK;
  } catch (const freeconv::Error& e) {
    return fail(static_cast<fc_status>(static_cast<int>(e.kind())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(FC_CONFIG, std::string("config is not valid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(FC_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FC_INTERNAL, e.what());
  }
}

freeconv::Matrix read_matrix(const double* data, int m) {
  freeconv::Matrix a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = {data[2 * (i * m + j)], data[2 * (i * m + j) + 1]};
  return a;
}

freeconv::freeprob::FreeModel make_model(fc_model_kind kind, double alpha) {
  if (kind == FC_SEMICIRCULAR) return freeconv::freeprob::FreeModel::semicircular();
  if (kind == FC_MARCHENKO_PASTUR) return freeconv::freeprob::FreeModel::marchenko_pastur(alpha);
  throw freeconv::Error(freeconv::ErrorKind::invalid_argument, "unknown model kind");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw freeconv::Error(freeconv::ErrorKind::invalid_argument, what);
}

std::string summarize(const freeconv::runner::ResultRecord& rec) {
  using freeconv::runner::format_double;
  std::ostringstream out;
  for (const auto& c : rec.contracts) {
    out << c.name << ": " << (c.passed ? "pass" : "FAIL");
    out << " value=" << (c.value ? format_double(*c.value) : "none");
    out << " range=[" << (c.lower ? format_double(*c.lower) : "-inf") << ", "
        << (c.upper ? format_double(*c.upper) : "inf") << "]";
    if (!c.detail.empty()) out << " " << c.detail;
    out << "\n";
  }
  return out.str();
}

}  // namespace

extern "C" {

const char* fc_version(void) { return "1.0.0"; }

const char* fc_last_error(void) { return last_error.c_str(); }

fc_status fc_pencil_create(int m, int r, const double* coeffs, fc_pencil** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = nullptr;
    require(m >= 1 && r >= 0, "need m >= 1 and r >= 0");
    require(coeffs != nullptr, "coeffs is null");
    std::vector<freeconv::Matrix> mats;
    for (int i = 0; i <= r; ++i) mats.push_back(read_matrix(coeffs + 2 * static_cast<std::size_t>(i) * m * m, m));
    *out = new fc_pencil{freeconv::CoefficientPencil(mats)};
  });
}

void fc_pencil_destroy(fc_pencil* pencil) { delete pencil; }

int fc_pencil_m(const fc_pencil* pencil) { return pencil ? pencil->pencil.m() : 0; }

int fc_pencil_r(const fc_pencil* pencil) { return pencil ? pencil->pencil.r() : 0; }

fc_status fc_solve_G(const fc_pencil* pencil, fc_model_kind model, double alpha, const double* lambda, double* g_out,
                     double* residual_out) {
  return guarded([&] {
    require(pencil && lambda && g_out, "null argument");
    const int m = pencil->pencil.m();
    const auto sol = freeconv::freeprob::solve_G(pencil->pencil, make_model(model, alpha),
                                                 freeconv::freeprob::SpectralParameter(read_matrix(lambda, m)));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        g_out[2 * (i * m + j)] = sol.G(i, j).real();
        g_out[2 * (i * m + j) + 1] = sol.G(i, j).imag();
      }
    if (residual_out) *residual_out = sol.residual_norm;
  });
}

fc_status fc_norm_prediction(const char* polynomial, int generators, fc_model_kind model, double alpha,
                             double* out) {
  return guarded([&] {
    require(polynomial && out, "null argument");
    const auto p = freeconv::ncpoly::parse(polynomial, generators);
    *out = freeconv::freeprob::norm_prediction(p, make_model(model, alpha));
  });
}

fc_status fc_kappa4(const char* distribution, double* out) {
  return guarded([&] {
    require(distribution && out, "null argument");
    *out = freeconv::ensembles::EntryDistribution::parse(distribution).kappa4();
  });
}

fc_status fc_describe(const char* experiment, char** out) {
  return guarded([&] {
    require(experiment && out, "null argument");
    *out = nullptr;
    *out = copy_string(freeconv::runner::describe(experiment));
  });
}

fc_status fc_experiment_names(char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    std::string text;
    for (const auto& n : freeconv::runner::experiment_names()) text += n + "\n";
    *out = copy_string(text);
  });
}

void fc_free_string(char* s) { std::free(s); }

fc_status fc_run(const char* experiment, const char* config_json, const fc_run_options* options, fc_result** out) {
  return guarded([&] {
    require(experiment && config_json && out, "null argument");
    *out = nullptr;
    const auto config = nlohmann::json::parse(config_json);
    freeconv::runner::RunSettings settings;
    if (options) {
      if (options->has_seed) settings.seed = options->seed;
      settings.workers = options->workers;
    }
    auto result = std::make_unique<fc_result>();
    result->record = freeconv::runner::run(experiment, config, settings);
    result->json = result->record.to_json();
    result->csv = result->record.to_csv();
    result->output_dir = ".";
    if (config.is_object() && config.contains("output")) {
      if (!config["output"].is_string())
        throw freeconv::Error(freeconv::ErrorKind::config, "config field 'output': expected a string");
      result->output_dir = config["output"].get<std::string>();
    }
    result->summary = summarize(result->record);
    *out = result.release();
  });
}

void fc_result_destroy(fc_result* result) { delete result; }

int fc_result_passed(const fc_result* result) { return result && result->record.passed() ? 1 : 0; }

const char* fc_result_json(const fc_result* result) { return result ? result->json.c_str() : ""; }

const char* fc_result_csv(const fc_result* result) { return result ? result->csv.c_str() : ""; }

const char* fc_result_hash(const fc_result* result) { return result ? result->record.config_hash.c_str() : ""; }

double fc_result_wall_seconds(const fc_result* result) { return result ? result->record.wall_seconds : 0.0; }

const char* fc_result_output_dir(const fc_result* result) { return result ? result->output_dir.c_str() : ""; }

const char* fc_result_summary(const fc_result* result) { return result ? result->summary.c_str() : ""; }

fc_status fc_result_write(const fc_result* result, const char* out_dir) {
  return guarded([&] {
    require(result && out_dir, "null argument");
    freeconv::runner::write_outputs(result->record, out_dir);
  });
}

}
