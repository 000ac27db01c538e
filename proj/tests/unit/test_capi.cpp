#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "freeconv/freeconv.h"

namespace {

std::complex<double> semicircle(std::complex<double> z) {
  std::complex<double> s = std::sqrt(z * z - 4.0);
  if ((z - s).imag() * z.imag() > 0.0) s = -s;
  return (z - s) / 2.0;
}

}  // namespace

TEST_CASE("version and names") {
  CHECK(std::string(fc_version()) == "1.0.0");
  char* names = nullptr;
  REQUIRE(fc_experiment_names(&names) == FC_OK);
  CHECK(std::string(names).find("master-check-wishart\n") != std::string::npos);
  fc_free_string(names);
}

TEST_CASE("pencil handle solves the scalar equation") {
  const double coeffs[] = {0.0, 0.0, 1.0, 0.0};
  fc_pencil* p = nullptr;
  REQUIRE(fc_pencil_create(1, 1, coeffs, &p) == FC_OK);
  CHECK(fc_pencil_m(p) == 1);
  CHECK(fc_pencil_r(p) == 1);
  for (double x : {-3.0, 0.0, 0.7, 2.5}) {
    const double lambda[] = {x, 0.5};
    double g[2];
    double residual = 1.0;
    REQUIRE(fc_solve_G(p, FC_SEMICIRCULAR, 0.0, lambda, g, &residual) == FC_OK);
    CHECK(std::abs(std::complex<double>(g[0], g[1]) - semicircle({x, 0.5})) < 1e-10);
    CHECK(residual <= 1e-10);
  }
  const double real_lambda[] = {1.0, 0.0};
  double g[2];
  CHECK(fc_solve_G(p, FC_SEMICIRCULAR, 0.0, real_lambda, g, nullptr) == FC_INVALID_ARGUMENT);
  CHECK(std::string(fc_last_error()).size() > 0);
  fc_pencil_destroy(p);
}

TEST_CASE("invalid arguments map to status codes") {
  fc_pencil* p = nullptr;
  CHECK(fc_pencil_create(0, 1, nullptr, &p) == FC_INVALID_ARGUMENT);
  CHECK(p == nullptr);
  const double not_hermitian[] = {0.0, 0.0, 0.0, 1.0};
  CHECK(fc_pencil_create(1, 1, not_hermitian, &p) != FC_OK);
  double v = 0.0;
  CHECK(fc_norm_prediction("x1 +", 1, FC_SEMICIRCULAR, 0.0, &v) == FC_PARSE);
  CHECK(fc_kappa4("cauchy", &v) != FC_OK);
  CHECK(fc_kappa4("uniform", &v) == FC_OK);
  CHECK(std::string(fc_last_error()).empty());
  CHECK(v == doctest::Approx(-1.2).epsilon(1e-12));
  CHECK(fc_norm_prediction("x1", 1, FC_SEMICIRCULAR, 0.0, &v) == FC_OK);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-3));
  char* text = nullptr;
  CHECK(fc_describe("nope", &text) == FC_CONFIG);
  CHECK(text == nullptr);
  CHECK(std::string(fc_last_error()).find("containment") != std::string::npos);
}

TEST_CASE("run returns a result handle") {
  fc_run_options opts{};
  opts.workers = 2;
  fc_result* r = nullptr;
  REQUIRE(fc_run("solve", R"({"pencil": {"scalar": [0, 1]}, "lambda": [0, 3], "output": "somewhere"})", &opts, &r) ==
          FC_OK);
  CHECK(fc_result_passed(r) == 1);
  CHECK(std::string(fc_result_hash(r)).size() == 16);
  CHECK(std::string(fc_result_json(r)).find("-0.30277563773199") != std::string::npos);
  CHECK(std::string(fc_result_csv(r)).rfind("# config-hash: ", 0) == 0);
  CHECK(std::string(fc_result_output_dir(r)) == "somewhere");
  CHECK(std::string(fc_result_summary(r)).find("residual: pass") != std::string::npos);
  CHECK(fc_result_wall_seconds(r) >= 0.0);

  const auto dir = std::filesystem::temp_directory_path() / "freeconv_capi_test";
  std::filesystem::remove_all(dir);
  REQUIRE(fc_result_write(r, dir.string().c_str()) == FC_OK);
  CHECK(std::filesystem::exists(dir / ("solve-" + std::string(fc_result_hash(r)) + ".csv")));
  CHECK(std::filesystem::exists(dir / ("solve-" + std::string(fc_result_hash(r)) + ".json")));
  std::filesystem::remove_all(dir);
  fc_result_destroy(r);
}

TEST_CASE("run reports config errors") {
  fc_result* r = nullptr;
  CHECK(fc_run("converge", R"({"polynomial": "x1"})", nullptr, &r) == FC_CONFIG);
  CHECK(r == nullptr);
  CHECK(std::string(fc_last_error()).find("n_values") != std::string::npos);
  CHECK(fc_run("solve", "{not json", nullptr, &r) == FC_CONFIG);
  CHECK(fc_run("bogus", "{}", nullptr, &r) == FC_CONFIG);
  CHECK(fc_run("correction-check", R"({"n_values": [10], "lambda": [0, 0.001]})", nullptr, &r) == FC_CONFIG);
}

TEST_CASE("seed option overrides the config seed") {
  const char* cfg = R"({"word": [1], "n_values": [8, 16, 32], "replicas": 50, "seed": 3})";
  fc_run_options a{}, b{};
  a.workers = b.workers = 1;
  b.seed = 3;
  b.has_seed = 1;
  fc_result* ra = nullptr;
  fc_result* rb = nullptr;
  REQUIRE(fc_run("variance-check", cfg, &a, &ra) == FC_OK);
  REQUIRE(fc_run("variance-check", cfg, &b, &rb) == FC_OK);
  CHECK(std::string(fc_result_csv(ra)) == fc_result_csv(rb));
  fc_result_destroy(rb);
  b.seed = 4;
  REQUIRE(fc_run("variance-check", cfg, &b, &rb) == FC_OK);
  CHECK(std::string(fc_result_hash(ra)) != fc_result_hash(rb));
  CHECK(std::string(fc_result_csv(ra)) != fc_result_csv(rb));
  fc_result_destroy(ra);
  fc_result_destroy(rb);
}
