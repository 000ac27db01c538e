#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "freeconv/freeconv.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitContractFail = 2;

int report_error(const std::string& message) {
  std::cerr << "freeconv: error: " << message << "\n";
  return kExitError;
}

int run_describe(const std::string& name) {
  char* text = nullptr;
  if (name.empty()) {
    if (fc_experiment_names(&text) != FC_OK) return report_error(fc_last_error());
  } else if (fc_describe(name.c_str(), &text) != FC_OK) {
    return report_error(fc_last_error());
  }
  std::cout << text;
  fc_free_string(text);
  return kExitPass;
}

std::optional<int> env_workers() {
  const char* v = std::getenv("FREECONV_WORKERS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const long w = std::strtol(v, &end, 10);
  if (*end != '\0' || w < 1 || w > 4096) throw std::runtime_error("FREECONV_WORKERS must be a positive integer");
  return static_cast<int>(w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator-valued free probability experiments"};
  std::string experiment;
  std::string describe_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;

  app.add_option("experiment", experiment, "experiment name, or 'describe' / 'list'")->required();
  app.add_option("name", describe_name, "experiment to describe");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--workers", workers, "worker threads (default FREECONV_WORKERS, then all cores)")
      ->check(CLI::Range(1, 4096));
  app.add_option("--out", out_dir, "output directory (default: config 'output', then '.')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  if (experiment == "describe") return run_describe(describe_name);
  if (experiment == "list") return run_describe("");
  if (!describe_name.empty()) return report_error("unexpected argument '" + describe_name + "'");
  if (config_path.empty()) return report_error("--config is required");

  std::ifstream in(config_path, std::ios::binary);
  if (!in) return report_error("cannot read config file '" + config_path + "'");
  std::stringstream text;
  text << in.rdbuf();

  fc_run_options options{};
  try {
    if (!workers) workers = env_workers();
  } catch (const std::exception& e) {
    return report_error(e.what());
  }
  options.workers = workers.value_or(0);
  if (seed) {
    options.seed = *seed;
    options.has_seed = 1;
  }

  fc_result* result = nullptr;
  if (fc_run(experiment.c_str(), text.str().c_str(), &options, &result) != FC_OK) return report_error(fc_last_error());

  const std::string dir = out_dir ? *out_dir : fc_result_output_dir(result);
  if (fc_result_write(result, dir.c_str()) != FC_OK) {
    const std::string message = fc_last_error();
    fc_result_destroy(result);
    return report_error(message);
  }
  const bool passed = fc_result_passed(result) != 0;
  std::cout << fc_result_summary(result);
  std::cout << experiment << " " << fc_result_hash(result) << " " << (passed ? "PASS" : "FAIL") << " ("
            << fc_result_wall_seconds(result) << " s)\n";
  std::cout << "wrote " << dir << "/" << experiment << "-" << fc_result_hash(result) << ".{json,csv}\n";
  fc_result_destroy(result);
  return passed ? kExitPass : kExitContractFail;
}
