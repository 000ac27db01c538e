#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace freeconv::runner {

using json = nlohmann::json;

struct Contract {
  std::string name;
  bool passed = false;
  // Measured quantity and its admissible range; absent bounds are open.
  std::optional<double> value;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string detail;
};

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  // Normalized configuration the hash is computed from.
  json config;
  json results;
  std::vector<Contract> contracts;
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
  // Kept out of the emitted files so reruns are byte-identical.
  double wall_seconds = 0.0;

  bool passed() const;
  // Structured record: experiment, hash, seed, config, results, contracts, passed.
  std::string to_json() const;
  // "# config-hash: <hash>" line, header row, data rows.
  std::string to_csv() const;
};

struct RunSettings {
  // Overrides the config's seed when set.
  std::optional<std::uint64_t> seed;
  // <= 0 selects the number of hardware threads.
  int workers = 0;
};

const std::vector<std::string>& experiment_names();

// Contract, defaults, tolerances and the verified claim of an experiment.
// Throws Error(config) listing the valid names for unknown experiments.
std::string describe(const std::string& experiment);

// Validated configuration with every default filled in; unknown keys and
// malformed fields raise Error(config) naming the field.
json normalize_config(const std::string& experiment, const json& config, const RunSettings& settings = {});

// FNV-1a 64 of the experiment name and the canonical normalized config, 16 hex digits.
std::string config_hash(const std::string& experiment, const json& normalized);

ResultRecord run(const std::string& experiment, const json& config, const RunSettings& settings = {});

// Writes <out_dir>/<experiment>-<hash>.json and .csv; returns both paths.
std::vector<std::string> write_outputs(const ResultRecord& record, const std::string& out_dir);

// printf("%.17g")
std::string format_double(double x);

}  // namespace freeconv::runner
