#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "phishaudit/experiments.hpp"
#include "phishaudit/pipeline.hpp"
#include "phishaudit/synthetic.hpp"

namespace phishaudit {

struct DataConfig {
  // Generate the two datasets instead of reading d1_path / d2_path.
  bool synthetic = false;
  SyntheticConfig synth;  // seed: synthetic_seed, else the master seed
  std::optional<std::uint64_t> synthetic_seed;
  std::string d1_path, d2_path;
  std::string d1_label = kD1LabelColumn;
  std::string d1_positive = kD1PositiveLabel;
  std::string d2_label = kD2LabelColumn;
  std::string d2_positive = kD2PositiveLabel;
  std::string mapping_path;  // empty: the shipped mapping
  PipelineConfig pipeline;  // seed: always the master seed
  // Caps each all-features training table at this many rows (0 = no cap).
  std::size_t max_rows_all = 0;
};

struct ExperimentsConfig {
  std::vector<std::string> run;  // experiment ids; all nine when the key is absent
  std::string model = "gbdt_second";
  std::vector<std::string> zoo;  // models for the per-dataset comparison
  bool extra_pairs = true;
};

struct ExplainSettings {
  ExplainConfig explain;
  std::size_t top_n = 30;
  std::size_t beeswarm_features = 20;
  std::size_t k = 10;
};

struct FetchConfig {
  std::string d1_url, d1_sha256, d2_url, d2_sha256;
};

// INI file with sections [run], [data], [model.gbdt], [model.rf], [model.dt],
// [model.lr], [model.nb], [experiments], [explain], [fetch]. Unknown
// sections or keys are errors. Relative paths resolve against the file's
// directory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  std::size_t threads = 0;
  DataConfig data;
  ModelConfigs models;
  ExperimentsConfig experiments;
  ExplainSettings explain;
  FetchConfig fetch;

  // Throws Error(kConfig) on syntax errors, unknown keys, bad values or a
  // missing [run] seed; validate() is applied.
  static RunConfig parse(std::istream& in, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);

  // Experiment ids, model names, value ranges and, unless synthetic, that
  // both input paths are set.
  void validate() const;
  // The configured input files exist. Throws Error(kConfig).
  void check_inputs() const;
};

}  // namespace phishaudit
