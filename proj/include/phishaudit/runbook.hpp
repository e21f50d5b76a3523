#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "phishaudit/config.hpp"
#include "phishaudit/experiments.hpp"
#include "phishaudit/report.hpp"

namespace phishaudit {

struct RawDatasets {
  DataTable d1, d2;  // native columns
  SchemaMapping mapping;
};

// Reads the configured CSVs, or generates and writes the synthetic pair
// under <out>/data and reads it back.
RawDatasets load_raw(const RunConfig& cfg);

// Pipeline run with the master seed, then the all-features row cap.
PreparedData prepare(const RawDatasets& raw, const RunConfig& cfg);

// Every prepared table as CSV (label column "label") plus manifest.json.
void write_prepared(const PreparedData& data, const std::string& dir);

struct MatrixOutcome {
  std::vector<ExperimentResult> results;
  std::vector<DivergenceReport> divergence;
  std::vector<ZooTable> zoo;
  std::vector<StatsReport> stats;  // D1, D2 over the common features
};

// Output layout under cfg.out_dir:
//   manifest.json, summary.json, run.log (the only file with timings)
//   stats/{D1,D2}_means.csv, stats/{D1,D2}_percentages.csv, stats/stats.json
//   zoo/{D1,D2}.csv, zoo/{D1,D2}.json
//   <exp-id>/metrics.json, predictions.csv, model.json and, when explained,
//     shap.csv, shap_header.json, importance.json, bar.svg, beeswarm.svg
//   divergence/<a>__<b>.json
MatrixOutcome run_matrix(const RunConfig& cfg, std::ostream* progress = nullptr);

void write_json_file(const nlohmann::ordered_json& j, const std::string& path);

}  // namespace phishaudit
