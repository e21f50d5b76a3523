#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phishaudit/data_table.hpp"
#include <nlohmann/json.hpp>

namespace phishaudit {

enum class DatasetSide { kD1, kD2 };
enum class FeatureSet { kCommon, kAll };

// Manual alignment of dataset-specific column names onto the canonical
// common-feature names. File format: CSV with header
// d1_name,d2_name,canonical_name and an optional fourth column
// missing_sentinel holding a value that means "missing" in both sources.
struct SchemaMapping {
  struct Entry {
    std::string d1_name;
    std::string d2_name;
    std::string canonical_name;
    std::optional<double> missing_sentinel;
  };
  std::vector<Entry> entries;

  static SchemaMapping load(const std::string& path);
  static SchemaMapping load_default();

  const std::string& source_name(const Entry& e, DatasetSide side) const {
    return side == DatasetSide::kD1 ? e.d1_name : e.d2_name;
  }
};

// Renames mapped columns to canonical names. kCommon keeps exactly the 20
// canonical columns in schema order; kAll keeps every column in source order.
// Declared sentinels become NaN. Throws Error(kUnmappedColumn) naming every
// missing source column.
DataTable align_schema(const DataTable& table, const SchemaMapping& mapping,
                       DatasetSide side, FeatureSet feature_set);

// Column medians over non-missing cells; even counts average the two middle
// values. Fit on one table, apply to any table with the same columns.
class MedianImputer {
 public:
  // Throws Error(kAllMissingColumn) if a column has no observed value.
  static MedianImputer fit(const DataTable& table);
  DataTable apply(const DataTable& table) const;
  const std::vector<double>& medians() const { return medians_; }

 private:
  std::vector<std::string> columns_;
  std::vector<double> medians_;
};

DataTable impute_median(const DataTable& table);

std::vector<std::string> constant_columns(const DataTable& table);
DataTable drop_columns(const DataTable& table, const std::vector<std::string>& names);
std::pair<DataTable, std::vector<std::string>> drop_constant_columns(
    const DataTable& table);

struct ClassCounts {
  std::size_t benign = 0;
  std::size_t phishing = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitOptions {
  double test_fraction = 0.30;
  std::uint64_t seed = 0;
  // Overrides the per-class test sizes (used to reproduce a published
  // partition whose sizes were not stratified).
  std::optional<ClassCounts> test_counts;
};

// Per-class seeded shuffle, then the first round(n_c * test_fraction) rows
// of each class go to test. Both index lists are returned ascending.
// Throws Error(kDegenerateClass) if a class has fewer than two rows.
SplitIndices split_indices(std::span<const int> labels, const SplitOptions& options);

struct SplitResult {
  DataTable train;
  DataTable test;
  std::uint64_t seed = 0;
};

SplitResult stratified_split(const DataTable& table, double test_fraction,
                             std::uint64_t seed);
SplitResult stratified_split(const DataTable& table, const SplitOptions& options);

struct SmoteOptions {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  // Snap interpolated coordinates of {0,1}-valued columns to the nearer of 0
  // and 1. Off by default: snapping moves synthetic rows off the
  // interpolation segment.
  bool round_binary = false;
};

// Oversamples the minority class up to the majority count. Synthetic rows
// x + u * (nn - x), u ~ U[0,1), nn one of the k nearest minority neighbours
// of x under min-max scaled Euclidean distance, are appended after the
// original rows. Throws Error(kTooFewMinoritySamples) if the minority has
// fewer than k + 1 rows and a deficit exists.
DataTable smote(const DataTable& table, const SmoteOptions& options);

struct MergedSplit {
  DataTable train;
  DataTable test;
};

// train = seeded sample of n_per_class rows of each class from d1_train,
// followed by all of d2_train; test = d1_test followed by d2_test.
MergedSplit build_merged(const DataTable& d1_train, const DataTable& d2_train,
                         const DataTable& d1_test, const DataTable& d2_test,
                         std::size_t n_per_class, std::uint64_t seed);

nlohmann::ordered_json table_manifest(const DataTable& table, std::uint64_t seed);

// ---------------------------------------------------------------------------
// End-to-end preparation of both datasets and their merge.

struct PipelineConfig {
  std::uint64_t seed = 42;
  double test_fraction = 0.30;
  std::optional<ClassCounts> d1_test_counts;
  std::optional<ClassCounts> d2_test_counts;
  bool smote_d1 = true;
  bool smote_d2 = false;
  std::size_t smote_k = 5;
  std::size_t merge_per_class = 6800;
  bool build_all_features = true;
};

struct PreparedData {
  // All-features tables (mapped columns renamed, constants dropped).
  DataTable d1_all_train, d1_all_test, d2_all_train, d2_all_test;
  // Common-feature tables; *_train is post-SMOTE when enabled.
  DataTable d1_train, d1_test, d2_train, d2_test;
  // Common-feature training rows before oversampling.
  DataTable d1_train_real, d2_train_real;
  DataTable merge_train, merge_test;
  std::vector<std::string> d1_dropped_constants, d2_dropped_constants;
  std::uint64_t seed = 0;

  nlohmann::ordered_json manifest() const;
};

// load -> align -> impute -> drop constants -> split -> SMOTE (train only)
// -> merge. The split partition depends only on labels and seed, so it is
// drawn first and the imputation medians and constant-column set are taken
// from the training rows alone.
PreparedData prepare_datasets(const DataTable& d1_raw, const DataTable& d2_raw,
                              const SchemaMapping& mapping,
                              const PipelineConfig& config);

}  // namespace phishaudit
