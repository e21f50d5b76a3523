#include "phishaudit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/paths.hpp"
#include "phishaudit/rng.hpp"
#include "phishaudit/url_features.hpp"

namespace phishaudit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

std::vector<std::size_t> rows_with_label(std::span<const int> labels, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

bool is_binary_column(const DataTable& t, std::size_t col) {
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    const double v = t.value(i, col);
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

}  // namespace

SchemaMapping SchemaMapping::load(const std::string& path) {
  const auto records = csv::read_file(path);
  if (records.empty()) throw Error(ErrorCode::kEmptyFile, path);
  const auto& header = records.front();
  if (header.size() < 3 || header[0] != "d1_name" || header[1] != "d2_name" ||
      header[2] != "canonical_name") {
    throw Error(ErrorCode::kInvalidArgument,
                path + ": expected header d1_name,d2_name,canonical_name");
  }
  SchemaMapping mapping;
  std::set<std::string> d1_seen, d2_seen, canonical_seen;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() != header.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  path + ": malformed row " + std::to_string(i));
    }
    Entry e{r[0], r[1], r[2], std::nullopt};
    if (r.size() > 3 && !r[3].empty()) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(r[3].data(), r[3].data() + r[3].size(), v);
      if (ec != std::errc() || ptr != r[3].data() + r[3].size()) {
        throw Error(ErrorCode::kInvalidArgument, path + ": bad sentinel " + r[3]);
      }
      e.missing_sentinel = v;
    }
    if (!d1_seen.insert(e.d1_name).second || !d2_seen.insert(e.d2_name).second ||
        !canonical_seen.insert(e.canonical_name).second) {
      throw Error(ErrorCode::kDuplicateColumnName,
                  path + ": duplicate mapping entry for " + e.canonical_name);
    }
    mapping.entries.push_back(std::move(e));
  }
  return mapping;
}

SchemaMapping SchemaMapping::load_default() {
  return load(data_dir() + "/schema_mapping.csv");
}

DataTable align_schema(const DataTable& table, const SchemaMapping& mapping,
                       DatasetSide side, FeatureSet feature_set) {
  std::vector<std::string> missing;
  std::map<std::string, const SchemaMapping::Entry*> by_source;
  for (const auto& e : mapping.entries) {
    const std::string& source = mapping.source_name(e, side);
    if (!table.column_index(source)) missing.push_back(source);
    by_source[source] = &e;
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::kUnmappedColumn,
                table.name() + " lacks mapped columns: " + join(missing));
  }

  std::vector<std::size_t> source_cols;
  std::vector<std::string> names;
  std::vector<std::optional<double>> sentinels;
  if (feature_set == FeatureSet::kCommon) {
    const auto& schema = FeatureSchema::common();
    for (const auto& f : schema.features()) {
      const auto it = std::find_if(mapping.entries.begin(), mapping.entries.end(),
                                   [&](const auto& e) { return e.canonical_name == f.name; });
      if (it == mapping.entries.end()) {
        throw Error(ErrorCode::kUnmappedColumn,
                    "mapping has no entry for canonical feature " + std::string(f.name));
      }
      source_cols.push_back(*table.column_index(mapping.source_name(*it, side)));
      names.emplace_back(f.name);
      sentinels.push_back(it->missing_sentinel);
    }
  } else {
    for (std::size_t j = 0; j < table.n_cols(); ++j) {
      const auto it = by_source.find(table.column_names()[j]);
      source_cols.push_back(j);
      if (it != by_source.end()) {
        names.push_back(it->second->canonical_name);
        sentinels.push_back(it->second->missing_sentinel);
      } else {
        names.push_back(table.column_names()[j]);
        sentinels.push_back(std::nullopt);
      }
    }
  }

  std::vector<double> values;
  values.reserve(table.n_rows() * names.size());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    for (std::size_t k = 0; k < source_cols.size(); ++k) {
      const double v = table.value(i, source_cols[k]);
      values.push_back(sentinels[k] && v == *sentinels[k] ? kNaN : v);
    }
  }
  return DataTable(table.name(), std::move(names), std::move(values),
                   std::vector<int>(table.labels().begin(), table.labels().end()));
}

MedianImputer MedianImputer::fit(const DataTable& table) {
  MedianImputer imputer;
  imputer.columns_ = table.column_names();
  imputer.medians_.resize(table.n_cols());
  for (std::size_t j = 0; j < table.n_cols(); ++j) {
    std::vector<double> observed;
    observed.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
      const double v = table.value(i, j);
      if (!std::isnan(v)) observed.push_back(v);
    }
    if (observed.empty()) {
      throw Error(ErrorCode::kAllMissingColumn,
                  table.name() + ": column " + table.column_names()[j]);
    }
    std::sort(observed.begin(), observed.end());
    const std::size_t n = observed.size();
    imputer.medians_[j] = n % 2 == 1 ? observed[n / 2]
                                     : (observed[n / 2 - 1] + observed[n / 2]) / 2.0;
  }
  return imputer;
}

DataTable MedianImputer::apply(const DataTable& table) const {
  if (table.column_names() != columns_) {
    throw Error(ErrorCode::kSchemaMismatch,
                "imputer fitted on different columns than " + table.name());
  }
  std::vector<double> values(table.values().begin(), table.values().end());
  const std::size_t m = columns_.size();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::isnan(values[k])) values[k] = medians_[k % m];
  }
  return DataTable(table.name(), columns_, std::move(values),
                   std::vector<int>(table.labels().begin(), table.labels().end()));
}

DataTable impute_median(const DataTable& table) {
  return MedianImputer::fit(table).apply(table);
}

std::vector<std::string> constant_columns(const DataTable& table) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < table.n_cols(); ++j) {
    bool constant = true;
    for (std::size_t i = 1; i < table.n_rows() && constant; ++i) {
      constant = table.value(i, j) == table.value(0, j);
    }
    if (constant) out.push_back(table.column_names()[j]);
  }
  return out;
}

DataTable drop_columns(const DataTable& table, const std::vector<std::string>& names) {
  const std::set<std::string> drop(names.begin(), names.end());
  std::vector<std::string> keep;
  for (const auto& c : table.column_names()) {
    if (!drop.contains(c)) keep.push_back(c);
  }
  return table.select_columns(keep);
}

std::pair<DataTable, std::vector<std::string>> drop_constant_columns(
    const DataTable& table) {
  auto dropped = constant_columns(table);
  return {drop_columns(table, dropped), std::move(dropped)};
}

SplitIndices split_indices(std::span<const int> labels, const SplitOptions& options) {
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0) &&
      !options.test_counts) {
    throw Error(ErrorCode::kInvalidArgument, "test_fraction must be in (0, 1)");
  }
  Rng rng(options.seed);
  SplitIndices out;
  for (const int label : {kBenign, kPhishing}) {
    std::vector<std::size_t> rows = rows_with_label(labels, label);
    if (rows.size() < 2) {
      throw Error(ErrorCode::kDegenerateClass,
                  std::string(label == kPhishing ? "phishing" : "benign") +
                      " class has " + std::to_string(rows.size()) + " rows");
    }
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(rows.size()) * options.test_fraction));
    if (options.test_counts) {
      n_test = label == kPhishing ? options.test_counts->phishing
                                  : options.test_counts->benign;
      if (n_test >= rows.size()) {
        throw Error(ErrorCode::kInsufficientRows,
                    "requested test count exceeds class size");
      }
    }
    rng.shuffle(rows);
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitResult stratified_split(const DataTable& table, double test_fraction,
                             std::uint64_t seed) {
  return stratified_split(table, SplitOptions{test_fraction, seed, std::nullopt});
}

SplitResult stratified_split(const DataTable& table, const SplitOptions& options) {
  const SplitIndices idx = split_indices(table.labels(), options);
  return {table.select_rows(idx.train).renamed(table.name() + "_train"),
          table.select_rows(idx.test).renamed(table.name() + "_test"), options.seed};
}

DataTable smote(const DataTable& table, const SmoteOptions& options) {
  const std::size_t n_pos = table.count_label(kPhishing);
  const std::size_t n_neg = table.count_label(kBenign);
  if (n_pos == n_neg) return table;
  if (table.has_missing()) {
    throw Error(ErrorCode::kInvalidArgument, "SMOTE needs an imputed table");
  }
  if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "SMOTE k must be positive");
  const int minority_label = n_pos < n_neg ? kPhishing : kBenign;
  const std::vector<std::size_t> minority = rows_with_label(table.labels(), minority_label);
  const std::size_t n_min = minority.size();
  const std::size_t deficit = std::max(n_pos, n_neg) - n_min;
  if (n_min < options.k + 1) {
    throw Error(ErrorCode::kTooFewMinoritySamples,
                std::to_string(n_min) + " minority rows for k=" + std::to_string(options.k));
  }

  const std::size_t m = table.n_cols();
  std::vector<double> lo(m, std::numeric_limits<double>::infinity());
  std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      lo[j] = std::min(lo[j], table.value(i, j));
      hi[j] = std::max(hi[j], table.value(i, j));
    }
  }
  std::vector<double> scaled(n_min * m);
  for (std::size_t a = 0; a < n_min; ++a) {
    for (std::size_t j = 0; j < m; ++j) {
      const double range = hi[j] - lo[j];
      scaled[a * m + j] = range > 0.0 ? (table.value(minority[a], j) - lo[j]) / range : 0.0;
    }
  }

  // Draw every synthetic sample's (base, neighbour slot, step) up front so the
  // neighbour search only runs for bases that are actually used.
  Rng rng(options.seed);
  struct Draw {
    std::size_t base;
    std::size_t slot;
    double step;
  };
  std::vector<Draw> draws(deficit);
  for (auto& d : draws) {
    d.base = rng.uniform_index(n_min);
    d.slot = rng.uniform_index(options.k);
    d.step = rng.uniform01();
  }

  std::map<std::size_t, std::vector<std::size_t>> neighbours;
  std::vector<std::pair<double, std::size_t>> dist(n_min - 1);
  for (const auto& d : draws) {
    if (neighbours.contains(d.base)) continue;
    const double* x = &scaled[d.base * m];
    std::size_t w = 0;
    for (std::size_t b = 0; b < n_min; ++b) {
      if (b == d.base) continue;
      const double* y = &scaled[b * m];
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double diff = x[j] - y[j];
        s += diff * diff;
      }
      dist[w++] = {s, b};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(options.k),
                      dist.end());
    auto& nn = neighbours[d.base];
    for (std::size_t r = 0; r < options.k; ++r) nn.push_back(dist[r].second);
  }

  std::vector<bool> binary(m, false);
  if (options.round_binary) {
    for (std::size_t j = 0; j < m; ++j) binary[j] = is_binary_column(table, j);
  }

  std::vector<double> values(table.values().begin(), table.values().end());
  std::vector<int> labels(table.labels().begin(), table.labels().end());
  values.reserve(values.size() + deficit * m);
  for (const auto& d : draws) {
    const auto x = table.row(minority[d.base]);
    const auto y = table.row(minority[neighbours[d.base][d.slot]]);
    for (std::size_t j = 0; j < m; ++j) {
      double v = x[j] + d.step * (y[j] - x[j]);
      if (binary[j]) v = v < 0.5 ? 0.0 : 1.0;
      values.push_back(v);
    }
    labels.push_back(minority_label);
  }
  return DataTable(table.name(), table.column_names(), std::move(values), std::move(labels));
}

MergedSplit build_merged(const DataTable& d1_train, const DataTable& d2_train,
                         const DataTable& d1_test, const DataTable& d2_test,
                         std::size_t n_per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (const int label : {kPhishing, kBenign}) {
    const auto rows = rows_with_label(d1_train.labels(), label);
    if (rows.size() < n_per_class) {
      throw Error(ErrorCode::kInsufficientRows,
                  d1_train.name() + " has " + std::to_string(rows.size()) +
                      " rows of class " + std::to_string(label) + ", need " +
                      std::to_string(n_per_class));
    }
    for (const std::size_t k : rng.sample_without_replacement(rows.size(), n_per_class)) {
      picked.push_back(rows[k]);
    }
  }
  std::sort(picked.begin(), picked.end());
  return {DataTable::concat(d1_train.select_rows(picked), d2_train, "Dmerge_train"),
          DataTable::concat(d1_test, d2_test, "Dmerge_test")};
}

nlohmann::ordered_json table_manifest(const DataTable& table, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["name"] = table.name();
  j["seed"] = seed;
  j["rows"] = table.n_rows();
  j["phishing"] = table.count_label(kPhishing);
  j["benign"] = table.count_label(kBenign);
  j["columns"] = table.n_cols();
  return j;
}

nlohmann::ordered_json PreparedData::manifest() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  auto& tables = j["tables"] = nlohmann::ordered_json::array();
  for (const DataTable* t :
       {&d1_all_train, &d1_all_test, &d2_all_train, &d2_all_test, &d1_train_real,
        &d1_train, &d1_test, &d2_train_real, &d2_train, &d2_test, &merge_train,
        &merge_test}) {
    if (t->n_cols() == 0 && t->n_rows() == 0) continue;
    tables.push_back(table_manifest(*t, seed));
  }
  j["dropped_constants"] = {{"D1", d1_dropped_constants}, {"D2", d2_dropped_constants}};
  return j;
}

namespace {

struct PreparedSource {
  DataTable all_train, all_test, train_real, train, test;
  std::vector<std::string> dropped;
};

PreparedSource prepare_source(const DataTable& raw, const SchemaMapping& mapping,
                              DatasetSide side, const std::string& tag,
                              std::optional<ClassCounts> test_counts, bool apply_smote,
                              const PipelineConfig& config) {
  PreparedSource out;
  const DataTable common = align_schema(raw, mapping, side, FeatureSet::kCommon);
  const SplitIndices split = split_indices(
      raw.labels(), {config.test_fraction, derive_seed(config.seed, "split-" + tag),
                     test_counts});

  const auto imputer = MedianImputer::fit(common.select_rows(split.train));
  const DataTable common_imputed = imputer.apply(common);
  out.train_real = common_imputed.select_rows(split.train).renamed(tag + "_train_real");
  out.test = common_imputed.select_rows(split.test).renamed(tag + "_test");
  out.train = (apply_smote ? smote(out.train_real,
                                   {config.smote_k, derive_seed(config.seed, "smote-common-" + tag)})
                             : out.train_real)
                  .renamed(tag + "_train");

  if (config.build_all_features) {
    const DataTable all = align_schema(raw, mapping, side, FeatureSet::kAll);
    const auto all_imputer = MedianImputer::fit(all.select_rows(split.train));
    const DataTable all_imputed = all_imputer.apply(all);
    out.dropped = constant_columns(all_imputed.select_rows(split.train));
    const DataTable kept = drop_columns(all_imputed, out.dropped);
    DataTable all_train = kept.select_rows(split.train).renamed(tag + "_all_train");
    out.all_test = kept.select_rows(split.test).renamed(tag + "_all_test");
    out.all_train = apply_smote
                        ? smote(all_train, {config.smote_k,
                                            derive_seed(config.seed, "smote-all-" + tag)})
                        : std::move(all_train);
  }
  return out;
}

}  // namespace

PreparedData prepare_datasets(const DataTable& d1_raw, const DataTable& d2_raw,
                              const SchemaMapping& mapping,
                              const PipelineConfig& config) {
  PreparedSource d1 = prepare_source(d1_raw, mapping, DatasetSide::kD1, "D1",
                                     config.d1_test_counts, config.smote_d1, config);
  PreparedSource d2 = prepare_source(d2_raw, mapping, DatasetSide::kD2, "D2",
                                     config.d2_test_counts, config.smote_d2, config);
  PreparedData out;
  out.seed = config.seed;
  auto merged = build_merged(d1.train_real, d2.train_real, d1.test, d2.test,
                             config.merge_per_class, derive_seed(config.seed, "merge"));
  out.merge_train = std::move(merged.train);
  out.merge_test = std::move(merged.test);
  out.d1_all_train = std::move(d1.all_train);
  out.d1_all_test = std::move(d1.all_test);
  out.d2_all_train = std::move(d2.all_train);
  out.d2_all_test = std::move(d2.all_test);
  out.d1_train = std::move(d1.train);
  out.d1_test = std::move(d1.test);
  out.d2_train = std::move(d2.train);
  out.d2_test = std::move(d2.test);
  out.d1_train_real = std::move(d1.train_real);
  out.d2_train_real = std::move(d2.train_real);
  out.d1_dropped_constants = std::move(d1.dropped);
  out.d2_dropped_constants = std::move(d2.dropped);
  return out;
}

}  // namespace phishaudit
