#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishaudit/data_table.hpp"
#include "phishaudit/tree_model.hpp"

namespace phishaudit {

// Reference rows that stand in for "absent" features.
class BackgroundSet {
 public:
  BackgroundSet(std::vector<std::string> feature_names, std::vector<double> rows,
                std::uint64_t seed);

  // Seeded uniform sample of `size` distinct rows, kept in table order; the
  // whole table when size >= n_rows.
  static BackgroundSet sample(const DataTable& train, std::size_t size, std::uint64_t seed);
  static BackgroundSet from_table(const DataTable& table);

  const std::vector<std::string>& feature_names() const { return names_; }
  std::size_t size() const { return rows_.size() / names_.size(); }
  std::size_t n_cols() const { return names_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {rows_.data() + i * names_.size(), names_.size()};
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> rows_;
  std::uint64_t seed_ = 0;
};

// Attributions in margin units. Row i: sum_j value(i, j) + base_value = margin(x_i).
struct ShapMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::size_t> instance_ids;
  std::vector<double> values;  // row-major n x m
  double base_value = 0.0;

  std::size_t n_rows() const { return instance_ids.size(); }
  std::size_t n_cols() const { return feature_names.size(); }
  double value(std::size_t i, std::size_t j) const { return values[i * n_cols() + j]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_cols(), n_cols()};
  }
};

// Mean margin over the background rows.
double expected_margin(const TreeEnsembleModel& model, const BackgroundSet& bg);

inline constexpr std::size_t kMaxBruteForceFeatures = 12;

// Interventional Shapley values by enumerating every feature subset, with
// v(S) = mean over background rows b of margin(x on S, b elsewhere).
// Throws Error(kTooManyFeatures) above kMaxBruteForceFeatures.
std::vector<double> shap_brute_force(const TreeEnsembleModel& model, std::span<const double> x,
                                     const BackgroundSet& bg);

// The same values computed per (instance, background row, tree) by walking
// only the paths on which x and the background row disagree.
std::vector<double> tree_shap_row(const TreeEnsembleModel& model, std::span<const double> x,
                                  const BackgroundSet& bg);

// Throws Error(kSchemaMismatch) unless X and bg both match the model's
// feature names. instance_ids default to 0..n-1.
ShapMatrix tree_shap(const TreeEnsembleModel& model, const DataTable& x, const BackgroundSet& bg,
                     std::size_t threads = 0,
                     std::optional<std::vector<std::size_t>> instance_ids = std::nullopt);

// max_i |sum_j phi_ij + base - margin(x_i)|.
double local_accuracy_error(const TreeEnsembleModel& model, const DataTable& x,
                            const ShapMatrix& shap);

void write_shap_csv(const ShapMatrix& shap, const std::string& path);
nlohmann::ordered_json shap_header(const ShapMatrix& shap, std::uint64_t seed,
                                   std::size_t background_size);

// ---------------------------------------------------------------------------
// Aggregates

struct FeatureImportance {
  std::string name;
  double mean_abs = 0.0;
  double mean_signed = 0.0;
  std::size_t rank = 0;  // 1 = largest mean_abs
  bool positive = true;  // mean_signed >= 0
};

struct GlobalImportance {
  std::vector<FeatureImportance> features;  // in rank order
  std::size_t n_instances = 0;

  const FeatureImportance* find(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  static GlobalImportance from_json(const nlohmann::json& j);
};

// Ranks by mean_abs descending, ties by feature name ascending.
GlobalImportance global_importance(const ShapMatrix& shap);

struct SummaryPoint {
  double feature_value = 0.0;
  double shap_value = 0.0;
  double value_quantile = 0.0;  // (midrank - 0.5) / n among explained rows
};

struct FeatureSummary {
  std::string name;
  std::size_t rank = 0;
  std::vector<SummaryPoint> points;  // one per explained row, row order
};

// Features in global rank order. X must be row-aligned with shap.
std::vector<FeatureSummary> summary_data(const ShapMatrix& shap, const DataTable& x);

struct DivergenceReport {
  std::string experiment_a, experiment_b;
  std::vector<std::string> shared_features;  // in a's rank order
  std::vector<std::string> only_in_a, only_in_b;
  double kendall_tau = 1.0;
  double spearman_rho = 1.0;
  std::vector<std::string> sign_flips;  // in a's rank order
  std::size_t k = 0;
  double topk_jaccard = 1.0;

  nlohmann::ordered_json to_json() const;
};

// Rank statistics over the shared features after re-ranking each side within
// the shared set. k is clamped to the shared feature count. Throws
// Error(kEmptyIntersection) when no feature is shared.
DivergenceReport compare_rankings(const GlobalImportance& a, const GlobalImportance& b,
                                  std::size_t k = 10);

}  // namespace phishaudit
