#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishaudit/data_table.hpp"
#include "phishaudit/shap.hpp"
#include "phishaudit/url_features.hpp"

namespace phishaudit {

// Statistics of one feature within one class, over non-missing cells.
struct ClassStats {
  std::size_t n = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double stddev = 0.0;   // population
  double percent = 0.0;  // share of cells equal to 1, in [0, 100]
};

struct FeatureStats {
  std::string name;
  FeatureKind kind = FeatureKind::kCount;
  ClassStats phishing;
  ClassStats benign;
};

// Count and length features go to the mean table, binary features to the
// percentage table. Sums run over sorted values, so row order never changes
// a single bit of the output.
struct StatsReport {
  std::string dataset;
  std::vector<FeatureStats> means;
  std::vector<FeatureStats> percentages;

  const FeatureStats* find(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  void write_mean_csv(const std::string& path) const;
  void write_percentage_csv(const std::string& path) const;
};

// Throws Error(kSchemaMismatch) if a schema feature is not a column of t.
StatsReport feature_stats(const DataTable& t, const FeatureSchema& schema);

struct PercentageGap {
  std::string feature;
  double gap = 0.0;  // max over classes of |percent_a - percent_b|
};

// Binary feature whose per-class percentages differ most between reports.
PercentageGap largest_percentage_gap(const StatsReport& a, const StatsReport& b);

// ---------------------------------------------------------------------------
// SVG

inline constexpr const char* kPositiveColor = "#ff0051";
inline constexpr const char* kNegativeColor = "#008bfb";

std::string xml_escape(const std::string& text);

// Horizontal bars of mean |phi| for the top_n ranked features, red for a
// positive mean signed value and blue for a negative one.
std::string bar_svg(const GlobalImportance& g, std::size_t top_n = 30,
                    const std::string& title = "");
void render_bar_svg(const GlobalImportance& g, std::size_t top_n, const std::string& out_path,
                    const std::string& title = "");

// One strip per feature in the given order, points at x = phi with vertical
// jitter drawn from `seed`, colored from blue (low feature value) to red.
std::string beeswarm_svg(const std::vector<FeatureSummary>& d, std::uint64_t seed,
                         std::size_t max_features = 20, const std::string& title = "");
void render_beeswarm_svg(const std::vector<FeatureSummary>& d, std::uint64_t seed,
                         std::size_t max_features, const std::string& out_path,
                         const std::string& title = "");

// "#rrggbb" on the straight line from kNegativeColor (q = 0) to
// kPositiveColor (q = 1); q is clamped.
std::string quantile_color(double q);

}  // namespace phishaudit
