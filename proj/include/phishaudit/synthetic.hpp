#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "phishaudit/data_table.hpp"
#include "phishaudit/pipeline.hpp"

namespace phishaudit {

// Two class-conditional Gaussian "datasets" in the native column layouts of
// the two public sources. Over the common features, nine couplings point in
// opposite directions in the two sets (qty_dot_url, domain_length,
// url_google_index, qty_slash_url, qty_redirects, tld_present_params,
// qty_hyphen_url, qty_underline_url, qty_tilde_url), length_url and
// qty_at_url agree, and the rest carry little signal. Each set adds ten
// informative source-specific columns and one constant column.
struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t d1_rows = 3000;
  std::size_t d2_rows = 2000;
  double d1_phishing_fraction = 1.0 / 3.0;
  double d2_phishing_fraction = 0.35;
  // Per-cell probability that an externally resolved value is missing.
  double missing_rate = 0.01;
};

struct SyntheticDatasets {
  DataTable d1;  // native D1 column names
  DataTable d2;  // native D2 column names
};

inline constexpr const char* kD1LabelColumn = "phishing";
inline constexpr const char* kD1PositiveLabel = "1";
inline constexpr const char* kD2LabelColumn = "status";
inline constexpr const char* kD2PositiveLabel = "phishing";
inline constexpr const char* kD2NegativeLabel = "legitimate";

SyntheticDatasets generate_synthetic(const SyntheticConfig& config, const SchemaMapping& mapping);

struct SyntheticFiles {
  std::string d1_path;
  std::string d2_path;
};

// Writes <dir>/d1.csv and <dir>/d2.csv with each source's label convention.
SyntheticFiles write_synthetic(const SyntheticDatasets& data, const std::string& dir);

}  // namespace phishaudit
