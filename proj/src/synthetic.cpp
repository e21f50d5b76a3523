#include "phishaudit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string_view>
#include <vector>

#include "phishaudit/error.hpp"
#include "phishaudit/rng.hpp"

namespace phishaudit {
namespace {

enum class Shape { kCount, kContinuous, kBinary };

// Benign mean (or P(1) for binaries) and phishing-minus-benign shift.
struct Coupling {
  double level;
  double effect;
};

struct CommonSpec {
  std::string_view name;
  Shape shape;
  Coupling d1, d2;
  double sd;
  bool resolved;  // external lookup; may be missing
};

// Reversed: qty_dot_url, domain_length, url_google_index, qty_slash_url,
// qty_redirects, tld_present_params, qty_hyphen_url, qty_underline_url,
// qty_tilde_url. Agreeing: length_url, qty_at_url.
constexpr CommonSpec kCommon[] = {
    {"qty_dot_url", Shape::kCount, {2.0, 1.5}, {2.5, -1.5}, 0.8, false},
    {"qty_equal_url", Shape::kCount, {0.2, 0.3}, {0.3, 0.2}, 0.5, false},
    {"domain_length", Shape::kCount, {14.0, 6.0}, {17.0, -6.0}, 4.0, false},
    {"url_google_index", Shape::kBinary, {0.10, 0.25}, {0.85, -0.60}, 0.0, true},
    {"qty_dollar_url", Shape::kCount, {0.0, 0.05}, {0.0, 0.05}, 0.2, false},
    {"qty_slash_url", Shape::kCount, {2.0, 2.0}, {3.0, -2.0}, 1.0, false},
    {"qty_redirects", Shape::kCount, {0.2, 0.8}, {1.0, -0.8}, 0.6, true},
    {"url_shortened", Shape::kBinary, {0.03, 0.05}, {0.04, 0.04}, 0.0, false},
    {"tld_present_params", Shape::kBinary, {0.05, 0.25}, {0.30, -0.25}, 0.0, false},
    {"qty_comma_url", Shape::kCount, {0.0, 0.05}, {0.0, 0.05}, 0.2, false},
    {"qty_hyphen_url", Shape::kCount, {0.5, 1.2}, {1.5, -1.2}, 0.8, false},
    {"qty_underline_url", Shape::kCount, {0.3, 0.8}, {1.0, -0.8}, 0.6, false},
    {"length_url", Shape::kCount, {35.0, 25.0}, {45.0, 25.0}, 12.0, false},
    {"qty_percent_url", Shape::kCount, {0.1, 0.2}, {0.1, 0.2}, 0.5, false},
    {"qty_asterisk_url", Shape::kCount, {0.0, 0.05}, {0.0, 0.05}, 0.2, false},
    {"qty_questionmark_url", Shape::kCount, {0.1, 0.3}, {0.1, 0.3}, 0.4, false},
    {"qty_tilde_url", Shape::kCount, {0.0, 0.3}, {0.4, -0.3}, 0.3, false},
    {"qty_at_url", Shape::kCount, {0.0, 0.4}, {0.0, 0.4}, 0.4, false},
    {"domain_in_ip", Shape::kBinary, {0.01, 0.04}, {0.02, 0.25}, 0.0, false},
    {"qty_and_url", Shape::kCount, {0.1, 0.3}, {0.2, 0.3}, 0.5, false},
};

struct UniqueSpec {
  std::string_view name;
  Shape shape;
  Coupling c;
  double sd;
  bool resolved;
};

constexpr UniqueSpec kD1Unique[] = {
    {"time_domain_activation", Shape::kContinuous, {3000.0, -2200.0}, 1200.0, true},
    {"asn_ip", Shape::kCount, {20000.0, -3000.0}, 9000.0, true},
    {"qty_ip_resolved", Shape::kCount, {1.5, -0.3}, 0.8, true},
    {"qty_nameservers", Shape::kCount, {3.0, -1.0}, 1.0, true},
    {"qty_mx_servers", Shape::kCount, {2.0, -1.0}, 1.0, true},
    {"ttl_hostname", Shape::kCount, {3000.0, -600.0}, 2000.0, true},
    {"time_response", Shape::kContinuous, {0.6, 0.3}, 0.4, true},
    {"tls_ssl_certificate", Shape::kBinary, {0.70, -0.30}, 0.0, true},
    {"domain_spf", Shape::kBinary, {0.60, -0.20}, 0.0, true},
    {"qty_dot_directory", Shape::kCount, {0.3, 0.6}, 0.6, false},
};

constexpr UniqueSpec kD2Unique[] = {
    {"page_rank", Shape::kCount, {4.0, -2.5}, 1.8, true},
    {"web_traffic", Shape::kCount, {50000.0, -35000.0}, 30000.0, true},
    {"domain_age", Shape::kContinuous, {5000.0, -3500.0}, 2500.0, true},
    {"dns_record", Shape::kBinary, {0.02, 0.08}, 0.0, true},
    {"nb_www", Shape::kCount, {0.8, -0.5}, 0.4, false},
    {"phish_hints", Shape::kCount, {0.1, 0.7}, 0.6, false},
    {"shortest_word_path", Shape::kCount, {3.0, -1.0}, 1.5, false},
    {"length_words_raw", Shape::kCount, {6.0, 4.0}, 3.0, false},
    {"nb_hyperlinks", Shape::kCount, {120.0, -70.0}, 60.0, false},
    {"login_form", Shape::kBinary, {0.05, 0.20}, 0.0, false},
};

constexpr std::string_view kD1Constant = "qty_slash_domain";
constexpr std::string_view kD2Constant = "submit_email";

double draw(Rng& rng, Shape shape, Coupling c, double sd, int label) {
  const double mean = c.level + (label == kPhishing ? c.effect : 0.0);
  switch (shape) {
    case Shape::kBinary:
      return rng.uniform01() < std::clamp(mean, 0.0, 1.0) ? 1.0 : 0.0;
    case Shape::kCount:
      return std::max(0.0, std::round(rng.normal(mean, sd)));
    case Shape::kContinuous:
      return std::max(0.0, rng.normal(mean, sd));
  }
  return 0.0;
}

std::vector<int> shuffled_labels(Rng& rng, std::size_t n, double phishing_fraction) {
  const auto n_phish = static_cast<std::size_t>(std::llround(static_cast<double>(n) * phishing_fraction));
  if (n_phish < 2 || n - std::min(n, n_phish) < 2) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic dataset needs two rows of each class");
  }
  std::vector<int> labels(n, kBenign);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_phish), kPhishing);
  rng.shuffle(labels);
  return labels;
}

DataTable generate_side(const SyntheticConfig& config, const SchemaMapping& mapping,
                        DatasetSide side) {
  const bool d1 = side == DatasetSide::kD1;
  Rng rng(derive_seed(config.seed, d1 ? "synthetic-d1" : "synthetic-d2"));
  const std::size_t n = d1 ? config.d1_rows : config.d2_rows;
  const auto labels =
      shuffled_labels(rng, n, d1 ? config.d1_phishing_fraction : config.d2_phishing_fraction);

  std::vector<std::string> columns;
  for (const auto& spec : kCommon) {
    const auto it = std::find_if(mapping.entries.begin(), mapping.entries.end(),
                                 [&](const auto& e) { return e.canonical_name == spec.name; });
    if (it == mapping.entries.end()) {
      throw Error(ErrorCode::kUnmappedColumn, "mapping lacks " + std::string(spec.name));
    }
    columns.push_back(mapping.source_name(*it, side));
  }
  const auto& unique = d1 ? kD1Unique : kD2Unique;
  for (const auto& spec : unique) columns.emplace_back(spec.name);
  columns.emplace_back(d1 ? kD1Constant : kD2Constant);

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values;
  values.reserve(n * columns.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    for (const auto& spec : kCommon) {
      const double v = draw(rng, spec.shape, d1 ? spec.d1 : spec.d2, spec.sd, y);
      const bool missing = spec.resolved && rng.uniform01() < config.missing_rate;
      values.push_back(missing ? kNaN : v);
    }
    for (const auto& spec : unique) {
      const double v = draw(rng, spec.shape, spec.c, spec.sd, y);
      const bool missing = spec.resolved && rng.uniform01() < config.missing_rate;
      values.push_back(missing ? kNaN : v);
    }
    values.push_back(0.0);
  }
  return DataTable(d1 ? "D1" : "D2", std::move(columns), std::move(values),
                   std::vector<int>(labels));
}

}  // namespace

SyntheticDatasets generate_synthetic(const SyntheticConfig& config, const SchemaMapping& mapping) {
  return {generate_side(config, mapping, DatasetSide::kD1),
          generate_side(config, mapping, DatasetSide::kD2)};
}

SyntheticFiles write_synthetic(const SyntheticDatasets& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  SyntheticFiles files{(std::filesystem::path(dir) / "d1.csv").string(),
                       (std::filesystem::path(dir) / "d2.csv").string()};
  data.d1.write_csv(files.d1_path, kD1LabelColumn, kD1PositiveLabel, "0");
  data.d2.write_csv(files.d2_path, kD2LabelColumn, kD2PositiveLabel, kD2NegativeLabel);
  return files;
}

}  // namespace phishaudit
