#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace phishaudit {

// Decomposition of a raw URL into the parts dataset annotators count over:
//
//   scheme://userinfo@domain:port/directory/file?params
//
// Every part is a verbatim substring of `raw`, so reconstruct() returns the
// original text. Malformed input degrades to best-effort parts instead of
// failing.
struct ParsedUrl {
  std::string raw;
  std::string scheme;
  std::string userinfo;
  std::string domain;
  std::optional<int> port;
  std::string port_text;
  std::string directory;
  std::string file;
  std::string params;

  // Delimiters present in raw; needed to rebuild it exactly.
  bool has_scheme_separator = false;
  bool has_userinfo = false;
  bool has_port_separator = false;
  bool has_path_slash = false;
  bool has_query = false;

  std::string reconstruct() const;
};

// Throws Error(kEmptyUrl) when raw is empty or whitespace only. Leading and
// trailing whitespace is trimmed before decomposition.
ParsedUrl parse_url(std::string_view raw);

std::size_t count_char(std::string_view raw, char ch);

struct LengthFeatures {
  std::size_t length_url = 0;
  std::size_t domain_length = 0;
};
LengthFeatures length_features(const ParsedUrl& url);

// Dotted-quad IPv4 (four decimal fields, each 0-255) or a bracketed IPv6
// literal. Hex or single-integer host encodings are not recognised.
int domain_in_ip(const ParsedUrl& url);

// Shortener domains and top-level domains used by the two list-driven flags.
class KnowledgeBase {
 public:
  KnowledgeBase(std::set<std::string> shorteners, std::set<std::string> tlds);

  // Newline-delimited files; '#' starts a comment, blank lines are ignored.
  static KnowledgeBase load(const std::string& shorteners_path,
                            const std::string& tlds_path);
  // The snapshot shipped in data/ (path fixed at build time).
  static KnowledgeBase load_default();

  const std::set<std::string>& shorteners() const { return shorteners_; }
  const std::set<std::string>& tlds() const { return tlds_; }

 private:
  std::set<std::string> shorteners_;
  std::set<std::string> tlds_;
};

int url_shortened(const ParsedUrl& url, const KnowledgeBase& kb);

// 1 iff a TLD from kb occurs in the query string right after a domain label
// character ([a-z0-9-]) and is followed by end of string or one of "/&=?:".
int tld_present_params(const ParsedUrl& url, const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Feature schema

enum class FeatureKind { kCount, kLength, kBinary };

struct FeatureDef {
  std::string_view id;    // f1 ... f20
  std::string_view name;  // canonical column name
  FeatureKind kind;
  std::string_view definition;
};

inline constexpr std::size_t kCommonFeatureCount = 20;

class FeatureSchema {
 public:
  static const FeatureSchema& common();

  const std::array<FeatureDef, kCommonFeatureCount>& features() const {
    return features_;
  }
  std::size_t size() const { return features_.size(); }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  const FeatureDef* find(std::string_view name) const;

 private:
  explicit FeatureSchema(std::array<FeatureDef, kCommonFeatureCount> features)
      : features_(features) {}
  std::array<FeatureDef, kCommonFeatureCount> features_;
};

std::string_view feature_kind_name(FeatureKind kind);

// ---------------------------------------------------------------------------
// External (non-lexical) features: Google indexing and redirect count.

enum class Provenance { kComputed, kResolved, kDataset };

struct ExternalValues {
  std::optional<int> url_google_index;
  std::optional<int> qty_redirects;
};

class ExternalResolver {
 public:
  virtual ~ExternalResolver() = default;
  virtual ExternalValues resolve(std::string_view raw) const = 0;
};

// Always returns missing values; the pipeline median-imputes them later.
class NullResolver final : public ExternalResolver {
 public:
  ExternalValues resolve(std::string_view) const override { return {}; }
};

// Looks values up in a CSV with header url,url_google_index,qty_redirects.
class FixtureResolver final : public ExternalResolver {
 public:
  enum class Fallback { kError, kMissing };

  explicit FixtureResolver(std::map<std::string, ExternalValues> table,
                           Fallback fallback = Fallback::kError)
      : table_(std::move(table)), fallback_(fallback) {}

  static FixtureResolver load(const std::string& path,
                              Fallback fallback = Fallback::kError);

  // Throws Error(kResolverUnavailable) on a miss when fallback is kError.
  ExternalValues resolve(std::string_view raw) const override;

 private:
  std::map<std::string, ExternalValues> table_;
  Fallback fallback_;
};

// Placeholder for live lookups (search-engine index, redirect following).
// Reproducible runs never use it; resolve() always throws.
class LiveResolver final : public ExternalResolver {
 public:
  ExternalValues resolve(std::string_view raw) const override;
};

ExternalValues resolve_external(std::string_view raw,
                                const ExternalResolver& resolver);

// Feature values keyed by canonical name. Missing values are NaN.
struct FeatureVector {
  std::map<std::string, double> values;
  std::map<std::string, Provenance> provenance;

  // Values in FeatureSchema::common() order.
  std::vector<double> ordered() const;
};

FeatureVector extract_all(std::string_view raw, const KnowledgeBase& kb,
                          const ExternalResolver& resolver);

}  // namespace phishaudit
