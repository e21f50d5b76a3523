#include "phishaudit/url_features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/paths.hpp"

namespace phishaudit {
namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
         c == '.';
}

bool is_label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-';
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Length of a valid "scheme://" prefix, or 0.
std::size_t scheme_prefix_length(std::string_view s) {
  const std::size_t sep = s.find("://");
  if (sep == std::string_view::npos || sep == 0) return 0;
  if (!std::isalpha(static_cast<unsigned char>(s[0]))) return 0;
  for (std::size_t i = 1; i < sep; ++i) {
    if (!is_scheme_char(s[i])) return 0;
  }
  return sep;
}

void split_host_port(std::string_view host, ParsedUrl& url) {
  std::size_t domain_end = host.size();
  if (!host.empty() && host.front() == '[') {
    const std::size_t close = host.find(']');
    if (close != std::string_view::npos) {
      domain_end = close + 1;
      if (domain_end < host.size() && host[domain_end] != ':') {
        // Garbage after the literal stays in the domain.
        domain_end = host.size();
      }
    }
  } else {
    const std::size_t colon = host.rfind(':');
    if (colon != std::string_view::npos) domain_end = colon;
  }
  url.domain = std::string(host.substr(0, domain_end));
  if (domain_end < host.size()) {
    url.has_port_separator = true;
    url.port_text = std::string(host.substr(domain_end + 1));
    int value = 0;
    const char* first = url.port_text.data();
    const char* last = first + url.port_text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (!url.port_text.empty() && ec == std::errc() && ptr == last &&
        value >= 0 && value <= 65535) {
      url.port = value;
    }
  }
}

bool parse_dotted_quad(std::string_view s) {
  int fields = 0;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = s.find('.', pos);
    if (end == std::string_view::npos) end = s.size();
    const std::string_view field = s.substr(pos, end - pos);
    if (field.empty() || field.size() > 3) return false;
    int value = 0;
    for (const char c : field) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
      value = value * 10 + (c - '0');
    }
    if (value > 255) return false;
    ++fields;
    if (end == s.size()) break;
    pos = end + 1;
  }
  return fields == 4;
}

bool is_bracketed_ipv6(std::string_view s) {
  if (s.size() < 3 || s.front() != '[' || s.back() != ']') return false;
  const std::string_view inner = s.substr(1, s.size() - 2);
  if (inner.find(':') == std::string_view::npos) return false;
  return std::all_of(inner.begin(), inner.end(), [](char c) {
    return std::isxdigit(static_cast<unsigned char>(c)) || c == ':' || c == '.';
  });
}

std::set<std::string> read_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto first = std::find_if_not(line.begin(), line.end(), is_space);
    const auto last = std::find_if_not(line.rbegin(), line.rend(), is_space).base();
    if (first >= last) continue;
    out.insert(to_lower(std::string_view(&*first, static_cast<std::size_t>(last - first))));
  }
  return out;
}

}  // namespace

std::string ParsedUrl::reconstruct() const {
  std::string out;
  if (has_scheme_separator) out += scheme + "://";
  if (has_userinfo) out += userinfo + "@";
  out += domain;
  if (has_port_separator) out += ":" + port_text;
  if (has_path_slash) {
    out += directory + "/";
  }
  out += file;
  if (has_query) out += "?" + params;
  return out;
}

ParsedUrl parse_url(std::string_view raw) {
  const auto first = std::find_if_not(raw.begin(), raw.end(), is_space);
  const auto last = std::find_if_not(raw.rbegin(), raw.rend(), is_space).base();
  if (first >= last) throw Error(ErrorCode::kEmptyUrl, "URL is empty");

  ParsedUrl url;
  url.raw.assign(first, last);
  std::string_view rest = url.raw;

  if (const std::size_t sep = scheme_prefix_length(rest); sep > 0) {
    url.scheme = std::string(rest.substr(0, sep));
    url.has_scheme_separator = true;
    rest.remove_prefix(sep + 3);
  }

  const std::size_t authority_end = std::min(rest.find_first_of("/?#"), rest.size());
  std::string_view authority = rest.substr(0, authority_end);
  rest.remove_prefix(authority_end);

  if (const std::size_t at = authority.rfind('@'); at != std::string_view::npos) {
    url.has_userinfo = true;
    url.userinfo = std::string(authority.substr(0, at));
    authority.remove_prefix(at + 1);
  }
  split_host_port(authority, url);

  std::string_view path = rest;
  if (const std::size_t q = rest.find('?'); q != std::string_view::npos) {
    path = rest.substr(0, q);
    url.has_query = true;
    url.params = std::string(rest.substr(q + 1));
  }
  if (const std::size_t slash = path.rfind('/'); slash != std::string_view::npos) {
    url.has_path_slash = true;
    url.directory = std::string(path.substr(0, slash));
    url.file = std::string(path.substr(slash + 1));
  } else {
    url.file = std::string(path);
  }
  return url;
}

std::size_t count_char(std::string_view raw, char ch) {
  return static_cast<std::size_t>(std::count(raw.begin(), raw.end(), ch));
}

LengthFeatures length_features(const ParsedUrl& url) {
  return {url.raw.size(), url.domain.size()};
}

int domain_in_ip(const ParsedUrl& url) {
  return parse_dotted_quad(url.domain) || is_bracketed_ipv6(url.domain) ? 1 : 0;
}

KnowledgeBase::KnowledgeBase(std::set<std::string> shorteners,
                             std::set<std::string> tlds) {
  for (const auto& s : shorteners) shorteners_.insert(to_lower(s));
  for (const auto& t : tlds) {
    std::string entry = to_lower(t);
    if (entry.empty()) continue;
    if (entry.front() != '.') entry.insert(entry.begin(), '.');
    tlds_.insert(std::move(entry));
  }
  if (shorteners_.empty() || tlds_.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "knowledge base needs non-empty shortener and TLD lists");
  }
}

KnowledgeBase KnowledgeBase::load(const std::string& shorteners_path,
                                  const std::string& tlds_path) {
  return KnowledgeBase(read_list(shorteners_path), read_list(tlds_path));
}

KnowledgeBase KnowledgeBase::load_default() {
  const std::string dir = data_dir();
  return load(dir + "/shorteners.txt", dir + "/tlds.txt");
}

int url_shortened(const ParsedUrl& url, const KnowledgeBase& kb) {
  std::string domain = to_lower(url.domain);
  while (!domain.empty() && domain.back() == '.') domain.pop_back();
  if (domain.empty()) return 0;
  if (kb.shorteners().contains(domain)) return 1;
  // Registered-domain match: any proper suffix starting after a dot.
  for (std::size_t dot = domain.find('.'); dot != std::string::npos;
       dot = domain.find('.', dot + 1)) {
    if (kb.shorteners().contains(domain.substr(dot + 1))) return 1;
  }
  return 0;
}

int tld_present_params(const ParsedUrl& url, const KnowledgeBase& kb) {
  if (url.params.empty()) return 0;
  const std::string params = to_lower(url.params);
  constexpr std::string_view kTerminators = "/&=?:";
  for (std::size_t dot = params.find('.'); dot != std::string::npos;
       dot = params.find('.', dot + 1)) {
    if (dot == 0 || !is_label_char(params[dot - 1])) continue;
    // Candidate TLD runs from the dot to the next terminator or end.
    std::size_t end = dot + 1;
    while (end < params.size() && kTerminators.find(params[end]) == std::string_view::npos) {
      ++end;
    }
    // ".co.uk/" is tried as ".co.uk" here and as ".uk" at the next dot.
    if (kb.tlds().contains(params.substr(dot, end - dot))) return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

const FeatureSchema& FeatureSchema::common() {
  using K = FeatureKind;
  static const FeatureSchema schema({{
      {"f1", "qty_dot_url", K::kCount, "Number of '.' characters in URL"},
      {"f2", "qty_equal_url", K::kCount, "Number of '=' characters in URL"},
      {"f3", "domain_length", K::kLength, "Length of the domain name string"},
      {"f4", "url_google_index", K::kBinary, "If the URL is indexed by Google"},
      {"f5", "qty_dollar_url", K::kCount, "Number of '$' characters in URL"},
      {"f6", "qty_slash_url", K::kCount, "Number of '/' characters in URL"},
      {"f7", "qty_redirects", K::kCount, "Number of redirects for landing page"},
      {"f8", "url_shortened", K::kBinary, "If the URL is shortened"},
      {"f9", "tld_present_params", K::kBinary, "If TLD present in the parameters of URL"},
      {"f10", "qty_comma_url", K::kCount, "Number of ',' characters in URL"},
      {"f11", "qty_hyphen_url", K::kCount, "Number of '-' characters in URL"},
      {"f12", "qty_underline_url", K::kCount, "Number of '_' characters in URL"},
      {"f13", "length_url", K::kLength, "Length of entire URL"},
      {"f14", "qty_percent_url", K::kCount, "Number of '%' characters in URL"},
      {"f15", "qty_asterisk_url", K::kCount, "Number of '*' characters in URL"},
      {"f16", "qty_questionmark_url", K::kCount, "Number of '?' characters in URL"},
      {"f17", "qty_tilde_url", K::kCount, "Number of '~' characters in URL"},
      {"f18", "qty_at_url", K::kCount, "Number of '@' characters in URL"},
      {"f19", "domain_in_ip", K::kBinary, "If the domain is an IP address"},
      {"f20", "qty_and_url", K::kCount, "Number of '&' characters in URL"},
  }});
  return schema;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.emplace_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

const FeatureDef* FeatureSchema::find(std::string_view name) const {
  const auto index = index_of(name);
  return index ? &features_[*index] : nullptr;
}

std::string_view feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kCount: return "count";
    case FeatureKind::kLength: return "length";
    case FeatureKind::kBinary: return "binary";
  }
  return "count";
}

// ---------------------------------------------------------------------------

FixtureResolver FixtureResolver::load(const std::string& path, Fallback fallback) {
  const auto records = csv::read_file(path);
  if (records.empty()) throw Error(ErrorCode::kEmptyFile, path);
  const csv::Record expected = {"url", "url_google_index", "qty_redirects"};
  if (records.front() != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                path + ": expected header url,url_google_index,qty_redirects");
  }
  auto parse_int = [&](const std::string& cell) -> std::optional<int> {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      return std::nullopt;
    }
    return value;
  };
  std::map<std::string, ExternalValues> table;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() != 3) {
      throw Error(ErrorCode::kInvalidArgument,
                  path + ": row " + std::to_string(i) + " has " +
                      std::to_string(r.size()) + " fields");
    }
    table[r[0]] = {parse_int(r[1]), parse_int(r[2])};
  }
  return FixtureResolver(std::move(table), fallback);
}

ExternalValues FixtureResolver::resolve(std::string_view raw) const {
  if (const auto it = table_.find(std::string(raw)); it != table_.end()) {
    return it->second;
  }
  if (fallback_ == Fallback::kMissing) return {};
  throw Error(ErrorCode::kResolverUnavailable,
              "no fixture entry for " + std::string(raw));
}

ExternalValues LiveResolver::resolve(std::string_view raw) const {
  throw Error(ErrorCode::kResolverUnavailable,
              "live resolution is not available offline: " + std::string(raw));
}

ExternalValues resolve_external(std::string_view raw,
                                const ExternalResolver& resolver) {
  return resolver.resolve(raw);
}

std::vector<double> FeatureVector::ordered() const {
  std::vector<double> out;
  out.reserve(kCommonFeatureCount);
  for (const auto& f : FeatureSchema::common().features()) {
    const auto it = values.find(std::string(f.name));
    out.push_back(it == values.end() ? std::numeric_limits<double>::quiet_NaN()
                                     : it->second);
  }
  return out;
}

FeatureVector extract_all(std::string_view raw, const KnowledgeBase& kb,
                          const ExternalResolver& resolver) {
  const ParsedUrl url = parse_url(raw);
  const std::string_view text = url.raw;
  const auto lengths = length_features(url);
  const ExternalValues external = resolve_external(text, resolver);
  constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  FeatureVector fv;
  auto set = [&fv](std::string_view name, double value,
                   Provenance p = Provenance::kComputed) {
    fv.values[std::string(name)] = value;
    fv.provenance[std::string(name)] = p;
  };
  auto count = [&](std::string_view name, char ch) {
    set(name, static_cast<double>(count_char(text, ch)));
  };
  count("qty_dot_url", '.');
  count("qty_equal_url", '=');
  set("domain_length", static_cast<double>(lengths.domain_length));
  set("url_google_index",
      external.url_google_index ? *external.url_google_index : kMissing,
      Provenance::kResolved);
  count("qty_dollar_url", '$');
  count("qty_slash_url", '/');
  set("qty_redirects", external.qty_redirects ? *external.qty_redirects : kMissing,
      Provenance::kResolved);
  set("url_shortened", url_shortened(url, kb));
  set("tld_present_params", tld_present_params(url, kb));
  count("qty_comma_url", ',');
  count("qty_hyphen_url", '-');
  count("qty_underline_url", '_');
  set("length_url", static_cast<double>(lengths.length_url));
  count("qty_percent_url", '%');
  count("qty_asterisk_url", '*');
  count("qty_questionmark_url", '?');
  count("qty_tilde_url", '~');
  count("qty_at_url", '@');
  set("domain_in_ip", domain_in_ip(url));
  count("qty_and_url", '&');
  return fv;
}

}  // namespace phishaudit
