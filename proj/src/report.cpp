#include "phishaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/rng.hpp"

namespace phishaudit {
namespace {

ClassStats class_stats(std::vector<double> v) {
  ClassStats s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  s.min = v.front();
  s.max = v.back();
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  double ss = 0.0;
  for (const double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / n);
  s.percent = 100.0 * static_cast<double>(std::count(v.begin(), v.end(), 1.0)) / n;
  return s;
}

nlohmann::ordered_json class_json(const ClassStats& s, bool with_percent) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  if (with_percent) j["percent"] = s.percent;
  j["mean"] = s.mean;
  j["min"] = s.min;
  j["max"] = s.max;
  j["median"] = s.median;
  j["stddev"] = s.stddev;
  return j;
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

// Fixed-point text without a "-0" artefact.
std::string num(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string signed_num(double v, int precision) {
  const std::string s = num(v, precision);
  return s.front() == '-' ? s : "+" + s;
}

void svg_open(std::ostringstream& out, double width, double height, const std::string& title) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width, 0) << "\" height=\""
      << num(height, 0) << "\" viewBox=\"0 0 " << num(width, 0) << ' ' << num(height, 0)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width, 0) << "\" height=\"" << num(height, 0)
      << "\" fill=\"#ffffff\"/>\n";
  if (!title.empty()) {
    out << "<text x=\"" << num(width / 2, 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-size=\"14\">" << xml_escape(title) << "</text>\n";
  }
}

constexpr double kLabelWidth = 230.0;
constexpr double kTop = 40.0;

}  // namespace

const FeatureStats* StatsReport::find(const std::string& name) const {
  for (const auto* table : {&means, &percentages}) {
    for (const auto& f : *table) {
      if (f.name == name) return &f;
    }
  }
  return nullptr;
}

nlohmann::ordered_json StatsReport::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["means"] = nlohmann::ordered_json::array();
  for (const auto& f : means) {
    j["means"].push_back({{"feature", f.name},
                          {"kind", std::string(feature_kind_name(f.kind))},
                          {"phishing", class_json(f.phishing, false)},
                          {"benign", class_json(f.benign, false)}});
  }
  j["percentages"] = nlohmann::ordered_json::array();
  for (const auto& f : percentages) {
    j["percentages"].push_back({{"feature", f.name},
                                {"kind", std::string(feature_kind_name(f.kind))},
                                {"phishing", class_json(f.phishing, true)},
                                {"benign", class_json(f.benign, true)}});
  }
  return j;
}

void StatsReport::write_mean_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  csv::write_record(out, {"dataset", "feature", "kind", "class", "n", "mean", "min", "max",
                          "median", "stddev"});
  for (const auto& f : means) {
    for (const auto& [cls, s] : {std::pair{"phishing", &f.phishing}, {"benign", &f.benign}}) {
      csv::write_record(out, {dataset, f.name, std::string(feature_kind_name(f.kind)), cls,
                              std::to_string(s->n), csv::format_double(s->mean),
                              csv::format_double(s->min), csv::format_double(s->max),
                              csv::format_double(s->median), csv::format_double(s->stddev)});
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

void StatsReport::write_percentage_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  csv::write_record(out, {"dataset", "feature", "class", "n", "percent"});
  for (const auto& f : percentages) {
    for (const auto& [cls, s] : {std::pair{"phishing", &f.phishing}, {"benign", &f.benign}}) {
      csv::write_record(out, {dataset, f.name, cls, std::to_string(s->n),
                              csv::format_double(s->percent)});
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

StatsReport feature_stats(const DataTable& t, const FeatureSchema& schema) {
  StatsReport r;
  r.dataset = t.name();
  for (const auto& def : schema.features()) {
    const auto col = t.column_index(def.name);
    if (!col) {
      throw Error(ErrorCode::kSchemaMismatch,
                  t.name() + " lacks feature " + std::string(def.name));
    }
    std::vector<double> phishing, benign;
    for (std::size_t i = 0; i < t.n_rows(); ++i) {
      const double v = t.value(i, *col);
      if (std::isnan(v)) continue;
      (t.label(i) == kPhishing ? phishing : benign).push_back(v);
    }
    FeatureStats f{std::string(def.name), def.kind, class_stats(std::move(phishing)),
                   class_stats(std::move(benign))};
    (def.kind == FeatureKind::kBinary ? r.percentages : r.means).push_back(std::move(f));
  }
  return r;
}

PercentageGap largest_percentage_gap(const StatsReport& a, const StatsReport& b) {
  PercentageGap best;
  best.gap = -1.0;
  for (const auto& fa : a.percentages) {
    const FeatureStats* fb = b.find(fa.name);
    if (fb == nullptr) continue;
    const double gap = std::max(std::abs(fa.phishing.percent - fb->phishing.percent),
                                std::abs(fa.benign.percent - fb->benign.percent));
    if (gap > best.gap) best = {fa.name, gap};
  }
  if (best.gap < 0.0) {
    throw Error(ErrorCode::kEmptyIntersection, "no shared binary feature");
  }
  return best;
}

// ---------------------------------------------------------------------------

std::string xml_escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string quantile_color(double q) {
  if (std::isnan(q)) return "#999999";
  q = std::clamp(q, 0.0, 1.0);
  const int lo[3] = {0x00, 0x8b, 0xfb};
  const int hi[3] = {0xff, 0x00, 0x51};
  char buf[8];
  int c[3];
  for (int k = 0; k < 3; ++k) {
    c[k] = static_cast<int>(std::lround(lo[k] + q * (hi[k] - lo[k])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string bar_svg(const GlobalImportance& g, std::size_t top_n, const std::string& title) {
  if (g.features.empty()) throw Error(ErrorCode::kInvalidArgument, "no features to plot");
  const std::size_t n = std::min(top_n, g.features.size());
  constexpr double kRow = 24.0, kBarMax = 400.0, kWidth = 800.0;
  const double height = kTop + kRow * static_cast<double>(n) + 40.0;
  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) vmax = std::max(vmax, g.features[i].mean_abs);

  std::ostringstream out;
  svg_open(out, kWidth, height, title);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = g.features[i];
    const double y = kTop + kRow * static_cast<double>(i);
    const double w = vmax > 0.0 ? kBarMax * f.mean_abs / vmax : 0.0;
    out << "<text x=\"" << num(kLabelWidth - 8, 2) << "\" y=\"" << num(y + 16, 2)
        << "\" text-anchor=\"end\">" << xml_escape(f.name) << "</text>\n"
        << "<rect class=\"bar\" x=\"" << num(kLabelWidth, 2) << "\" y=\"" << num(y + 4, 2)
        << "\" width=\"" << num(w, 2) << "\" height=\"16\" fill=\""
        << (f.positive ? kPositiveColor : kNegativeColor) << "\"/>\n"
        << "<text x=\"" << num(kLabelWidth + w + 6, 2) << "\" y=\"" << num(y + 16, 2) << "\">"
        << num(f.mean_abs, 4) << " (" << signed_num(f.mean_signed, 4) << ")</text>\n";
  }
  const double axis_y = kTop + kRow * static_cast<double>(n) + 4;
  out << "<line x1=\"" << num(kLabelWidth, 2) << "\" y1=\"" << num(kTop, 2) << "\" x2=\""
      << num(kLabelWidth, 2) << "\" y2=\"" << num(axis_y, 2) << "\" stroke=\"#333333\"/>\n"
      << "<text x=\"" << num(kLabelWidth + kBarMax / 2, 2) << "\" y=\"" << num(axis_y + 24, 2)
      << "\" text-anchor=\"middle\">mean |SHAP value| (log-odds)</text>\n"
      << "</svg>\n";
  return out.str();
}

void render_bar_svg(const GlobalImportance& g, std::size_t top_n, const std::string& out_path,
                    const std::string& title) {
  write_text(bar_svg(g, top_n, title), out_path);
}

std::string beeswarm_svg(const std::vector<FeatureSummary>& d, std::uint64_t seed,
                         std::size_t max_features, const std::string& title) {
  if (d.empty()) throw Error(ErrorCode::kInvalidArgument, "no features to plot");
  const std::size_t n = std::min(max_features, d.size());
  constexpr double kRow = 28.0, kPlot = 480.0, kWidth = 800.0;
  const double height = kTop + kRow * static_cast<double>(n) + 60.0;
  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : d[i].points) vmax = std::max(vmax, std::abs(p.shap_value));
  }
  if (vmax == 0.0) vmax = 1.0;
  const double zero_x = kLabelWidth + kPlot / 2;
  const auto x_of = [&](double phi) { return zero_x + phi / vmax * (kPlot / 2 - 6); };

  std::ostringstream out;
  svg_open(out, kWidth, height, title);
  const double bottom = kTop + kRow * static_cast<double>(n);
  out << "<line class=\"zero\" x1=\"" << num(zero_x, 2) << "\" y1=\"" << num(kTop, 2)
      << "\" x2=\"" << num(zero_x, 2) << "\" y2=\"" << num(bottom, 2)
      << "\" stroke=\"#999999\"/>\n";
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double mid = kTop + kRow * (static_cast<double>(i) + 0.5);
    out << "<text x=\"" << num(kLabelWidth - 8, 2) << "\" y=\"" << num(mid + 4, 2)
        << "\" text-anchor=\"end\">" << xml_escape(d[i].name) << "</text>\n";
    for (const auto& p : d[i].points) {
      const double dy = (rng.uniform01() - 0.5) * (kRow - 10);
      out << "<circle cx=\"" << num(x_of(p.shap_value), 2) << "\" cy=\"" << num(mid + dy, 2)
          << "\" r=\"2.5\" fill=\"" << quantile_color(p.value_quantile)
          << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  out << "<line x1=\"" << num(kLabelWidth, 2) << "\" y1=\"" << num(bottom, 2) << "\" x2=\""
      << num(kLabelWidth + kPlot, 2) << "\" y2=\"" << num(bottom, 2)
      << "\" stroke=\"#333333\"/>\n";
  for (const double t : {-vmax, 0.0, vmax}) {
    out << "<text x=\"" << num(x_of(t), 2) << "\" y=\"" << num(bottom + 16, 2)
        << "\" text-anchor=\"middle\">" << num(t, 3) << "</text>\n";
  }
  out << "<text x=\"" << num(zero_x, 2) << "\" y=\"" << num(bottom + 36, 2)
      << "\" text-anchor=\"middle\">SHAP value (log-odds)</text>\n"
      << "<text x=\"" << num(kLabelWidth + kPlot + 20, 2) << "\" y=\"" << num(kTop + 10, 2)
      << "\" fill=\"" << kPositiveColor << "\">high value</text>\n"
      << "<text x=\"" << num(kLabelWidth + kPlot + 20, 2) << "\" y=\"" << num(kTop + 26, 2)
      << "\" fill=\"" << kNegativeColor << "\">low value</text>\n"
      << "</svg>\n";
  return out.str();
}

void render_beeswarm_svg(const std::vector<FeatureSummary>& d, std::uint64_t seed,
                         std::size_t max_features, const std::string& out_path,
                         const std::string& title) {
  write_text(beeswarm_svg(d, seed, max_features, title), out_path);
}

}  // namespace phishaudit
