#include "phishaudit/shap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/parallel.hpp"
#include "phishaudit/rng.hpp"

namespace phishaudit {
namespace {

constexpr std::size_t kWeightTableSize = 160;

// coalition_weight(s, n) = s! (n - s - 1)! / n!, for 0 <= s < n.
double coalition_weight(std::size_t s, std::size_t n) {
  static const std::vector<double> table = [] {
    std::vector<double> f(kWeightTableSize + 1, 1.0);
    for (std::size_t i = 1; i <= kWeightTableSize; ++i) f[i] = f[i - 1] * static_cast<double>(i);
    std::vector<double> w(kWeightTableSize * kWeightTableSize, 0.0);
    for (std::size_t nn = 1; nn < kWeightTableSize; ++nn) {
      for (std::size_t ss = 0; ss < nn; ++ss) {
        w[nn * kWeightTableSize + ss] = f[ss] * f[nn - ss - 1] / f[nn];
      }
    }
    return w;
  }();
  if (n < kWeightTableSize) return table[n * kWeightTableSize + s];
  return std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                  std::lgamma(static_cast<double>(n - s)) -
                  std::lgamma(static_cast<double>(n) + 1.0));
}

// Per-tree view: global feature index -> slot among the tree's distinct features.
struct TreeIndex {
  std::vector<int> slot_of;
  std::vector<std::size_t> features;
};

TreeIndex index_tree(const DecisionTree& tree, std::size_t m) {
  TreeIndex idx;
  idx.slot_of.assign(m, -1);
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) continue;
    const auto f = static_cast<std::size_t>(n.feature);
    if (idx.slot_of[f] < 0) {
      idx.slot_of[f] = static_cast<int>(idx.features.size());
      idx.features.push_back(f);
    }
  }
  return idx;
}

bool goes_left(const TreeNode& n, double v) {
  return std::isnan(v) ? n.default_left : v < n.threshold;
}

enum : unsigned char { kNone = 0, kFromX = 1, kFromZ = 2 };

// One (instance, background row, tree) walk. A feature joins the x-side set
// when the walk follows x at a node where x and z disagree, the z-side set
// when it follows z; a feature already assigned keeps its side. A leaf
// reached with s x-side and t z-side features adds W(s-1, s+t) * v to each
// x-side feature and subtracts W(s, s+t) * v from each z-side feature.
class PathWalker {
 public:
  PathWalker(const DecisionTree& tree, const TreeIndex& index, double weight,
             std::span<const double> x, std::span<const double> z, std::span<double> phi)
      : tree_(tree), index_(index), weight_(weight), x_(x), z_(z), phi_(phi),
        side_(index.features.size(), kNone) {}

  void run() { visit(0, 0, 0); }

 private:
  struct Sums {
    double pos = 0.0;  // sum over leaves below of W(s-1, n) * v
    double neg = 0.0;  // sum over leaves below of W(s, n) * v
  };

  Sums visit(std::size_t id, std::size_t s, std::size_t t) {
    const TreeNode& n = tree_.node(id);
    if (n.is_leaf()) {
      const double v = weight_ * n.value;
      const std::size_t total = s + t;
      Sums out;
      if (s > 0) out.pos = coalition_weight(s - 1, total) * v;
      if (t > 0) out.neg = coalition_weight(s, total) * v;
      return out;
    }
    const auto f = static_cast<std::size_t>(n.feature);
    const bool x_left = goes_left(n, x_[f]);
    const bool z_left = goes_left(n, z_[f]);
    const auto child = [&](bool left) { return static_cast<std::size_t>(left ? n.left : n.right); };
    if (x_left == z_left) return visit(child(x_left), s, t);
    const auto slot = static_cast<std::size_t>(index_.slot_of[f]);
    if (side_[slot] == kFromX) return visit(child(x_left), s, t);
    if (side_[slot] == kFromZ) return visit(child(z_left), s, t);

    side_[slot] = kFromX;
    const Sums via_x = visit(child(x_left), s + 1, t);
    side_[slot] = kFromZ;
    const Sums via_z = visit(child(z_left), s, t + 1);
    side_[slot] = kNone;
    phi_[slot] += via_x.pos - via_z.neg;
    return {via_x.pos + via_z.pos, via_x.neg + via_z.neg};
  }

  const DecisionTree& tree_;
  const TreeIndex& index_;
  double weight_;
  std::span<const double> x_, z_;
  std::span<double> phi_;
  std::vector<unsigned char> side_;
};

void attribute_row(const TreeEnsembleModel& model, const std::vector<TreeIndex>& indices,
                   std::span<const double> x, const BackgroundSet& bg, std::span<double> out) {
  const std::size_t m = model.feature_names.size();
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> per_background(m);
  std::vector<double> per_tree;
  for (std::size_t b = 0; b < bg.size(); ++b) {
    std::fill(per_background.begin(), per_background.end(), 0.0);
    const auto z = bg.row(b);
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      const TreeIndex& idx = indices[t];
      per_tree.assign(idx.features.size(), 0.0);
      PathWalker(model.trees[t], idx, model.tree_weights[t], x, z, per_tree).run();
      for (std::size_t k = 0; k < idx.features.size(); ++k) {
        per_background[idx.features[k]] += per_tree[k];
      }
    }
    for (std::size_t j = 0; j < m; ++j) out[j] += per_background[j];
  }
  const double inv = 1.0 / static_cast<double>(bg.size());
  for (auto& v : out) v *= inv;
}

std::vector<TreeIndex> index_model(const TreeEnsembleModel& model) {
  std::vector<TreeIndex> indices;
  indices.reserve(model.trees.size());
  for (const auto& t : model.trees) indices.push_back(index_tree(t, model.feature_names.size()));
  return indices;
}

void check_background(const TreeEnsembleModel& model, const BackgroundSet& bg) {
  if (bg.feature_names() != model.feature_names) {
    throw Error(ErrorCode::kSchemaMismatch, "background columns differ from model features");
  }
}

}  // namespace

BackgroundSet::BackgroundSet(std::vector<std::string> feature_names, std::vector<double> rows,
                             std::uint64_t seed)
    : names_(std::move(feature_names)), rows_(std::move(rows)), seed_(seed) {
  if (names_.empty() || rows_.empty() || rows_.size() % names_.size() != 0) {
    throw Error(ErrorCode::kInvalidArgument, "background set must be a non-empty matrix");
  }
}

BackgroundSet BackgroundSet::sample(const DataTable& train, std::size_t size, std::uint64_t seed) {
  if (train.n_rows() == 0 || size == 0) {
    throw Error(ErrorCode::kInsufficientRows, "background needs at least one row");
  }
  Rng rng(seed);
  const auto picked = rng.sample_without_replacement(train.n_rows(), size);
  std::vector<double> rows;
  rows.reserve(picked.size() * train.n_cols());
  for (const std::size_t i : picked) {
    const auto r = train.row(i);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return BackgroundSet(train.column_names(), std::move(rows), seed);
}

BackgroundSet BackgroundSet::from_table(const DataTable& table) {
  return BackgroundSet(table.column_names(),
                       std::vector<double>(table.values().begin(), table.values().end()), 0);
}

double expected_margin(const TreeEnsembleModel& model, const BackgroundSet& bg) {
  double s = 0.0;
  for (std::size_t b = 0; b < bg.size(); ++b) s += model.margin(bg.row(b));
  return s / static_cast<double>(bg.size());
}

std::vector<double> shap_brute_force(const TreeEnsembleModel& model, std::span<const double> x,
                                     const BackgroundSet& bg) {
  check_background(model, bg);
  const std::size_t m = model.feature_names.size();
  if (m > kMaxBruteForceFeatures) {
    throw Error(ErrorCode::kTooManyFeatures,
                std::to_string(m) + " features; enumeration supports at most " +
                    std::to_string(kMaxBruteForceFeatures));
  }
  const std::size_t subsets = std::size_t{1} << m;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> composite(m);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double s = 0.0;
    for (std::size_t b = 0; b < bg.size(); ++b) {
      const auto z = bg.row(b);
      for (std::size_t j = 0; j < m; ++j) composite[j] = (mask >> j) & 1 ? x[j] : z[j];
      s += model.margin(composite);
    }
    value[mask] = s / static_cast<double>(bg.size());
  }
  std::vector<double> phi(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
      phi[i] += coalition_weight(size, m) * (value[mask | bit] - value[mask]);
    }
  }
  return phi;
}

std::vector<double> tree_shap_row(const TreeEnsembleModel& model, std::span<const double> x,
                                  const BackgroundSet& bg) {
  check_background(model, bg);
  std::vector<double> phi(model.feature_names.size());
  attribute_row(model, index_model(model), x, bg, phi);
  return phi;
}

ShapMatrix tree_shap(const TreeEnsembleModel& model, const DataTable& x, const BackgroundSet& bg,
                     std::size_t threads, std::optional<std::vector<std::size_t>> instance_ids) {
  check_background(model, bg);
  if (x.column_names() != model.feature_names) {
    throw Error(ErrorCode::kSchemaMismatch,
                "columns of " + x.name() + " differ from model features");
  }
  ShapMatrix out;
  out.feature_names = model.feature_names;
  if (instance_ids) {
    if (instance_ids->size() != x.n_rows()) {
      throw Error(ErrorCode::kLengthMismatch, "instance_ids length differs from row count");
    }
    out.instance_ids = std::move(*instance_ids);
  } else {
    out.instance_ids.resize(x.n_rows());
    std::iota(out.instance_ids.begin(), out.instance_ids.end(), std::size_t{0});
  }
  const std::size_t m = model.feature_names.size();
  out.values.assign(x.n_rows() * m, 0.0);
  out.base_value = expected_margin(model, bg);
  const auto indices = index_model(model);
  parallel_for(x.n_rows(), threads, [&](std::size_t i) {
    attribute_row(model, indices, x.row(i), bg, std::span<double>(out.values.data() + i * m, m));
  });
  return out;
}

double local_accuracy_error(const TreeEnsembleModel& model, const DataTable& x,
                            const ShapMatrix& shap) {
  double worst = 0.0;
  for (std::size_t i = 0; i < shap.n_rows(); ++i) {
    const auto r = shap.row(i);
    const double total = std::accumulate(r.begin(), r.end(), shap.base_value);
    worst = std::max(worst, std::abs(total - model.margin(x.row(i))));
  }
  return worst;
}

void write_shap_csv(const ShapMatrix& shap, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  csv::write_record(out, {"instance_id", "feature", "shap_value"});
  for (std::size_t i = 0; i < shap.n_rows(); ++i) {
    for (std::size_t j = 0; j < shap.n_cols(); ++j) {
      csv::write_record(out, {std::to_string(shap.instance_ids[i]), shap.feature_names[j],
                              csv::format_double(shap.value(i, j))});
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

nlohmann::ordered_json shap_header(const ShapMatrix& shap, std::uint64_t seed,
                                   std::size_t background_size) {
  nlohmann::ordered_json j;
  j["base_value"] = shap.base_value;
  j["seed"] = seed;
  j["background_size"] = background_size;
  j["n_instances"] = shap.n_rows();
  j["feature_names"] = shap.feature_names;
  j["units"] = "margin";
  return j;
}

// ---------------------------------------------------------------------------

const FeatureImportance* GlobalImportance::find(const std::string& name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

nlohmann::ordered_json GlobalImportance::to_json() const {
  nlohmann::ordered_json j;
  j["n_instances"] = n_instances;
  auto& arr = j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : features) {
    arr.push_back({{"name", f.name},
                   {"rank", f.rank},
                   {"mean_abs", f.mean_abs},
                   {"mean_signed", f.mean_signed},
                   {"direction", f.positive ? "positive" : "negative"}});
  }
  return j;
}

GlobalImportance GlobalImportance::from_json(const nlohmann::json& j) {
  GlobalImportance g;
  g.n_instances = j.at("n_instances").get<std::size_t>();
  for (const auto& f : j.at("features")) {
    g.features.push_back({f.at("name").get<std::string>(), f.at("mean_abs").get<double>(),
                          f.at("mean_signed").get<double>(), f.at("rank").get<std::size_t>(),
                          f.at("direction").get<std::string>() == "positive"});
  }
  return g;
}

GlobalImportance global_importance(const ShapMatrix& shap) {
  if (shap.n_rows() == 0) throw Error(ErrorCode::kInsufficientRows, "no explained instances");
  const std::size_t m = shap.n_cols();
  GlobalImportance g;
  g.n_instances = shap.n_rows();
  g.features.resize(m);
  const double inv = 1.0 / static_cast<double>(shap.n_rows());
  for (std::size_t j = 0; j < m; ++j) {
    double abs_sum = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < shap.n_rows(); ++i) {
      abs_sum += std::abs(shap.value(i, j));
      sum += shap.value(i, j);
    }
    g.features[j].name = shap.feature_names[j];
    g.features[j].mean_abs = abs_sum * inv;
    g.features[j].mean_signed = sum * inv;
    g.features[j].positive = g.features[j].mean_signed >= 0.0;
  }
  std::sort(g.features.begin(), g.features.end(), [](const auto& a, const auto& b) {
    if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
    return a.name < b.name;
  });
  for (std::size_t r = 0; r < m; ++r) g.features[r].rank = r + 1;
  return g;
}

std::vector<FeatureSummary> summary_data(const ShapMatrix& shap, const DataTable& x) {
  if (x.n_rows() != shap.n_rows()) {
    throw Error(ErrorCode::kLengthMismatch, "summary rows differ from attribution rows");
  }
  const GlobalImportance g = global_importance(shap);
  const std::size_t n = shap.n_rows();
  std::vector<FeatureSummary> out;
  for (const auto& f : g.features) {
    const auto shap_col = static_cast<std::size_t>(
        std::find(shap.feature_names.begin(), shap.feature_names.end(), f.name) -
        shap.feature_names.begin());
    const auto x_col = x.column_index(f.name);
    if (!x_col) throw Error(ErrorCode::kSchemaMismatch, "no column " + f.name);
    const std::vector<double> values = x.column(*x_col);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> quantile(n);
    for (std::size_t lo = 0; lo < n;) {
      std::size_t hi = lo;
      while (hi + 1 < n && values[order[hi + 1]] == values[order[lo]]) ++hi;
      // Tied values share the mean of ranks lo+1 .. hi+1.
      const double midrank = (static_cast<double>(lo + 1) + static_cast<double>(hi + 1)) / 2.0;
      for (std::size_t k = lo; k <= hi; ++k) {
        quantile[order[k]] = (midrank - 0.5) / static_cast<double>(n);
      }
      lo = hi + 1;
    }
    FeatureSummary s{f.name, f.rank, {}};
    s.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.points.push_back({values[i], shap.value(i, shap_col), quantile[i]});
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json DivergenceReport::to_json() const {
  nlohmann::ordered_json j;
  j["experiment_a"] = experiment_a;
  j["experiment_b"] = experiment_b;
  j["shared_features"] = shared_features;
  j["only_in_a"] = only_in_a;
  j["only_in_b"] = only_in_b;
  j["kendall_tau"] = kendall_tau;
  j["spearman_rho"] = spearman_rho;
  j["sign_flips"] = sign_flips;
  j["k"] = k;
  j["topk_jaccard"] = topk_jaccard;
  return j;
}

DivergenceReport compare_rankings(const GlobalImportance& a, const GlobalImportance& b,
                                  std::size_t k) {
  DivergenceReport r;
  std::map<std::string, std::size_t> rank_b;  // re-ranked within the shared set
  for (const auto& f : b.features) {
    if (a.find(f.name)) {
      rank_b.emplace(f.name, rank_b.size() + 1);
    } else {
      r.only_in_b.push_back(f.name);
    }
  }
  std::vector<std::size_t> ra, rb;
  for (const auto& f : a.features) {
    const auto it = rank_b.find(f.name);
    if (it == rank_b.end()) {
      r.only_in_a.push_back(f.name);
      continue;
    }
    r.shared_features.push_back(f.name);
    ra.push_back(r.shared_features.size());
    rb.push_back(it->second);
    if (f.mean_signed * b.find(f.name)->mean_signed < 0.0) r.sign_flips.push_back(f.name);
  }
  const std::size_t n = r.shared_features.size();
  if (n == 0) throw Error(ErrorCode::kEmptyIntersection, "rankings share no feature");

  if (n > 1) {
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const long long da = static_cast<long long>(ra[i]) - static_cast<long long>(ra[j]);
        const long long db = static_cast<long long>(rb[i]) - static_cast<long long>(rb[j]);
        (da * db > 0 ? concordant : discordant) += 1;
      }
    }
    r.kendall_tau = static_cast<double>(concordant - discordant) /
                    static_cast<double>(concordant + discordant);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(ra[i]) - static_cast<double>(rb[i]);
      d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    r.spearman_rho = 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
  }

  r.k = std::min(k, n);
  std::set<std::string> top_a, top_b;
  for (std::size_t i = 0; i < n; ++i) {
    if (ra[i] <= r.k) top_a.insert(r.shared_features[i]);
    if (rb[i] <= r.k) top_b.insert(r.shared_features[i]);
  }
  std::size_t inter = 0;
  for (const auto& s : top_a) inter += top_b.contains(s);
  const std::size_t uni = top_a.size() + top_b.size() - inter;
  r.topk_jaccard = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  return r;
}

}  // namespace phishaudit
