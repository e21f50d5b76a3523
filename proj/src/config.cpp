#include "phishaudit/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "phishaudit/error.hpp"

namespace phishaudit {
namespace {

namespace pt = boost::property_tree;

// Typed access to one INI section; remembers which keys were read so the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename T>
  void read(const std::string& key, T& out) {
    const auto text = raw(key);
    if (!text) return;
    const auto v = tree_->get_optional<T>(pt::ptree::path_type(key, '\0'));
    if (!v) bad(key, *text);
    out = *v;
  }

  void read_size(const std::string& key, std::size_t& out) {
    long long v = static_cast<long long>(out);
    read(key, v);
    if (v < 0) bad(key, std::to_string(v));
    out = static_cast<std::size_t>(v);
  }

  void read_list(const std::string& key, std::vector<std::string>& out) {
    const auto text = raw(key);
    if (!text) return;
    out.clear();
    std::vector<std::string> parts;
    boost::algorithm::split(parts, *text, [](char c) { return c == ','; });
    for (auto& p : parts) {
      boost::algorithm::trim(p);
      if (!p.empty()) out.push_back(p);
    }
  }

  bool has(const std::string& key) const { return raw(key).has_value(); }

  void reject_unknown() const {
    if (tree_ == nullptr) return;
    for (const auto& [key, _] : *tree_) {
      if (!used_.count(key)) {
        throw Error(ErrorCode::kConfig, "unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

 private:
  std::optional<std::string> raw(const std::string& key) const {
    used_.insert(key);
    if (tree_ == nullptr) return std::nullopt;
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return boost::algorithm::trim_copy(it->second.data());
  }

  [[noreturn]] void bad(const std::string& key, const std::string& text) const {
    throw Error(ErrorCode::kConfig, "[" + name_ + "] " + key + ": bad value '" + text + "'");
  }

  const pt::ptree* tree_;
  std::string name_;
  mutable std::set<std::string> used_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, const std::string& base_dir) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, e.message() + " at line " + std::to_string(e.line()));
  }
  const std::set<std::string> known = {"run",      "data",     "model.gbdt", "model.rf",
                                       "model.dt", "model.lr", "model.nb",   "experiments",
                                       "explain",  "fetch"};
  std::map<std::string, const pt::ptree*> sections;
  for (const auto& [name, tree] : root) {
    if (!known.count(name)) throw Error(ErrorCode::kConfig, "unknown section [" + name + "]");
    if (tree.empty() && !tree.data().empty()) {
      throw Error(ErrorCode::kConfig, "key '" + name + "' outside any section");
    }
    sections[name] = &tree;
  }
  const auto section = [&](const std::string& name) {
    const auto it = sections.find(name);
    return Section(it == sections.end() ? nullptr : it->second, name);
  };

  RunConfig c;
  c.experiments.run.clear();
  for (const auto& s : canonical_matrix()) c.experiments.run.push_back(s.id);

  auto run = section("run");
  if (!run.has("seed")) throw Error(ErrorCode::kConfig, "[run] seed is required");
  run.read("seed", c.seed);
  run.read("out", c.out_dir);
  run.read_size("threads", c.threads);
  run.reject_unknown();
  c.out_dir = resolve(base_dir, c.out_dir);
  c.models.threads = c.threads;
  c.explain.explain.threads = c.threads;

  auto data = section("data");
  auto& d = c.data;
  data.read("synthetic", d.synthetic);
  if (data.has("synthetic_seed")) {
    std::uint64_t s = 0;
    data.read("synthetic_seed", s);
    d.synthetic_seed = s;
  }
  data.read_size("synthetic_d1_rows", d.synth.d1_rows);
  data.read_size("synthetic_d2_rows", d.synth.d2_rows);
  data.read("d1_path", d.d1_path);
  data.read("d2_path", d.d2_path);
  data.read("d1_label", d.d1_label);
  data.read("d1_positive", d.d1_positive);
  data.read("d2_label", d.d2_label);
  data.read("d2_positive", d.d2_positive);
  data.read("mapping", d.mapping_path);
  data.read("test_fraction", d.pipeline.test_fraction);
  data.read("smote_d1", d.pipeline.smote_d1);
  data.read("smote_d2", d.pipeline.smote_d2);
  data.read_size("smote_k", d.pipeline.smote_k);
  data.read_size("merge_per_class", d.pipeline.merge_per_class);
  data.read_size("max_rows_all", d.max_rows_all);
  for (const auto& [prefix, target] :
       {std::pair{"d1", &d.pipeline.d1_test_counts}, {"d2", &d.pipeline.d2_test_counts}}) {
    const std::string kp = std::string(prefix) + "_test_phishing";
    const std::string kb = std::string(prefix) + "_test_benign";
    if (data.has(kp) != data.has(kb)) {
      throw Error(ErrorCode::kConfig, "[data] " + kp + " and " + kb + " go together");
    }
    if (data.has(kp)) {
      ClassCounts counts;
      data.read_size(kp, counts.phishing);
      data.read_size(kb, counts.benign);
      *target = counts;
    }
  }
  data.reject_unknown();
  d.d1_path = resolve(base_dir, d.d1_path);
  d.d2_path = resolve(base_dir, d.d2_path);
  d.mapping_path = resolve(base_dir, d.mapping_path);

  auto gbdt = section("model.gbdt");
  auto& g = c.models.gbdt;
  gbdt.read_size("n_rounds", g.n_rounds);
  gbdt.read("learning_rate", g.learning_rate);
  gbdt.read("max_depth", g.max_depth);
  gbdt.read("lambda", g.lambda);
  gbdt.read("min_child_weight", g.min_child_weight);
  gbdt.read("min_samples_leaf", g.min_samples_leaf);
  gbdt.read("subsample", g.subsample);
  gbdt.reject_unknown();

  auto rf = section("model.rf");
  rf.read_size("n_trees", c.models.rf.n_trees);
  rf.read("max_depth", c.models.rf.max_depth);
  rf.read("min_samples_leaf", c.models.rf.min_samples_leaf);
  rf.read_size("mtry", c.models.rf.mtry);
  rf.read("bootstrap", c.models.rf.bootstrap);
  rf.reject_unknown();

  auto dt = section("model.dt");
  dt.read("max_depth", c.models.dt.max_depth);
  dt.read("min_samples_leaf", c.models.dt.min_samples_leaf);
  dt.reject_unknown();

  auto lr = section("model.lr");
  lr.read_size("epochs", c.models.lr.epochs);
  lr.read("step", c.models.lr.step);
  lr.read("l2", c.models.lr.l2);
  lr.reject_unknown();

  auto nb = section("model.nb");
  nb.read("variance_floor", c.models.nb.variance_floor);
  nb.reject_unknown();

  auto ex = section("experiments");
  ex.read_list("run", c.experiments.run);
  ex.read("model", c.experiments.model);
  ex.read_list("zoo", c.experiments.zoo);
  ex.read("extra_pairs", c.experiments.extra_pairs);
  ex.reject_unknown();

  auto xp = section("explain");
  xp.read_size("n_per_class", c.explain.explain.n_per_class);
  xp.read_size("background_size", c.explain.explain.background_size);
  xp.read_size("top_n", c.explain.top_n);
  xp.read_size("beeswarm_features", c.explain.beeswarm_features);
  xp.read_size("k", c.explain.k);
  xp.reject_unknown();

  auto fetch = section("fetch");
  fetch.read("d1_url", c.fetch.d1_url);
  fetch.read("d1_sha256", c.fetch.d1_sha256);
  fetch.read("d2_url", c.fetch.d2_url);
  fetch.read("d2_sha256", c.fetch.d2_sha256);
  fetch.reject_unknown();

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  return parse(in, dir.empty() ? "." : dir.string());
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  const auto ids = canonical_matrix();
  for (const auto& id : experiments.run) {
    if (std::none_of(ids.begin(), ids.end(), [&](const auto& s) { return s.id == id; })) {
      fail("[experiments] unknown experiment '" + id + "'");
    }
  }
  if (!ModelRegistry::contains(experiments.model)) {
    fail("[experiments] unknown model '" + experiments.model + "'");
  }
  for (const auto& m : experiments.zoo) {
    if (!ModelRegistry::contains(m)) fail("[experiments] unknown zoo model '" + m + "'");
  }
  if (!(data.pipeline.test_fraction > 0.0 && data.pipeline.test_fraction < 1.0)) {
    fail("[data] test_fraction must lie in (0, 1)");
  }
  if (!(models.gbdt.subsample > 0.0 && models.gbdt.subsample <= 1.0)) {
    fail("[model.gbdt] subsample must lie in (0, 1]");
  }
  if (!(models.gbdt.learning_rate > 0.0)) fail("[model.gbdt] learning_rate must be positive");
  if (explain.explain.background_size == 0) fail("[explain] background_size must be positive");
  if (explain.k == 0) fail("[explain] k must be positive");
  if (!data.synthetic) {
    for (const auto& [key, path] : {std::pair{"d1_path", &data.d1_path}, {"d2_path", &data.d2_path}}) {
      if (path->empty()) fail(std::string("[data] ") + key + " is required unless synthetic = true");
    }
  }
}

void RunConfig::check_inputs() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  if (!data.synthetic) {
    for (const auto& [key, path] : {std::pair{"d1_path", &data.d1_path}, {"d2_path", &data.d2_path}}) {
      if (!std::filesystem::exists(*path)) fail(std::string("[data] ") + key + ": no file " + *path);
    }
  }
  if (!data.mapping_path.empty() && !std::filesystem::exists(data.mapping_path)) {
    fail("[data] mapping: no file " + data.mapping_path);
  }
}

}  // namespace phishaudit
