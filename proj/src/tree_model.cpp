#include "phishaudit/tree_model.hpp"

#include <algorithm>
#include <cmath>

#include "phishaudit/error.hpp"

namespace phishaudit {
namespace {

void node_to_json(const std::vector<TreeNode>& nodes, std::size_t i,
                  nlohmann::ordered_json& out) {
  const TreeNode& n = nodes[i];
  if (n.is_leaf()) {
    out["leaf"] = n.value;
    out["cover"] = n.cover;
    return;
  }
  out["feature"] = n.feature;
  out["threshold"] = n.threshold;
  out["default"] = n.default_left ? "left" : "right";
  out["gain"] = n.gain;
  out["cover"] = n.cover;
  node_to_json(nodes, static_cast<std::size_t>(n.left), out["left"]);
  node_to_json(nodes, static_cast<std::size_t>(n.right), out["right"]);
}

int node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  TreeNode n;
  n.cover = j.value("cover", 0.0);
  if (j.contains("leaf")) {
    n.value = j.at("leaf").get<double>();
    if (!std::isfinite(n.value)) throw Error(ErrorCode::kInvalidArgument, "leaf not finite");
    nodes[id] = n;
    return id;
  }
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.default_left = j.value("default", std::string("left")) == "left";
  n.gain = j.value("gain", 0.0);
  if (n.feature < 0 || !std::isfinite(n.threshold)) {
    throw Error(ErrorCode::kInvalidArgument, "malformed internal node");
  }
  n.left = node_from_json(j.at("left"), nodes);
  n.right = node_from_json(j.at("right"), nodes);
  nodes[id] = n;
  return id;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error(ErrorCode::kInvalidArgument, "tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= n ||
                            node.right >= n)) {
      throw Error(ErrorCode::kInvalidArgument, "tree child index out of range");
    }
  }
}

std::size_t DecisionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    const double v = x[static_cast<std::size_t>(n.feature)];
    const bool go_left = std::isnan(v) ? n.default_left : v < n.threshold;
    i = static_cast<std::size_t>(go_left ? n.left : n.right);
  }
  return i;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  // Children always have larger indices than their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t DecisionTree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

nlohmann::ordered_json DecisionTree::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  node_to_json(nodes_, 0, out);
  return out;
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  node_from_json(j, nodes);
  return DecisionTree(std::move(nodes));
}

double TreeEnsembleModel::margin(std::span<const double> x) const {
  double m = base_score;
  for (std::size_t t = 0; t < trees.size(); ++t) m += tree_weights[t] * trees[t].predict(x);
  return m;
}

double TreeEnsembleModel::probability(std::span<const double> x) const {
  const double m = margin(x);
  return mode == EnsembleMode::kBoosted ? sigmoid(m) : std::clamp(m, 0.0, 1.0);
}

nlohmann::ordered_json TreeEnsembleModel::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "tree_ensemble";
  j["mode"] = mode == EnsembleMode::kBoosted ? "boosted" : "averaged";
  j["base_score"] = base_score;
  j["feature_names"] = feature_names;
  j["tree_weights"] = tree_weights;
  auto& arr = j["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : trees) arr.push_back(t.to_json());
  return j;
}

TreeEnsembleModel TreeEnsembleModel::from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported model schema_version");
  }
  TreeEnsembleModel m;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode != "boosted" && mode != "averaged") {
    throw Error(ErrorCode::kInvalidArgument, "unknown ensemble mode " + mode);
  }
  m.mode = mode == "boosted" ? EnsembleMode::kBoosted : EnsembleMode::kAveraged;
  m.base_score = j.at("base_score").get<double>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& t : j.at("trees")) m.trees.push_back(DecisionTree::from_json(t));
  m.tree_weights = j.contains("tree_weights")
                       ? j.at("tree_weights").get<std::vector<double>>()
                       : std::vector<double>(m.trees.size(), 1.0);
  if (m.tree_weights.size() != m.trees.size()) {
    throw Error(ErrorCode::kInvalidArgument, "tree_weights length differs from trees");
  }
  for (const auto& t : m.trees) {
    for (const auto& n : t.nodes()) {
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= m.feature_names.size()) {
        throw Error(ErrorCode::kInvalidArgument, "feature index out of range");
      }
    }
  }
  return m;
}

}  // namespace phishaudit
