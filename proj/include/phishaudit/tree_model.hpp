#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace phishaudit {

// One node of a binary decision tree stored in a flat array. Internal nodes
// route x[feature] < threshold to `left`; NaN follows default_left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;
  double value = 0.0;  // leaf output
  double cover = 0.0;  // training weight that reached the node
  double gain = 0.0;   // split gain, internal nodes only

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  DecisionTree() : nodes_{TreeNode{}} {}
  explicit DecisionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  // Index of the leaf reached by x.
  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes_[leaf_index(x)].value; }
  std::size_t depth() const;
  std::size_t n_leaves() const;

  // Nested {"feature","threshold","default","left","right"} / {"leaf"}.
  nlohmann::ordered_json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;  // root at index 0
};

enum class EnsembleMode { kBoosted, kAveraged };

// margin(x) = base_score + sum_t tree_weights[t] * trees[t](x).
// Boosted: probability = sigmoid(margin). Averaged: probability = margin
// (mean of leaf positive-class fractions, base_score 0).
struct TreeEnsembleModel {
  EnsembleMode mode = EnsembleMode::kBoosted;
  double base_score = 0.0;
  std::vector<std::string> feature_names;
  std::vector<DecisionTree> trees;
  std::vector<double> tree_weights;

  double margin(std::span<const double> x) const;
  double probability(std::span<const double> x) const;

  nlohmann::ordered_json to_json() const;
  static TreeEnsembleModel from_json(const nlohmann::json& j);
};

inline constexpr int kModelSchemaVersion = 1;

double sigmoid(double z);

}  // namespace phishaudit
