#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishaudit/data_table.hpp"
#include "phishaudit/tree_model.hpp"

namespace phishaudit {

// Logistic model on standardised inputs: margin = bias + sum_j w_j (x_j - mean_j) / stddev_j.
struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> stddev;  // > 0; constant columns get 1

  double margin(std::span<const double> x) const;
  double probability(std::span<const double> x) const { return sigmoid(margin(x)); }
  nlohmann::ordered_json to_json() const;
  static LinearModel from_json(const nlohmann::json& j);
};

// Index 0 = benign, 1 = phishing.
struct GaussianNBModel {
  std::vector<std::string> feature_names;
  double prior[2] = {0.5, 0.5};
  std::vector<double> mean[2];
  std::vector<double> variance[2];  // >= variance_floor
  double variance_floor = 1e-9;

  double log_joint(std::span<const double> x, int label) const;
  double probability(std::span<const double> x) const;
  nlohmann::ordered_json to_json() const;
  static GaussianNBModel from_json(const nlohmann::json& j);
};

using Classifier = std::variant<TreeEnsembleModel, LinearModel, GaussianNBModel>;

const std::vector<std::string>& feature_names(const Classifier& model);
nlohmann::ordered_json model_to_json(const Classifier& model);
Classifier model_from_json(const nlohmann::json& j);
void save_model(const Classifier& model, const std::string& path);
Classifier load_model(const std::string& path);

struct Predictions {
  std::vector<double> probability;
  std::vector<int> label;  // probability >= 0.5 -> phishing
};

// Throws Error(kSchemaMismatch) unless the table's columns equal the model's
// feature names in order.
Predictions predict(const Classifier& model, const DataTable& table);

// ---------------------------------------------------------------------------
// Training

struct DecisionTreeConfig {
  int max_depth = 0;  // <= 0: unlimited
  double min_samples_leaf = 1.0;
};

struct RandomForestConfig {
  std::size_t n_trees = 200;
  int max_depth = 0;
  double min_samples_leaf = 1.0;
  std::size_t mtry = 0;  // 0: ceil(sqrt(m))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

enum class GradientOrder { kFirst, kSecond };

struct GbdtConfig {
  std::size_t n_rounds = 300;
  double learning_rate = 0.1;
  int max_depth = 6;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double min_samples_leaf = 1.0;
  GradientOrder order = GradientOrder::kSecond;
  // Fraction of rows drawn without replacement for each round; 1 uses all.
  double subsample = 1.0;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct LogisticConfig {
  std::size_t epochs = 1000;
  double step = 0.5;
  double l2 = 1e-4;
};

struct NaiveBayesConfig {
  double variance_floor = 1e-9;
};

// Gini-impurity CART; leaves hold the positive-class fraction.
TreeEnsembleModel train_decision_tree(const DataTable& train, const DecisionTreeConfig& cfg);
TreeEnsembleModel train_random_forest(const DataTable& train, const RandomForestConfig& cfg);

// Logistic-loss boosting. loss_trace, when given, receives the mean training
// log-loss before the first round and after every round.
TreeEnsembleModel train_gbdt(const DataTable& train, const GbdtConfig& cfg,
                             std::vector<double>* loss_trace = nullptr);

LinearModel train_logistic_regression(const DataTable& train, const LogisticConfig& cfg);
GaussianNBModel train_gaussian_nb(const DataTable& train, const NaiveBayesConfig& cfg);

double log_loss(std::span<const double> probability, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Metrics

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  ClassScores positive;  // phishing
  ClassScores negative;  // benign
  ClassScores macro;     // unweighted mean over both classes
  ClassScores weighted;  // support-weighted mean over both classes
  // A precision or recall denominator was zero somewhere; that score is 0.
  bool zero_division = false;

  nlohmann::ordered_json to_json() const;
};

// Throws Error(kLengthMismatch) when the spans differ in length.
Metrics evaluate(std::span<const int> predicted, std::span<const int> labels);

}  // namespace phishaudit
