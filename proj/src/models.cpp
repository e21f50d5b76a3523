#include "phishaudit/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "phishaudit/error.hpp"
#include "phishaudit/parallel.hpp"
#include "phishaudit/rng.hpp"
#include "tree_builder.hpp"

namespace phishaudit {
namespace {

constexpr double kProbClamp = 1e-15;

void require_rows(const DataTable& train) {
  if (train.n_rows() == 0) throw Error(ErrorCode::kInsufficientRows, train.name() + " is empty");
}

double clamped_logit(double p) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log(p / (1.0 - p));
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear and naive Bayes models

double LinearModel::margin(std::span<const double> x) const {
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * (x[j] - mean[j]) / stddev[j];
  return z;
}

nlohmann::ordered_json LinearModel::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "linear";
  j["feature_names"] = feature_names;
  j["bias"] = bias;
  j["weights"] = weights;
  j["mean"] = mean;
  j["stddev"] = stddev;
  return j;
}

LinearModel LinearModel::from_json(const nlohmann::json& j) {
  LinearModel m;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.bias = j.at("bias").get<double>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.mean = j.at("mean").get<std::vector<double>>();
  m.stddev = j.at("stddev").get<std::vector<double>>();
  const std::size_t d = m.feature_names.size();
  if (m.weights.size() != d || m.mean.size() != d || m.stddev.size() != d) {
    throw Error(ErrorCode::kInvalidArgument, "linear model vectors differ in length");
  }
  return m;
}

double GaussianNBModel::log_joint(std::span<const double> x, int label) const {
  const auto c = static_cast<std::size_t>(label);
  double s = std::log(prior[c]);
  for (std::size_t j = 0; j < mean[c].size(); ++j) {
    const double var = variance[c][j];
    const double d = x[j] - mean[c][j];
    s -= 0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
  }
  return s;
}

double GaussianNBModel::probability(std::span<const double> x) const {
  const double a = log_joint(x, kBenign);
  const double b = log_joint(x, kPhishing);
  if (std::isinf(a) && std::isinf(b)) return prior[1];
  return sigmoid(b - a);
}

nlohmann::ordered_json GaussianNBModel::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "gaussian_nb";
  j["feature_names"] = feature_names;
  j["variance_floor"] = variance_floor;
  j["prior"] = {prior[0], prior[1]};
  j["mean"] = {mean[0], mean[1]};
  j["variance"] = {variance[0], variance[1]};
  return j;
}

GaussianNBModel GaussianNBModel::from_json(const nlohmann::json& j) {
  GaussianNBModel m;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.variance_floor = j.at("variance_floor").get<double>();
  for (int c = 0; c < 2; ++c) {
    m.prior[c] = j.at("prior").at(c).get<double>();
    m.mean[c] = j.at("mean").at(c).get<std::vector<double>>();
    m.variance[c] = j.at("variance").at(c).get<std::vector<double>>();
    if (m.mean[c].size() != m.feature_names.size() ||
        m.variance[c].size() != m.feature_names.size()) {
      throw Error(ErrorCode::kInvalidArgument, "naive Bayes vectors differ in length");
    }
  }
  return m;
}

const std::vector<std::string>& feature_names(const Classifier& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.feature_names; },
                    model);
}

nlohmann::ordered_json model_to_json(const Classifier& model) {
  return std::visit([](const auto& m) { return m.to_json(); }, model);
}

Classifier model_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != kModelSchemaVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported model schema_version");
  }
  const std::string kind = j.value("kind", std::string("tree_ensemble"));
  if (kind == "tree_ensemble") return TreeEnsembleModel::from_json(j);
  if (kind == "linear") return LinearModel::from_json(j);
  if (kind == "gaussian_nb") return GaussianNBModel::from_json(j);
  throw Error(ErrorCode::kUnknownModel, "model kind " + kind);
}

void save_model(const Classifier& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

Classifier load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  return model_from_json(j);
}

Predictions predict(const Classifier& model, const DataTable& table) {
  if (feature_names(model) != table.column_names()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "model features differ from the columns of " + table.name());
  }
  Predictions out;
  out.probability.resize(table.n_rows());
  out.label.resize(table.n_rows());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    const auto row = table.row(i);
    const double p = std::visit([&](const auto& m) { return m.probability(row); }, model);
    out.probability[i] = p;
    out.label[i] = p >= 0.5 ? kPhishing : kBenign;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trainers

TreeEnsembleModel train_decision_tree(const DataTable& train, const DecisionTreeConfig& cfg) {
  RandomForestConfig rf;
  rf.n_trees = 1;
  rf.max_depth = cfg.max_depth;
  rf.min_samples_leaf = cfg.min_samples_leaf;
  rf.mtry = train.n_cols();
  rf.bootstrap = false;
  rf.threads = 1;
  return train_random_forest(train, rf);
}

TreeEnsembleModel train_random_forest(const DataTable& train, const RandomForestConfig& cfg) {
  require_rows(train);
  const detail::SortedColumns x(train);
  const std::size_t n = train.n_rows();
  const std::size_t m = train.n_cols();
  const std::vector<double> ones(n, 1.0);
  const std::vector<double> zeros(n, 0.0);

  detail::GrowParams params;
  params.criterion = detail::Criterion::kGini;
  params.max_depth = cfg.max_depth;
  params.min_samples_leaf = cfg.min_samples_leaf;
  params.mtry = cfg.mtry == 0 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))))
                              : cfg.mtry;
  params.threads = 1;

  TreeEnsembleModel model;
  model.mode = EnsembleMode::kAveraged;
  model.base_score = 0.0;
  model.feature_names = train.column_names();
  model.trees.resize(cfg.n_trees);
  model.tree_weights.assign(cfg.n_trees, cfg.n_trees ? 1.0 / static_cast<double>(cfg.n_trees) : 0.0);

  parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, "tree-" + std::to_string(t)));
    std::vector<double> w = ones;
    if (cfg.bootstrap) {
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) w[rng.uniform_index(n)] += 1.0;
    }
    std::vector<double> wy(n);
    for (std::size_t i = 0; i < n; ++i) wy[i] = w[i] * train.label(i);
    model.trees[t] = detail::grow_tree(x, w, wy, zeros, params, &rng);
  });
  return model;
}

double log_loss(std::span<const double> probability, std::span<const int> labels) {
  if (probability.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "log_loss inputs differ in length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probability[i], kProbClamp, 1.0 - kProbClamp);
    s -= labels[i] == kPhishing ? std::log(p) : std::log(1.0 - p);
  }
  return labels.empty() ? 0.0 : s / static_cast<double>(labels.size());
}

TreeEnsembleModel train_gbdt(const DataTable& train, const GbdtConfig& cfg,
                             std::vector<double>* loss_trace) {
  require_rows(train);
  if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "subsample must be in (0, 1]");
  }
  const detail::SortedColumns x(train);
  const std::size_t n = train.n_rows();
  const auto labels = train.labels();

  TreeEnsembleModel model;
  model.mode = EnsembleMode::kBoosted;
  model.feature_names = train.column_names();
  const double positive_rate =
      static_cast<double>(train.count_label(kPhishing)) / static_cast<double>(n);
  model.base_score = clamped_logit(positive_rate);

  std::vector<double> margin(n, model.base_score);
  std::vector<double> prob(n, sigmoid(model.base_score));
  if (loss_trace) {
    loss_trace->clear();
    loss_trace->push_back(log_loss(prob, labels));
  }
  // Identical labels leave nothing to fit.
  if (positive_rate == 0.0 || positive_rate == 1.0) return model;

  detail::GrowParams params;
  params.max_depth = cfg.max_depth;
  params.min_samples_leaf = cfg.min_samples_leaf;
  params.lambda = cfg.lambda;
  params.min_child_weight = cfg.min_child_weight;
  params.leaf_scale = cfg.learning_rate;
  params.threads = cfg.threads;
  params.criterion = cfg.order == GradientOrder::kSecond ? detail::Criterion::kNewton
                                                         : detail::Criterion::kVariance;

  Rng rng(derive_seed(cfg.seed, "gbdt-subsample"));
  const std::size_t n_sub = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))));
  std::vector<double> w(n, 1.0), g(n), h(n);
  for (std::size_t round = 0; round < cfg.n_rounds; ++round) {
    if (n_sub < n) {
      std::fill(w.begin(), w.end(), 0.0);
      for (const std::size_t i : rng.sample_without_replacement(n, n_sub)) w[i] = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double grad = prob[i] - labels[i];
      const double hess = prob[i] * (1.0 - prob[i]);
      if (params.criterion == detail::Criterion::kNewton) {
        g[i] = w[i] * grad;
        h[i] = w[i] * hess;
      } else {
        g[i] = -w[i] * grad;
        h[i] = w[i] * hess;
      }
    }
    DecisionTree tree = detail::grow_tree(x, w, g, h, params, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += tree.predict(train.row(i));
      prob[i] = sigmoid(margin[i]);
    }
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(1.0);
    if (loss_trace) loss_trace->push_back(log_loss(prob, labels));
  }
  return model;
}

LinearModel train_logistic_regression(const DataTable& train, const LogisticConfig& cfg) {
  require_rows(train);
  if (train.has_missing()) throw Error(ErrorCode::kInvalidArgument, "training table has missing values");
  const std::size_t n = train.n_rows();
  const std::size_t m = train.n_cols();
  LinearModel model;
  model.feature_names = train.column_names();
  model.weights.assign(m, 0.0);
  model.mean.assign(m, 0.0);
  model.stddev.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += train.value(i, j);
    model.mean[j] = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = train.value(i, j) - model.mean[j];
      v += d * d;
    }
    const double sd = std::sqrt(v / static_cast<double>(n));
    model.stddev[j] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<double> z(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      z[i * m + j] = (train.value(i, j) - model.mean[j]) / model.stddev[j];
    }
  }
  model.bias = clamped_logit(static_cast<double>(train.count_label(kPhishing)) /
                             static_cast<double>(n));

  std::vector<double> grad(m);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = model.bias;
      const double* zi = &z[i * m];
      for (std::size_t j = 0; j < m; ++j) s += model.weights[j] * zi[j];
      const double r = sigmoid(s) - train.label(i);
      for (std::size_t j = 0; j < m; ++j) grad[j] += r * zi[j];
      grad_b += r;
    }
    for (std::size_t j = 0; j < m; ++j) {
      model.weights[j] -= cfg.step * (grad[j] * inv_n + cfg.l2 * model.weights[j]);
    }
    model.bias -= cfg.step * grad_b * inv_n;
  }
  return model;
}

GaussianNBModel train_gaussian_nb(const DataTable& train, const NaiveBayesConfig& cfg) {
  require_rows(train);
  if (!(cfg.variance_floor > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "variance_floor must be positive");
  }
  const std::size_t m = train.n_cols();
  GaussianNBModel model;
  model.feature_names = train.column_names();
  model.variance_floor = cfg.variance_floor;
  for (const int c : {kBenign, kPhishing}) {
    const std::size_t count = train.count_label(c);
    if (count == 0) {
      throw Error(ErrorCode::kDegenerateClass, "naive Bayes needs both classes in " + train.name());
    }
    model.prior[c] = static_cast<double>(count) / static_cast<double>(train.n_rows());
    auto& mu = model.mean[c];
    auto& var = model.variance[c];
    mu.assign(m, 0.0);
    var.assign(m, 0.0);
    for (std::size_t i = 0; i < train.n_rows(); ++i) {
      if (train.label(i) != c) continue;
      for (std::size_t j = 0; j < m; ++j) mu[j] += train.value(i, j);
    }
    for (auto& v : mu) v /= static_cast<double>(count);
    for (std::size_t i = 0; i < train.n_rows(); ++i) {
      if (train.label(i) != c) continue;
      for (std::size_t j = 0; j < m; ++j) {
        const double d = train.value(i, j) - mu[j];
        var[j] += d * d;
      }
    }
    for (auto& v : var) v = std::max(v / static_cast<double>(count), cfg.variance_floor);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

double safe_ratio(std::size_t num, std::size_t den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassScores class_scores(std::size_t tp, std::size_t fp, std::size_t fn, bool& zero_division) {
  ClassScores s;
  s.precision = safe_ratio(tp, tp + fp, zero_division);
  s.recall = safe_ratio(tp, tp + fn, zero_division);
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  s.support = tp + fn;
  return s;
}

nlohmann::ordered_json scores_json(const ClassScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
}

}  // namespace

Metrics evaluate(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == kPhishing;
    const bool y = labels[i] == kPhishing;
    m.tp += p && y;
    m.fp += p && !y;
    m.fn += !p && y;
    m.tn += !p && !y;
  }
  const std::size_t n = labels.size();
  m.accuracy = safe_ratio(m.tp + m.tn, n, m.zero_division);
  m.positive = class_scores(m.tp, m.fp, m.fn, m.zero_division);
  m.negative = class_scores(m.tn, m.fn, m.fp, m.zero_division);
  m.macro.precision = (m.positive.precision + m.negative.precision) / 2.0;
  m.macro.recall = (m.positive.recall + m.negative.recall) / 2.0;
  m.macro.f1 = (m.positive.f1 + m.negative.f1) / 2.0;
  m.macro.support = n;
  const double wp = n ? static_cast<double>(m.positive.support) / static_cast<double>(n) : 0.0;
  const double wn = n ? static_cast<double>(m.negative.support) / static_cast<double>(n) : 0.0;
  m.weighted.precision = wp * m.positive.precision + wn * m.negative.precision;
  m.weighted.recall = wp * m.positive.recall + wn * m.negative.recall;
  m.weighted.f1 = wp * m.positive.f1 + wn * m.negative.f1;
  m.weighted.support = n;
  return m;
}

nlohmann::ordered_json Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["confusion"] = {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}};
  j["accuracy"] = accuracy;
  j["positive"] = scores_json(positive);
  j["negative"] = scores_json(negative);
  j["macro"] = scores_json(macro);
  j["weighted"] = scores_json(weighted);
  j["zero_division"] = zero_division;
  return j;
}

}  // namespace phishaudit
