#include "phishaudit/shap.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "phishaudit/error.hpp"
#include "phishaudit/models.hpp"
#include "phishaudit/rng.hpp"
#include "shap_test_util.hpp"

namespace phishaudit {
namespace {

using testutil::random_ensemble;
using testutil::random_rows;

std::vector<std::string> names(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < m; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

TreeEnsembleModel stump(std::size_t m, int feature, double threshold, double left, double right) {
  std::vector<TreeNode> nodes(3);
  nodes[0].feature = feature;
  nodes[0].threshold = threshold;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].value = left;
  nodes[2].value = right;
  TreeEnsembleModel model;
  model.feature_names = names(m);
  model.trees.emplace_back(nodes);
  model.tree_weights = {1.0};
  return model;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

TEST(BruteForce, SingleSplitForcedValues) {
  const auto model = stump(3, 0, 2.0, -1.5, 4.0);
  const BackgroundSet bg(names(3), {1.0, 7.0, 7.0}, 0);
  const std::vector<double> x{3.0, 0.0, 0.0};
  const auto phi = shap_brute_force(model, x, bg);
  EXPECT_DOUBLE_EQ(phi[0], 4.0 - (-1.5));
  EXPECT_EQ(phi[1], 0.0);
  EXPECT_EQ(phi[2], 0.0);
  EXPECT_EQ(tree_shap_row(model, x, bg), phi);
}

TEST(BruteForce, DummyFeatureExactlyZero) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    // Feature 5 is never split on.
    const auto model = random_ensemble(rng, 6, 5, 3, names(6), /*exclude=*/5);
    const auto rows = random_rows(rng, 9, 6);
    const BackgroundSet bg(names(6), std::vector<double>(rows.begin() + 6, rows.end()), 0);
    const std::span<const double> x(rows.data(), 6);
    EXPECT_EQ(shap_brute_force(model, x, bg)[5], 0.0);
    EXPECT_EQ(tree_shap_row(model, x, bg)[5], 0.0);
  }
}

TEST(BruteForce, LocalAccuracyOnRandomEnsemble) {
  Rng rng(2);
  const auto model = random_ensemble(rng, 6, 5, 3, names(6));
  const auto bg_rows = random_rows(rng, 16, 6);
  const BackgroundSet bg(names(6), bg_rows, 0);
  const double base = expected_margin(model, bg);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = random_rows(rng, 1, 6);
    const auto phi = shap_brute_force(model, x, bg);
    const double total = std::accumulate(phi.begin(), phi.end(), base);
    EXPECT_NEAR(total, model.margin(x), 1e-9);
  }
}

TEST(BruteForce, TooManyFeatures) {
  const auto model = stump(13, 0, 0.5, 0, 1);
  const BackgroundSet bg(names(13), std::vector<double>(13, 0.0), 0);
  try {
    shap_brute_force(model, std::vector<double>(13, 1.0), bg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManyFeatures);
  }
}

TEST(TreeShap, MatchesBruteForceOnRandomEnsembles) {
  Rng rng(3);
  double worst = 0.0;
  for (int model_id = 0; model_id < 100; ++model_id) {
    const std::size_t m = 1 + rng.uniform_index(8);
    const std::size_t n_trees = 1 + rng.uniform_index(5);
    const int depth = 1 + static_cast<int>(rng.uniform_index(4));
    const auto model = random_ensemble(rng, m, n_trees, depth, names(m));
    const std::size_t b = 1 + rng.uniform_index(16);
    const BackgroundSet bg(names(m), random_rows(rng, b, m), 0);
    for (int i = 0; i < 10; ++i) {
      const auto x = random_rows(rng, 1, m);
      worst = std::max(worst, max_abs_diff(tree_shap_row(model, x, bg),
                                           shap_brute_force(model, x, bg)));
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(TreeShap, InstanceEqualToBackgroundGivesZero) {
  Rng rng(4);
  const auto model = random_ensemble(rng, 5, 4, 4, names(5));
  const auto x = random_rows(rng, 1, 5);
  std::vector<double> rows;
  for (int b = 0; b < 6; ++b) rows.insert(rows.end(), x.begin(), x.end());
  const auto phi = tree_shap_row(model, x, BackgroundSet(names(5), rows, 0));
  for (const double v : phi) EXPECT_EQ(v, 0.0);
}

TEST(TreeShap, DuplicatedTreeDoublesExactly) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto model = random_ensemble(rng, 6, 1, 4, names(6));
    const BackgroundSet bg(names(6), random_rows(rng, 12, 6), 0);
    const auto x = random_rows(rng, 1, 6);
    const auto once = tree_shap_row(model, x, bg);
    model.trees.push_back(model.trees[0]);
    model.tree_weights.push_back(model.tree_weights[0]);
    const auto twice = tree_shap_row(model, x, bg);
    for (std::size_t j = 0; j < once.size(); ++j) EXPECT_EQ(twice[j], 2.0 * once[j]);
  }
}

TEST(TreeShap, LinearAcrossTrees) {
  Rng rng(6);
  const auto model = random_ensemble(rng, 7, 5, 4, names(7));
  const BackgroundSet bg(names(7), random_rows(rng, 10, 7), 0);
  const auto x = random_rows(rng, 1, 7);
  const auto whole = tree_shap_row(model, x, bg);
  std::vector<double> summed(7, 0.0);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    TreeEnsembleModel single;
    single.feature_names = model.feature_names;
    single.trees = {model.trees[t]};
    single.tree_weights = {model.tree_weights[t]};
    const auto part = tree_shap_row(single, x, bg);
    for (std::size_t j = 0; j < 7; ++j) summed[j] += part[j];
  }
  EXPECT_LE(max_abs_diff(whole, summed), 1e-9);
}

TEST(TreeShap, TrainedModelLocalAccuracyAndThreadInvariance) {
  Rng rng(7);
  const std::size_t m = 20;
  std::vector<double> v;
  std::vector<int> y;
  for (std::size_t i = 0; i < 400; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double value = static_cast<double>(rng.uniform_index(5));
      v.push_back(value);
      s += (j < 5 ? 1.0 : -0.2) * value;
    }
    y.push_back(s + rng.normal(0, 2) > 6 ? 1 : 0);
  }
  const DataTable t("t", names(m), v, y);
  const auto model = train_gbdt(t, {.n_rounds = 30, .max_depth = 4});
  const auto bg = BackgroundSet::sample(t, 32, 9);
  const DataTable x = t.select_rows(std::vector<std::size_t>{0, 5, 10, 15, 20, 25, 30, 35});
  const ShapMatrix a = tree_shap(model, x, bg, 1);
  const ShapMatrix b = tree_shap(model, x, bg, 4);
  EXPECT_EQ(a.values, b.values);
  EXPECT_LE(local_accuracy_error(model, x, a), 1e-9);
  EXPECT_DOUBLE_EQ(a.base_value, expected_margin(model, bg));
}

TEST(TreeShap, SchemaMismatch) {
  const auto model = stump(2, 0, 0.5, 0, 1);
  const BackgroundSet bg({"a", "b"}, {0, 0}, 0);
  EXPECT_THROW(tree_shap_row(model, std::vector<double>{1, 1}, bg), Error);
}

TEST(Background, SampleDistinctRowsInOrder) {
  std::vector<double> v(50);
  std::iota(v.begin(), v.end(), 0.0);
  const DataTable t("t", {"id"}, v, std::vector<int>(50, 0));
  const auto bg = BackgroundSet::sample(t, 10, 3);
  ASSERT_EQ(bg.size(), 10u);
  for (std::size_t i = 1; i < bg.size(); ++i) EXPECT_LT(bg.row(i - 1)[0], bg.row(i)[0]);
  EXPECT_EQ(BackgroundSet::sample(t, 500, 3).size(), 50u);
}

ShapMatrix matrix(std::vector<std::string> feature_names, std::vector<double> values) {
  ShapMatrix s;
  s.feature_names = std::move(feature_names);
  s.values = std::move(values);
  s.instance_ids.resize(s.values.size() / s.feature_names.size());
  std::iota(s.instance_ids.begin(), s.instance_ids.end(), std::size_t{0});
  return s;
}

TEST(GlobalImportanceTest, Arithmetic) {
  const auto g = global_importance(matrix({"a", "b"}, {1, -2, 3, -2}));
  ASSERT_EQ(g.features.size(), 2u);
  // Equal mean_abs: ties ranked by name.
  EXPECT_EQ(g.features[0].name, "a");
  EXPECT_EQ(g.features[0].mean_abs, 2.0);
  EXPECT_EQ(g.features[0].mean_signed, 2.0);
  EXPECT_TRUE(g.features[0].positive);
  EXPECT_EQ(g.features[1].mean_signed, -2.0);
  EXPECT_FALSE(g.features[1].positive);
  EXPECT_EQ(g.features[1].rank, 2u);
}

TEST(GlobalImportanceTest, SingleInstanceAndInvariants) {
  const auto g = global_importance(matrix({"a", "b", "c"}, {0.5, -3, 1}));
  for (const auto& f : g.features) EXPECT_EQ(f.mean_abs, std::abs(f.mean_signed));
  EXPECT_EQ(g.features[0].name, "b");

  Rng rng(8);
  std::vector<double> v(40 * 6);
  for (auto& x : v) x = rng.normal();
  const auto h = global_importance(matrix(names(6), v));
  std::vector<std::size_t> ranks;
  for (const auto& f : h.features) {
    EXPECT_GE(f.mean_abs, std::abs(f.mean_signed));
    ranks.push_back(f.rank);
  }
  std::vector<std::size_t> expected(6);
  std::iota(expected.begin(), expected.end(), std::size_t{1});
  EXPECT_EQ(ranks, expected);
  const auto back = GlobalImportance::from_json(h.to_json());
  EXPECT_EQ(back.to_json().dump(), h.to_json().dump());
}

TEST(SummaryData, Quantiles) {
  const ShapMatrix s = matrix({"a", "b"}, {0.1, 2, 0.3, 1});
  const DataTable x("x", {"a", "b"}, {1, 7, 5, 7}, {0, 1});
  const auto d = summary_data(s, x);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].name, "b");  // larger mean |phi|
  EXPECT_EQ(d[0].points[0].value_quantile, 0.5);
  EXPECT_EQ(d[0].points[1].value_quantile, 0.5);
  EXPECT_EQ(d[1].points[0].value_quantile, 0.25);
  EXPECT_EQ(d[1].points[1].value_quantile, 0.75);
  EXPECT_EQ(d[1].points[1].shap_value, 0.3);
  std::size_t total = 0;
  for (const auto& f : d) total += f.points.size();
  EXPECT_EQ(total, 4u);
}

GlobalImportance ranking(const std::vector<std::pair<std::string, double>>& signed_means) {
  GlobalImportance g;
  g.n_instances = 1;
  std::size_t r = 0;
  for (const auto& [name, v] : signed_means) {
    g.features.push_back({name, std::abs(v), v, ++r, v >= 0});
  }
  return g;
}

TEST(CompareRankings, IdenticalReversedAndOneSwap) {
  const auto a = ranking({{"x", 3}, {"y", 2}, {"z", 1}});
  auto r = compare_rankings(a, a);
  EXPECT_EQ(r.kendall_tau, 1.0);
  EXPECT_EQ(r.spearman_rho, 1.0);
  EXPECT_TRUE(r.sign_flips.empty());
  EXPECT_EQ(r.topk_jaccard, 1.0);

  r = compare_rankings(a, ranking({{"z", 3}, {"y", 2}, {"x", 1}}));
  EXPECT_EQ(r.kendall_tau, -1.0);
  EXPECT_EQ(r.spearman_rho, -1.0);

  r = compare_rankings(a, ranking({{"x", 3}, {"z", 2}, {"y", -1}}));
  EXPECT_NEAR(r.kendall_tau, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.spearman_rho, 0.5, 1e-15);
  EXPECT_EQ(r.sign_flips, std::vector<std::string>{"y"});
}

TEST(CompareRankings, PartialOverlapAndEmpty) {
  const auto a = ranking({{"x", 3}, {"y", 2}, {"only_a", 1}});
  const auto b = ranking({{"only_b", 5}, {"y", 2}, {"x", 1}});
  const auto r = compare_rankings(a, b, 1);
  EXPECT_EQ(r.shared_features, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(r.only_in_a, std::vector<std::string>{"only_a"});
  EXPECT_EQ(r.only_in_b, std::vector<std::string>{"only_b"});
  EXPECT_EQ(r.kendall_tau, -1.0);
  EXPECT_EQ(r.topk_jaccard, 0.0);
  try {
    compare_rankings(ranking({{"p", 1}}), ranking({{"q", 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyIntersection);
  }
}

TEST(CompareRankings, SymmetricProperty) {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rng.uniform_index(12);
    std::vector<std::pair<std::string, double>> fa, fb;
    for (std::size_t j = 0; j < m; ++j) {
      fa.emplace_back("f" + std::to_string(j), rng.normal());
      fb.emplace_back("f" + std::to_string(j), rng.normal());
    }
    auto by_abs = [](auto& v) {
      std::sort(v.begin(), v.end(),
                [](const auto& p, const auto& q) { return std::abs(p.second) > std::abs(q.second); });
    };
    by_abs(fa);
    by_abs(fb);
    const auto ab = compare_rankings(ranking(fa), ranking(fb), 5);
    const auto ba = compare_rankings(ranking(fb), ranking(fa), 5);
    EXPECT_NEAR(std::abs(ab.kendall_tau), std::abs(ba.kendall_tau), 1e-15);
    EXPECT_NEAR(std::abs(ab.spearman_rho), std::abs(ba.spearman_rho), 1e-15);
    EXPECT_EQ(std::set<std::string>(ab.sign_flips.begin(), ab.sign_flips.end()),
              std::set<std::string>(ba.sign_flips.begin(), ba.sign_flips.end()));
    EXPECT_EQ(ab.topk_jaccard, ba.topk_jaccard);
    EXPECT_GE(ab.kendall_tau, -1.0);
    EXPECT_LE(ab.kendall_tau, 1.0);
  }
}

}  // namespace
}  // namespace phishaudit
