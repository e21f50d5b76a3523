#include "tree_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phishaudit/error.hpp"
#include "phishaudit/parallel.hpp"

namespace phishaudit::detail {
namespace {

struct Sums {
  double w = 0.0, g = 0.0, h = 0.0;

  void add(double dw, double dg, double dh) {
    w += dw;
    g += dg;
    h += dh;
  }
  Sums minus(const Sums& o) const { return {w - o.w, g - o.g, h - o.h}; }
};

struct Candidate {
  double gain = 0.0;
  double threshold = 0.0;
  bool found = false;
};

struct FrontierNode {
  int id;
  int depth;
  Sums sums;
  bool active;
};

double gini_impurity(const Sums& s) {
  return s.w > 0.0 ? 2.0 * s.g * (s.w - s.g) / s.w : 0.0;
}

double split_gain(const Sums& parent, const Sums& left, const Sums& right,
                  const GrowParams& p) {
  switch (p.criterion) {
    case Criterion::kGini:
      return gini_impurity(parent) - gini_impurity(left) - gini_impurity(right);
    case Criterion::kNewton: {
      auto score = [&](const Sums& s) { return s.g * s.g / (s.h + p.lambda); };
      return 0.5 * (score(left) + score(right) - score(parent));
    }
    case Criterion::kVariance: {
      auto score = [](const Sums& s) { return s.w > 0.0 ? s.g * s.g / s.w : 0.0; };
      return score(left) + score(right) - score(parent);
    }
  }
  return 0.0;
}

bool admissible(const Sums& child, const GrowParams& p) {
  if (child.w < p.min_samples_leaf || child.w <= 0.0) return false;
  return p.criterion != Criterion::kNewton || child.h >= p.min_child_weight;
}

double leaf_value(const Sums& s, const GrowParams& p) {
  switch (p.criterion) {
    case Criterion::kGini:
      return s.w > 0.0 ? s.g / s.w : 0.0;
    case Criterion::kNewton:
      return -s.g / (s.h + p.lambda) * p.leaf_scale;
    case Criterion::kVariance:
      return s.h < 1e-150 ? 0.0 : s.g / s.h * p.leaf_scale;
  }
  return 0.0;
}

}  // namespace

SortedColumns::SortedColumns(const DataTable& table)
    : n_(table.n_rows()), m_(table.n_cols()), cols_(n_ * m_), order_(n_ * m_) {
  if (table.has_missing()) {
    throw Error(ErrorCode::kInvalidArgument, "training table " + table.name() + " has missing values");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < m_; ++j) cols_[j * n_ + i] = table.value(i, j);
  }
  for (std::size_t j = 0; j < m_; ++j) {
    auto begin = order_.begin() + static_cast<std::ptrdiff_t>(j * n_);
    std::iota(begin, begin + static_cast<std::ptrdiff_t>(n_), 0u);
    const double* col = cols_.data() + j * n_;
    std::stable_sort(begin, begin + static_cast<std::ptrdiff_t>(n_),
                     [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
}

double midpoint_threshold(double a, double b) {
  const double t = a + (b - a) / 2.0;
  return t > a ? t : b;
}

DecisionTree grow_tree(const SortedColumns& x, std::span<const double> w,
                       std::span<const double> g, std::span<const double> h,
                       const GrowParams& params, Rng* rng) {
  const std::size_t n = x.n_rows();
  const std::size_t m = x.n_cols();
  const bool subset_features = params.mtry > 0 && params.mtry < m;

  std::vector<TreeNode> nodes(1);
  std::vector<int> node_of(n, -1);
  Sums root;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] <= 0.0) continue;
    node_of[i] = 0;
    root.add(w[i], g[i], h[i]);
  }
  nodes[0].value = leaf_value(root, params);
  nodes[0].cover = root.w;

  auto can_split = [&](int depth, const Sums& s) {
    return (params.max_depth <= 0 || depth < params.max_depth) &&
           s.w >= 2.0 * params.min_samples_leaf;
  };
  std::vector<FrontierNode> frontier{{0, 0, root, can_split(0, root)}};

  while (!frontier.empty()) {
    const std::size_t f_count = frontier.size();
    std::vector<char> allowed;
    std::vector<char> feature_used(m, 1);
    if (subset_features) {
      allowed.assign(f_count * m, 0);
      std::fill(feature_used.begin(), feature_used.end(), 0);
      for (std::size_t k = 0; k < f_count; ++k) {
        if (!frontier[k].active) continue;
        for (const std::size_t f : rng->sample_without_replacement(m, params.mtry)) {
          allowed[k * m + f] = 1;
          feature_used[f] = 1;
        }
      }
    }

    std::vector<Candidate> best_by_feature(m * f_count);
    parallel_for(m, params.threads, [&](std::size_t f) {
      if (!feature_used[f]) return;
      std::vector<Sums> left(f_count);
      std::vector<double> last(f_count, 0.0);
      std::vector<char> seen(f_count, 0);
      Candidate* best = &best_by_feature[f * f_count];
      for (const std::uint32_t row : x.order(f)) {
        const int k = node_of[row];
        if (k < 0) continue;
        const auto ku = static_cast<std::size_t>(k);
        if (!frontier[ku].active || (subset_features && !allowed[ku * m + f])) continue;
        const double v = x.value(row, f);
        if (seen[ku] && v > last[ku]) {
          const Sums right = frontier[ku].sums.minus(left[ku]);
          if (admissible(left[ku], params) && admissible(right, params)) {
            const double gain = split_gain(frontier[ku].sums, left[ku], right, params);
            if (!best[ku].found || gain > best[ku].gain) {
              best[ku] = {gain, midpoint_threshold(last[ku], v), true};
            }
          }
        }
        left[ku].add(w[row], g[row], h[row]);
        last[ku] = v;
        seen[ku] = 1;
      }
    });

    // Reduce in feature order; strict '>' keeps the lowest feature on ties.
    std::vector<int> split_feature(f_count, -1);
    std::vector<double> split_threshold(f_count, 0.0);
    std::vector<double> split_gain_value(f_count, 0.0);
    for (std::size_t k = 0; k < f_count; ++k) {
      double best_gain = kMinSplitGain;
      for (std::size_t f = 0; f < m; ++f) {
        const Candidate& c = best_by_feature[f * f_count + k];
        if (c.found && c.gain > best_gain) {
          best_gain = c.gain;
          split_feature[k] = static_cast<int>(f);
          split_threshold[k] = c.threshold;
          split_gain_value[k] = c.gain;
        }
      }
    }

    // Children get consecutive slots in the next frontier.
    std::vector<int> child_slot(f_count, -1);
    std::vector<FrontierNode> next;
    for (std::size_t k = 0; k < f_count; ++k) {
      if (split_feature[k] < 0) continue;
      TreeNode& parent = nodes[static_cast<std::size_t>(frontier[k].id)];
      parent.feature = split_feature[k];
      parent.threshold = split_threshold[k];
      parent.gain = split_gain_value[k];
      parent.default_left = true;
      parent.left = static_cast<int>(nodes.size());
      parent.right = parent.left + 1;
      nodes.emplace_back();
      nodes.emplace_back();
      child_slot[k] = static_cast<int>(next.size());
      next.push_back({parent.left, frontier[k].depth + 1, {}, false});
      next.push_back({parent.right, frontier[k].depth + 1, {}, false});
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int k = node_of[i];
      if (k < 0) continue;
      const auto ku = static_cast<std::size_t>(k);
      if (child_slot[ku] < 0) {
        node_of[i] = -1;
        continue;
      }
      const bool go_left = x.value(i, static_cast<std::size_t>(split_feature[ku])) <
                           split_threshold[ku];
      const int slot = child_slot[ku] + (go_left ? 0 : 1);
      node_of[i] = slot;
      next[static_cast<std::size_t>(slot)].sums.add(w[i], g[i], h[i]);
    }
    for (auto& c : next) {
      TreeNode& node = nodes[static_cast<std::size_t>(c.id)];
      node.value = leaf_value(c.sums, params);
      node.cover = c.sums.w;
      c.active = can_split(c.depth, c.sums);
    }
    frontier = std::move(next);
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace phishaudit::detail
