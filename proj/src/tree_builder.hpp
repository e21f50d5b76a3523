#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phishaudit/data_table.hpp"
#include "phishaudit/rng.hpp"
#include "phishaudit/tree_model.hpp"

namespace phishaudit::detail {

// Column-major copy of a fully observed table plus, per feature, the row
// indices sorted by value (ties by row index). Built once and shared by every
// tree grown on the same data.
class SortedColumns {
 public:
  explicit SortedColumns(const DataTable& table);

  std::size_t n_rows() const { return n_; }
  std::size_t n_cols() const { return m_; }
  double value(std::size_t row, std::size_t col) const { return cols_[col * n_ + row]; }
  std::span<const std::uint32_t> order(std::size_t col) const {
    return {order_.data() + col * n_, n_};
  }

 private:
  std::size_t n_ = 0, m_ = 0;
  std::vector<double> cols_;
  std::vector<std::uint32_t> order_;
};

enum class Criterion {
  kGini,      // w = row weight, g = w * y
  kNewton,    // w = row weight, g = gradient, h = hessian
  kVariance,  // w = row weight, g = w * residual, h = w * hessian
};

struct GrowParams {
  Criterion criterion = Criterion::kGini;
  int max_depth = 0;  // <= 0: unlimited
  double min_samples_leaf = 1.0;
  double min_child_weight = 0.0;  // on the hessian sum, kNewton only
  double lambda = 0.0;
  std::size_t mtry = 0;  // 0 or >= m: every feature at every node
  double leaf_scale = 1.0;
  std::size_t threads = 1;
};

inline constexpr double kMinSplitGain = 1e-12;

// Level-wise exact greedy growth. Rows with w == 0 are ignored. Per node, the
// best split maximises gain over features ascending then thresholds
// ascending, keeping the first maximum; a split is accepted only if its gain
// exceeds kMinSplitGain and both children satisfy the size constraints.
// Thresholds are midpoints between adjacent distinct values.
DecisionTree grow_tree(const SortedColumns& x, std::span<const double> w,
                       std::span<const double> g, std::span<const double> h,
                       const GrowParams& params, Rng* rng);

double midpoint_threshold(double a, double b);

}  // namespace phishaudit::detail
