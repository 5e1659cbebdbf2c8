#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/rng.hpp"

namespace pobs_sl {

/// Flat CART node. A leaf has feature == -1. Rows with x[feature] <= threshold
/// go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict_row(const Matrix& x, Eigen::Index r) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
      const auto& nd = nodes[at];
      at = static_cast<std::size_t>(x(r, nd.feature) <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[at].value;
  }
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_leaf = 1;
  std::size_t mtry = 0;       // 0 or >= d: every feature, in column order
};

namespace detail {

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, const Vector& y, const TreeParams& params, Rng* rng)
      : x_(x), y_(y), params_(params), rng_(rng), d_(static_cast<std::size_t>(x.cols())) {}

  RegressionTree grow(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    tree_.nodes.emplace_back();
    split(0, std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  void split(std::size_t node, std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t s = rows.size();
    double sum = 0.0;
    for (auto i : rows) sum += y_(static_cast<Eigen::Index>(i));
    const double mean = sum / static_cast<double>(s);
    tree_.nodes[node].value = mean;

    if ((params_.max_depth > 0 && depth >= params_.max_depth) || s < 2 * params_.min_leaf) return;
    double sse = 0.0;
    for (auto i : rows) {
      const double r = y_(static_cast<Eigen::Index>(i)) - mean;
      sse += r * r;
    }
    if (sse <= 0.0) return;

    const auto features = candidate_features();
    const double base = sum * sum / static_cast<double>(s);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::size_t>> order(s);
    for (auto f : features) {
      for (std::size_t t = 0; t < s; ++t)
        order[t] = {x_(static_cast<Eigen::Index>(rows[t]), static_cast<Eigen::Index>(f)), t};
      std::sort(order.begin(), order.end());
      double left_sum = 0.0;
      for (std::size_t p = 1; p < s; ++p) {
        left_sum += y_(static_cast<Eigen::Index>(rows[order[p - 1].second]));
        if (order[p - 1].first == order[p].first) continue;
        if (p < params_.min_leaf || s - p < params_.min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(p) +
                            right_sum * right_sum / static_cast<double>(s - p) - base;
        // Gains equal up to rounding (e.g. two features inducing the same
        // partition) keep the earlier candidate.
        if (gain > best_gain + 1e-12 * std::abs(best_gain)) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          const double lo = order[p - 1].first, hi = order[p].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0 || best_gain <= 1e-12 * sse) return;

    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      if (x_(static_cast<Eigen::Index>(i), best_feature) <= best_threshold)
        left.push_back(i);
      else
        right.push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const int right_id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = best_feature;
    tree_.nodes[node].threshold = best_threshold;
    tree_.nodes[node].left = left_id;
    tree_.nodes[node].right = right_id;
    split(static_cast<std::size_t>(left_id), std::move(left), depth + 1);
    split(static_cast<std::size_t>(right_id), std::move(right), depth + 1);
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(d_);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (params_.mtry == 0 || params_.mtry >= d_ || rng_ == nullptr) return all;
    // Partial Fisher-Yates: first mtry slots become a uniform subset.
    for (std::size_t i = 0; i < params_.mtry; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_->below(d_ - i));
      std::swap(all[i], all[j]);
    }
    all.resize(params_.mtry);
    return all;
  }

  const Matrix& x_;
  const Vector& y_;
  TreeParams params_;
  Rng* rng_;
  std::size_t d_;
  RegressionTree tree_;
};

}  // namespace detail

inline RegressionTree fit_tree(const Matrix& x, const Vector& y, const TreeParams& params,
                               std::vector<std::size_t> rows, Rng* rng = nullptr) {
  return detail::TreeGrower(x, y, params, rng).grow(std::move(rows));
}

inline RegressionTree fit_tree(const Matrix& x, const Vector& y, const TreeParams& params) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(x, y, params, std::move(rows));
}

struct ForestParams {
  std::size_t n_trees = 100;
  TreeParams tree;
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

struct RandomForest {
  std::vector<RegressionTree> trees;
};

/// Tree t draws its bootstrap sample and feature subsets from substream t of
/// the forest seed, so each tree is reproducible on its own.
inline RandomForest fit_forest(const Matrix& x, const Vector& y, const ForestParams& params) {
  RandomForest forest;
  forest.trees.reserve(params.n_trees);
  const auto n = static_cast<std::size_t>(x.rows());
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(params.seed, t);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees.push_back(fit_tree(x, y, params.tree, std::move(rows), &rng));
  }
  return forest;
}

inline Vector predict_tree(const RegressionTree& tree, const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = tree.predict_row(x, r);
  return out;
}

inline Vector predict_forest(const RandomForest& forest, const Matrix& x) {
  Vector out = Vector::Zero(x.rows());
  for (const auto& tree : forest.trees)
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) += tree.predict_row(x, r);
  return out / static_cast<double>(forest.trees.size());
}

}  // namespace pobs_sl
