#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "opseq/classify/dataset.hpp"
#include "opseq/parallel.hpp"
#include "opseq/random.hpp"

namespace opseq {

enum class MaxFeatures { sqrt, all };

struct RfParams {
  int n_estimators = 100;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features = MaxFeatures::sqrt;  // "auto": floor(sqrt(D))
  int max_depth = 0;                             // 0 = unlimited
  bool bootstrap = true;
  Seed seed = 0;

  void validate() const {
    if (n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;     // x[feature] <= threshold
  int right = -1;
  Label label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  Label predict(std::span<const double> x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(k)];
      k = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].label;
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const LabeledDataset& data, const RfParams& p, Seed seed)
      : data_(data), p_(p), rng_(seed) {
    const std::size_t d = data.dim();
    features_per_node_ =
        p.max_features == MaxFeatures::all
            ? d
            : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(double(d)))));
    feature_order_.resize(d);
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
    std::size_t left_count = 0;
  };

  std::vector<double> class_counts(std::span<const std::size_t> rows) const {
    std::vector<double> c(data_.class_count, 0.0);
    for (std::size_t r : rows) c[static_cast<std::size_t>(data_.y[r])] += 1.0;
    return c;
  }

  static double gini(std::span<const double> counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += c * c;
    return 1.0 - s / (total * total);
  }

  // Best Gini split over up to features_per_node_ randomly drawn features that
  // are not constant on this node. Splits with no impurity gain are accepted,
  // so an impure node with distinct rows always splits.
  Split best_split(std::vector<std::size_t>& rows) {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const std::size_t n = rows.size();
    const double total = static_cast<double>(n);
    const auto parent = class_counts(rows);
    const auto min_leaf = static_cast<std::size_t>(p_.min_samples_leaf);

    std::size_t evaluated = 0;
    const std::size_t d = feature_order_.size();
    for (std::size_t k = 0; k < d && evaluated < features_per_node_; ++k) {
      const std::size_t pick = uniform_index(rng_, k, d - 1);
      std::swap(feature_order_[k], feature_order_[pick]);
      const std::size_t f = feature_order_[k];

      std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        const double va = data_.X(a, f), vb = data_.X(b, f);
        return va < vb || (va == vb && a < b);
      });
      if (data_.X(rows.front(), f) == data_.X(rows.back(), f)) continue;
      ++evaluated;

      std::vector<double> left(data_.class_count, 0.0);
      std::vector<double> right = parent;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto lab = static_cast<std::size_t>(data_.y[rows[i]]);
        left[lab] += 1.0;
        right[lab] -= 1.0;
        const double v = data_.X(rows[i], f);
        const double v_next = data_.X(rows[i + 1], f);
        if (v == v_next) continue;
        const std::size_t nl = i + 1;
        if (nl < min_leaf || n - nl < min_leaf) continue;
        const double wl = static_cast<double>(nl);
        const double wr = total - wl;
        const double imp = (wl * gini(left, wl) + wr * gini(right, wr)) / total;
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = static_cast<int>(f);
          best.threshold = v + (v_next - v) / 2.0;
          // Midpoint can round up to v_next for adjacent doubles.
          if (!(best.threshold < v_next)) best.threshold = v;
          best.left_count = nl;
        }
      }
    }
    return best;
  }

  int make_leaf(std::span<const std::size_t> rows) {
    TreeNode leaf;
    leaf.label = argmax_label(class_counts(rows));
    tree_.nodes.push_back(leaf);
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  int grow(std::vector<std::size_t>& rows, int depth) {
    const auto counts = class_counts(rows);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || rows.size() < static_cast<std::size_t>(p_.min_samples_split) ||
        (p_.max_depth > 0 && depth >= p_.max_depth))
      return make_leaf(rows);

    const Split s = best_split(rows);
    if (s.feature < 0) return make_leaf(rows);

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (data_.X(r, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(r);

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({s.feature, s.threshold, -1, -1, argmax_label(counts)});
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const LabeledDataset& data_;
  const RfParams& p_;
  Rng rng_;
  std::size_t features_per_node_ = 1;
  std::vector<std::size_t> feature_order_;
  DecisionTree tree_;
};

}  // namespace detail

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::size_t class_count = 0;
  std::size_t dim = 0;
};

// CART trees (Gini) on bootstrap resamples or the full set; tree t is seeded
// with derive_seed(seed, t).
inline RandomForest rf_train(const LabeledDataset& data, const RfParams& params, unsigned threads = 1) {
  params.validate();
  data.validate();
  if (data.size() == 0) throw DataError("random forest training set is empty");
  RandomForest forest;
  forest.class_count = data.class_count;
  forest.dim = data.dim();
  forest.trees.resize(static_cast<std::size_t>(params.n_estimators));
  parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
    const Seed seed = derive_seed(params.seed, t);
    Rng sampler(derive_seed(seed, 1));
    std::vector<std::size_t> rows(data.size());
    if (params.bootstrap) {
      for (auto& r : rows) r = uniform_index(sampler, 0, data.size() - 1);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    detail::TreeBuilder builder(data, params, derive_seed(seed, 2));
    forest.trees[t] = builder.build(std::move(rows));
  });
  return forest;
}

// Majority vote over trees; ties to the smaller label.
inline Label predict(const RandomForest& f, std::span<const double> query) {
  check_query(query, f.dim);
  std::vector<double> votes(f.class_count, 0.0);
  for (const auto& t : f.trees) votes[static_cast<std::size_t>(t.predict(query))] += 1.0;
  return argmax_label(votes);
}

}  // namespace opseq
