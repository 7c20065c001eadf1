#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include "crcvote/error.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/random.hpp"
#include "math_util.hpp"

namespace crcvote {

double DecisionTree::evaluate(const FeatureRow& z) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(z[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

int DecisionTree::depth() const {
  // Preorder layout: a child always follows its parent.
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

double BoostedModel::margin(const FeatureRow& z) const {
  double m = base_margin;
  for (const auto& t : trees) {
    m += t.evaluate(z);
  }
  return m;
}

namespace detail {
namespace {

using IndexList = std::vector<std::uint32_t>;
using SortedLists = std::array<IndexList, kNumFeatures>;

/// Greedy depth-first tree growth over per-feature presorted row lists.
///
/// Features are scanned in ascending index order and thresholds in ascending
/// order; a candidate replaces the incumbent only when strictly better, which
/// resolves ties towards the lowest feature, then the lowest threshold.
template <typename Policy>
class TreeGrower {
 public:
  using Stats = typename Policy::Stats;

  TreeGrower(std::span<const FeatureRow> rows, const Policy& policy, int max_depth, int feature_subsample,
             std::uint64_t rng_seed)
      : rows_(rows), policy_(policy), max_depth_(max_depth), feature_subsample_(feature_subsample), rng_(rng_seed) {}

  DecisionTree grow(const IndexList& active) {
    SortedLists sorted;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      sorted[f] = active;
      std::stable_sort(sorted[f].begin(), sorted[f].end(),
                       [&](std::uint32_t a, std::uint32_t b) { return rows_[a][f] < rows_[b][f]; });
    }
    tree_.nodes.clear();
    grow_node(sorted, 0);
    return std::move(tree_);
  }

 private:
  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(kNumFeatures);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      features[f] = f;
    }
    if (feature_subsample_ >= static_cast<int>(kNumFeatures)) {
      return features;
    }
    auto m = static_cast<std::size_t>(feature_subsample_);
    for (std::size_t i = 0; i < m; ++i) {
      auto j = i + rng_.index(kNumFeatures - i);
      std::swap(features[i], features[j]);
    }
    features.resize(m);
    std::sort(features.begin(), features.end());
    return features;
  }

  int grow_node(const SortedLists& sorted, int depth) {
    Stats node{};
    for (auto i : sorted[0]) {
      policy_.add(node, i);
    }
    auto index = static_cast<int>(tree_.nodes.size());
    TreeNode leaf;
    leaf.value = policy_.leaf_value(node);
    tree_.nodes.push_back(leaf);
    if (depth >= max_depth_ || !policy_.may_split(node)) {
      return index;
    }

    std::optional<double> best_cost;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    for (auto f : candidate_features()) {
      const auto& list = sorted[f];
      Stats left{};
      for (std::size_t p = 0; p + 1 < list.size(); ++p) {
        policy_.add(left, list[p]);
        double v = rows_[list[p]][f];
        double next = rows_[list[p + 1]][f];
        if (v == next) {
          continue;
        }
        auto cost = policy_.split_cost(left, Policy::minus(node, left));
        if (!cost) {
          continue;
        }
        if (!best_cost || *cost < *best_cost - 1e-12 * std::max(1.0, std::abs(*best_cost))) {
          best_cost = cost;
          best_feature = f;
          double mid = v + (next - v) / 2.0;
          best_threshold = mid < next ? mid : v;
        }
      }
    }
    if (!best_cost || !policy_.accept(node, *best_cost)) {
      return index;
    }

    SortedLists left_lists;
    SortedLists right_lists;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      for (auto i : sorted[f]) {
        (rows_[i][best_feature] <= best_threshold ? left_lists[f] : right_lists[f]).push_back(i);
      }
    }
    int left = grow_node(left_lists, depth + 1);
    int right = grow_node(right_lists, depth + 1);
    auto& n = tree_.nodes[static_cast<std::size_t>(index)];
    n.feature = static_cast<int>(best_feature);
    n.threshold = best_threshold;
    n.left = left;
    n.right = right;
    return index;
  }

  std::span<const FeatureRow> rows_;
  const Policy& policy_;
  int max_depth_;
  int feature_subsample_;
  Rng rng_;
  DecisionTree tree_;
};

/// Weighted Gini impurity; cost is sum over children of weight * impurity.
struct GiniPolicy {
  struct Stats {
    double pos = 0.0;
    double neg = 0.0;
  };

  std::span<const int> labels;
  std::span<const double> weights;
  double min_samples_split;

  void add(Stats& s, std::uint32_t i) const {
    (labels[i] == 1 ? s.pos : s.neg) += weights[i];
  }
  static Stats minus(const Stats& a, const Stats& b) { return {a.pos - b.pos, a.neg - b.neg}; }
  double leaf_value(const Stats& s) const { return (s.pos + 1.0) / (s.pos + s.neg + 2.0); }
  bool may_split(const Stats& s) const {
    return s.pos + s.neg >= min_samples_split && s.pos > 0.0 && s.neg > 0.0;
  }
  static double weighted_impurity(const Stats& s) {
    double w = s.pos + s.neg;
    return w - (s.pos * s.pos + s.neg * s.neg) / w;
  }
  std::optional<double> split_cost(const Stats& left, const Stats& right) const {
    if (left.pos + left.neg <= 0.0 || right.pos + right.neg <= 0.0) {
      return std::nullopt;
    }
    return weighted_impurity(left) + weighted_impurity(right);
  }
  // Gini is concave, so any split is no worse than the parent; splitting a
  // 50/50 node on an uninformative feature is what lets a depth-2 tree fit XOR.
  bool accept(const Stats&, double) const { return true; }
};

struct GradientPolicy {
  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };

  std::span<const double> gradients;
  std::span<const double> hessians;
  double lambda;
  double min_child_hessian;

  void add(Stats& s, std::uint32_t i) const {
    s.g += gradients[i];
    s.h += hessians[i];
  }
  static Stats minus(const Stats& a, const Stats& b) { return {a.g - b.g, a.h - b.h}; }
  double leaf_value(const Stats& s) const { return -s.g / (s.h + lambda); }
  bool may_split(const Stats& s) const { return s.h >= 2.0 * min_child_hessian; }
  double score(const Stats& s) const { return s.g * s.g / (s.h + lambda); }
  std::optional<double> split_cost(const Stats& left, const Stats& right) const {
    if (left.h < min_child_hessian || right.h < min_child_hessian) {
      return std::nullopt;
    }
    return -(score(left) + score(right));
  }
  bool accept(const Stats& node, double cost) const { return -cost - score(node) > 1e-12; }
};

}  // namespace

DecisionTree build_classification_tree(const StandardizedData& data, std::span<const double> weights,
                                       const TreeParams& params, int feature_subsample, std::uint64_t rng_seed) {
  IndexList active;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (weights[i] > 0.0) {
      active.push_back(static_cast<std::uint32_t>(i));
    }
  }
  GiniPolicy policy{data.labels, weights, static_cast<double>(params.min_samples_split)};
  TreeGrower<GiniPolicy> grower(data.rows, policy, params.max_depth, feature_subsample, rng_seed);
  return grower.grow(active);
}

DecisionTree build_gradient_tree(std::span<const FeatureRow> rows, std::span<const double> gradients,
                                 std::span<const double> hessians, int max_depth, double lambda,
                                 double min_child_hessian) {
  IndexList active(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    active[i] = static_cast<std::uint32_t>(i);
  }
  GradientPolicy policy{gradients, hessians, lambda, min_child_hessian};
  TreeGrower<GradientPolicy> grower(rows, policy, max_depth, static_cast<int>(kNumFeatures), 0);
  return grower.grow(active);
}

double mean_log_loss(std::span<const double> margins, std::span<const int> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    sum += softplus(margins[i]) - (labels[i] == 1 ? margins[i] : 0.0);
  }
  return sum / static_cast<double>(margins.size());
}

}  // namespace detail

TrainedClassifier train_tree(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  std::vector<double> weights(data.size(), 1.0);
  auto tree = detail::build_classification_tree(data, weights, hp.tree, static_cast<int>(kNumFeatures), 0);
  return TrainedClassifier(LearnerKind::decision_tree, scaling, TreeModel{std::move(tree)});
}

TrainedClassifier train_forest(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  const std::size_t n = data.size();
  ForestModel forest;
  forest.trees.resize(static_cast<std::size_t>(hp.forest.trees));
  // Each tree owns a seed stream derived from (seed, tree index), so trees
  // could be grown in any order with the same result.
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    auto tree_seed = derive_seed(hp.seed, "forest.tree", t);
    std::vector<double> weights(n, 1.0);
    if (hp.forest.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0.0);
      Rng rng(derive_seed(tree_seed, "bootstrap"));
      for (std::size_t draw = 0; draw < n; ++draw) {
        weights[rng.index(n)] += 1.0;
      }
    }
    forest.trees[t] = detail::build_classification_tree(data, weights, hp.tree, hp.forest.feature_subsample,
                                                        derive_seed(tree_seed, "features"));
  }
  return TrainedClassifier(LearnerKind::random_forest, scaling, std::move(forest));
}

TrainedClassifier train_boosted(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  const std::size_t n = data.size();
  auto positives = static_cast<double>(ds.positives());
  auto negatives = static_cast<double>(n) - positives;

  BoostedModel model;
  model.base_margin = std::log(positives / negatives);
  std::vector<double> margins(n, model.base_margin);
  std::vector<double> losses{detail::mean_log_loss(margins, data.labels)};

  std::vector<double> g(n);
  std::vector<double> h(n);
  std::vector<double> trial(n);
  for (int round = 0; round < hp.boost.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double p = detail::sigmoid(margins[i]);
      g[i] = p - static_cast<double>(data.labels[i]);
      h[i] = p * (1.0 - p);
    }
    auto tree = detail::build_gradient_tree(data.rows, g, h, hp.boost.max_depth, hp.boost.lambda,
                                            hp.boost.min_child_hessian);
    // Shrinkage is halved until the round does not increase the training
    // loss; a round that cannot improve contributes nothing.
    double shrink = hp.boost.learning_rate;
    bool accepted = false;
    for (int attempt = 0; attempt < 20 && shrink > 0.0; ++attempt, shrink /= 2.0) {
      DecisionTree scaled = tree;
      for (auto& node : scaled.nodes) {
        node.value *= shrink;
      }
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = margins[i] + scaled.evaluate(data.rows[i]);
      }
      double loss = detail::mean_log_loss(trial, data.labels);
      if (loss <= losses.back()) {
        margins.swap(trial);
        losses.push_back(loss);
        model.trees.push_back(std::move(scaled));
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      losses.push_back(losses.back());
    }
  }
  return TrainedClassifier(LearnerKind::boosted_trees, scaling, std::move(model), false, std::move(losses));
}

}  // namespace crcvote
