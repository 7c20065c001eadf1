#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crcvote/data.hpp"
#include "crcvote/optim.hpp"
#include "crcvote/text.hpp"

namespace crcvote {

/// Base learner roster. `coin_flip` is a test hook (a deterministic random
/// scorer) and is never part of the default roster.
enum class LearnerKind {
  boosted_trees,
  logistic_regression,
  random_forest,
  decision_tree,
  neural_network,
  linear_svm,
  coin_flip,
};

std::string_view to_string(LearnerKind kind);
/// Human-readable name used in report tables.
std::string_view display_name(LearnerKind kind);
/// Accepts the names produced by to_string. `coin_flip` only when
/// `allow_test_kinds` is set.
std::optional<LearnerKind> parse_kind(std::string_view name, bool allow_test_kinds = false);
/// The six production kinds, in roster order.
std::span<const LearnerKind> default_roster();
std::string valid_kind_names();

struct TreeParams {
  int max_depth = 4;
  int min_samples_split = 4;
};

struct ForestParams {
  int trees = 100;
  int feature_subsample = 3;  // ceil(sqrt(5))
  bool bootstrap = true;
};

struct BoostParams {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double lambda = 1.0;
  double min_child_hessian = 1.0;
};

struct LogisticParams {
  double lambda = 1.0;  // L2 on weights; intercept unpenalized
  int max_iterations = 100;
  double grad_tolerance = 1e-8;
};

struct SvmParams {
  double c = 1.0;
  int max_passes = 1000;
  double gap_tolerance = 1e-6;  // relative duality gap
};

struct MlpParams {
  int hidden_width = 8;
  double weight_decay = 1e-4;
  int restarts = 5;
  int max_iterations = 200;
};

struct Hyperparams {
  TreeParams tree;
  ForestParams forest;
  BoostParams boost;
  LogisticParams logistic;
  SvmParams svm;
  MlpParams mlp;
  std::uint64_t seed = 0;

  /// Throws Error(usage) naming the offending setting.
  void validate() const;

  /// Overrides fields from dotted keys (`tree.max_depth`, `forest.trees`, ...).
  /// Unknown keys under a learner prefix are rejected.
  void apply(const KeyValueConfig& config);
};

/// Binary tree over standardized rows; `x[feature] <= threshold` goes left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(const FeatureRow& z) const;
  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct ConstantModel {
  double probability = 0.5;
  bool operator==(const ConstantModel&) const = default;
};

struct LogisticModel {
  std::array<double, kNumFeatures> weights{};
  double intercept = 0.0;

  double margin(const FeatureRow& z) const;
  bool operator==(const LogisticModel&) const = default;
};

/// Leaf values are Laplace-smoothed class fractions.
struct TreeModel {
  DecisionTree tree;
  bool operator==(const TreeModel&) const = default;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  bool operator==(const ForestModel&) const = default;
};

/// Additive logistic model; leaf values already include the shrinkage.
struct BoostedModel {
  double base_margin = 0.0;
  std::vector<DecisionTree> trees;

  double margin(const FeatureRow& z) const;
  bool operator==(const BoostedModel&) const = default;
};

/// Linear SVM with Platt-scaled output sigmoid(platt_a * margin + platt_c).
struct SvmModel {
  std::array<double, kNumFeatures> weights{};
  double bias = 0.0;
  double platt_a = 1.0;
  double platt_c = 0.0;

  double margin(const FeatureRow& z) const;
  bool operator==(const SvmModel&) const = default;
};

/// One tanh hidden layer, sigmoid output.
struct MlpModel {
  int hidden_width = 0;
  std::vector<double> hidden_weights;  // hidden_width x kNumFeatures, row-major
  std::vector<double> hidden_bias;
  std::vector<double> output_weights;
  double output_bias = 0.0;

  double logit(const FeatureRow& z) const;
  bool operator==(const MlpModel&) const = default;
};

struct CoinFlipModel {
  std::uint64_t seed = 0;
  bool operator==(const CoinFlipModel&) const = default;
};

using ModelParameters = std::variant<ConstantModel, LogisticModel, TreeModel, ForestModel, BoostedModel,
                                     SvmModel, MlpModel, CoinFlipModel>;

/// A fitted base learner. Immutable; safe to share across threads.
class TrainedClassifier {
 public:
  TrainedClassifier(LearnerKind kind, ScalingParams scaling, ModelParameters parameters,
                    bool single_class_warning = false, std::vector<double> training_loss = {});

  LearnerKind kind() const { return kind_; }
  const ScalingParams& scaling() const { return scaling_; }
  const ModelParameters& parameters() const { return parameters_; }
  /// Training data held only one class; the model is a constant.
  bool single_class_warning() const { return single_class_warning_; }
  /// Per-iteration training loss where the learner records one (boosting).
  const std::vector<double>& training_loss() const { return training_loss_; }

  /// Positive-class posterior, the discriminant of the positive label.
  double score(const FeatureVector& x) const { return score_standardized(scaling_.apply(x)); }
  double score_standardized(const FeatureRow& z) const;
  int predict(const FeatureVector& x) const;

  bool operator==(const TrainedClassifier& other) const {
    return kind_ == other.kind_ && scaling_ == other.scaling_ && parameters_ == other.parameters_;
  }

 private:
  LearnerKind kind_;
  ScalingParams scaling_;
  ModelParameters parameters_;
  bool single_class_warning_ = false;
  std::vector<double> training_loss_;
};

/// Threshold rule shared by every classifier: positive iff score >= 0.5.
inline int label_from_score(double score) { return score >= 0.5 ? 1 : 0; }

/// Trains one learner. Deterministic in (kind, ds, hp). A dataset with a
/// single class yields a constant classifier at the Laplace-smoothed
/// prevalence with single_class_warning() set.
TrainedClassifier train(LearnerKind kind, const LabeledDataset& ds, const Hyperparams& hp);

TrainedClassifier train_logistic(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_tree(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_forest(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_boosted(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_svm(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_mlp(const LabeledDataset& ds, const Hyperparams& hp);
TrainedClassifier train_coin_flip(const LabeledDataset& ds, const Hyperparams& hp);

namespace detail {

/// Sum of logistic losses plus (lambda/2)|w|^2.
/// Parameter layout: kNumFeatures weights followed by the intercept.
optim::Objective logistic_objective(const StandardizedData& data, double lambda);

/// Mean cross-entropy plus (weight_decay/2)(|W1|^2 + |w2|^2).
/// Parameter layout: W1 (row-major), b1, w2, b2.
optim::Objective mlp_objective(const StandardizedData& data, int hidden_width, double weight_decay);
std::size_t mlp_parameter_count(int hidden_width);
MlpModel mlp_from_parameters(int hidden_width, const optim::Vector& theta);
/// Seeded uniform(+-1/sqrt(fan_in)) initialization with exact zeros redrawn.
optim::Vector mlp_initial_parameters(int hidden_width, std::uint64_t seed);

/// CART with weighted Gini impurity over rows with positive weight
/// (bootstrap multiplicities). `feature_subsample` < kNumFeatures draws that
/// many features per node from `rng_seed`'s stream.
DecisionTree build_classification_tree(const StandardizedData& data, std::span<const double> weights,
                                       const TreeParams& params, int feature_subsample, std::uint64_t rng_seed);

/// Second-order regression tree on gradient/hessian statistics; leaf weight
/// -G / (H + lambda).
DecisionTree build_gradient_tree(std::span<const FeatureRow> rows, std::span<const double> gradients,
                                 std::span<const double> hessians, int max_depth, double lambda,
                                 double min_child_hessian);

/// Mean logistic loss of margins against labels.
double mean_log_loss(std::span<const double> margins, std::span<const int> labels);

}  // namespace detail

}  // namespace crcvote
