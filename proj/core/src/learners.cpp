#include "crcvote/learners.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <type_traits>

#include "crcvote/error.hpp"
#include "crcvote/random.hpp"
#include "math_util.hpp"

namespace crcvote {
namespace {

constexpr std::array<LearnerKind, 6> kRoster{
    LearnerKind::boosted_trees, LearnerKind::logistic_regression, LearnerKind::random_forest,
    LearnerKind::decision_tree, LearnerKind::neural_network,      LearnerKind::linear_svm,
};

constexpr std::array<LearnerKind, 7> kAllKinds{
    LearnerKind::boosted_trees,  LearnerKind::logistic_regression, LearnerKind::random_forest,
    LearnerKind::decision_tree,  LearnerKind::neural_network,      LearnerKind::linear_svm,
    LearnerKind::coin_flip,
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::boosted_trees:
      return "boosted_trees";
    case LearnerKind::logistic_regression:
      return "logistic_regression";
    case LearnerKind::random_forest:
      return "random_forest";
    case LearnerKind::decision_tree:
      return "decision_tree";
    case LearnerKind::neural_network:
      return "neural_network";
    case LearnerKind::linear_svm:
      return "linear_svm";
    case LearnerKind::coin_flip:
      return "coin_flip";
  }
  return "unknown";
}

std::string_view display_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::boosted_trees:
      return "eXtreme Gradient Boosted Trees";
    case LearnerKind::logistic_regression:
      return "Logistic Regression";
    case LearnerKind::random_forest:
      return "Random Forest";
    case LearnerKind::decision_tree:
      return "Decision Tree";
    case LearnerKind::neural_network:
      return "Artificial Neural Network";
    case LearnerKind::linear_svm:
      return "Support Vector Machine";
    case LearnerKind::coin_flip:
      return "Coin Flip (test hook)";
  }
  return "Unknown";
}

std::optional<LearnerKind> parse_kind(std::string_view name, bool allow_test_kinds) {
  for (auto kind : kAllKinds) {
    if (to_string(kind) == name) {
      if (kind == LearnerKind::coin_flip && !allow_test_kinds) {
        return std::nullopt;
      }
      return kind;
    }
  }
  return std::nullopt;
}

std::span<const LearnerKind> default_roster() { return kRoster; }

std::string valid_kind_names() {
  std::string out;
  for (auto kind : kRoster) {
    if (!out.empty()) {
      out += ", ";
    }
    out += to_string(kind);
  }
  return out;
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::usage, "invalid hyperparameter " + what); };
  if (tree.max_depth < 0) fail("tree.max_depth: must be >= 0");
  if (tree.min_samples_split < 2) fail("tree.min_samples_split: must be >= 2");
  if (forest.trees < 1) fail("forest.trees: must be >= 1");
  if (forest.feature_subsample < 1 || forest.feature_subsample > static_cast<int>(kNumFeatures)) {
    fail("forest.feature_subsample: must lie in [1, 5]");
  }
  if (boost.rounds < 0) fail("boost.rounds: must be >= 0");
  if (!(boost.learning_rate >= 0.0 && std::isfinite(boost.learning_rate))) {
    fail("boost.learning_rate: must be >= 0");
  }
  if (boost.max_depth < 0) fail("boost.max_depth: must be >= 0");
  if (!(boost.lambda > 0.0)) fail("boost.lambda: must be > 0");
  if (!(boost.min_child_hessian >= 0.0)) fail("boost.min_child_hessian: must be >= 0");
  if (!(logistic.lambda > 0.0)) fail("logistic.lambda: must be > 0");
  if (logistic.max_iterations < 1) fail("logistic.max_iterations: must be >= 1");
  if (!(svm.c > 0.0)) fail("svm.c: must be > 0");
  if (svm.max_passes < 1) fail("svm.max_passes: must be >= 1");
  if (mlp.hidden_width < 1) fail("mlp.hidden_width: must be >= 1");
  if (!(mlp.weight_decay > 0.0)) fail("mlp.weight_decay: must be > 0");
  if (mlp.restarts < 1) fail("mlp.restarts: must be >= 1");
  if (mlp.max_iterations < 1) fail("mlp.max_iterations: must be >= 1");
}

void Hyperparams::apply(const KeyValueConfig& config) {
  auto set_int = [&](const std::string& key, int& field) {
    if (auto v = config.get_int(key)) {
      field = static_cast<int>(*v);
    }
  };
  auto set_double = [&](const std::string& key, double& field) {
    if (auto v = config.get_double(key)) {
      field = *v;
    }
  };
  static const std::array<std::string_view, 18> known{
      "tree.max_depth",       "tree.min_samples_split", "forest.trees",
      "forest.feature_subsample", "forest.bootstrap",   "boost.rounds",
      "boost.learning_rate",  "boost.max_depth",        "boost.lambda",
      "boost.min_child_hessian", "logistic.lambda",     "logistic.max_iterations",
      "svm.c",                "svm.max_passes",         "mlp.hidden_width",
      "mlp.weight_decay",     "mlp.restarts",           "mlp.max_iterations",
  };
  static const std::array<std::string_view, 6> prefixes{"tree.", "forest.", "boost.", "logistic.", "svm.", "mlp."};
  for (const auto& [key, value] : config.values()) {
    bool learner_key = std::any_of(prefixes.begin(), prefixes.end(),
                                   [&](std::string_view p) { return key.rfind(p, 0) == 0; });
    bool is_known = std::find(known.begin(), known.end(), std::string_view(key)) != known.end();
    if (learner_key && !is_known) {
      throw Error(ErrorCategory::usage, "unknown hyperparameter '" + key + "'");
    }
  }
  set_int("tree.max_depth", tree.max_depth);
  set_int("tree.min_samples_split", tree.min_samples_split);
  set_int("forest.trees", forest.trees);
  set_int("forest.feature_subsample", forest.feature_subsample);
  if (auto v = config.get_bool("forest.bootstrap")) {
    forest.bootstrap = *v;
  }
  set_int("boost.rounds", boost.rounds);
  set_double("boost.learning_rate", boost.learning_rate);
  set_int("boost.max_depth", boost.max_depth);
  set_double("boost.lambda", boost.lambda);
  set_double("boost.min_child_hessian", boost.min_child_hessian);
  set_double("logistic.lambda", logistic.lambda);
  set_int("logistic.max_iterations", logistic.max_iterations);
  set_double("svm.c", svm.c);
  set_int("svm.max_passes", svm.max_passes);
  set_int("mlp.hidden_width", mlp.hidden_width);
  set_double("mlp.weight_decay", mlp.weight_decay);
  set_int("mlp.restarts", mlp.restarts);
  set_int("mlp.max_iterations", mlp.max_iterations);
  validate();
}

double LogisticModel::margin(const FeatureRow& z) const {
  double m = intercept;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    m += weights[f] * z[f];
  }
  return m;
}

double SvmModel::margin(const FeatureRow& z) const {
  double m = bias;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    m += weights[f] * z[f];
  }
  return m;
}

double MlpModel::logit(const FeatureRow& z) const {
  double out = output_bias;
  for (int j = 0; j < hidden_width; ++j) {
    double a = hidden_bias[static_cast<std::size_t>(j)];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      a += hidden_weights[static_cast<std::size_t>(j) * kNumFeatures + f] * z[f];
    }
    out += output_weights[static_cast<std::size_t>(j)] * std::tanh(a);
  }
  return out;
}

TrainedClassifier::TrainedClassifier(LearnerKind kind, ScalingParams scaling, ModelParameters parameters,
                                     bool single_class_warning, std::vector<double> training_loss)
    : kind_(kind),
      scaling_(scaling),
      parameters_(std::move(parameters)),
      single_class_warning_(single_class_warning),
      training_loss_(std::move(training_loss)) {}

double TrainedClassifier::score_standardized(const FeatureRow& z) const {
  return std::visit(
      Overloaded{
          [](const ConstantModel& m) { return m.probability; },
          [&](const LogisticModel& m) { return detail::sigmoid(m.margin(z)); },
          [&](const TreeModel& m) { return m.tree.evaluate(z); },
          [&](const ForestModel& m) {
            double sum = 0.0;
            for (const auto& t : m.trees) {
              sum += t.evaluate(z);
            }
            return sum / static_cast<double>(m.trees.size());
          },
          [&](const BoostedModel& m) { return detail::sigmoid(m.margin(z)); },
          [&](const SvmModel& m) { return detail::sigmoid(m.platt_a * m.margin(z) + m.platt_c); },
          [&](const MlpModel& m) { return detail::sigmoid(m.logit(z)); },
          [&](const CoinFlipModel& m) {
            std::uint64_t h = m.seed;
            for (double v : z) {
              h = derive_seed(h ^ std::bit_cast<std::uint64_t>(v), "coin_flip");
            }
            return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
          },
      },
      parameters_);
}

int TrainedClassifier::predict(const FeatureVector& x) const { return label_from_score(score(x)); }

TrainedClassifier train_coin_flip(const LabeledDataset& ds, const Hyperparams& hp) {
  return TrainedClassifier(LearnerKind::coin_flip, fit_scaling(ds),
                           CoinFlipModel{derive_seed(hp.seed, "coin_flip.model")});
}

TrainedClassifier train(LearnerKind kind, const LabeledDataset& ds, const Hyperparams& hp) {
  hp.validate();
  if (ds.empty()) {
    throw Error(ErrorCategory::usage, "cannot train on an empty dataset");
  }
  auto positives = ds.positives();
  if (positives == 0 || positives == ds.size()) {
    double p = (static_cast<double>(positives) + 1.0) / (static_cast<double>(ds.size()) + 2.0);
    return TrainedClassifier(kind, fit_scaling(ds), ConstantModel{p}, true);
  }
  switch (kind) {
    case LearnerKind::boosted_trees:
      return train_boosted(ds, hp);
    case LearnerKind::logistic_regression:
      return train_logistic(ds, hp);
    case LearnerKind::random_forest:
      return train_forest(ds, hp);
    case LearnerKind::decision_tree:
      return train_tree(ds, hp);
    case LearnerKind::neural_network:
      return train_mlp(ds, hp);
    case LearnerKind::linear_svm:
      return train_svm(ds, hp);
    case LearnerKind::coin_flip:
      return train_coin_flip(ds, hp);
  }
  throw Error(ErrorCategory::internal, "unhandled learner kind");
}

}  // namespace crcvote
