#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "crcvote/ensemble.hpp"
#include "crcvote/error.hpp"

namespace crcvote {
namespace {

using nlohmann::json;

[[noreturn]] void mismatch(const std::string& what) {
  throw Error(ErrorCategory::model, "model schema mismatch: " + what);
}

double finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCategory::numeric, std::string("non-finite ") + what + " cannot be saved");
  }
  return v;
}

json weights_json(const std::array<double, kNumFeatures>& w) {
  json out = json::array();
  for (double v : w) {
    out.push_back(finite(v, "weight"));
  }
  return out;
}

json vector_json(const std::vector<double>& w) {
  json out = json::array();
  for (double v : w) {
    out.push_back(finite(v, "weight"));
  }
  return out;
}

json tree_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", finite(n.threshold, "threshold")},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", finite(n.value, "leaf value")}});
  }
  return nodes;
}

json scaling_json(const ScalingParams& s) {
  json out = json::object();
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    out[std::string(kFeatureNames[i])] = {{"mean", finite(s.continuous[i].mean, "scaling mean")},
                                          {"stddev", finite(s.continuous[i].stddev, "scaling stddev")}};
  }
  return out;
}

struct ModelToJson {
  json operator()(const ConstantModel& m) const {
    return {{"type", "constant"}, {"probability", finite(m.probability, "probability")}};
  }
  json operator()(const LogisticModel& m) const {
    return {{"type", "logistic"}, {"weights", weights_json(m.weights)}, {"intercept", finite(m.intercept, "intercept")}};
  }
  json operator()(const TreeModel& m) const { return {{"type", "tree"}, {"nodes", tree_json(m.tree)}}; }
  json operator()(const ForestModel& m) const {
    json trees = json::array();
    for (const auto& t : m.trees) {
      trees.push_back(tree_json(t));
    }
    return {{"type", "forest"}, {"trees", trees}};
  }
  json operator()(const BoostedModel& m) const {
    json trees = json::array();
    for (const auto& t : m.trees) {
      trees.push_back(tree_json(t));
    }
    return {{"type", "boosted"}, {"base_margin", finite(m.base_margin, "base margin")}, {"trees", trees}};
  }
  json operator()(const SvmModel& m) const {
    return {{"type", "svm"},
            {"weights", weights_json(m.weights)},
            {"bias", finite(m.bias, "bias")},
            {"platt_a", finite(m.platt_a, "Platt slope")},
            {"platt_c", finite(m.platt_c, "Platt offset")}};
  }
  json operator()(const MlpModel& m) const {
    return {{"type", "mlp"},
            {"hidden_width", m.hidden_width},
            {"hidden_weights", vector_json(m.hidden_weights)},
            {"hidden_bias", vector_json(m.hidden_bias)},
            {"output_weights", vector_json(m.output_weights)},
            {"output_bias", finite(m.output_bias, "output bias")}};
  }
  json operator()(const CoinFlipModel& m) const { return {{"type", "coin_flip"}, {"seed", m.seed}}; }
};

// Readers. json::at and get<> throw json exceptions on missing or mistyped
// fields; deserialize_model turns those into schema mismatches.

double read_double(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) {
    mismatch(std::string("'") + key + "' must be a number");
  }
  double d = v.get<double>();
  if (!std::isfinite(d)) {
    mismatch(std::string("'") + key + "' must be finite");
  }
  return d;
}

std::vector<double> read_doubles(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) {
    mismatch(std::string("'") + key + "' must be an array");
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      mismatch(std::string("'") + key + "' must hold numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::array<double, kNumFeatures> read_weights(const json& j, const char* key) {
  auto v = read_doubles(j, key);
  if (v.size() != kNumFeatures) {
    mismatch(std::string("'") + key + "' must have " + std::to_string(kNumFeatures) + " entries");
  }
  std::array<double, kNumFeatures> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

int read_int(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    mismatch(std::string("'") + key + "' must be an integer");
  }
  return v.get<int>();
}

DecisionTree read_tree(const json& j) {
  if (!j.is_array() || j.empty()) {
    mismatch("a tree must be a non-empty node array");
  }
  DecisionTree t;
  const auto count = static_cast<int>(j.size());
  for (int i = 0; i < count; ++i) {
    const auto& n = j[static_cast<std::size_t>(i)];
    TreeNode node;
    node.feature = read_int(n, "feature");
    node.threshold = read_double(n, "threshold");
    node.left = read_int(n, "left");
    node.right = read_int(n, "right");
    node.value = read_double(n, "value");
    if (node.feature >= static_cast<int>(kNumFeatures) || node.feature < -1) {
      mismatch("tree node " + std::to_string(i) + " has an invalid feature index");
    }
    if (!node.is_leaf()) {
      // Children always follow their parent, which also rules out cycles.
      auto child_ok = [&](int c) { return c > i && c < count; };
      if (!child_ok(node.left) || !child_ok(node.right)) {
        mismatch("tree node " + std::to_string(i) + " has an invalid child index");
      }
    }
    t.nodes.push_back(node);
  }
  return t;
}

std::vector<DecisionTree> read_trees(const json& j) {
  const auto& v = j.at("trees");
  if (!v.is_array()) {
    mismatch("'trees' must be an array");
  }
  std::vector<DecisionTree> out;
  for (const auto& t : v) {
    out.push_back(read_tree(t));
  }
  return out;
}

ModelParameters read_model(const json& j) {
  auto type = j.at("type").get<std::string>();
  if (type == "constant") {
    return ConstantModel{read_double(j, "probability")};
  }
  if (type == "logistic") {
    return LogisticModel{read_weights(j, "weights"), read_double(j, "intercept")};
  }
  if (type == "tree") {
    return TreeModel{read_tree(j.at("nodes"))};
  }
  if (type == "forest") {
    auto trees = read_trees(j);
    if (trees.empty()) {
      mismatch("a forest needs at least one tree");
    }
    return ForestModel{std::move(trees)};
  }
  if (type == "boosted") {
    return BoostedModel{read_double(j, "base_margin"), read_trees(j)};
  }
  if (type == "svm") {
    return SvmModel{read_weights(j, "weights"), read_double(j, "bias"), read_double(j, "platt_a"),
                    read_double(j, "platt_c")};
  }
  if (type == "mlp") {
    MlpModel m;
    m.hidden_width = read_int(j, "hidden_width");
    m.hidden_weights = read_doubles(j, "hidden_weights");
    m.hidden_bias = read_doubles(j, "hidden_bias");
    m.output_weights = read_doubles(j, "output_weights");
    m.output_bias = read_double(j, "output_bias");
    auto h = static_cast<std::size_t>(std::max(m.hidden_width, 0));
    if (m.hidden_width < 1 || m.hidden_weights.size() != h * kNumFeatures || m.hidden_bias.size() != h ||
        m.output_weights.size() != h) {
      mismatch("mlp layer sizes disagree with hidden_width");
    }
    return m;
  }
  if (type == "coin_flip") {
    return CoinFlipModel{j.at("seed").get<std::uint64_t>()};
  }
  mismatch("unknown model type '" + type + "'");
}

bool type_fits_kind(const ModelParameters& p, LearnerKind kind) {
  if (std::holds_alternative<ConstantModel>(p)) {
    return true;
  }
  switch (kind) {
    case LearnerKind::boosted_trees:
      return std::holds_alternative<BoostedModel>(p);
    case LearnerKind::logistic_regression:
      return std::holds_alternative<LogisticModel>(p);
    case LearnerKind::random_forest:
      return std::holds_alternative<ForestModel>(p);
    case LearnerKind::decision_tree:
      return std::holds_alternative<TreeModel>(p);
    case LearnerKind::neural_network:
      return std::holds_alternative<MlpModel>(p);
    case LearnerKind::linear_svm:
      return std::holds_alternative<SvmModel>(p);
    case LearnerKind::coin_flip:
      return std::holds_alternative<CoinFlipModel>(p);
  }
  return false;
}

ScalingParams read_scaling(const json& j) {
  if (!j.is_object()) {
    mismatch("'scaling' must be an object");
  }
  ScalingParams s;
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    const auto& f = j.at(std::string(kFeatureNames[i]));
    s.continuous[i] = {read_double(f, "mean"), read_double(f, "stddev")};
    if (s.continuous[i].stddev < 0.0) {
      mismatch("negative stddev for " + std::string(kFeatureNames[i]));
    }
  }
  return s;
}

}  // namespace

std::string serialize_model(const MajorityVoteEnsemble& e) {
  json doc;
  doc["format_version"] = std::string(kModelFormatVersion);
  doc["created_with"] = e.created_with();
  doc["feature_schema"] = json::array();
  for (auto name : kFeatureNames) {
    doc["feature_schema"].push_back(std::string(name));
  }
  doc["label_column"] = std::string(kLabelColumn);
  doc["tie_break"] = std::string(to_string(e.tie_break()));
  doc["fit_binarization_threshold"] = e.fit_threshold() ? json(*e.fit_threshold()) : json(nullptr);
  doc["scaling"] = scaling_json(e.members().front().scaling());
  doc["members"] = json::array();
  for (const auto& m : e.members()) {
    doc["members"].push_back({{"kind", std::string(to_string(m.kind()))},
                              {"scaling", scaling_json(m.scaling())},
                              {"single_class_warning", m.single_class_warning()},
                              {"model", std::visit(ModelToJson{}, m.parameters())}});
  }
  return doc.dump(2) + "\n";
}

MajorityVoteEnsemble deserialize_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::model, std::string("corrupt model file: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCategory::model, "corrupt model file: top level is not an object");
  }
  try {
    const auto& version = doc.at("format_version");
    if (!version.is_string() || version.get<std::string>() != kModelFormatVersion) {
      throw Error(ErrorCategory::model, "unsupported model format version " + version.dump() +
                                            " (this build reads version " + std::string(kModelFormatVersion) + ")");
    }
    auto schema = doc.at("feature_schema").get<std::vector<std::string>>();
    if (schema.size() != kNumFeatures || !std::equal(schema.begin(), schema.end(), kFeatureNames.begin())) {
      mismatch("feature_schema differs from " + std::string(kDatasetHeader));
    }
    if (doc.at("label_column").get<std::string>() != kLabelColumn) {
      mismatch("label_column must be '" + std::string(kLabelColumn) + "'");
    }
    if (doc.at("tie_break").get<std::string>() != to_string(TieBreak::mean_score_then_positive)) {
      mismatch("unknown tie_break rule");
    }
    std::optional<double> threshold;
    const auto& t = doc.at("fit_binarization_threshold");
    if (!t.is_null()) {
      threshold = read_double(doc, "fit_binarization_threshold");
    }
    read_scaling(doc.at("scaling"));
    const auto& members = doc.at("members");
    if (!members.is_array() || members.empty()) {
      mismatch("'members' must be a non-empty array");
    }
    std::vector<TrainedClassifier> out;
    for (const auto& m : members) {
      auto name = m.at("kind").get<std::string>();
      auto kind = parse_kind(name, true);
      if (!kind) {
        mismatch("unknown member kind '" + name + "'");
      }
      auto params = read_model(m.at("model"));
      if (!type_fits_kind(params, *kind)) {
        mismatch("model type does not match kind '" + name + "'");
      }
      out.emplace_back(*kind, read_scaling(m.at("scaling")), std::move(params),
                       m.at("single_class_warning").get<bool>());
    }
    return MajorityVoteEnsemble(std::move(out), threshold, doc.at("created_with").get<std::string>());
  } catch (const json::exception& e) {
    mismatch(e.what());
  }
}

void save_model(const MajorityVoteEnsemble& e, const std::string& path) {
  auto text = serialize_model(e);
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCategory::io, "cannot write model file '" + path + "'");
  }
  file << text;
  if (!file.flush()) {
    throw Error(ErrorCategory::io, "write failed for '" + path + "'");
  }
}

MajorityVoteEnsemble load_model(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCategory::io, "cannot open model file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace crcvote
