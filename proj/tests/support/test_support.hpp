#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "crcvote/data.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/text.hpp"

namespace testsupport {

inline crcvote::Sample row(double fit, double bmi, double age, int diabetes, int smoking, int label) {
  return {{fit, bmi, age, diabetes, smoking}, label};
}

/// Four subjects whose label is diabetes XOR smoking; the other inputs are constant.
inline crcvote::LabeledDataset xor_dataset() {
  return crcvote::LabeledDataset({
      row(20, 27, 60, 0, 0, 0),
      row(20, 27, 60, 0, 1, 1),
      row(20, 27, 60, 1, 0, 1),
      row(20, 27, 60, 1, 1, 0),
  });
}

/// Four subjects separable on fit_result and bmi.
inline crcvote::LabeledDataset separable_toy() {
  return crcvote::LabeledDataset({
      row(5, 20, 60, 0, 0, 0),
      row(12, 22, 60, 0, 0, 0),
      row(250, 31, 60, 0, 0, 1),
      row(400, 35, 60, 0, 0, 1),
  });
}

inline std::string fixture(const std::string& name) { return std::string(CRCVOTE_FIXTURE_DIR) + "/" + name; }
inline std::string source_path(const std::string& name) { return std::string(CRCVOTE_SOURCE_DIR) + "/" + name; }

inline crcvote::KeyValueConfig oracle() { return crcvote::KeyValueConfig::load(fixture("generator_oracle.conf")); }

/// Brute-force Mann-Whitney statistic, ties counted one half.
inline double concordance(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

struct LinearFit {
  double w = 0.0;
  double b = 0.0;
};

/// Minimizes 1/2 (w^2 + b^2) + C sum hinge over one standardized column by
/// nested ternary search; the objective is convex in (w, b).
inline LinearFit svm_1d_oracle(const crcvote::StandardizedData& data, std::size_t column, double c) {
  auto primal = [&](double w, double b) {
    double v = 0.5 * (w * w + b * b);
    for (std::size_t i = 0; i < data.size(); ++i) {
      double y = data.labels[i] == 1 ? 1.0 : -1.0;
      v += c * std::max(0.0, 1.0 - y * (w * data.rows[i][column] + b));
    }
    return v;
  };
  auto best_b = [&](double w) {
    double lo = -50.0, hi = 50.0;
    for (int i = 0; i < 300; ++i) {
      double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (primal(w, m1) < primal(w, m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    return 0.5 * (lo + hi);
  };
  double lo = -50.0, hi = 50.0;
  for (int i = 0; i < 300; ++i) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    double f1 = primal(m1, best_b(m1)), f2 = primal(m2, best_b(m2));
    if (f1 < f2) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  double w = 0.5 * (lo + hi);
  return {w, best_b(w)};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

/// Compares against a golden file; CRCVOTE_UPDATE_GOLDEN=1 rewrites it instead.
inline bool matches_golden(const std::string& text, const std::string& name) {
  auto path = fixture(name);
  if (const char* update = std::getenv("CRCVOTE_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << text;
  }
  return read_file(path) == text;
}

/// A fixed two-classifier, two-fold report with hand-picked summaries,
/// independent of any training numerics.
inline crcvote::EvaluationReport golden_report() {
  using namespace crcvote;
  auto summary = [](Metric p, Metric se, Metric sp, Metric f, Metric a) {
    return MetricSummaries{{p, 0.0123, 0}, {se, 0.0456, 0}, {sp, 0.0789, 0}, {f, 0.01, 0}, {a, 0.02, 0}};
  };
  auto result = [](std::string name, std::string display, MetricSummaries s) {
    ClassifierResult r;
    r.name = std::move(name);
    r.display_name = std::move(display);
    r.summary = s;
    r.roc.points = {{std::numeric_limits<double>::infinity(), 0, 0}, {0.5, 0.25, 0.75},
                    {-std::numeric_limits<double>::infinity(), 1, 1}};
    return r;
  };
  EvaluationReport r;
  r.k = 2;
  r.seed = 42;
  r.rows = 8;
  r.selection = true;
  r.classifiers.push_back(result("logistic_regression", "Logistic Regression",
                                 summary(0.8912, 0.885, 0.9349, 0.8, 0.95)));
  auto tree = summary(std::nullopt, 0.0, 1.0, std::nullopt, 0.5);
  tree.precision.undefined_folds = 2;
  tree.precision.stddev = std::nullopt;
  tree.f1.undefined_folds = 2;
  tree.f1.stddev = std::nullopt;
  r.classifiers.push_back(result("decision_tree", "Decision Tree", tree));
  r.ensemble = result("majority_vote", "Majority Vote", summary(0.9, 0.89, 0.92, 0.88, 0.95));
  r.assignment = {2, {0, 1, 0, 1, 0, 1, 0, 1}};
  r.folds = {{4, 4, {}, {LearnerKind::logistic_regression, LearnerKind::decision_tree}},
             {4, 4, {}, {LearnerKind::logistic_regression}}};
  return r;
}

}  // namespace testsupport
