#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crcvote/data.hpp"
#include "crcvote/learners.hpp"

namespace crcvote {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws Error(metric) on length mismatch or empty input.
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

/// A metric value; nullopt is the explicit "undefined" state (zero denominator).
using Metric = std::optional<double>;

Metric precision(const ConfusionMatrix& cm);    // TP / (TP + FP)
Metric sensitivity(const ConfusionMatrix& cm);  // TP / (TP + FN)
Metric specificity(const ConfusionMatrix& cm);  // TN / (TN + FP)
Metric f1(const ConfusionMatrix& cm);           // 2TP / (2TP + FN + FP)

struct RocPoint {
  double threshold = 0.0;  // predict positive iff score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

/// Points from threshold +inf (0,0) down to -inf (1,1); one point per
/// distinct score in between.
struct RocCurve {
  std::vector<RocPoint> points;

  bool operator==(const RocCurve&) const = default;
};

/// Throws Error(metric) when lengths differ or only one class is present.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);
/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);
double auc(std::span<const double> scores, std::span<const int> labels);
/// AUC, or undefined when a class is missing.
Metric auc_or_undefined(std::span<const double> scores, std::span<const int> labels);

struct MetricSet {
  Metric precision;
  Metric sensitivity;
  Metric specificity;
  Metric f1;
  Metric auc;
};

MetricSet metric_set(const ConfusionMatrix& cm, Metric auc);

struct MetricSummary {
  Metric mean;    // over folds where the metric is defined
  Metric stddev;  // sample (n - 1); undefined with fewer than two values
  int undefined_folds = 0;
};

/// Aggregates per-fold values, excluding undefined ones.
MetricSummary summarize(std::span<const Metric> per_fold);

struct MetricSummaries {
  MetricSummary precision;
  MetricSummary sensitivity;
  MetricSummary specificity;
  MetricSummary f1;
  MetricSummary auc;
};

struct ClassifierResult {
  std::string name;          // machine name, e.g. "logistic_regression" or "majority_vote"
  std::string display_name;  // report row title
  std::vector<ConfusionMatrix> fold_confusion;
  std::vector<MetricSet> fold_metrics;
  MetricSummaries summary;
  RocCurve roc;  // pooled out-of-fold scores
};

struct FoldDetail {
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  ScalingParams scaling;                       // fitted on the training portion
  std::vector<LearnerKind> ensemble_members;   // after selection, when enabled
};

struct EvaluationReport {
  int k = 0;
  std::uint64_t seed = 0;
  bool selection = false;
  std::size_t rows = 0;
  std::vector<ClassifierResult> classifiers;
  ClassifierResult ensemble;
  std::vector<FoldDetail> folds;
  FoldAssignment assignment;
};

inline constexpr std::string_view kEnsembleName = "majority_vote";
inline constexpr std::string_view kEnsembleDisplayName = "Majority Vote";
inline constexpr int kInnerSelectionFolds = 5;

/// Stratified k-fold cross-validation of every candidate and of their
/// majority-vote ensemble. Everything is fitted on the training portion of a
/// fold only; with `select`, backward search runs on an inner split of that
/// training portion. Deterministic in its inputs.
EvaluationReport cross_validate(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                                const Hyperparams& hp, int k, std::uint64_t seed, bool select);

/// Fixed-layout text: score table, literature comparison, fold statistics.
std::string report_table(const EvaluationReport& report);

/// ROC blocks as CSV; each block starts with `classifier,threshold,fpr,tpr`.
std::string roc_csv(const EvaluationReport& report);
void emit_roc(const EvaluationReport& report, const std::string& path);
/// Inverse of roc_csv, keyed by classifier name, in file order.
std::vector<std::pair<std::string, RocCurve>> parse_roc_csv(std::string_view text);

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(std::string_view text);

}  // namespace crcvote
