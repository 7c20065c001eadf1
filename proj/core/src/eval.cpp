#include "crcvote/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crcvote/ensemble.hpp"
#include "crcvote/error.hpp"
#include "crcvote/random.hpp"
#include "parallel.hpp"

namespace crcvote {
namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) {
    return std::nullopt;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCategory::metric, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
  if (a == 0) {
    throw Error(ErrorCategory::metric, "empty input");
  }
}

/// Cumulative (fp, tp) counts after each distinct score, descending.
struct CountCurve {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> fp;
  std::vector<std::uint64_t> tp;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

CountCurve count_curve(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  CountCurve c;
  for (int y : labels) {
    (y == 1 ? c.positives : c.negatives) += 1;
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw Error(ErrorCategory::metric, "ROC/AUC undefined: labels contain a single class");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::uint64_t fp = 0;
  std::uint64_t tp = 0;
  for (std::size_t i = 0; i < order.size();) {
    double s = scores[order[i]];
    if (std::isnan(s)) {
      throw Error(ErrorCategory::metric, "NaN score");
    }
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    c.thresholds.push_back(s);
    c.fp.push_back(fp);
    c.tp.push_back(tp);
  }
  return c;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool predicted = predictions[i] == 1;
    bool actual = labels[i] == 1;
    if (predicted && actual) {
      ++cm.tp;
    } else if (predicted) {
      ++cm.fp;
    } else if (actual) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

Metric precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp); }
Metric sensitivity(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }
Metric specificity(const ConfusionMatrix& cm) { return ratio(cm.tn, cm.tn + cm.fp); }
Metric f1(const ConfusionMatrix& cm) { return ratio(2 * cm.tp, 2 * cm.tp + cm.fn + cm.fp); }

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  auto c = count_curve(scores, labels);
  const auto p = static_cast<double>(c.positives);
  const auto n = static_cast<double>(c.negatives);
  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    curve.points.push_back({c.thresholds[i], static_cast<double>(c.fp[i]) / n, static_cast<double>(c.tp[i]) / p});
  }
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  // Trapezoids over integer counts: the sum is exact until the final division.
  auto c = count_curve(scores, labels);
  double twice_area = 0.0;
  std::uint64_t prev_fp = 0;
  std::uint64_t prev_tp = 0;
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    twice_area += static_cast<double>(c.fp[i] - prev_fp) * static_cast<double>(prev_tp + c.tp[i]);
    prev_fp = c.fp[i];
    prev_tp = c.tp[i];
  }
  return twice_area / (2.0 * static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

Metric auc_or_undefined(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    return std::nullopt;
  }
  return auc(scores, labels);
}

MetricSet metric_set(const ConfusionMatrix& cm, Metric area) {
  return {precision(cm), sensitivity(cm), specificity(cm), f1(cm), area};
}

MetricSummary summarize(std::span<const Metric> per_fold) {
  MetricSummary s;
  std::vector<double> values;
  for (const auto& m : per_fold) {
    if (m) {
      values.push_back(*m);
    } else {
      ++s.undefined_folds;
    }
  }
  if (values.empty()) {
    return s;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  double mean = sum / static_cast<double>(values.size());
  s.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - mean) * (v - mean);
    }
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

MetricSummaries summarize_all(const std::vector<MetricSet>& folds) {
  auto column = [&](Metric MetricSet::*field) {
    std::vector<Metric> values;
    for (const auto& m : folds) {
      values.push_back(m.*field);
    }
    return summarize(values);
  };
  return {column(&MetricSet::precision), column(&MetricSet::sensitivity), column(&MetricSet::specificity),
          column(&MetricSet::f1), column(&MetricSet::auc)};
}

struct FoldOutput {
  FoldDetail detail;
  std::vector<std::size_t> test_rows;
  std::vector<std::vector<double>> scores;  // [candidate][test row]
  std::vector<std::size_t> members;         // candidate indices in the ensemble
};

int inner_fold_count(const LabeledDataset& train) {
  auto positives = static_cast<int>(train.positives());
  auto negatives = static_cast<int>(train.size()) - positives;
  return std::min({kInnerSelectionFolds, positives, negatives});
}

}  // namespace

EvaluationReport cross_validate(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                                const Hyperparams& hp, int k, std::uint64_t seed, bool select) {
  if (candidates.empty()) {
    throw Error(ErrorCategory::usage, "cross-validation needs at least one classifier");
  }
  hp.validate();
  auto assignment = stratified_folds(ds, k, seed);
  auto fold_count = static_cast<std::size_t>(k);
  std::vector<FoldOutput> outputs(fold_count);

  detail::parallel_for(fold_count, [&](std::size_t f) {
    auto& out = outputs[f];
    auto train_idx = assignment.train_indices(static_cast<int>(f));
    out.test_rows = assignment.test_indices(static_cast<int>(f));
    auto train_ds = ds.subset(train_idx);
    auto test_ds = ds.subset(out.test_rows);
    out.detail.train_rows = train_ds.size();
    out.detail.test_rows = test_ds.size();
    out.detail.scaling = fit_scaling(train_ds);
    out.scores.resize(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto model = train(candidates[c], train_ds, member_hyperparams(hp, candidates[c]));
      for (const auto& s : test_ds.rows()) {
        out.scores[c].push_back(model.score(s.features));
      }
    }
    int inner_k = inner_fold_count(train_ds);
    if (select && candidates.size() > 1 && inner_k >= 2) {
      auto trace = select_members(candidates, train_ds, hp, inner_k, derive_seed(seed, "cv.inner", f));
      for (auto kind : trace.final_members) {
        auto it = std::find(candidates.begin(), candidates.end(), kind);
        out.members.push_back(static_cast<std::size_t>(it - candidates.begin()));
      }
    } else {
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        out.members.push_back(c);
      }
    }
    for (auto m : out.members) {
      out.detail.ensemble_members.push_back(candidates[m]);
    }
  });

  EvaluationReport report;
  report.k = k;
  report.seed = seed;
  report.selection = select;
  report.rows = ds.size();
  report.assignment = assignment;
  auto labels = ds.labels();

  std::vector<std::vector<double>> pooled(candidates.size(), std::vector<double>(ds.size()));
  std::vector<double> pooled_soft(ds.size());
  report.classifiers.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    report.classifiers[c].name = std::string(to_string(candidates[c]));
    report.classifiers[c].display_name = std::string(display_name(candidates[c]));
  }
  report.ensemble.name = std::string(kEnsembleName);
  report.ensemble.display_name = std::string(kEnsembleDisplayName);

  for (std::size_t f = 0; f < fold_count; ++f) {
    const auto& out = outputs[f];
    std::vector<int> fold_labels;
    for (auto r : out.test_rows) {
      fold_labels.push_back(labels[r]);
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      std::vector<int> predicted;
      for (std::size_t r = 0; r < out.test_rows.size(); ++r) {
        predicted.push_back(label_from_score(out.scores[c][r]));
        pooled[c][out.test_rows[r]] = out.scores[c][r];
      }
      auto cm = confusion(predicted, fold_labels);
      report.classifiers[c].fold_confusion.push_back(cm);
      report.classifiers[c].fold_metrics.push_back(metric_set(cm, auc_or_undefined(out.scores[c], fold_labels)));
    }
    std::vector<int> predicted;
    std::vector<double> soft;
    std::vector<int> votes(out.members.size());
    std::vector<double> member_scores(out.members.size());
    for (std::size_t r = 0; r < out.test_rows.size(); ++r) {
      for (std::size_t m = 0; m < out.members.size(); ++m) {
        member_scores[m] = out.scores[out.members[m]][r];
        votes[m] = label_from_score(member_scores[m]);
      }
      auto d = combine_votes(votes, member_scores);
      predicted.push_back(d.label);
      soft.push_back(d.soft_score);
      pooled_soft[out.test_rows[r]] = d.soft_score;
    }
    auto cm = confusion(predicted, fold_labels);
    report.ensemble.fold_confusion.push_back(cm);
    report.ensemble.fold_metrics.push_back(metric_set(cm, auc_or_undefined(soft, fold_labels)));
    report.folds.push_back(out.detail);
  }

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    report.classifiers[c].summary = summarize_all(report.classifiers[c].fold_metrics);
    report.classifiers[c].roc = roc_curve(pooled[c], labels);
  }
  report.ensemble.summary = summarize_all(report.ensemble.fold_metrics);
  report.ensemble.roc = roc_curve(pooled_soft, labels);
  return report;
}

}  // namespace crcvote
