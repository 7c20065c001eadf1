#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "test_support.hpp"

#include "crcvote/error.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/random.hpp"

using namespace crcvote;

namespace {

std::vector<LearnerKind> cheap_roster() {
  return {LearnerKind::logistic_regression, LearnerKind::decision_tree, LearnerKind::linear_svm};
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("confusion counts") {
    std::vector<int> pred{1, 1, 0, 0, 1, 0};
    std::vector<int> label{1, 0, 0, 1, 1, 0};
    auto cm = confusion(pred, label);
    CHECK(cm == ConfusionMatrix{2, 1, 2, 1});
    CHECK(cm.total() == 6);
    CHECK(*precision(cm) == doctest::Approx(2.0 / 3.0));
    CHECK(*sensitivity(cm) == doctest::Approx(2.0 / 3.0));
    CHECK(*specificity(cm) == doctest::Approx(2.0 / 3.0));
    CHECK(*f1(cm) == doctest::Approx(4.0 / 6.0));
    CHECK_THROWS_AS(confusion(pred, std::vector<int>{1}), Error);
    CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), Error);
  }

  TEST_CASE("zero denominators are undefined, not zero") {
    ConfusionMatrix no_positive_calls{0, 0, 5, 3};
    CHECK_FALSE(precision(no_positive_calls));
    CHECK(*sensitivity(no_positive_calls) == 0.0);
    ConfusionMatrix no_negatives{4, 0, 0, 1};
    CHECK_FALSE(specificity(no_negatives));
    ConfusionMatrix all_negative_correct{0, 0, 7, 0};
    CHECK_FALSE(f1(all_negative_correct));
    CHECK_FALSE(sensitivity(all_negative_correct));
  }

  TEST_CASE("AUC spot values") {
    CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
    std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    std::vector<int> y{0, 0, 1, 1};
    CHECK(auc(s, y) == 0.75);
    CHECK(auc(roc_curve(s, y)) == 0.75);
    CHECK(auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}) == 0.5);
  }

  TEST_CASE("ROC curve layout") {
    std::vector<double> s{0.3, 0.7, 0.7, 0.1};
    std::vector<int> y{0, 1, 0, 1};
    auto c = roc_curve(s, y);
    REQUIRE(c.points.size() == 5);
    CHECK(c.points.front().threshold == std::numeric_limits<double>::infinity());
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points[1] == RocPoint{0.7, 0.5, 0.5});
    CHECK(c.points[2] == RocPoint{0.3, 1.0, 0.5});
    CHECK(c.points[3] == RocPoint{0.1, 1.0, 1.0});
    CHECK(c.points.back().threshold == -std::numeric_limits<double>::infinity());
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
  }

  TEST_CASE("single-class AUC") {
    std::vector<double> s{0.2, 0.3};
    std::vector<int> y{1, 1};
    CHECK_THROWS_AS(auc(s, y), Error);
    CHECK_THROWS_AS(roc_curve(s, y), Error);
    CHECK_FALSE(auc_or_undefined(s, y));
  }

  TEST_CASE("AUC equals concordance on tied random scores") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      std::size_t n = 2 + rng.index(120);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.index(trial % 2 == 0 ? 4 : 1000)) / 10.0;
        y[i] = rng.bernoulli(0.4) ? 1 : 0;
      }
      y[0] = 1;
      y[1] = 0;
      double oracle = testsupport::concordance(s, y);
      CHECK(std::abs(auc(s, y) - oracle) < 1e-12);
      CHECK(std::abs(auc(roc_curve(s, y)) - oracle) < 1e-12);
    }
  }

  TEST_CASE("summaries skip undefined folds") {
    std::vector<Metric> v{0.5, std::nullopt, 0.7};
    auto s = summarize(v);
    CHECK(*s.mean == doctest::Approx(0.6));
    CHECK(*s.stddev == doctest::Approx(std::sqrt(0.02)));
    CHECK(s.undefined_folds == 1);
    std::vector<Metric> one{0.4};
    CHECK_FALSE(summarize(one).stddev);
    std::vector<Metric> none{std::nullopt};
    CHECK_FALSE(summarize(none).mean);
  }

  TEST_CASE("metric set mirrors the individual metrics") {
    ConfusionMatrix cm{3, 1, 4, 2};
    auto m = metric_set(cm, 0.8);
    CHECK(m.precision == precision(cm));
    CHECK(m.sensitivity == sensitivity(cm));
    CHECK(m.specificity == specificity(cm));
    CHECK(m.f1 == f1(cm));
    CHECK(*m.auc == 0.8);
  }

  TEST_CASE("cross-validation folds are clean") {
    auto ds = generate_synthetic(150, 40, GeneratorParams{});
    auto roster = cheap_roster();
    auto report = cross_validate(roster, ds, Hyperparams{}, 5, 40, false);
    CHECK(report.k == 5);
    CHECK(report.rows == 150);
    REQUIRE(report.folds.size() == 5);
    REQUIRE(report.classifiers.size() == roster.size());
    std::size_t tested = 0;
    for (int f = 0; f < 5; ++f) {
      auto train = report.assignment.train_indices(f);
      auto test = report.assignment.test_indices(f);
      std::set<std::size_t> train_set(train.begin(), train.end());
      for (auto i : test) CHECK(train_set.count(i) == 0);
      CHECK(train.size() + test.size() == 150);
      CHECK(report.folds[f].train_rows == train.size());
      CHECK(report.folds[f].test_rows == test.size());
      CHECK(report.folds[f].scaling == fit_scaling(ds.subset(train)));
      CHECK(report.folds[f].ensemble_members == roster);
      tested += test.size();
    }
    CHECK(tested == 150);
    for (const auto& c : report.classifiers) {
      CHECK(c.fold_metrics.size() == 5);
      CHECK(c.fold_confusion.size() == 5);
      std::uint64_t total = 0;
      for (const auto& cm : c.fold_confusion) total += cm.total();
      CHECK(total == 150);
    }
    CHECK(report.ensemble.name == kEnsembleName);
    CHECK(report.ensemble.display_name == kEnsembleDisplayName);
  }

  TEST_CASE("pooled ROC covers every row") {
    auto ds = generate_synthetic(120, 41, GeneratorParams{});
    auto roster = cheap_roster();
    auto report = cross_validate(roster, ds, Hyperparams{}, 4, 41, false);
    const auto& roc = report.ensemble.roc;
    REQUIRE(roc.points.size() >= 2);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
      CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }
  }

  TEST_CASE("cross-validation is deterministic and seed-sensitive") {
    auto ds = generate_synthetic(120, 42, GeneratorParams{});
    auto roster = cheap_roster();
    auto a = report_to_json(cross_validate(roster, ds, Hyperparams{}, 4, 7, true));
    auto b = report_to_json(cross_validate(roster, ds, Hyperparams{}, 4, 7, true));
    auto c = report_to_json(cross_validate(roster, ds, Hyperparams{}, 4, 8, true));
    CHECK(a == b);
    CHECK(a != c);
  }

  TEST_CASE("selection inside folds records the surviving members") {
    auto ds = generate_synthetic(200, 43, GeneratorParams{});
    std::vector<LearnerKind> roster{LearnerKind::logistic_regression, LearnerKind::linear_svm,
                                    LearnerKind::coin_flip};
    auto report = cross_validate(roster, ds, Hyperparams{}, 4, 43, true);
    CHECK(report.selection);
    for (const auto& f : report.folds) {
      CHECK_FALSE(f.ensemble_members.empty());
      CHECK(f.ensemble_members.size() <= roster.size());
    }
  }

  TEST_CASE("fold count is validated") {
    auto ds = generate_synthetic(30, 44, GeneratorParams{});
    auto roster = cheap_roster();
    CHECK_THROWS_AS(cross_validate(roster, ds, Hyperparams{}, 1, 1, false), Error);
    CHECK_THROWS_AS(cross_validate(roster, ds, Hyperparams{}, 31, 1, false), Error);
  }
}
