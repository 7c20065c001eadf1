// Acceptance runner: one PASS/FAIL line per criterion.
//
//   crcvote_acceptance            run every criterion
//   crcvote_acceptance <id>...    run the named criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_support.hpp"

#include "crcvote/ensemble.hpp"
#include "crcvote/error.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/optim.hpp"
#include "crcvote/random.hpp"
#include "crcvote/service.hpp"

using namespace crcvote;
using nlohmann::json;

namespace {

/// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 10) {
      failures_.push_back(what);
    }
    failed_ += ok ? 0 : 1;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream out;
    out << count_ << " checks";
    for (const auto& n : notes_) out << "; " << n;
    if (failed_ > 0) {
      out << "; " << failed_ << " failed";
      for (const auto& f : failures_) out << " | " << f;
    }
    return out.str();
  }

 private:
  int count_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v) { return format_double(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void metric_oracle(Check& c) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(1, "acceptance.metric_oracle"));
  int undefined_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.index(500);
    // Skewed rates make all-one-class vectors (and undefined metrics) common.
    double p_label = trial % 10 == 0 ? 0.0 : rng.uniform();
    double p_pred = trial % 7 == 0 ? 1.0 : rng.uniform();
    std::vector<int> pred(n);
    std::vector<int> label(n);
    for (std::size_t i = 0; i < n; ++i) {
      label[i] = rng.bernoulli(p_label) ? 1 : 0;
      pred[i] = rng.bernoulli(p_pred) ? 1 : 0;
    }
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] == 1 && label[i] == 1) tp += 1;
      if (pred[i] == 1 && label[i] == 0) fp += 1;
      if (pred[i] == 0 && label[i] == 0) tn += 1;
      if (pred[i] == 0 && label[i] == 1) fn += 1;
    }
    auto oracle = [](double num, double den) -> Metric {
      if (den == 0) return std::nullopt;
      return num / den;
    };
    auto cm = confusion(pred, label);
    auto tag = "trial " + std::to_string(trial);
    c.expect(cm.tp == tp && cm.fp == fp && cm.tn == tn && cm.fn == fn, tag + " counts");
    c.expect(precision(cm) == oracle(tp, tp + fp), tag + " precision");
    c.expect(sensitivity(cm) == oracle(tp, tp + fn), tag + " sensitivity");
    c.expect(specificity(cm) == oracle(tn, tn + fp), tag + " specificity");
    c.expect(f1(cm) == oracle(2 * tp, 2 * tp + fn + fp), tag + " f1");
    undefined_seen += precision(cm) && specificity(cm) ? 0 : 1;
  }
  double t = seconds_since(t0);
  c.expect(undefined_seen > 0, "undefined cases exercised");
  c.expect(t < 5.0, "runtime " + fmt(t) + "s < 5s");
  c.note("runtime " + std::to_string(t) + "s");
}

void auc_dual(Check& c) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(1, "acceptance.auc_dual"));
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.index(400);
    // Every third vector draws from only three score levels: heavy ties.
    std::uint64_t levels = trial % 3 == 0 ? 3 : (trial % 3 == 1 ? 20 : 1000000);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(levels)) / static_cast<double>(levels);
      y[i] = rng.bernoulli(0.35) ? 1 : 0;
    }
    y[0] = 1;
    y[n - 1] = 0;
    double oracle = testsupport::concordance(s, y);
    double via_curve = auc(roc_curve(s, y));
    double via_counts = auc(s, y);
    worst = std::max({worst, std::abs(via_curve - oracle), std::abs(via_counts - oracle)});
  }
  double t = seconds_since(t0);
  c.expect(worst <= 1e-9, "max deviation " + fmt(worst));
  c.expect(t < 5.0, "runtime " + fmt(t) + "s < 5s");
  c.note("max |trapezoid - concordance| = " + fmt(worst) + ", runtime " + std::to_string(t) + "s");
}

void auc_spot_values(Check& c) {
  std::vector<double> sep{0.05, 0.2, 0.3, 0.7, 0.8, 0.99};
  std::vector<int> sep_y{0, 0, 0, 1, 1, 1};
  c.expect(auc(sep, sep_y) == 1.0, "perfect separation by counts");
  c.expect(auc(roc_curve(sep, sep_y)) == 1.0, "perfect separation by curve");

  std::vector<double> four{0.9, 0.8, 0.7, 0.1};
  std::vector<int> four_y{1, 0, 1, 0};
  double oracle = testsupport::concordance(four, four_y);
  c.expect(oracle == 0.75, "pairwise oracle gives 0.75");
  c.expect(auc(four, four_y) == 0.75, "4-point example by counts");
  c.expect(auc(roc_curve(four, four_y)) == 0.75, "4-point example by curve");

  Rng rng(derive_seed(1, "acceptance.auc_independent"));
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  double a = auc(s, y);
  c.expect(std::abs(a - 0.5) <= 0.02, "independent scores " + fmt(a));
  c.note("independent AUC " + std::to_string(a));
}

void gradients(Check& c) {
  auto ds = generate_synthetic(500, 11, GeneratorParams{});
  auto [data, scaling] = standardize(ds);
  Rng rng(derive_seed(1, "acceptance.gradients"));
  double worst_lr = 0.0;
  auto lr = detail::logistic_objective(data, 1.0);
  for (int i = 0; i < 10; ++i) {
    optim::Vector x(kNumFeatures + 1);
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    worst_lr = std::max(worst_lr, optim::check_gradient(lr, x, 1e-3));
  }
  double worst_mlp = 0.0;
  auto mlp = detail::mlp_objective(data, 8, 1e-4);
  for (int i = 0; i < 10; ++i) {
    auto theta = detail::mlp_initial_parameters(8, derive_seed(2, "acceptance.mlp_point", i));
    for (auto& v : theta) v *= 3.0;
    worst_mlp = std::max(worst_mlp, optim::check_gradient(mlp, theta, 1e-3));
  }
  c.expect(worst_lr < 1e-5, "logistic max relative error " + fmt(worst_lr));
  c.expect(worst_mlp < 1e-5, "MLP max relative error " + fmt(worst_mlp));

  optim::Objective rosen = [](const optim::Vector& x, optim::Vector& g) {
    double a = 1.0 - x[0];
    double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  auto r = optim::lbfgs_minimize(rosen, {-1.2, 1.0});
  double rosen_err = std::max(std::abs(r.parameters[0] - 1.0), std::abs(r.parameters[1] - 1.0));
  c.expect(rosen_err < 1e-4, "Rosenbrock error " + fmt(rosen_err));

  int worst_iters_over = -100;
  double worst_quad = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::size_t d = 2 + seed % 9;
    Rng qr(derive_seed(seed, "acceptance.quadratic"));
    std::vector<double> m(d * d), a(d * d), b(d);
    for (auto& v : m) v = qr.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double s = i == j ? 1.0 : 0.0;
        for (std::size_t k = 0; k < d; ++k) s += m[k * d + i] * m[k * d + j];
        a[i * d + j] = s;
      }
      b[i] = qr.uniform(-2.0, 2.0);
    }
    optim::Objective quad = [&](const optim::Vector& x, optim::Vector& g) {
      double f = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double ax = 0.0;
        for (std::size_t j = 0; j < d; ++j) ax += a[i * d + j] * x[j];
        g[i] = ax - b[i];
        f += 0.5 * x[i] * ax - b[i] * x[i];
      }
      return f;
    };
    // Oracle: Gaussian elimination with partial pivoting.
    auto mm = a;
    auto rr = b;
    for (std::size_t col = 0; col < d; ++col) {
      std::size_t p = col;
      for (std::size_t i = col + 1; i < d; ++i)
        if (std::abs(mm[i * d + col]) > std::abs(mm[p * d + col])) p = i;
      for (std::size_t j = 0; j < d; ++j) std::swap(mm[col * d + j], mm[p * d + j]);
      std::swap(rr[col], rr[p]);
      for (std::size_t i = col + 1; i < d; ++i) {
        double f = mm[i * d + col] / mm[col * d + col];
        for (std::size_t j = col; j < d; ++j) mm[i * d + j] -= f * mm[col * d + j];
        rr[i] -= f * rr[col];
      }
    }
    std::vector<double> exact(d);
    for (std::size_t i = d; i-- > 0;) {
      double s = rr[i];
      for (std::size_t j = i + 1; j < d; ++j) s -= mm[i * d + j] * exact[j];
      exact[i] = s / mm[i * d + i];
    }
    optim::LbfgsOptions o;
    o.grad_tolerance = 1e-12;
    auto sol = optim::lbfgs_minimize(quad, optim::Vector(d, 0.0), o);
    for (std::size_t i = 0; i < d; ++i) worst_quad = std::max(worst_quad, std::abs(sol.parameters[i] - exact[i]));
    worst_iters_over = std::max(worst_iters_over, sol.iterations - static_cast<int>(d) - 2);
  }
  c.expect(worst_quad < 1e-8, "quadratic error " + fmt(worst_quad));
  c.expect(worst_iters_over <= 0, "quadratic iterations exceed d+2 by " + std::to_string(worst_iters_over));
  c.note("LR " + fmt(worst_lr) + ", MLP " + fmt(worst_mlp) + ", Rosenbrock " + fmt(rosen_err) + ", quadratics " +
         fmt(worst_quad));
}

double accuracy(const TrainedClassifier& m, const LabeledDataset& ds) {
  int ok = 0;
  for (const auto& s : ds.rows()) ok += m.predict(s.features) == s.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

void learner_sanity(Check& c) {
  auto xor_ds = testsupport::xor_dataset();
  Hyperparams tree_hp;
  tree_hp.tree.max_depth = 2;
  tree_hp.tree.min_samples_split = 2;
  c.expect(accuracy(train_tree(xor_ds, tree_hp), xor_ds) == 1.0, "depth-2 tree on XOR");

  Hyperparams mlp_hp;
  mlp_hp.mlp.hidden_width = 8;
  mlp_hp.mlp.restarts = 5;
  c.expect(accuracy(train_mlp(xor_ds, mlp_hp), xor_ds) == 1.0, "MLP on XOR");

  LabeledDataset line({testsupport::row(20, 20, 60, 0, 0, 0), testsupport::row(20, 26, 60, 0, 0, 1),
                       testsupport::row(20, 24, 60, 0, 0, 1)});
  Hyperparams svm_hp;
  auto svm = train_svm(line, svm_hp);
  const auto& sm = std::get<SvmModel>(svm.parameters());
  auto oracle = testsupport::svm_1d_oracle(apply_scaling(svm.scaling(), line), 1, svm_hp.svm.c);
  double dw = std::abs(sm.weights[1] - oracle.w);
  c.expect(dw < 1e-4, "SVM w error " + fmt(dw));

  auto ds = generate_synthetic(4000, 42, GeneratorParams{});
  Hyperparams boost_hp;
  boost_hp.seed = 42;
  auto boosted = train_boosted(ds, boost_hp);
  const auto& loss = boosted.training_loss();
  c.expect(loss.size() == 101, "100 rounds of loss recorded");
  int increases = 0;
  for (std::size_t t = 1; t < loss.size(); ++t) increases += loss[t] > loss[t - 1] ? 1 : 0;
  c.expect(increases == 0, std::to_string(increases) + " loss increases");

  Hyperparams forest_hp;
  forest_hp.forest.trees = 1;
  forest_hp.forest.bootstrap = false;
  forest_hp.forest.feature_subsample = static_cast<int>(kNumFeatures);
  auto forest = train_forest(ds, forest_hp);
  auto tree = train_tree(ds, forest_hp);
  c.expect(std::get<ForestModel>(forest.parameters()).trees.at(0) == std::get<TreeModel>(tree.parameters()).tree,
           "forest of one tree equals the tree");
  bool same_scores = true;
  for (const auto& s : ds.rows()) same_scores = same_scores && forest.score(s.features) == tree.score(s.features);
  c.expect(same_scores, "forest and tree scores identical");
  c.note("SVM |dw| " + fmt(dw) + ", boost loss " + fmt(loss.front()) + " -> " + fmt(loss.back()));
}

void majority_vote_law(Check& c) {
  Rng rng(derive_seed(1, "acceptance.majority_vote"));
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t l = 1 + rng.index(9);
    std::vector<double> scores(l);
    std::vector<int> votes(l);
    // A quarter of the trials are unanimous by construction.
    int forced = trial % 4 == 0 ? static_cast<int>(rng.index(2)) : -1;
    for (std::size_t i = 0; i < l; ++i) {
      scores[i] = forced < 0 ? rng.uniform() : (forced == 1 ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.4999));
      if (trial % 5 == 1) scores[i] = 0.5;  // boundary scores
      votes[i] = label_from_score(scores[i]);
    }
    int pos = static_cast<int>(std::count(votes.begin(), votes.end(), 1));
    int neg = static_cast<int>(l) - pos;
    double sum = 0.0;
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    for (double s : sorted) sum += s;
    double mean = sum / static_cast<double>(l);
    int expected = pos > neg ? 1 : (neg > pos ? 0 : (mean >= 0.5 ? 1 : 0));

    auto d = combine_votes(votes, scores);
    auto tag = "trial " + std::to_string(trial);
    c.expect(d.label == expected, tag + " label");
    if (pos == 0 || neg == 0) c.expect(d.label == votes[0], tag + " unanimity");

    std::vector<std::size_t> perm(l);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    std::vector<double> ps(l);
    std::vector<int> pv(l);
    for (std::size_t i = 0; i < l; ++i) {
      ps[i] = scores[perm[i]];
      pv[i] = votes[perm[i]];
    }
    auto p = combine_votes(pv, ps);
    c.expect(p.label == d.label && p.soft_score == d.soft_score, tag + " permutation");
  }
}

Hyperparams search_hp(std::uint64_t seed) {
  Hyperparams hp;
  hp.seed = seed;
  return hp;
}

void backward_search(Check& c) {
  const std::vector<LearnerKind> kinds{LearnerKind::logistic_regression, LearnerKind::decision_tree,
                                       LearnerKind::linear_svm, LearnerKind::coin_flip};
  const std::size_t coin = 3;
  int removed = 0;
  int exhaustive_agrees = 0;
  int final_below_full = 0;
  for (std::uint64_t run = 0; run < 20; ++run) {
    auto ds = generate_synthetic(300, derive_seed(run, "acceptance.search.data"), GeneratorParams{});
    auto hp = search_hp(run);
    auto seed = derive_seed(run, "acceptance.search.folds");
    auto trace = select_members(kinds, ds, hp, 5, seed);
    final_below_full += trace.final_criterion() < trace.initial_criterion ? 1 : 0;
    bool greedy_drops = std::find(trace.final_members.begin(), trace.final_members.end(), LearnerKind::coin_flip) ==
                        trace.final_members.end();
    removed += greedy_drops ? 1 : 0;

    // Exhaustive oracle over all non-empty subsets of the same out-of-fold scores.
    OutOfFoldScores oof(kinds, ds, hp, 5, seed);
    double best = -1.0;
    std::vector<std::size_t> best_subset;
    for (unsigned mask = 1; mask < (1u << kinds.size()); ++mask) {
      std::vector<std::size_t> subset;
      for (std::size_t i = 0; i < kinds.size(); ++i)
        if (mask & (1u << i)) subset.push_back(i);
      double v = oof.evaluate(subset).auc;
      if (v > best + 1e-9) {
        best = v;
        best_subset = subset;
      }
    }
    bool oracle_drops = std::find(best_subset.begin(), best_subset.end(), coin) == best_subset.end();
    exhaustive_agrees += oracle_drops == greedy_drops ? 1 : 0;
    c.expect(best >= trace.final_criterion() - 1e-12, "run " + std::to_string(run) + " exhaustive >= greedy");
  }
  c.expect(final_below_full == 0, std::to_string(final_below_full) + " runs ended below the full ensemble");
  c.expect(removed >= 19, "coin flip removed in " + std::to_string(removed) + "/20");
  c.expect(exhaustive_agrees >= 19, "exhaustive oracle agrees in " + std::to_string(exhaustive_agrees) + "/20");
  c.note("coin flip removed " + std::to_string(removed) + "/20, exhaustive agreement " +
         std::to_string(exhaustive_agrees) + "/20");
}

void cv_hygiene(Check& c) {
  const std::vector<LearnerKind> roster{LearnerKind::logistic_regression, LearnerKind::decision_tree};
  for (std::int64_t n : {100, 500, 4000}) {
    auto tag = "n=" + std::to_string(n);
    auto ds = generate_synthetic(n, derive_seed(static_cast<std::uint64_t>(n), "acceptance.cv"), GeneratorParams{});
    auto labels = ds.labels();
    auto report = cross_validate(roster, ds, search_hp(5), 10, 5, false);
    const auto& a = report.assignment;
    c.expect(a.fold_of_row.size() == ds.size(), tag + " every row assigned");
    std::vector<std::size_t> seen(ds.size(), 0);
    std::vector<long> pos(10, 0), neg(10, 0);
    for (int f = 0; f < 10; ++f) {
      auto test = a.test_indices(f);
      auto train = a.train_indices(f);
      std::set<std::size_t> train_set(train.begin(), train.end());
      for (auto i : test) {
        ++seen[i];
        c.expect(train_set.count(i) == 0, tag + " row in train and test");
        (labels[i] == 1 ? pos : neg)[static_cast<std::size_t>(f)] += 1;
      }
      c.expect(train.size() + test.size() == ds.size(), tag + " train/test partition");
      c.expect(report.folds[static_cast<std::size_t>(f)].scaling == fit_scaling(ds.subset(train)),
               tag + " scaling fitted on the training part only");
    }
    c.expect(std::all_of(seen.begin(), seen.end(), [](std::size_t s) { return s == 1; }),
             tag + " folds disjoint and exhaustive");
    c.expect(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1,
             tag + " positives stratified");
    c.expect(*std::max_element(neg.begin(), neg.end()) - *std::min_element(neg.begin(), neg.end()) <= 1,
             tag + " negatives stratified");

    auto again = cross_validate(roster, ds, search_hp(5), 10, 5, false);
    c.expect(report_table(again) == report_table(report), tag + " identical table");
    c.expect(report_to_json(again) == report_to_json(report), tag + " identical JSON");
    c.expect(roc_csv(again) == roc_csv(report), tag + " identical ROC");
  }
}

void end_to_end(Check& c) {
  double oracle = testsupport::oracle().get_double("oracle.bayes_auc").value();
  auto t0 = std::chrono::steady_clock::now();
  auto ds = generate_synthetic(4000, 42, GeneratorParams{});
  auto report = cross_validate(default_roster(), ds, search_hp(42), 10, 42, false);
  double t = seconds_since(t0);
  double a = report.ensemble.summary.auc.mean.value_or(0.0);
  c.expect(std::abs(a - oracle) <= 0.05, "ensemble AUC " + fmt(a) + " vs Bayes " + fmt(oracle));
  c.expect(t < 120.0, "runtime " + fmt(t) + "s < 120s");
  c.note("ensemble CV AUC " + std::to_string(a) + ", Bayes AUC " + std::to_string(oracle) + ", runtime " +
         std::to_string(t) + "s");
}

void report_shape(Check& c) {
  auto text = report_table(testsupport::golden_report());
  c.expect(testsupport::matches_golden(text, "report_golden.txt"), "golden file");
  std::vector<std::string> lines;
  for (auto l : split(text, '\n')) lines.emplace_back(l);
  auto it = std::find_if(lines.begin(), lines.end(), [](const std::string& l) {
    return l.rfind("Majority Vote ", 0) == 0 && l.find("Precision:") != std::string::npos;
  });
  c.expect(it != lines.end(), "Majority Vote block present");
  const char* order[] = {"Precision:", "Sensitivity:", "AUC:", "Specificity:", "F1:"};
  for (int i = 0; i < 5 && it != lines.end(); ++i, ++it) {
    c.expect(it->find(order[i]) != std::string::npos, std::string("metric line ") + order[i]);
  }
  auto fobt = text.find("Fecal Occult Blood Tests");
  c.expect(fobt != std::string::npos, "FOBT row");
  c.expect(text.find("Specificity: .96", fobt) < text.find("Sensitivity: .74", fobt), "FOBT .96/.74");
  auto dna = text.find("Stool DNA Test");
  c.expect(dna != std::string::npos, "stool DNA row");
  c.expect(text.find("Specificity: .89", dna) < text.find("Sensitivity: .92", dna), "stool DNA .89/.92");
}

struct LiveServer {
  service::Handler handler;
  std::unique_ptr<service::Server> server;
  std::thread thread;
  int port = 0;

  explicit LiveServer(std::shared_ptr<const MajorityVoteEnsemble> model) {
    handler.set_model(std::move(model));
    service::ServeOptions options;
    options.port = 0;
    server = std::make_unique<service::Server>(handler, options);
    std::promise<int> bound;
    auto port_future = bound.get_future();
    thread = std::thread([&] { server->run([&](int p) { bound.set_value(p); }); });
    port = port_future.get();
  }
  ~LiveServer() {
    server->stop();
    thread.join();
  }
};

void persistence_service_parity(Check& c) {
  auto dir = std::filesystem::temp_directory_path() / "crcvote_acceptance_parity";
  std::filesystem::create_directories(dir);
  auto model_path = (dir / "model.json").string();

  Hyperparams hp;
  hp.seed = 99;
  auto ensemble = train_ensemble(default_roster(), generate_synthetic(1000, 99, GeneratorParams{}), hp);
  save_model(ensemble, model_path);
  auto loaded = load_model(model_path);

  auto probes = generate_synthetic(1000, 123, GeneratorParams{});
  int mismatched = 0;
  for (const auto& s : probes.rows()) {
    auto a = ensemble.predict(s.features);
    auto b = loaded.predict(s.features);
    mismatched += (a.member_scores != b.member_scores || a.soft_score != b.soft_score ||
                   a.majority_label != b.majority_label)
                      ? 1
                      : 0;
  }
  c.expect(mismatched == 0, std::to_string(mismatched) + " of 1000 probes differ after reload");

  LiveServer live(std::make_shared<const MajorityVoteEnsemble>(loaded));
  httplib::Client client("127.0.0.1", live.port);
  Rng rng(derive_seed(1, "acceptance.parity"));
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    FeatureRow x{rng.uniform(0.0, 2000.0), rng.uniform(10.0, 80.0), rng.uniform(18.0, 120.0),
                 static_cast<double>(rng.index(2)), static_cast<double>(rng.index(2))};
    json body;
    for (std::size_t f = 0; f < kNumFeatures; ++f) body[std::string(kFeatureNames[f])] = x[f];
    auto r = client.Post("/predict", body.dump(), "application/json");
    if (!r || r->status != 200) {
      ++differing;
      continue;
    }
    auto doc = json::parse(r->body);
    std::ostringstream out, err;
    std::vector<std::string> args{"predict", "--model", model_path, "--fit", fmt(x[0]), "--bmi", fmt(x[1]),
                                  "--age", fmt(x[2]), "--diabetes", fmt(x[3]), "--smoking", fmt(x[4])};
    int code = cli::run(args, out, err);
    std::ostringstream expected;
    expected << "probability=" << fmt(doc.at("probability").get<double>())
             << " label=" << (doc.at("label") == "positive" ? 1 : 0) << '\n';
    for (const auto& v : doc.at("votes")) {
      expected << "vote " << v.at("kind").get<std::string>() << " label=" << v.at("vote").get<int>()
               << " score=" << fmt(v.at("score").get<double>()) << '\n';
    }
    differing += (code != 0 || out.str() != expected.str()) ? 1 : 0;
  }
  c.expect(differing == 0, std::to_string(differing) + " of 100 /predict responses differ from cmd_predict");

  // Every range rule, violated one field at a time.
  std::vector<std::pair<std::string, double>> violations{
      {"fit_result", -0.001}, {"fit_result", -1e9}, {"bmi", 9.999},  {"bmi", 80.001}, {"age", 17.999},
      {"age", 120.5},         {"diabetes", 2},      {"diabetes", -1}, {"diabetes", 0.5}, {"smoking", 2},
      {"smoking", -1},        {"smoking", 0.25}};
  json valid = {{"fit_result", 20}, {"bmi", 25}, {"age", 60}, {"diabetes", 0}, {"smoking", 1}};
  int bad_answers = 0;
  for (const auto& [field, value] : violations) {
    auto body = valid;
    body[field] = value;
    auto r = client.Post("/predict", body.dump(), "application/json");
    bool ok = r && r->status == 400;
    if (ok) {
      auto doc = json::parse(r->body);
      ok = doc.at("error").at("field") == field && doc.at("error").at("message").get<std::string>().find(field) == 0;
    }
    bad_answers += ok ? 0 : 1;
  }
  for (const auto& field : kFeatureNames) {
    auto body = valid;
    body.erase(std::string(field));
    auto r = client.Post("/predict", body.dump(), "application/json");
    bad_answers += (r && r->status == 400 && json::parse(r->body).at("error").at("field") == field) ? 0 : 1;
  }
  c.expect(bad_answers == 0, std::to_string(bad_answers) + " invalid requests not answered with a named 400");
  std::filesystem::remove_all(dir);
}

const std::vector<std::pair<std::string, std::function<void(Check&)>>> kCriteria{
    {"metric_oracle", metric_oracle},
    {"auc_dual", auc_dual},
    {"auc_spot_values", auc_spot_values},
    {"gradients", gradients},
    {"learner_sanity", learner_sanity},
    {"majority_vote_law", majority_vote_law},
    {"backward_search", backward_search},
    {"cv_hygiene", cv_hygiene},
    {"end_to_end", end_to_end},
    {"report_shape", report_shape},
    {"persistence_service_parity", persistence_service_parity},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(kCriteria.begin(), kCriteria.end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [id, fn] : kCriteria) {
    if (!wanted.empty() && wanted.count(id) == 0) continue;
    Check check;
    auto t0 = std::chrono::steady_clock::now();
    try {
      fn(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    char elapsed[32];
    std::snprintf(elapsed, sizeof elapsed, "%.2fs", seconds_since(t0));
    std::cout << (check.ok() ? "PASS " : "FAIL ") << id << " (" << elapsed << ") " << check.summary() << std::endl;
    failures += check.ok() ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
