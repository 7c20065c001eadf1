#include "crcvote/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "crcvote/error.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/random.hpp"
#include "parallel.hpp"

namespace crcvote {

std::string_view to_string(TieBreak) { return "mean_score_then_positive"; }

VoteOutcome majority_vote(std::span<const int> votes) {
  if (votes.empty()) {
    throw Error(ErrorCategory::usage, "majority vote over an empty vote list");
  }
  auto positive = std::count(votes.begin(), votes.end(), 1);
  auto negative = static_cast<std::ptrdiff_t>(votes.size()) - positive;
  if (positive == negative) {
    return {1, true};
  }
  return {positive > negative ? 1 : 0, false};
}

double mean_score(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double s : sorted) {
    sum += s;
  }
  return sum / static_cast<double>(sorted.size());
}

EnsembleDecision combine_votes(std::span<const int> votes, std::span<const double> scores) {
  auto outcome = majority_vote(votes);
  EnsembleDecision d;
  d.soft_score = mean_score(scores);
  d.tie_broken = outcome.tie;
  d.label = outcome.tie ? label_from_score(d.soft_score) : outcome.label;
  return d;
}

MajorityVoteEnsemble::MajorityVoteEnsemble(std::vector<TrainedClassifier> members,
                                           std::optional<double> fit_threshold, std::string created_with)
    : members_(std::move(members)), fit_threshold_(fit_threshold), created_with_(std::move(created_with)) {
  if (members_.empty()) {
    throw Error(ErrorCategory::usage, "an ensemble needs at least one member");
  }
}

std::vector<LearnerKind> MajorityVoteEnsemble::kinds() const {
  std::vector<LearnerKind> out;
  for (const auto& m : members_) {
    out.push_back(m.kind());
  }
  return out;
}

EnsemblePrediction MajorityVoteEnsemble::predict(const FeatureVector& raw) const {
  FeatureVector x = fit_threshold_ ? binarize_fit(raw, *fit_threshold_) : raw;
  EnsemblePrediction p;
  p.votes.reserve(members_.size());
  p.member_scores.reserve(members_.size());
  for (const auto& m : members_) {
    double s = m.score(x);
    p.member_scores.push_back(s);
    p.votes.push_back(label_from_score(s));
  }
  auto d = combine_votes(p.votes, p.member_scores);
  p.majority_label = d.label;
  p.soft_score = d.soft_score;
  p.tie_broken = d.tie_broken;
  return p;
}

EnsemblePrediction ensemble_predict(const MajorityVoteEnsemble& e, const FeatureVector& x) { return e.predict(x); }

Hyperparams member_hyperparams(const Hyperparams& hp, LearnerKind kind) {
  Hyperparams out = hp;
  out.seed = derive_seed(hp.seed, "learner." + std::string(to_string(kind)));
  return out;
}

MajorityVoteEnsemble train_ensemble(std::span<const LearnerKind> kinds, const LabeledDataset& ds,
                                    const Hyperparams& hp, std::optional<double> fit_threshold) {
  LabeledDataset data = fit_threshold ? binarize_fit(ds, *fit_threshold) : ds;
  std::vector<std::optional<TrainedClassifier>> slots(kinds.size());
  detail::parallel_for(kinds.size(), [&](std::size_t i) {
    slots[i] = train(kinds[i], data, member_hyperparams(hp, kinds[i]));
  });
  std::vector<TrainedClassifier> members;
  for (auto& s : slots) {
    members.push_back(std::move(*s));
  }
  return MajorityVoteEnsemble(std::move(members), fit_threshold);
}

OutOfFoldScores::OutOfFoldScores(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                                 const Hyperparams& hp, int k, std::uint64_t seed)
    : candidates_(candidates.begin(), candidates.end()) {
  auto folds = stratified_folds(ds, k, seed);
  auto fold_count = static_cast<std::size_t>(k);
  scores_.assign(fold_count, std::vector<std::vector<double>>(candidates_.size()));
  labels_.resize(fold_count);
  std::vector<LabeledDataset> train_sets(fold_count);
  std::vector<LabeledDataset> test_sets(fold_count);
  for (std::size_t f = 0; f < fold_count; ++f) {
    auto train_idx = folds.train_indices(static_cast<int>(f));
    auto test_idx = folds.test_indices(static_cast<int>(f));
    train_sets[f] = ds.subset(train_idx);
    test_sets[f] = ds.subset(test_idx);
    labels_[f] = test_sets[f].labels();
  }
  detail::parallel_for(fold_count * candidates_.size(), [&](std::size_t task) {
    auto f = task / candidates_.size();
    auto c = task % candidates_.size();
    auto model = train(candidates_[c], train_sets[f], member_hyperparams(hp, candidates_[c]));
    auto& out = scores_[f][c];
    out.reserve(test_sets[f].size());
    for (const auto& s : test_sets[f].rows()) {
      out.push_back(model.score(s.features));
    }
  });
}

SubsetScore OutOfFoldScores::evaluate(std::span<const std::size_t> members) const {
  double auc_sum = 0.0;
  int auc_count = 0;
  double f1_sum = 0.0;
  int f1_count = 0;
  std::vector<int> votes(members.size());
  std::vector<double> member_scores(members.size());
  for (std::size_t f = 0; f < scores_.size(); ++f) {
    const auto& labels = labels_[f];
    std::vector<double> soft(labels.size());
    std::vector<int> predicted(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
      for (std::size_t m = 0; m < members.size(); ++m) {
        member_scores[m] = scores_[f][members[m]][r];
        votes[m] = label_from_score(member_scores[m]);
      }
      auto d = combine_votes(votes, member_scores);
      soft[r] = d.soft_score;
      predicted[r] = d.label;
    }
    if (auto a = auc_or_undefined(soft, labels)) {
      auc_sum += *a;
      ++auc_count;
    }
    if (auto v = f1(confusion(predicted, labels))) {
      f1_sum += *v;
      ++f1_count;
    }
  }
  if (auc_count == 0) {
    throw Error(ErrorCategory::metric, "no fold has both classes; AUC criterion undefined");
  }
  SubsetScore out;
  out.auc = auc_sum / auc_count;
  if (f1_count > 0) {
    out.f1 = f1_sum / f1_count;
  }
  return out;
}

SelectionTrace select_members(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                              const Hyperparams& hp, int k, std::uint64_t seed) {
  if (candidates.empty()) {
    throw Error(ErrorCategory::usage, "backward search needs at least one candidate");
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      if (candidates[i] == candidates[j]) {
        throw Error(ErrorCategory::usage, "duplicate candidate '" + std::string(to_string(candidates[i])) + "'");
      }
    }
  }
  SelectionTrace trace;
  trace.final_members.assign(candidates.begin(), candidates.end());
  if (candidates.size() == 1) {
    return trace;
  }

  OutOfFoldScores oof(candidates, ds, hp, k, seed);
  std::vector<std::size_t> current(candidates.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    current[i] = i;
  }
  double criterion = oof.evaluate(current).auc;
  trace.initial_criterion = criterion;

  constexpr double kMinImprovement = 1e-9;
  while (current.size() > 1) {
    std::optional<std::size_t> best_pos;
    SubsetScore best;
    for (std::size_t pos = 0; pos < current.size(); ++pos) {
      std::vector<std::size_t> reduced;
      for (std::size_t q = 0; q < current.size(); ++q) {
        if (q != pos) {
          reduced.push_back(current[q]);
        }
      }
      auto score = oof.evaluate(reduced);
      bool better = false;
      if (!best_pos) {
        better = true;
      } else if (score.auc > best.auc + kMinImprovement) {
        better = true;
      } else if (std::abs(score.auc - best.auc) <= kMinImprovement) {
        double mine = score.f1.value_or(-1.0);
        double theirs = best.f1.value_or(-1.0);
        if (mine > theirs) {
          better = true;
        } else if (mine == theirs) {
          better = to_string(candidates[current[pos]]) > to_string(candidates[current[*best_pos]]);
        }
      }
      if (better) {
        best_pos = pos;
        best = score;
      }
    }
    if (!(best.auc > criterion + kMinImprovement)) {
      break;
    }
    trace.steps.push_back(SelectionStep{candidates[current[*best_pos]], best.auc, best.f1});
    criterion = best.auc;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(*best_pos));
  }
  trace.final_members.clear();
  for (auto i : current) {
    trace.final_members.push_back(candidates[i]);
  }
  return trace;
}

SelectionResult backward_search(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                                const Hyperparams& hp, int k, std::uint64_t seed) {
  auto trace = select_members(candidates, ds, hp, k, seed);
  auto ensemble = train_ensemble(trace.final_members, ds, hp);
  return {std::move(ensemble), std::move(trace)};
}

}  // namespace crcvote
