#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crcvote/data.hpp"
#include "crcvote/learners.hpp"

namespace crcvote {

inline constexpr std::string_view kModelFormatVersion = "1";
inline constexpr std::string_view kCreatedWith = "crcvote 0.1.0";

enum class TieBreak { mean_score_then_positive };

std::string_view to_string(TieBreak t);

struct VoteOutcome {
  int label = 1;
  /// Equal positive and negative counts. `label` is then 1, but the
  /// ensemble resolves the tie itself (see combine_votes).
  bool tie = false;
};

/// Plurality of binary votes. Throws Error(usage) on an empty list.
VoteOutcome majority_vote(std::span<const int> votes);

/// Mean of member scores, summed in ascending order so that the value is
/// identical for every permutation of the members.
double mean_score(std::span<const double> scores);

struct EnsembleDecision {
  int label = 0;
  double soft_score = 0.0;
  bool tie_broken = false;
};

/// Majority label, with even splits resolved by soft score >= 0.5.
EnsembleDecision combine_votes(std::span<const int> votes, std::span<const double> scores);

struct EnsemblePrediction {
  std::vector<int> votes;
  std::vector<double> member_scores;
  int majority_label = 0;
  double soft_score = 0.0;
  bool tie_broken = false;
};

/// Majority-vote combination of trained classifiers. Immutable once built.
class MajorityVoteEnsemble {
 public:
  /// Throws Error(usage) when `members` is empty. A FIT threshold, when set,
  /// binarizes fit_result before any member sees the input.
  explicit MajorityVoteEnsemble(std::vector<TrainedClassifier> members,
                                std::optional<double> fit_threshold = std::nullopt,
                                std::string created_with = std::string(kCreatedWith));

  const std::vector<TrainedClassifier>& members() const { return members_; }
  std::vector<LearnerKind> kinds() const;
  TieBreak tie_break() const { return TieBreak::mean_score_then_positive; }
  std::string_view version() const { return kModelFormatVersion; }
  const std::string& created_with() const { return created_with_; }
  std::optional<double> fit_threshold() const { return fit_threshold_; }

  EnsemblePrediction predict(const FeatureVector& x) const;

 private:
  std::vector<TrainedClassifier> members_;
  std::optional<double> fit_threshold_;
  std::string created_with_;
};

EnsemblePrediction ensemble_predict(const MajorityVoteEnsemble& e, const FeatureVector& x);

/// Hyperparameters a member of `kind` is trained with: hp with the seed
/// replaced by the `learner.<kind>` substream of hp.seed.
Hyperparams member_hyperparams(const Hyperparams& hp, LearnerKind kind);

MajorityVoteEnsemble train_ensemble(std::span<const LearnerKind> kinds, const LabeledDataset& ds,
                                    const Hyperparams& hp, std::optional<double> fit_threshold = std::nullopt);

struct SelectionStep {
  LearnerKind removed;
  double criterion = 0.0;  // mean CV AUC after the removal
  std::optional<double> f1;
};

struct SelectionTrace {
  std::string criterion = "cv_auc";
  double initial_criterion = 0.0;
  std::vector<SelectionStep> steps;
  std::vector<LearnerKind> final_members;

  double final_criterion() const { return steps.empty() ? initial_criterion : steps.back().criterion; }
};

struct SubsetScore {
  double auc = 0.0;
  std::optional<double> f1;
};

/// Out-of-fold scores of each candidate, computed once and reused for every
/// subset the selection visits.
class OutOfFoldScores {
 public:
  OutOfFoldScores(std::span<const LearnerKind> candidates, const LabeledDataset& ds, const Hyperparams& hp,
                  int k, std::uint64_t seed);

  const std::vector<LearnerKind>& candidates() const { return candidates_; }
  /// Mean over folds of the subset ensemble's AUC (soft score) and F1
  /// (majority label). Folds where a metric is undefined are skipped.
  SubsetScore evaluate(std::span<const std::size_t> members) const;

 private:
  std::vector<LearnerKind> candidates_;
  // [fold][candidate][test row]
  std::vector<std::vector<std::vector<double>>> scores_;
  std::vector<std::vector<int>> labels_;
};

/// Greedy backward elimination by mean stratified k-fold CV AUC.
///
/// Each step removes the member whose removal gives the largest AUC; ties
/// within 1e-9 go to the higher F1, then to the kind whose name sorts last.
/// Stops when no removal improves the criterion by more than 1e-9.
SelectionTrace select_members(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                              const Hyperparams& hp, int k, std::uint64_t seed);

struct SelectionResult {
  MajorityVoteEnsemble ensemble;
  SelectionTrace trace;
};

/// select_members followed by training the survivors on all of `ds`.
SelectionResult backward_search(std::span<const LearnerKind> candidates, const LabeledDataset& ds,
                                const Hyperparams& hp, int k, std::uint64_t seed);

/// Versioned JSON model document; see docs/model_format.md.
std::string serialize_model(const MajorityVoteEnsemble& e);
/// Throws Error(model) on corrupt text, unsupported version or schema mismatch.
MajorityVoteEnsemble deserialize_model(std::string_view text);
void save_model(const MajorityVoteEnsemble& e, const std::string& path);
MajorityVoteEnsemble load_model(const std::string& path);

}  // namespace crcvote
