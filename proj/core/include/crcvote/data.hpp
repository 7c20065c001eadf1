#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crcvote/text.hpp"

namespace crcvote {

inline constexpr std::size_t kNumFeatures = 5;
inline constexpr std::size_t kNumContinuous = 3;

/// Column order is fixed: the first three are continuous, the last two binary.
enum class Feature : std::size_t { fit_result = 0, bmi = 1, age = 2, diabetes = 3, smoking = 4 };

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "fit_result", "bmi", "age", "diabetes", "smoking"};
inline constexpr std::string_view kLabelColumn = "label";
inline constexpr std::string_view kDatasetHeader = "fit_result,bmi,age,diabetes,smoking,label";

/// Conventional quantitative FIT positivity cut-off, ng hemoglobin/mL.
inline constexpr double kConventionalFitThreshold = 100.0;

using FeatureRow = std::array<double, kNumFeatures>;

/// One subject's inputs in schema order.
struct FeatureVector {
  double fit_result = 0.0;  // ng hemoglobin / mL stool
  double bmi = 0.0;         // kg / m^2
  double age = 0.0;         // years
  int diabetes = 0;
  int smoking = 0;

  FeatureRow as_row() const {
    return {fit_result, bmi, age, static_cast<double>(diabetes), static_cast<double>(smoking)};
  }

  bool operator==(const FeatureVector&) const = default;
};

struct RangeViolation {
  std::string field;
  std::string message;
};

/// Range rule for a single field given as a raw number. Binary fields must be
/// exactly 0 or 1; every value must be finite.
std::optional<RangeViolation> check_field(Feature feature, double value);

/// All violated range rules, in schema order. Empty means valid.
std::vector<RangeViolation> range_violations(const FeatureVector& x);

/// Throws Error(range) naming the first offending field.
void validate(const FeatureVector& x);

struct Sample {
  FeatureVector features;
  int label = 0;

  bool operator==(const Sample&) const = default;
};

/// Ordered rows of validated feature vectors with binary labels.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  /// Validates every row; throws Error(range) naming the row index.
  explicit LabeledDataset(std::vector<Sample> rows);

  std::span<const Sample> rows() const { return rows_; }
  const Sample& operator[](std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t positives() const;
  std::vector<int> labels() const;

  /// Rows at `indices`, in the given order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  std::vector<Sample> rows_;
};

/// Parses the dataset CSV format (header `fit_result,bmi,age,diabetes,smoking,label`).
LabeledDataset parse_dataset(std::string_view text);
LabeledDataset load_dataset(const std::string& path);
void write_dataset(std::ostream& out, const LabeledDataset& ds);
void save_dataset(const std::string& path, const LabeledDataset& ds);

/// Replaces fit_result by 1 when it is at or above `threshold`, else 0.
FeatureVector binarize_fit(const FeatureVector& x, double threshold);
LabeledDataset binarize_fit(const LabeledDataset& ds, double threshold);

struct FeatureScaling {
  double mean = 0.0;
  double stddev = 0.0;  // 0 marks a constant column; apply() maps it to 0

  bool operator==(const FeatureScaling&) const = default;
};

/// z-score parameters for the continuous features (fit_result, bmi, age).
/// Binary features pass through unchanged.
struct ScalingParams {
  std::array<FeatureScaling, kNumContinuous> continuous{};

  FeatureRow apply(const FeatureRow& raw) const;
  FeatureRow apply(const FeatureVector& x) const { return apply(x.as_row()); }

  bool operator==(const ScalingParams&) const = default;
};

/// Standardized design matrix. Rows are no longer FeatureVectors: a z-scored
/// age of -1 is meaningful here but outside the raw range rules.
struct StandardizedData {
  std::vector<FeatureRow> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
};

/// Population (divide-by-n) mean and standard deviation per continuous column.
ScalingParams fit_scaling(const LabeledDataset& ds);
StandardizedData apply_scaling(const ScalingParams& params, const LabeledDataset& ds);
std::pair<StandardizedData, ScalingParams> standardize(const LabeledDataset& ds);

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of_row;

  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;

  bool operator==(const FoldAssignment&) const = default;
};

/// Stratified k-fold split: each class is shuffled with its own seeded
/// stream and dealt round-robin, negatives continuing where positives stopped.
FoldAssignment stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);
FoldAssignment stratified_folds(const LabeledDataset& ds, int k, std::uint64_t seed);

/// Parameters of the synthetic population.
///
/// Features are drawn independently from their marginals. The label is
/// Bernoulli(sigmoid(intercept + beta . z)) where z standardizes each feature
/// by the analytic mean and standard deviation of its (unclamped) marginal.
struct GeneratorParams {
  static constexpr int kVersion = 1;

  double age_min = 50.0;
  double age_max = 85.0;
  double bmi_mean = 27.0;
  double bmi_sd = 5.0;
  double bmi_min = 10.0;
  double bmi_max = 80.0;
  double fit_log_mean = 2.995732273553991;  // ln 20
  double fit_log_sd = 1.2;
  double diabetes_prevalence = 0.15;
  double smoking_prevalence = 0.25;
  double intercept = -0.55;
  std::array<double, kNumFeatures> beta{2.5, 0.35, 0.6, 0.3, 0.45};

  /// Throws Error(schema) on negative spreads, prevalences outside [0, 1] or
  /// sampling ranges that would produce invalid feature vectors.
  void validate() const;

  static GeneratorParams from_config(const KeyValueConfig& config);
  std::string to_config_text() const;

  /// Analytic (mean, sd) of each marginal, used by the generative score.
  std::array<FeatureScaling, kNumFeatures> reference_moments() const;

  bool operator==(const GeneratorParams&) const = default;
};

LabeledDataset generate_synthetic(std::int64_t n, std::uint64_t seed, const GeneratorParams& params);

/// The exact generative posterior P(label = 1 | x).
double bayes_posterior(const FeatureVector& x, const GeneratorParams& params);

}  // namespace crcvote
