#include "crcvote/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "crcvote/error.hpp"
#include "crcvote/random.hpp"

namespace crcvote {
namespace {

struct FieldRange {
  double lo;
  double hi;
  bool binary;
};

constexpr std::array<FieldRange, kNumFeatures> kRanges{{
    {0.0, HUGE_VAL, false},
    {10.0, 80.0, false},
    {18.0, 120.0, false},
    {0.0, 1.0, true},
    {0.0, 1.0, true},
}};

std::string describe_range(std::size_t f) {
  const auto& r = kRanges[f];
  if (r.binary) {
    return "{0,1}";
  }
  if (std::isinf(r.hi)) {
    return ">= " + format_double(r.lo);
  }
  return "[" + format_double(r.lo) + ", " + format_double(r.hi) + "]";
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

std::optional<RangeViolation> check_field(Feature feature, double value) {
  auto f = static_cast<std::size_t>(feature);
  const auto& r = kRanges[f];
  std::string name(kFeatureNames[f]);
  bool ok = std::isfinite(value) && value >= r.lo && value <= r.hi;
  if (ok && r.binary) {
    ok = value == 0.0 || value == 1.0;
  }
  if (ok) {
    return std::nullopt;
  }
  return RangeViolation{name, name + " = " + format_double(value) + " outside " + describe_range(f)};
}

std::vector<RangeViolation> range_violations(const FeatureVector& x) {
  std::vector<RangeViolation> out;
  auto row = x.as_row();
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (auto v = check_field(static_cast<Feature>(f), row[f])) {
      out.push_back(std::move(*v));
    }
  }
  return out;
}

void validate(const FeatureVector& x) {
  auto violations = range_violations(x);
  if (!violations.empty()) {
    throw Error(ErrorCategory::range, violations.front().message);
  }
}

LabeledDataset::LabeledDataset(std::vector<Sample> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    auto violations = range_violations(rows_[i].features);
    if (!violations.empty()) {
      throw Error(ErrorCategory::range, "row " + std::to_string(i + 1) + ": " + violations.front().message);
    }
    if (rows_[i].label != 0 && rows_[i].label != 1) {
      throw Error(ErrorCategory::range, "row " + std::to_string(i + 1) + ": label " +
                                            std::to_string(rows_[i].label) + " outside {0,1}");
    }
  }
}

std::size_t LabeledDataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [](const Sample& s) { return s.label == 1; }));
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(rows_.size());
  for (const auto& s : rows_) {
    out.push_back(s.label);
  }
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.rows_.reserve(indices.size());
  for (auto i : indices) {
    out.rows_.push_back(rows_.at(i));
  }
  return out;
}

LabeledDataset parse_dataset(std::string_view text) {
  auto lines = split(text, '\n');
  // Trailing blank lines are tolerated; blank lines inside the data are not.
  while (!lines.empty() && trim(lines.back()).empty()) {
    lines.pop_back();
  }
  if (lines.empty()) {
    throw Error(ErrorCategory::schema, "missing header row");
  }
  auto header = trim(lines.front());
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") {
    header.remove_prefix(3);
  }
  auto columns = split(header, ',');
  auto expected = split(kDatasetHeader, ',');
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (c >= columns.size() || trim(columns[c]) != expected[c]) {
      throw Error(ErrorCategory::schema, "header column " + std::to_string(c + 1) + ": expected '" +
                                             std::string(expected[c]) + "'");
    }
  }
  if (columns.size() != expected.size()) {
    throw Error(ErrorCategory::schema, "header has " + std::to_string(columns.size()) +
                                           " columns, expected " + std::to_string(expected.size()));
  }
  if (lines.size() == 1) {
    throw Error(ErrorCategory::schema, "empty data section");
  }

  std::vector<Sample> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    std::string where = "row " + std::to_string(r) + " (line " + std::to_string(r + 1) + ")";
    auto cells = split(trim(lines[r]), ',');
    if (cells.size() != expected.size()) {
      throw Error(ErrorCategory::schema, where + ": expected " + std::to_string(expected.size()) +
                                             " cells, found " + std::to_string(cells.size()));
    }
    FeatureRow values{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      auto value = parse_double(cells[f]);
      if (!value) {
        throw Error(ErrorCategory::schema, where + ", column " + std::string(kFeatureNames[f]) +
                                               ": non-numeric value '" + std::string(trim(cells[f])) + "'");
      }
      if (auto v = check_field(static_cast<Feature>(f), *value)) {
        throw Error(ErrorCategory::range, where + ", column " + v->field + ": " + v->message);
      }
      values[f] = *value;
    }
    auto label = parse_double(cells[kNumFeatures]);
    if (!label) {
      throw Error(ErrorCategory::schema, where + ", column label: non-numeric value '" +
                                             std::string(trim(cells[kNumFeatures])) + "'");
    }
    if (*label != 0.0 && *label != 1.0) {
      throw Error(ErrorCategory::range,
                  where + ", column label: value " + format_double(*label) + " outside {0,1}");
    }
    FeatureVector x{values[0], values[1], values[2], static_cast<int>(values[3]), static_cast<int>(values[4])};
    rows.push_back(Sample{x, static_cast<int>(*label)});
  }
  return LabeledDataset(std::move(rows));
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCategory::io, "cannot open dataset '" + path + "'");
  }
  std::ostringstream content;
  content << in.rdbuf();
  return parse_dataset(content.str());
}

void write_dataset(std::ostream& out, const LabeledDataset& ds) {
  out << kDatasetHeader << '\n';
  for (const auto& s : ds.rows()) {
    const auto& x = s.features;
    out << format_double(x.fit_result) << ',' << format_double(x.bmi) << ',' << format_double(x.age) << ','
        << x.diabetes << ',' << x.smoking << ',' << s.label << '\n';
  }
}

void save_dataset(const std::string& path, const LabeledDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCategory::io, "cannot write dataset '" + path + "'");
  }
  write_dataset(out, ds);
  if (!out.flush()) {
    throw Error(ErrorCategory::io, "write failed for '" + path + "'");
  }
}

FeatureVector binarize_fit(const FeatureVector& x, double threshold) {
  FeatureVector out = x;
  out.fit_result = x.fit_result >= threshold ? 1.0 : 0.0;
  return out;
}

LabeledDataset binarize_fit(const LabeledDataset& ds, double threshold) {
  std::vector<Sample> rows(ds.rows().begin(), ds.rows().end());
  for (auto& s : rows) {
    s.features = binarize_fit(s.features, threshold);
  }
  return LabeledDataset(std::move(rows));
}

FeatureRow ScalingParams::apply(const FeatureRow& raw) const {
  FeatureRow z = raw;
  for (std::size_t f = 0; f < kNumContinuous; ++f) {
    const auto& s = continuous[f];
    z[f] = s.stddev > 0.0 ? (raw[f] - s.mean) / s.stddev : 0.0;
  }
  return z;
}

ScalingParams fit_scaling(const LabeledDataset& ds) {
  if (ds.empty()) {
    throw Error(ErrorCategory::usage, "cannot fit scaling on an empty dataset");
  }
  ScalingParams params;
  auto n = static_cast<double>(ds.size());
  for (std::size_t f = 0; f < kNumContinuous; ++f) {
    double first = ds[0].features.as_row()[f];
    bool constant = true;
    double sum = 0.0;
    for (const auto& s : ds.rows()) {
      double v = s.features.as_row()[f];
      constant = constant && v == first;
      sum += v;
    }
    if (constant) {
      params.continuous[f] = {first, 0.0};
      continue;
    }
    double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : ds.rows()) {
      double d = s.features.as_row()[f] - mean;
      ss += d * d;
    }
    params.continuous[f] = {mean, std::sqrt(ss / n)};
  }
  return params;
}

StandardizedData apply_scaling(const ScalingParams& params, const LabeledDataset& ds) {
  StandardizedData out;
  out.rows.reserve(ds.size());
  out.labels.reserve(ds.size());
  for (const auto& s : ds.rows()) {
    out.rows.push_back(params.apply(s.features));
    out.labels.push_back(s.label);
  }
  return out;
}

std::pair<StandardizedData, ScalingParams> standardize(const LabeledDataset& ds) {
  auto params = fit_scaling(ds);
  return {apply_scaling(params, ds), params};
}

std::vector<std::size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] == fold) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] != fold) {
      out.push_back(i);
    }
  }
  return out;
}

FoldAssignment stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > labels.size()) {
    throw Error(ErrorCategory::usage, "fold count k=" + std::to_string(k) + " outside [2, " +
                                          std::to_string(labels.size()) + "]");
  }
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? positives : negatives).push_back(i);
  }
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCategory::usage, "stratified folds need both classes present");
  }
  Rng pos_rng(derive_seed(seed, "folds.positive"));
  Rng neg_rng(derive_seed(seed, "folds.negative"));
  pos_rng.shuffle(positives.begin(), positives.end());
  neg_rng.shuffle(negatives.begin(), negatives.end());

  FoldAssignment out;
  out.k = k;
  out.fold_of_row.assign(labels.size(), -1);
  std::size_t slot = 0;
  for (auto i : positives) {
    out.fold_of_row[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
  }
  for (auto i : negatives) {
    out.fold_of_row[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
  }
  return out;
}

FoldAssignment stratified_folds(const LabeledDataset& ds, int k, std::uint64_t seed) {
  auto labels = ds.labels();
  return stratified_folds(labels, k, seed);
}

void GeneratorParams::validate() const {
  auto fail = [](const std::string& message) { throw Error(ErrorCategory::schema, "generator params: " + message); };
  auto finite = [](double v) { return std::isfinite(v); };
  for (double v : {age_min, age_max, bmi_mean, bmi_sd, bmi_min, bmi_max, fit_log_mean, fit_log_sd,
                   diabetes_prevalence, smoking_prevalence, intercept}) {
    if (!finite(v)) {
      fail("non-finite value");
    }
  }
  for (double b : beta) {
    if (!finite(b)) {
      fail("non-finite coefficient");
    }
  }
  if (bmi_sd < 0.0) {
    fail("bmi.sd must be >= 0");
  }
  if (fit_log_sd < 0.0) {
    fail("fit.log_sd must be >= 0");
  }
  if (diabetes_prevalence < 0.0 || diabetes_prevalence > 1.0) {
    fail("diabetes.prevalence must lie in [0, 1]");
  }
  if (smoking_prevalence < 0.0 || smoking_prevalence > 1.0) {
    fail("smoking.prevalence must lie in [0, 1]");
  }
  if (!(age_min <= age_max) || age_min < 18.0 || age_max > 120.0) {
    fail("age range must satisfy 18 <= age.min <= age.max <= 120");
  }
  if (!(bmi_min <= bmi_max) || bmi_min < 10.0 || bmi_max > 80.0) {
    fail("bmi clamp must satisfy 10 <= bmi.min <= bmi.max <= 80");
  }
}

namespace {

constexpr std::array<std::string_view, kNumFeatures> kBetaKeys{
    "beta.fit_result", "beta.bmi", "beta.age", "beta.diabetes", "beta.smoking"};

}  // namespace

GeneratorParams GeneratorParams::from_config(const KeyValueConfig& config) {
  GeneratorParams p;
  if (auto version = config.get_int("generator.version"); version && *version != kVersion) {
    throw Error(ErrorCategory::schema, "unsupported generator.version " + std::to_string(*version));
  }
  auto read = [&](const char* key, double& field) {
    if (auto v = config.get_double(key)) {
      field = *v;
    }
  };
  read("age.min", p.age_min);
  read("age.max", p.age_max);
  read("bmi.mean", p.bmi_mean);
  read("bmi.sd", p.bmi_sd);
  read("bmi.min", p.bmi_min);
  read("bmi.max", p.bmi_max);
  read("fit.log_mean", p.fit_log_mean);
  read("fit.log_sd", p.fit_log_sd);
  read("diabetes.prevalence", p.diabetes_prevalence);
  read("smoking.prevalence", p.smoking_prevalence);
  read("beta.intercept", p.intercept);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    read(std::string(kBetaKeys[f]).c_str(), p.beta[f]);
  }
  p.validate();
  return p;
}

std::string GeneratorParams::to_config_text() const {
  std::ostringstream out;
  out << "generator.version=" << kVersion << '\n'
      << "age.min=" << format_double(age_min) << '\n'
      << "age.max=" << format_double(age_max) << '\n'
      << "bmi.mean=" << format_double(bmi_mean) << '\n'
      << "bmi.sd=" << format_double(bmi_sd) << '\n'
      << "bmi.min=" << format_double(bmi_min) << '\n'
      << "bmi.max=" << format_double(bmi_max) << '\n'
      << "fit.log_mean=" << format_double(fit_log_mean) << '\n'
      << "fit.log_sd=" << format_double(fit_log_sd) << '\n'
      << "diabetes.prevalence=" << format_double(diabetes_prevalence) << '\n'
      << "smoking.prevalence=" << format_double(smoking_prevalence) << '\n'
      << "beta.intercept=" << format_double(intercept) << '\n';
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    out << kBetaKeys[f] << '=' << format_double(beta[f]) << '\n';
  }
  return out.str();
}

std::array<FeatureScaling, kNumFeatures> GeneratorParams::reference_moments() const {
  double s2 = fit_log_sd * fit_log_sd;
  double fit_mean = std::exp(fit_log_mean + s2 / 2.0);
  double fit_sd = fit_mean * std::sqrt(std::expm1(s2));
  auto bernoulli = [](double p) { return FeatureScaling{p, std::sqrt(p * (1.0 - p))}; };
  return {{
      {fit_mean, fit_sd},
      {bmi_mean, bmi_sd},
      {(age_min + age_max) / 2.0, (age_max - age_min) / std::sqrt(12.0)},
      bernoulli(diabetes_prevalence),
      bernoulli(smoking_prevalence),
  }};
}

double bayes_posterior(const FeatureVector& x, const GeneratorParams& params) {
  auto moments = params.reference_moments();
  auto row = x.as_row();
  double score = params.intercept;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    // Degenerate marginals contribute nothing rather than dividing by zero.
    if (moments[f].stddev > 0.0) {
      score += params.beta[f] * (row[f] - moments[f].mean) / moments[f].stddev;
    }
  }
  return sigmoid(score);
}

LabeledDataset generate_synthetic(std::int64_t n, std::uint64_t seed, const GeneratorParams& params) {
  if (n < 0) {
    throw Error(ErrorCategory::usage, "row count must be >= 0");
  }
  params.validate();
  Rng rng(derive_seed(seed, "generator"));
  std::vector<Sample> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    FeatureVector x;
    x.age = rng.uniform(params.age_min, params.age_max);
    x.bmi = std::clamp(rng.normal(params.bmi_mean, params.bmi_sd), params.bmi_min, params.bmi_max);
    x.fit_result = std::exp(rng.normal(params.fit_log_mean, params.fit_log_sd));
    x.diabetes = rng.bernoulli(params.diabetes_prevalence) ? 1 : 0;
    x.smoking = rng.bernoulli(params.smoking_prevalence) ? 1 : 0;
    int label = rng.bernoulli(bayes_posterior(x, params)) ? 1 : 0;
    rows.push_back(Sample{x, label});
  }
  return LabeledDataset(std::move(rows));
}

}  // namespace crcvote
