#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "crcvote/error.hpp"
#include "crcvote/eval.hpp"

namespace crcvote {
namespace {

using nlohmann::json;

/// Two decimals without the leading zero: 0.8912 -> ".89", 1 -> "1.00".
std::string two_places(const Metric& m) {
  if (!m) {
    return "n/a";
  }
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", *m);
  std::string s(buf.data());
  if (s.rfind("0.", 0) == 0) {
    s.erase(0, 1);
  } else if (s.rfind("-0.", 0) == 0) {
    s.erase(1, 1);
  }
  return s;
}

std::string four_places(const Metric& m) {
  if (!m) {
    return "n/a";
  }
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.4f", *m);
  return buf.data();
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) {
    out.append(width - out.size(), ' ');
  }
  return out;
}

struct LiteratureRow {
  std::string_view method;
  std::string_view specificity;
  std::string_view sensitivity;
  std::string_view cost;
  std::string_view time;
};

constexpr std::array<LiteratureRow, 3> kLiterature{{
    {"Fecal Occult Blood Tests", ".96", ".74", "$15", "5 minutes"},
    {"CT Colonography", ".88", ".84", "$439", "30 minutes"},
    {"Stool DNA Test", ".89", ".92", "$600", "2 weeks"},
}};

constexpr std::size_t kNameWidth = 34;

void score_block(std::ostringstream& out, const ClassifierResult& r, bool with_f1) {
  const auto& s = r.summary;
  std::array<std::pair<std::string_view, const MetricSummary*>, 5> lines{{
      {"Precision", &s.precision},
      {"Sensitivity", &s.sensitivity},
      {"AUC", &s.auc},
      {"Specificity", &s.specificity},
      {"F1", &s.f1},
  }};
  std::size_t count = with_f1 ? 5 : 4;
  for (std::size_t i = 0; i < count; ++i) {
    out << pad(i == 0 ? std::string_view(r.display_name) : std::string_view(), kNameWidth) << lines[i].first
        << ": " << two_places(lines[i].second->mean) << '\n';
  }
}

void stats_rows(std::ostringstream& out, const ClassifierResult& r) {
  const auto& s = r.summary;
  std::array<std::pair<std::string_view, const MetricSummary*>, 5> rows{{
      {"precision", &s.precision},
      {"sensitivity", &s.sensitivity},
      {"specificity", &s.specificity},
      {"f1", &s.f1},
      {"auc", &s.auc},
  }};
  for (const auto& [metric, m] : rows) {
    out << pad(r.name, 22) << pad(metric, 13) << pad(four_places(m->mean), 9) << pad(four_places(m->stddev), 9)
        << m->undefined_folds << '\n';
  }
}

}  // namespace

std::string report_table(const EvaluationReport& report) {
  std::ostringstream out;
  out << "Classifier scores (mean of " << report.k << "-fold cross-validation)\n";
  out << pad("Classifier", kNameWidth) << "Scores\n";
  out << std::string(kNameWidth + 18, '-') << '\n';
  for (const auto& c : report.classifiers) {
    score_block(out, c, false);
    out << '\n';
  }
  score_block(out, report.ensemble, true);
  out << '\n';

  out << "Comparison with existing methods (literature values except the last row)\n";
  out << pad("Method", kNameWidth) << "Statistics\n";
  out << std::string(kNameWidth + 18, '-') << '\n';
  for (const auto& row : kLiterature) {
    out << pad(row.method, kNameWidth) << "Specificity: " << row.specificity << '\n';
    out << pad("", kNameWidth) << "Sensitivity: " << row.sensitivity << '\n';
    out << pad("", kNameWidth) << "Cost: " << row.cost << '\n';
    out << pad("", kNameWidth) << "Time: " << row.time << "\n\n";
  }
  out << pad("Majority Vote ensemble (this run)", kNameWidth)
      << "Specificity: " << two_places(report.ensemble.summary.specificity.mean) << '\n';
  out << pad("", kNameWidth) << "Sensitivity: " << two_places(report.ensemble.summary.sensitivity.mean) << "\n\n";

  out << "Fold statistics (k=" << report.k << ", seed=" << report.seed << ", rows=" << report.rows
      << ", selection=" << (report.selection ? "on" : "off") << ")\n";
  out << pad("classifier", 22) << pad("metric", 13) << pad("mean", 9) << pad("sd", 9) << "undefined\n";
  for (const auto& c : report.classifiers) {
    stats_rows(out, c);
  }
  stats_rows(out, report.ensemble);
  if (report.selection) {
    out << "\nEnsemble members per fold\n";
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
      out << "fold " << f << ':';
      for (auto kind : report.folds[f].ensemble_members) {
        out << ' ' << to_string(kind);
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string roc_csv(const EvaluationReport& report) {
  std::ostringstream out;
  auto block = [&](const ClassifierResult& r) {
    out << "classifier,threshold,fpr,tpr\n";
    for (const auto& p : r.roc.points) {
      out << r.name << ',' << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
          << format_double(p.tpr) << '\n';
    }
  };
  for (const auto& c : report.classifiers) {
    block(c);
  }
  block(report.ensemble);
  return out.str();
}

void emit_roc(const EvaluationReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCategory::io, "cannot write ROC file '" + path + "'");
  }
  file << roc_csv(report);
  if (!file.flush()) {
    throw Error(ErrorCategory::io, "write failed for '" + path + "'");
  }
}

std::vector<std::pair<std::string, RocCurve>> parse_roc_csv(std::string_view text) {
  std::vector<std::pair<std::string, RocCurve>> out;
  bool in_block = false;
  int line_number = 0;
  for (auto raw : split(text, '\n')) {
    ++line_number;
    auto line = trim(raw);
    if (line.empty()) {
      continue;
    }
    if (line == "classifier,threshold,fpr,tpr") {
      in_block = true;
      out.emplace_back();
      continue;
    }
    auto where = " (line " + std::to_string(line_number) + ")";
    if (!in_block) {
      throw Error(ErrorCategory::schema, "ROC data before a header line" + where);
    }
    auto cells = split(line, ',');
    if (cells.size() != 4) {
      throw Error(ErrorCategory::schema, "expected 4 ROC columns" + where);
    }
    auto threshold = parse_double(cells[1]);
    auto fpr = parse_double(cells[2]);
    auto tpr = parse_double(cells[3]);
    if (!threshold || !fpr || !tpr) {
      throw Error(ErrorCategory::schema, "non-numeric ROC cell" + where);
    }
    auto& [name, curve] = out.back();
    if (curve.points.empty()) {
      name = std::string(cells[0]);
    } else if (name != cells[0]) {
      throw Error(ErrorCategory::schema, "classifier name changes inside a block" + where);
    }
    curve.points.push_back({*threshold, *fpr, *tpr});
  }
  return out;
}

// JSON form of a report. Doubles that JSON cannot hold (the ROC endpoint
// thresholds) are written as strings.
namespace {

json number(double v) {
  if (std::isfinite(v)) {
    return v;
  }
  return format_double(v);
}

double read_number(const json& j) {
  if (j.is_number()) {
    return j.get<double>();
  }
  if (j.is_string()) {
    if (auto v = parse_double(j.get<std::string>())) {
      return *v;
    }
  }
  throw Error(ErrorCategory::schema, "expected a number in report JSON");
}

json metric(const Metric& m) { return m ? json(*m) : json(nullptr); }

Metric read_metric(const json& j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  return j.get<double>();
}

json summary_json(const MetricSummary& s) {
  return {{"mean", metric(s.mean)}, {"stddev", metric(s.stddev)}, {"undefined_folds", s.undefined_folds}};
}

MetricSummary read_summary(const json& j) {
  return {read_metric(j.at("mean")), read_metric(j.at("stddev")), j.at("undefined_folds").get<int>()};
}

json set_json(const MetricSet& m) {
  return {{"precision", metric(m.precision)},
          {"sensitivity", metric(m.sensitivity)},
          {"specificity", metric(m.specificity)},
          {"f1", metric(m.f1)},
          {"auc", metric(m.auc)}};
}

MetricSet read_set(const json& j) {
  return {read_metric(j.at("precision")), read_metric(j.at("sensitivity")), read_metric(j.at("specificity")),
          read_metric(j.at("f1")), read_metric(j.at("auc"))};
}

json result_json(const ClassifierResult& r) {
  json j;
  j["name"] = r.name;
  j["display_name"] = r.display_name;
  j["fold_confusion"] = json::array();
  for (const auto& cm : r.fold_confusion) {
    j["fold_confusion"].push_back({{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}});
  }
  j["fold_metrics"] = json::array();
  for (const auto& m : r.fold_metrics) {
    j["fold_metrics"].push_back(set_json(m));
  }
  const auto& s = r.summary;
  j["summary"] = {{"precision", summary_json(s.precision)},
                  {"sensitivity", summary_json(s.sensitivity)},
                  {"specificity", summary_json(s.specificity)},
                  {"f1", summary_json(s.f1)},
                  {"auc", summary_json(s.auc)}};
  j["roc"] = json::array();
  for (const auto& p : r.roc.points) {
    j["roc"].push_back({number(p.threshold), p.fpr, p.tpr});
  }
  return j;
}

ClassifierResult read_result(const json& j) {
  ClassifierResult r;
  r.name = j.at("name").get<std::string>();
  r.display_name = j.at("display_name").get<std::string>();
  for (const auto& cm : j.at("fold_confusion")) {
    r.fold_confusion.push_back({cm.at("tp").get<std::uint64_t>(), cm.at("fp").get<std::uint64_t>(),
                                cm.at("tn").get<std::uint64_t>(), cm.at("fn").get<std::uint64_t>()});
  }
  for (const auto& m : j.at("fold_metrics")) {
    r.fold_metrics.push_back(read_set(m));
  }
  const auto& s = j.at("summary");
  r.summary = {read_summary(s.at("precision")), read_summary(s.at("sensitivity")),
               read_summary(s.at("specificity")), read_summary(s.at("f1")), read_summary(s.at("auc"))};
  for (const auto& p : j.at("roc")) {
    if (!p.is_array() || p.size() != 3) {
      throw Error(ErrorCategory::schema, "ROC point must be [threshold, fpr, tpr]");
    }
    r.roc.points.push_back({read_number(p[0]), p[1].get<double>(), p[2].get<double>()});
  }
  return r;
}

json scaling_json(const ScalingParams& s) {
  json out = json::array();
  for (const auto& f : s.continuous) {
    out.push_back({{"mean", f.mean}, {"stddev", f.stddev}});
  }
  return out;
}

ScalingParams read_scaling(const json& j) {
  ScalingParams s;
  if (!j.is_array() || j.size() != kNumContinuous) {
    throw Error(ErrorCategory::schema, "scaling must list " + std::to_string(kNumContinuous) + " features");
  }
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    s.continuous[i] = {j[i].at("mean").get<double>(), j[i].at("stddev").get<double>()};
  }
  return s;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  json j;
  j["k"] = report.k;
  j["seed"] = report.seed;
  j["selection"] = report.selection;
  j["rows"] = report.rows;
  j["fold_of_row"] = report.assignment.fold_of_row;
  j["classifiers"] = json::array();
  for (const auto& c : report.classifiers) {
    j["classifiers"].push_back(result_json(c));
  }
  j["ensemble"] = result_json(report.ensemble);
  j["folds"] = json::array();
  for (const auto& f : report.folds) {
    json members = json::array();
    for (auto kind : f.ensemble_members) {
      members.push_back(std::string(to_string(kind)));
    }
    j["folds"].push_back({{"train_rows", f.train_rows},
                          {"test_rows", f.test_rows},
                          {"scaling", scaling_json(f.scaling)},
                          {"ensemble_members", members}});
  }
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::schema, std::string("report is not valid JSON: ") + e.what());
  }
  try {
    EvaluationReport r;
    r.k = j.at("k").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.selection = j.at("selection").get<bool>();
    r.rows = j.at("rows").get<std::size_t>();
    r.assignment.k = r.k;
    r.assignment.fold_of_row = j.at("fold_of_row").get<std::vector<int>>();
    for (const auto& c : j.at("classifiers")) {
      r.classifiers.push_back(read_result(c));
    }
    r.ensemble = read_result(j.at("ensemble"));
    for (const auto& f : j.at("folds")) {
      FoldDetail d;
      d.train_rows = f.at("train_rows").get<std::size_t>();
      d.test_rows = f.at("test_rows").get<std::size_t>();
      d.scaling = read_scaling(f.at("scaling"));
      for (const auto& name : f.at("ensemble_members")) {
        auto kind = parse_kind(name.get<std::string>(), true);
        if (!kind) {
          throw Error(ErrorCategory::schema, "unknown classifier '" + name.get<std::string>() + "' in report");
        }
        d.ensemble_members.push_back(*kind);
      }
      r.folds.push_back(std::move(d));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::schema, std::string("report JSON does not match the schema: ") + e.what());
  }
}

}  // namespace crcvote
