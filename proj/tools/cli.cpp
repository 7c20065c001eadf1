#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>

#include "CLI11.hpp"

#include "crcvote/data.hpp"
#include "crcvote/ensemble.hpp"
#include "crcvote/error.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/random.hpp"
#include "crcvote/service.hpp"

namespace crcvote::cli {
namespace {

// Keys the run configuration understands besides generator and learner keys.
const std::set<std::string> kRunKeys{"data", "generate.n", "seed", "k", "select", "kinds",
                                     "binarize_fit", "out", "report", "roc", "json"};

std::set<std::string> generator_keys() {
  std::set<std::string> keys;
  auto text = GeneratorParams{}.to_config_text();
  for (auto line : split(text, '\n')) {
    if (auto eq = line.find('='); eq != std::string_view::npos) {
      keys.emplace(line.substr(0, eq));
    }
  }
  return keys;
}

void check_keys(const KeyValueConfig& config) {
  static const auto gen = generator_keys();
  static const std::array<std::string_view, 6> learner_prefixes{"tree.", "forest.", "boost.",
                                                                "logistic.", "svm.", "mlp."};
  for (const auto& [key, value] : config.values()) {
    bool learner = std::any_of(learner_prefixes.begin(), learner_prefixes.end(),
                               [&](std::string_view p) { return key.rfind(p, 0) == 0; });
    if (!learner && kRunKeys.count(key) == 0 && gen.count(key) == 0) {
      throw Error(ErrorCategory::usage, "unknown configuration key '" + key + "'");
    }
  }
}

/// Flags shared by train and evaluate. Every flag lands in the config,
/// overriding the file.
struct RunFlags {
  std::string config_path;
  std::string data;
  std::string generate_n;
  std::string seed;
  std::string kinds;
  std::vector<std::string> binarize_fit;
  std::vector<std::string> overrides;
  std::string k;
  bool select = false;

  CLI::Option* binarize_opt = nullptr;
  CLI::Option* select_opt = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--data", data, "dataset CSV");
    app.add_option("--generate", generate_n, "use N synthetic rows instead of --data");
    app.add_option("--seed", seed, "master seed for every random stream");
    app.add_option("--kinds", kinds, "comma-separated learner kinds (default: all six)");
    binarize_opt = app.add_option("--binarize-fit", binarize_fit,
                                  "replace fit_result by (fit_result >= T); T defaults to 100")
                       ->expected(0, 1);
    app.add_option("--set", overrides, "extra key=value setting, repeatable");
    select_opt = app.add_flag("--select", select, "prune members by backward search");
  }

  KeyValueConfig resolve() const {
    KeyValueConfig config = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
    auto put = [&](const char* key, const std::string& value) {
      if (!value.empty()) {
        config.set(key, value);
      }
    };
    put("data", data);
    put("generate.n", generate_n);
    put("seed", seed);
    put("kinds", kinds);
    put("k", k);
    if (binarize_opt->count() > 0) {
      bool bare = binarize_fit.empty() || binarize_fit[0].empty();
      config.set("binarize_fit", bare ? format_double(kConventionalFitThreshold) : binarize_fit[0]);
    }
    if (select_opt->count() > 0) {
      config.set("select", "true");
    }
    for (const auto& o : overrides) {
      auto eq = o.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCategory::usage, "--set expects key=value, got '" + o + "'");
      }
      config.set(std::string(trim(o.substr(0, eq))), std::string(trim(o.substr(eq + 1))));
    }
    check_keys(config);
    return config;
  }
};

std::uint64_t required_seed(const KeyValueConfig& config) {
  auto seed = config.get_string("seed");
  if (!seed) {
    throw Error(ErrorCategory::usage, "a seed is required (--seed or seed=)");
  }
  auto v = parse_int(*seed);
  if (!v || *v < 0) {
    throw Error(ErrorCategory::usage, "seed must be a non-negative integer, got '" + *seed + "'");
  }
  return static_cast<std::uint64_t>(*v);
}

LabeledDataset load_data(const KeyValueConfig& config, std::uint64_t seed) {
  bool file = config.has("data");
  bool synthetic = config.has("generate.n");
  if (file == synthetic) {
    throw Error(ErrorCategory::usage, "specify exactly one data source: --data or --generate");
  }
  if (file) {
    return load_dataset(*config.get_string("data"));
  }
  auto n = *config.get_int("generate.n");
  return generate_synthetic(n, seed, GeneratorParams::from_config(config));
}

std::vector<LearnerKind> resolve_kinds(const KeyValueConfig& config) {
  auto text = config.get_string("kinds");
  if (!text) {
    auto roster = default_roster();
    return {roster.begin(), roster.end()};
  }
  std::vector<LearnerKind> kinds;
  for (auto part : split(*text, ',')) {
    auto name = trim(part);
    auto kind = parse_kind(name, test_hooks_enabled());
    if (!kind) {
      throw Error(ErrorCategory::usage,
                  "unknown learner kind '" + std::string(name) + "'; valid kinds: " + valid_kind_names());
    }
    if (std::find(kinds.begin(), kinds.end(), *kind) != kinds.end()) {
      throw Error(ErrorCategory::usage, "learner kind '" + std::string(name) + "' listed twice");
    }
    kinds.push_back(*kind);
  }
  if (kinds.empty()) {
    throw Error(ErrorCategory::usage, "no learner kinds given");
  }
  return kinds;
}

Hyperparams resolve_hyperparams(const KeyValueConfig& config, std::uint64_t seed) {
  Hyperparams hp;
  hp.apply(config);
  hp.seed = seed;
  hp.validate();
  return hp;
}

int resolve_k(const KeyValueConfig& config) {
  auto k = config.get_int("k").value_or(10);
  if (k < 2) {
    throw Error(ErrorCategory::usage, "k must be at least 2, got " + std::to_string(k));
  }
  return static_cast<int>(k);
}

std::optional<double> resolve_threshold(const KeyValueConfig& config) {
  auto t = config.get_double("binarize_fit");
  if (t && !(std::isfinite(*t) && *t >= 0.0)) {
    throw Error(ErrorCategory::usage, "binarize_fit threshold must be a finite non-negative number");
  }
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  }
  file << text;
  if (!file.flush()) {
    throw Error(ErrorCategory::io, "write failed for '" + path + "'");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

// ---- subcommands ----

int cmd_generate(std::int64_t n, std::uint64_t seed, const std::string& params_path, const std::string& out_path,
                 std::ostream& out) {
  GeneratorParams params;
  if (!params_path.empty()) {
    auto config = KeyValueConfig::load(params_path);
    auto keys = generator_keys();
    for (const auto& [key, value] : config.values()) {
      if (keys.count(key) == 0) {
        throw Error(ErrorCategory::usage, "unknown generator key '" + key + "' in " + params_path);
      }
    }
    params = GeneratorParams::from_config(config);
  }
  auto ds = generate_synthetic(n, seed, params);
  save_dataset(out_path, ds);
  double prevalence = ds.empty() ? 0.0 : static_cast<double>(ds.positives()) / static_cast<double>(ds.size());
  out << "rows=" << ds.size() << " prevalence=" << format_double(prevalence) << " out=" << out_path << '\n';
  return 0;
}

int cmd_train(const RunFlags& flags, const std::string& model_out, std::ostream& out, std::ostream& err) {
  auto config = flags.resolve();
  if (!model_out.empty()) {
    config.set("out", model_out);
  }
  auto out_path = config.get_string("out");
  if (!out_path) {
    throw Error(ErrorCategory::usage, "a model output path is required (--out or out=)");
  }
  auto seed = required_seed(config);
  auto ds = load_data(config, seed);
  auto kinds = resolve_kinds(config);
  auto hp = resolve_hyperparams(config, seed);
  auto threshold = resolve_threshold(config);
  auto train_ds = threshold ? binarize_fit(ds, *threshold) : ds;
  if (train_ds.empty()) {
    throw Error(ErrorCategory::usage, "the training dataset is empty");
  }

  std::vector<LearnerKind> members = kinds;
  if (config.get_bool("select").value_or(false)) {
    int k = resolve_k(config);
    auto trace = select_members(kinds, train_ds, hp, k, derive_seed(seed, "selection"));
    out << "selection criterion=" << trace.criterion << " k=" << k
        << " initial=" << format_double(trace.initial_criterion) << '\n';
    for (const auto& step : trace.steps) {
      out << "removed " << to_string(step.removed) << " criterion=" << format_double(step.criterion) << '\n';
    }
    out << "final criterion=" << format_double(trace.final_criterion()) << '\n';
    members = trace.final_members;
  }
  auto ensemble = train_ensemble(members, ds, hp, threshold);
  bool single_class = std::any_of(ensemble.members().begin(), ensemble.members().end(),
                                  [](const TrainedClassifier& m) { return m.single_class_warning(); });
  if (single_class) {
    err << "warning: training data holds a single class; every member is a constant classifier\n";
  }
  save_model(ensemble, *out_path);
  out << "members:";
  for (auto kind : ensemble.kinds()) {
    out << ' ' << to_string(kind);
  }
  out << "\nmodel=" << *out_path << '\n';
  return 0;
}

int cmd_evaluate(RunFlags& flags, const std::string& report_path, const std::string& roc_path,
                 const std::string& json_path, std::ostream& out) {
  auto config = flags.resolve();
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) {
      config.set(key, v);
    }
  };
  put("report", report_path);
  put("roc", roc_path);
  put("json", json_path);
  auto seed = required_seed(config);
  auto k = resolve_k(config);
  auto ds = load_data(config, seed);
  auto kinds = resolve_kinds(config);
  auto hp = resolve_hyperparams(config, seed);
  if (auto t = resolve_threshold(config)) {
    ds = binarize_fit(ds, *t);
  }
  bool select = config.get_bool("select").value_or(false);
  auto report = cross_validate(kinds, ds, hp, k, seed, select);
  auto table = report_table(report);
  if (auto path = config.get_string("report")) {
    write_text(*path, table);
  } else {
    out << table;
  }
  if (auto path = config.get_string("roc")) {
    emit_roc(report, *path);
  }
  if (auto path = config.get_string("json")) {
    write_text(*path, report_to_json(report));
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const FeatureRow& row, std::ostream& out) {
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (auto v = check_field(static_cast<Feature>(f), row[f])) {
      throw Error(ErrorCategory::range, v->message);
    }
  }
  auto model = load_model(model_path);
  FeatureVector x{row[0], row[1], row[2], static_cast<int>(row[3]), static_cast<int>(row[4])};
  auto p = model.predict(x);
  out << "probability=" << format_double(p.soft_score) << " label=" << p.majority_label << '\n';
  for (std::size_t i = 0; i < p.votes.size(); ++i) {
    out << "vote " << to_string(model.members()[i].kind()) << " label=" << p.votes[i]
        << " score=" << format_double(p.member_scores[i]) << '\n';
  }
  return 0;
}

int cmd_serve(const std::string& model_path, const std::string& host, int port, std::ostream& err) {
  auto model = std::make_shared<const MajorityVoteEnsemble>(load_model(model_path));
  service::Handler handler;
  handler.set_model(model);
  service::ServeOptions options;
  options.host = host;
  options.port = port;
  options.log = [&err](const std::string& line) { err << line << std::endl; };
  service::Server server(handler, options);

  // SIGINT/SIGTERM are taken by a sigwait thread; the server threads
  // inherit the blocked mask.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &stop_signals, &previous);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
  });
  auto finish = [&] {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  };
  try {
    server.run([&](int bound) {
      err << "serving model format " << model->version() << " (" << model->created_with() << ", "
          << model->members().size() << " members) on " << host << ':' << bound << std::endl;
    });
  } catch (...) {
    finish();
    throw;
  }
  finish();
  return 0;
}

int cmd_report(const std::string& from, const std::string& roc_path, std::ostream& out) {
  auto report = report_from_json(read_text(from));
  out << report_table(report);
  if (!roc_path.empty()) {
    emit_roc(report, roc_path);
  }
  return 0;
}

std::string one_line(std::string message) {
  for (char& c : message) {
    if (c == '\n' || c == '\r') {
      c = ' ';
    }
  }
  return message;
}

}  // namespace

bool test_hooks_enabled() {
  const char* v = std::getenv("CRCVOTE_ENABLE_TEST_HOOKS");
  return v != nullptr && std::string_view(v) == "1";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Colorectal cancer screening ensemble toolkit", "crcvote"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kCreatedWith));

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  std::int64_t gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_params;
  std::string gen_out;
  gen->add_option("--n", gen_n, "number of rows")->required();
  gen->add_option("--seed", gen_seed, "generator seed")->required();
  gen->add_option("--params", gen_params, "generator configuration file");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the ensemble and save a model file");
  RunFlags train_flags;
  std::string train_out;
  train_flags.add_to(*train_cmd);
  train_cmd->add_option("--k", train_flags.k, "folds of the selection cross-validation (default 10)");
  train_cmd->add_option("--out", train_out, "model output path");

  auto* eval_cmd = app.add_subcommand("evaluate", "Stratified k-fold cross-validation report");
  RunFlags eval_flags;
  std::string report_path;
  std::string roc_path;
  std::string json_path;
  eval_flags.add_to(*eval_cmd);
  eval_cmd->add_option("--k", eval_flags.k, "number of folds (default 10)");
  eval_cmd->add_option("--report", report_path, "write the report table here instead of stdout");
  eval_cmd->add_option("--roc", roc_path, "write ROC points as CSV");
  eval_cmd->add_option("--json", json_path, "write the full report as JSON (input of `report`)");

  auto* predict_cmd = app.add_subcommand("predict", "Score one subject with a saved model");
  std::string predict_model;
  FeatureRow row{};
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--fit", row[0], "FIT result, ng/mL")->required();
  predict_cmd->add_option("--bmi", row[1], "body-mass index")->required();
  predict_cmd->add_option("--age", row[2], "age in years")->required();
  predict_cmd->add_option("--diabetes", row[3], "0 or 1")->required();
  predict_cmd->add_option("--smoking", row[4], "0 or 1")->required();

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP prediction service");
  std::string serve_model;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--model", serve_model, "model file")->required();
  serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "Re-render a saved JSON report");
  std::string report_from;
  std::string report_roc;
  report_cmd->add_option("--from", report_from, "report JSON written by evaluate --json")->required();
  report_cmd->add_option("--roc", report_roc, "also write ROC points as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    // --help on a subcommand: print that subcommand's help.
    const CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) {
      target = sub;
    }
    out << target->help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kCreatedWith << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error:usage:" << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(gen_n, gen_seed, gen_params, gen_out, out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(train_flags, train_out, out, err);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(eval_flags, report_path, roc_path, json_path, out);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(predict_model, row, out);
    }
    if (serve_cmd->parsed()) {
      return cmd_serve(serve_model, host, port, err);
    }
    if (report_cmd->parsed()) {
      return cmd_report(report_from, report_roc, out);
    }
  } catch (const Error& e) {
    err << "error:" << to_string(e.category()) << ':' << one_line(e.what()) << '\n';
    return e.category() == ErrorCategory::usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error:internal:" << one_line(e.what()) << '\n';
    return 1;
  }
  err << "error:usage:no subcommand\n";
  return 2;
}

}  // namespace crcvote::cli
