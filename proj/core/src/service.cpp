#include "crcvote/service.hpp"

#include <array>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "crcvote/error.hpp"

namespace crcvote::service {
namespace {

using nlohmann::json;

json error_json(std::string_view field, std::string_view category, std::string_view message) {
  json e = {{"category", category}, {"message", message}};
  if (!field.empty()) {
    e["field"] = field;
  }
  return {{"error", e}};
}

Response error_response(int status, std::string_view category, std::string_view message) {
  return {status, error_json("", category, message).dump()};
}

json scaling_json(const ScalingParams& s) {
  json out = json::object();
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    out[std::string(kFeatureNames[i])] = {{"mean", s.continuous[i].mean}, {"stddev", s.continuous[i].stddev}};
  }
  return out;
}

}  // namespace

std::variant<FeatureVector, FieldError> parse_predict_request(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    return FieldError{"", "schema", "request body is not valid JSON"};
  }
  if (!doc.is_object()) {
    return FieldError{"", "schema", "request body must be a JSON object"};
  }
  FeatureRow row{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    std::string name(kFeatureNames[f]);
    auto it = doc.find(name);
    if (it == doc.end()) {
      return FieldError{name, "schema", "missing required field '" + name + "'"};
    }
    // Booleans are not numbers here, and neither are numeric strings.
    if (!it->is_number()) {
      return FieldError{name, "schema", "field '" + name + "' must be a number"};
    }
    row[f] = it->get<double>();
    if (auto v = check_field(static_cast<Feature>(f), row[f])) {
      return FieldError{name, "range", v->message};
    }
  }
  FeatureVector x;
  x.fit_result = row[0];
  x.bmi = row[1];
  x.age = row[2];
  x.diabetes = static_cast<int>(row[3]);
  x.smoking = static_cast<int>(row[4]);
  return x;
}

std::string error_body(const FieldError& e) { return error_json(e.field, e.category, e.message).dump(); }

std::string predict_body(const MajorityVoteEnsemble& model, const EnsemblePrediction& p) {
  json votes = json::array();
  for (std::size_t i = 0; i < p.votes.size(); ++i) {
    votes.push_back({{"kind", to_string(model.members()[i].kind())},
                     {"vote", p.votes[i]},
                     {"score", p.member_scores[i]}});
  }
  return json{{"probability", p.soft_score},
              {"label", p.majority_label == 1 ? "positive" : "negative"},
              {"votes", votes},
              {"model_version", model.version()}}
      .dump();
}

std::string model_info_body(const MajorityVoteEnsemble& model) {
  json members = json::array();
  json scaling = json::array();
  for (const auto& m : model.members()) {
    members.push_back(to_string(m.kind()));
    scaling.push_back({{"kind", to_string(m.kind())}, {"scaling", scaling_json(m.scaling())}});
  }
  json schema = json::array();
  for (auto name : kFeatureNames) {
    schema.push_back(name);
  }
  auto threshold = model.fit_threshold();
  return json{{"format_version", model.version()},
              {"created_with", model.created_with()},
              {"members", members},
              {"feature_schema", schema},
              {"label_column", kLabelColumn},
              {"tie_break", to_string(model.tie_break())},
              {"fit_binarization_threshold", threshold ? json(*threshold) : json(nullptr)},
              {"scaling", scaling}}
      .dump();
}

void Handler::set_model(std::shared_ptr<const MajorityVoteEnsemble> model) {
  if (!model) {
    throw Error(ErrorCategory::usage, "service model must not be null");
  }
  if (claimed_.exchange(true)) {
    throw Error(ErrorCategory::usage, "service model is already set");
  }
  owner_ = std::move(model);
  model_.store(owner_.get(), std::memory_order_release);
}

Response Handler::handle(std::string_view method, std::string_view path, std::string_view body) const {
  try {
    if (path == "/predict") {
      return method == "POST" ? predict(body) : error_response(405, "usage", "use POST for /predict");
    }
    if (path == "/health") {
      return method == "GET" ? health() : error_response(405, "usage", "use GET for /health");
    }
    if (path == "/model/info") {
      return method == "GET" ? model_info() : error_response(405, "usage", "use GET for /model/info");
    }
    return error_response(404, "usage", "no such endpoint");
  } catch (const std::exception&) {
    // Details stay in the process; clients get a generic message.
    return error_response(500, "internal", "internal error");
  }
}

Response Handler::predict(std::string_view body) const {
  const auto* model = model_.load(std::memory_order_acquire);
  if (model == nullptr) {
    return error_response(503, "model", "model not loaded");
  }
  auto parsed = parse_predict_request(body);
  if (auto* e = std::get_if<FieldError>(&parsed)) {
    return {400, error_body(*e)};
  }
  auto p = model->predict(std::get<FeatureVector>(parsed));
  return {200, predict_body(*model, p)};
}

Response Handler::health() const {
  const auto* model = model_.load(std::memory_order_acquire);
  if (model == nullptr) {
    return {503, json{{"status", "loading"}}.dump()};
  }
  return {200, json{{"status", "ok"}, {"model_version", model->version()}}.dump()};
}

Response Handler::model_info() const {
  const auto* model = model_.load(std::memory_order_acquire);
  if (model == nullptr) {
    return error_response(503, "model", "model not loaded");
  }
  return {200, model_info_body(*model)};
}

bool is_loopback_origin(std::string_view origin) {
  for (std::string_view scheme : {"http://", "https://"}) {
    if (origin.substr(0, scheme.size()) != scheme) {
      continue;
    }
    auto rest = origin.substr(scheme.size());
    for (std::string_view host : {"localhost", "127.0.0.1", "[::1]"}) {
      if (rest.substr(0, host.size()) != host) {
        continue;
      }
      auto tail = rest.substr(host.size());
      if (tail.empty()) {
        return true;
      }
      if (tail.front() != ':' || tail.size() == 1) {
        continue;
      }
      tail.remove_prefix(1);
      if (tail.size() <= 5 && tail.find_first_not_of("0123456789") == std::string_view::npos) {
        return true;
      }
    }
  }
  return false;
}

std::string access_log_line(std::string_view method, std::string_view path, int status,
                            std::chrono::microseconds latency) {
  std::array<char, 32> ms{};
  std::snprintf(ms.data(), ms.size(), "%.3f", static_cast<double>(latency.count()) / 1000.0);
  return std::string(method) + " " + std::string(path) + " " + std::to_string(status) + " " + ms.data() + "ms";
}

struct Server::Impl {
  const Handler& handler;
  ServeOptions options;
  httplib::Server http;
  // httplib ignores stop() before listening starts, so a stop that arrives
  // between bind and listen is remembered here.
  std::atomic<bool> stop_requested{false};
  std::atomic<bool> in_run{false};

  Impl(const Handler& h, ServeOptions o) : handler(h), options(std::move(o)) {}

  void cors(const httplib::Request& req, httplib::Response& res) const {
    auto origin = req.get_header_value("Origin");
    if (!origin.empty() && is_loopback_origin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  }

  void dispatch(const httplib::Request& req, httplib::Response& res) const {
    auto start = std::chrono::steady_clock::now();
    Response r;
    if (req.method == "OPTIONS") {
      r = {204, ""};
    } else {
      r = handler.handle(req.method, req.path, req.body);
    }
    res.status = r.status;
    if (!r.body.empty()) {
      res.set_content(r.body, "application/json");
    }
    cors(req, res);
    if (options.log) {
      auto latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
      options.log(access_log_line(req.method, req.path, r.status, latency));
    }
  }
};

Server::Server(const Handler& handler, ServeOptions options)
    : impl_(std::make_unique<Impl>(handler, std::move(options))) {
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // server share the port silently instead of failing to bind.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  auto route = [this](const httplib::Request& req, httplib::Response& res) { impl_->dispatch(req, res); };
  impl_->http.Get(".*", route);
  impl_->http.Post(".*", route);
  impl_->http.Put(".*", route);
  impl_->http.Delete(".*", route);
  impl_->http.Options(".*", route);
}

Server::~Server() = default;

void Server::run(const std::function<void(int)>& on_bound) {
  auto& opts = impl_->options;
  impl_->in_run = true;
  struct Leave {
    std::atomic<bool>& flag;
    ~Leave() { flag = false; }
  } leave{impl_->in_run};
  int port = opts.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(opts.host);
    if (port < 0) {
      throw Error(ErrorCategory::io, "cannot bind " + opts.host);
    }
  } else if (!impl_->http.bind_to_port(opts.host, port)) {
    throw Error(ErrorCategory::io, "cannot bind " + opts.host + ":" + std::to_string(port));
  }
  if (on_bound) {
    on_bound(port);
  }
  if (impl_->stop_requested) {
    return;
  }
  impl_->http.listen_after_bind();
}

void Server::stop() {
  impl_->stop_requested = true;
  while (impl_->in_run && !impl_->http.is_running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  impl_->http.stop();
}

}  // namespace crcvote::service
