#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "crcvote/data.hpp"
#include "crcvote/ensemble.hpp"

namespace crcvote::service {

struct Response {
  int status = 200;
  std::string body;  // always JSON
};

/// A boundary error pointing at one request field (empty for whole-body errors).
struct FieldError {
  std::string field;
  std::string category;  // "schema" or "range"
  std::string message;
};

/// Parses a /predict body. All five fields are mandatory JSON numbers and
/// must satisfy the FeatureVector range rules.
std::variant<FeatureVector, FieldError> parse_predict_request(std::string_view body);

std::string error_body(const FieldError& e);
std::string predict_body(const MajorityVoteEnsemble& model, const EnsemblePrediction& p);
std::string model_info_body(const MajorityVoteEnsemble& model);

/// Request handling without the network. The model is published once and
/// never changes; handle() is safe to call from many threads.
class Handler {
 public:
  Handler() = default;
  Handler(const Handler&) = delete;
  Handler& operator=(const Handler&) = delete;

  /// Throws Error(usage) if a model is already set.
  void set_model(std::shared_ptr<const MajorityVoteEnsemble> model);
  bool ready() const { return model_.load(std::memory_order_acquire) != nullptr; }

  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

  Response predict(std::string_view body) const;
  Response health() const;
  Response model_info() const;

 private:
  std::shared_ptr<const MajorityVoteEnsemble> owner_;
  std::atomic<const MajorityVoteEnsemble*> model_{nullptr};
  std::atomic<bool> claimed_{false};
};

/// Allowed CORS origins: http(s) on localhost, 127.0.0.1 or [::1], any port.
bool is_loopback_origin(std::string_view origin);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// One line per request: method, path, status and latency. Never payloads.
  std::function<void(const std::string&)> log;
};

/// Access-log line for one request.
std::string access_log_line(std::string_view method, std::string_view path, int status,
                            std::chrono::microseconds latency);

/// Blocks serving `handler` until stop() is called from another thread.
/// Throws Error(io) if the address cannot be bound.
class Server {
 public:
  Server(const Handler& handler, ServeOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds, then calls `on_bound` with the actual port (useful with port 0).
  void run(const std::function<void(int)>& on_bound = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crcvote::service
