#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "figsbd/evalharness.hpp"
#include "figsbd/types.hpp"

namespace figsbd::serve {

using json = nlohmann::json;

inline constexpr int kApiVersion = 1;

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  json body;
};

struct ServeOptions {
  std::size_t page_size = 20;
  bool reveal_truth = false;
  std::chrono::seconds session_ttl{30 * 60};
  std::function<std::chrono::steady_clock::time_point()> clock = [] {
    return std::chrono::steady_clock::now();
  };
};

/// Request handling for the intervention console. Every method is a pure
/// function of the loaded artifacts, the session history and the request.
///
///   GET  /samples?page=&page_size=
///   GET  /sample/{i}
///   GET  /sample/{i}/atti?ranker=figs|linear|random&seed=
///   POST /sample/{i}/intervene   {"session", "space", "edits": {concept: 0|1}}
///
/// Edits carry the true value of a concept (by index or name). In student
/// space the binary input takes that value; in teacher space the raw score is
/// replaced by the training 5th/95th percentile.
class ServeApp {
 public:
  explicit ServeApp(ServeOptions options = {});
  ServeApp(eval::Artifacts artifacts, Dataset data, ServeOptions options = {});

  Response handle(const Request& request);

  Response samples(std::size_t page, std::optional<std::size_t> page_size) const;
  Response sample(std::size_t index) const;
  Response atti(std::size_t index, const std::string& ranker, std::uint64_t seed) const;
  Response intervene(std::size_t index, const json& body);

  [[nodiscard]] std::size_t session_count() const;
  [[nodiscard]] bool loaded() const { return loaded_.has_value(); }

 private:
  struct Loaded {
    eval::Artifacts artifacts;
    Dataset data;
  };
  struct SessionEntry {
    std::mutex mutex;
    InterventionSession state;
    std::chrono::steady_clock::time_point last_used;
  };

  [[nodiscard]] json prediction_fields(const std::vector<double>& prediction,
                                       std::size_t index) const;
  [[nodiscard]] bool is_correct(const std::vector<double>& prediction, std::size_t index) const;
  void expire_idle();

  ServeOptions options_;
  std::optional<Loaded> loaded_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::uint64_t next_session_ = 0;
};

Response error_response(int status, const std::string& message);

/// HTTP binding for a ServeApp with permissive CORS for the browser console.
class HttpServer {
 public:
  explicit HttpServer(ServeApp& app);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port,
  /// or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a successful bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace figsbd::serve
