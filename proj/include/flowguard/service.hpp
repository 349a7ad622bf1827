#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "flowguard/cascade.hpp"
#include "flowguard/mixer.hpp"
#include "flowguard/runner.hpp"

namespace httplib {
class Server;
}

namespace flowguard {

/// Everything `serve` and `run` need, loadable from a key/value file:
///
///     # comment
///     listen = 127.0.0.1
///     port = 8080
///     m1 = models/m1.json
///     theta = 0.9
///
/// Relative paths resolve against the config file's directory.
struct ServiceConfig {
  std::string listen = "127.0.0.1";
  int port = 8080;
  std::filesystem::path m1_model;
  std::filesystem::path m2_model;
  std::filesystem::path capture;  // pcap, or a mix plan when `mix` is set
  std::filesystem::path sidecar;
  std::optional<TrafficClass> capture_label;
  std::filesystem::path mix;
  std::filesystem::path event_log;
  std::filesystem::path metrics_out;
  CascadeConfig cascade;
  WindowConfig window;
  Pace pace = Pace::Realtime;
  std::string auth_token;  // empty: no auth
  std::chrono::milliseconds tick_interval{1000};

  /// Sets one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir = {});
  /// Value ranges, port in 1-65535, and (when `check_paths`) that referenced files exist.
  void validate(bool check_paths = true) const;
};

ServiceConfig parse_service_config(std::istream& in, const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);
void write_service_config(std::ostream& out, const ServiceConfig& cfg);

/// One subscriber's queue of newline-free JSON lines.
class Subscription {
 public:
  /// Waits up to `timeout` for the next line; empty on timeout or close.
  std::optional<std::string> pop(std::chrono::milliseconds timeout);
  bool closed() const;

 private:
  friend class EventHub;
  void push(const std::string& line);
  void close();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  bool closed_ = false;
};

/// Broadcasts ApiEvent lines ({"kind": ..., "payload": {...}}) to every subscriber.
class EventHub {
 public:
  std::shared_ptr<Subscription> subscribe();
  void unsubscribe(const std::shared_ptr<Subscription>& s);
  void publish(std::string_view kind, const nlohmann::json& payload);
  void close_all();
  std::size_t subscribers() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

/// HTTP JSON API over a running cascade:
///   GET  /api/health, /api/queue, /api/metrics, /api/events (NDJSON stream)
///   POST /api/label {"id": n, "label": "<class>"}
class ApiServer {
 public:
  struct Options {
    std::string auth_token;
    std::chrono::milliseconds tick_interval{1000};
  };

  ApiServer(std::shared_ptr<Cascade> cascade, Options opts);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds (port 0 picks a free port) and starts serving on a background
  /// thread. Returns the bound port; throws std::runtime_error on failure.
  int start(const std::string& host, int port);
  void stop();

  EventHub& events() { return hub_; }

 private:
  void install_routes();
  bool authorized(const std::string& header) const;

  std::shared_ptr<Cascade> cascade_;
  Options opts_;
  EventHub hub_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::thread ticker_;
  std::atomic<bool> running_{false};
  std::mutex tick_mu_;
  std::condition_variable tick_cv_;
};

/// Loads models and the stream named by `cfg`, checking compatibility.
struct LoadedRun {
  std::shared_ptr<const Classifier> m1;
  std::shared_ptr<const Classifier> m2;
  LabeledStream stream;
};
LoadedRun load_run_inputs(const ServiceConfig& cfg);

/// `serve`: API plus a replay driver feeding the cascade. Returns after
/// `stop` is raised; the final RunMetrics are returned.
RunMetrics serve(const ServiceConfig& cfg, const std::atomic<bool>& stop, std::ostream* log = nullptr);

}  // namespace flowguard
