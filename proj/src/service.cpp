#include "flowguard/service.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <httplib.h>

namespace flowguard {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return d;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return n;
}

std::string g17(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

// ---------------------------------------------------------------------------
// ServiceConfig

void ServiceConfig::set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
  auto path = [&] {
    std::filesystem::path p(value);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  if (key == "listen") listen = value;
  else if (key == "port") port = static_cast<int>(parse_int(key, value));
  else if (key == "m1") m1_model = path();
  else if (key == "m2") m2_model = path();
  else if (key == "capture") capture = path();
  else if (key == "sidecar") sidecar = path();
  else if (key == "capture_label") capture_label = parse_traffic_class(value);
  else if (key == "mix") mix = path();
  else if (key == "event_log") event_log = path();
  else if (key == "metrics_out") metrics_out = path();
  else if (key == "pace") pace = parse_pace(value);
  else if (key == "auth_token") auth_token = value;
  else if (key == "tick_interval_ms") tick_interval = std::chrono::milliseconds(parse_int(key, value));
  else if (key == "theta") cascade.theta = parse_double(key, value);
  else if (key == "alpha") cascade.alpha = parse_double(key, value);
  else if (key == "scenario") cascade.scenario = static_cast<int>(parse_int(key, value));
  else if (key == "human_mode") cascade.human_mode = parse_human_mode(value);
  else if (key == "batch_size") cascade.batch_size = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "m1_accept_inclusive") cascade.m1_accept_inclusive = parse_bool(key, value);
  else if (key == "human_timeout_ms") cascade.human_timeout = std::chrono::milliseconds(parse_int(key, value));
  else if (key == "replay_fraction") cascade.replay_fraction = parse_double(key, value);
  else if (key == "seed") cascade.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "processing_interval") window.processing_interval = parse_double(key, value);
  else if (key == "abnormal_size_threshold") window.abnormal_size_threshold = parse_double(key, value);
  else if (key == "port_frequency_threshold") window.port_frequency_threshold = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "short_lived_threshold") window.short_lived_threshold = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "short_lived_requires_flag") window.short_lived_requires_flag = parse_bool(key, value);
  else if (key == "group_by_source") window.group_by_source = parse_bool(key, value);
  else if (key == "address_encoding") {
    if (value == "last_octet") window.address_encoding = AddressEncoding::LastOctet;
    else if (value == "drop") window.address_encoding = AddressEncoding::Drop;
    else throw std::invalid_argument("address_encoding: expected last_octet or drop");
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void ServiceConfig::validate(bool check_paths) const {
  if (port < 1 || port > 65535) throw std::invalid_argument("port must be in 1-65535");
  if (tick_interval.count() <= 0) throw std::invalid_argument("tick_interval_ms must be > 0");
  cascade.validate();
  window.validate();
  if (!check_paths) return;
  auto need = [](const std::filesystem::path& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p))
      throw std::invalid_argument(std::string(what) + " not found: " + p.string());
  };
  need(m1_model, "m1 model");
  need(m2_model, "m2 model");
  need(capture, "capture");
  need(sidecar, "sidecar");
  need(mix, "mix plan");
  if (capture.empty() && mix.empty()) throw std::invalid_argument("config names neither a capture nor a mix plan");
  if (cascade.scenario != 3 && m1_model.empty()) throw std::invalid_argument("m1 model path is required");
  if (cascade.scenario >= 3 && m2_model.empty()) throw std::invalid_argument("m2 model path is required");
}

ServiceConfig parse_service_config(std::istream& in, const std::filesystem::path& base_dir) {
  ServiceConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument("expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_service_config(in, path.parent_path());
}

void write_service_config(std::ostream& out, const ServiceConfig& c) {
  auto path_line = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) out << key << " = " << p.string() << '\n';
  };
  out << "listen = " << c.listen << '\n' << "port = " << c.port << '\n';
  path_line("m1", c.m1_model);
  path_line("m2", c.m2_model);
  path_line("capture", c.capture);
  path_line("sidecar", c.sidecar);
  if (c.capture_label) out << "capture_label = " << to_string(*c.capture_label) << '\n';
  path_line("mix", c.mix);
  path_line("event_log", c.event_log);
  path_line("metrics_out", c.metrics_out);
  out << "pace = " << to_string(c.pace) << '\n';
  if (!c.auth_token.empty()) out << "auth_token = " << c.auth_token << '\n';
  out << "tick_interval_ms = " << c.tick_interval.count() << '\n';
  out << "theta = " << g17(c.cascade.theta) << '\n'
      << "alpha = " << g17(c.cascade.alpha) << '\n'
      << "scenario = " << c.cascade.scenario << '\n'
      << "human_mode = " << to_string(c.cascade.human_mode) << '\n'
      << "batch_size = " << c.cascade.batch_size << '\n'
      << "m1_accept_inclusive = " << (c.cascade.m1_accept_inclusive ? "true" : "false") << '\n'
      << "human_timeout_ms = " << c.cascade.human_timeout.count() << '\n'
      << "replay_fraction = " << g17(c.cascade.replay_fraction) << '\n'
      << "seed = " << c.cascade.seed << '\n';
  out << "processing_interval = " << g17(c.window.processing_interval) << '\n'
      << "abnormal_size_threshold = " << g17(c.window.abnormal_size_threshold) << '\n'
      << "port_frequency_threshold = " << c.window.port_frequency_threshold << '\n'
      << "short_lived_threshold = " << c.window.short_lived_threshold << '\n'
      << "short_lived_requires_flag = " << (c.window.short_lived_requires_flag ? "true" : "false") << '\n'
      << "group_by_source = " << (c.window.group_by_source ? "true" : "false") << '\n'
      << "address_encoding = " << (c.window.address_encoding == AddressEncoding::LastOctet ? "last_octet" : "drop")
      << '\n';
}

// ---------------------------------------------------------------------------
// Event fan-out

std::optional<std::string> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !lines_.empty(); });
  if (lines_.empty()) return std::nullopt;
  auto line = std::move(lines_.front());
  lines_.pop_front();
  return line;
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_ && lines_.empty();
}

void Subscription::push(const std::string& line) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    lines_.push_back(line);
  }
  cv_.notify_one();
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::shared_ptr<Subscription> EventHub::subscribe() {
  auto s = std::make_shared<Subscription>();
  std::lock_guard lock(mu_);
  subs_.push_back(s);
  return s;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& s) {
  std::lock_guard lock(mu_);
  std::erase(subs_, s);
  s->close();
}

void EventHub::publish(std::string_view kind, const nlohmann::json& payload) {
  const std::string line = nlohmann::json{{"kind", kind}, {"payload", payload}}.dump();
  std::lock_guard lock(mu_);
  for (const auto& s : subs_) s->push(line);
}

void EventHub::close_all() {
  std::lock_guard lock(mu_);
  for (const auto& s : subs_) s->close();
  subs_.clear();
}

std::size_t EventHub::subscribers() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

// ---------------------------------------------------------------------------
// ApiServer

ApiServer::ApiServer(std::shared_ptr<Cascade> cascade, Options opts)
    : cascade_(std::move(cascade)), opts_(std::move(opts)), http_(std::make_unique<httplib::Server>()) {
  cascade_->on_event([this](const CascadeEvent& e) {
    hub_.publish(e.kind == CascadeEvent::Kind::EscalationCreated ? "escalation_created" : "escalation_resolved",
                 e.payload);
  });
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::authorized(const std::string& header) const {
  return opts_.auth_token.empty() || header == "Bearer " + opts_.auth_token;
}

void ApiServer::install_routes() {
  auto& s = *http_;
  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/api/health" || authorized(req.get_header_value("Authorization")))
      return httplib::Server::HandlerResponse::Unhandled;
    res.set_header("WWW-Authenticate", "Bearer");
    send_error(res, 401, "missing or invalid bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"pending", cascade_->pending().size()}});
  });

  s.Get("/api/queue", [this](const httplib::Request&, httplib::Response& res) {
    auto items = nlohmann::json::array();
    for (const auto& r : cascade_->pending()) items.push_back(r.to_json());
    send_json(res, 200, items);
  });

  s.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, cascade_->metrics_snapshot().to_json());
  });

  s.Post("/api/label", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
    if (!body.contains("id") || !body["id"].is_number_unsigned())
      return send_error(res, 400, "'id' must be a non-negative integer");
    if (!body.contains("label") || !body["label"].is_string()) return send_error(res, 400, "'label' must be a string");
    const auto label = try_parse_traffic_class(body["label"].get<std::string>());
    if (!label) return send_error(res, 400, "unknown label '" + body["label"].get<std::string>() + "'");
    const auto id = body["id"].get<std::uint64_t>();
    switch (cascade_->submit_human_label(id, *label)) {
      case SubmitStatus::Ok:
        return send_json(res, 200, {{"id", id}, {"label", to_string(*label)}, {"status", "resolved"}});
      case SubmitStatus::UnknownId:
        return send_error(res, 404, "no escalation with id " + std::to_string(id));
      case SubmitStatus::AlreadyResolved:
        return send_error(res, 409, "escalation " + std::to_string(id) + " is already resolved");
    }
  });

  s.Get("/api/events", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = hub_.subscribe();
    const std::string hello =
        nlohmann::json{{"kind", "metrics_tick"}, {"payload", cascade_->metrics_snapshot().to_json()}}.dump();
    auto first = std::make_shared<bool>(true);
    res.set_chunked_content_provider(
        "application/x-ndjson",
        [sub, hello, first](std::size_t, httplib::DataSink& sink) {
          if (*first) {
            *first = false;
            const std::string line = hello + "\n";
            return sink.write(line.data(), line.size());
          }
          if (auto line = sub->pop(std::chrono::milliseconds(200))) {
            *line += '\n';
            return sink.write(line->data(), line->size());
          }
          if (sub->closed()) {
            sink.done();
            return true;
          }
          return sink.is_writable();
        },
        [this, sub](bool) { hub_.unsubscribe(sub); });
  });
}

int ApiServer::start(const std::string& host, int port) {
  if (running_.exchange(true)) throw std::logic_error("ApiServer already started");
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
  } else if (!http_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    running_ = false;
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  ticker_ = std::thread([this] {
    std::unique_lock lock(tick_mu_);
    while (running_) {
      if (tick_cv_.wait_for(lock, opts_.tick_interval, [&] { return !running_; })) break;
      hub_.publish("metrics_tick", cascade_->metrics_snapshot().to_json());
    }
  });
  http_->wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  if (!running_.exchange(false)) return;
  tick_cv_.notify_all();
  hub_.close_all();
  http_->stop();
  if (listener_.joinable()) listener_.join();
  if (ticker_.joinable()) ticker_.join();
}

// ---------------------------------------------------------------------------
// serve

LoadedRun load_run_inputs(const ServiceConfig& cfg) {
  LoadedRun run;
  if (!cfg.m1_model.empty()) {
    auto m1 = std::make_shared<const OnlineModel>(OnlineModel::load(cfg.m1_model));
    check_compatible(*m1, cfg.window, "m1");
    run.m1 = m1;
  }
  if (!cfg.m2_model.empty()) {
    auto m2 = std::make_shared<const OnlineModel>(OnlineModel::load(cfg.m2_model));
    check_compatible(*m2, cfg.window, "m2");
    run.m2 = m2;
  }
  if (!cfg.mix.empty()) {
    std::ifstream in(cfg.mix);
    if (!in) throw std::runtime_error("cannot open mix plan " + cfg.mix.string());
    auto doc = parse_mix_document(in, cfg.mix.parent_path());
    run.stream = run_mix(doc);
  } else {
    run.stream = read_labeled_capture(cfg.capture, cfg.capture_label, cfg.sidecar);
  }
  return run;
}

RunMetrics serve(const ServiceConfig& cfg, const std::atomic<bool>& stop, std::ostream* log) {
  cfg.validate();
  auto inputs = load_run_inputs(cfg);
  auto cascade = std::make_shared<Cascade>(inputs.m1, inputs.m2, cfg.cascade);

  std::ofstream event_log;
  if (!cfg.event_log.empty()) {
    event_log.open(cfg.event_log, std::ios::app);
    if (!event_log) throw std::runtime_error("cannot open event log " + cfg.event_log.string());
    cascade->on_resolution([&event_log](const std::string& line) { event_log << line << '\n' << std::flush; });
  }
  if (log) cascade->on_warning([log](const std::string& w) { *log << "warning: " << w << '\n' << std::flush; });

  ApiServer api(cascade, {cfg.auth_token, cfg.tick_interval});
  const int port = api.start(cfg.listen, cfg.port);
  if (log) *log << "listening on http://" << cfg.listen << ':' << port << '\n' << std::flush;

  RunMetrics final_metrics;
  std::thread driver([&] {
    final_metrics = run_stream(*cascade, inputs.stream, cfg.window, cfg.pace, &stop);
    if (!cfg.metrics_out.empty()) {
      std::ofstream out(cfg.metrics_out);
      out << final_metrics.to_json().dump(2) << '\n';
    }
    if (log) *log << "stream finished: " << final_metrics.to_json().dump() << '\n' << std::flush;
  });
  while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  driver.join();
  api.stop();
  return cascade->metrics_snapshot();
}

}  // namespace flowguard
