#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowguard/runner.hpp"
#include "flowguard/service.hpp"
#include "flowguard/synth.hpp"
#include "flowguard/training.hpp"

using namespace flowguard;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// A flag that maps onto one ServiceConfig key and only applies when given.
struct Override {
  std::string key;
  std::optional<std::string> value;
};

struct ConfigFlags {
  std::string config_path;
  std::vector<Override> overrides;
  std::vector<std::string> sets;

  ServiceConfig resolve() const {
    ServiceConfig cfg = config_path.empty() ? ServiceConfig{} : load_service_config(config_path);
    for (const auto& o : overrides)
      if (o.value) cfg.set(o.key, *o.value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return cfg;
  }
};

// Registers the flags on `app`. `keys` pairs a flag with its config key.
void register_flags(CLI::App* app, ConfigFlags& flags, const std::vector<std::pair<std::string, std::string>>& keys) {
  app->add_option("--config", flags.config_path, "Key/value config file")->check(CLI::ExistingFile);
  app->add_option("--set", flags.sets, "Override any config key (key=value), repeatable");
  flags.overrides.reserve(keys.size());
  for (const auto& [flag, key] : keys) flags.overrides.push_back({key, std::nullopt});
  for (std::size_t i = 0; i < keys.size(); ++i)
    app->add_option(keys[i].first, flags.overrides[i].value, "Config key '" + keys[i].second + "'");
}

const std::vector<std::pair<std::string, std::string>> kWindowFlags = {
    {"--processing-interval", "processing_interval"},
    {"--group-by-source", "group_by_source"},
    {"--address-encoding", "address_encoding"},
};

const std::vector<std::pair<std::string, std::string>> kRunFlags = {
    {"--theta", "theta"},
    {"--alpha", "alpha"},
    {"--scenario", "scenario"},
    {"--pace", "pace"},
    {"--seed", "seed"},
    {"--human-mode", "human_mode"},
    {"--m1", "m1"},
    {"--m2", "m2"},
    {"--capture", "capture"},
    {"--sidecar", "sidecar"},
    {"--capture-label", "capture_label"},
    {"--mix", "mix"},
    {"--event-log", "event_log"},
    {"--metrics-out", "metrics_out"},
    {"--batch-size", "batch_size"},
    {"--human-timeout-ms", "human_timeout_ms"},
    {"--processing-interval", "processing_interval"},
};

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (auto c : kAllClasses) {
    const int i = class_index(c);
    per_class[std::string(to_string(c))] = {{"precision", r.precision[i]}, {"recall", r.recall[i]}, {"f1", r.f1[i]}};
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (int i = 0; i < kNumClasses; ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < kNumClasses; ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"accuracy", r.accuracy},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1},
          {"correct_predictions", r.correct_predictions},
          {"wrong_predictions", r.wrong_predictions},
          {"error_rate", r.error_rate},
          {"per_class", per_class},
          {"confusion", confusion}};
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowguard: streaming packet classification with a confidence-gated model cascade"};
  app.require_subcommand(1);

  // extract ---------------------------------------------------------------
  auto* extract = app.add_subcommand("extract", "Capture -> per-packet feature CSV");
  std::string ex_capture, ex_sidecar, ex_label, ex_out;
  ConfigFlags ex_flags;
  extract->add_option("capture", ex_capture, "pcap file")->required()->check(CLI::ExistingFile);
  extract->add_option("--sidecar", ex_sidecar, "Label sidecar (default: <capture>.labels when present)");
  extract->add_option("--label", ex_label, "Label for every packet when there is no sidecar");
  extract->add_option("-o,--out", ex_out, "Output CSV (default stdout)");
  register_flags(extract, ex_flags, kWindowFlags);

  // mix -------------------------------------------------------------------
  auto* mix = app.add_subcommand("mix", "Merge captures per a mix plan into a labeled capture");
  std::string mix_plan, mix_out;
  std::optional<std::uint64_t> mix_seed;
  bool mix_payload = false;
  mix->add_option("plan", mix_plan, "Mix plan file")->required()->check(CLI::ExistingFile);
  mix->add_option("-o,--out", mix_out, "Output pcap; labels go to <out>.labels")->required();
  mix->add_option("--seed", mix_seed, "Override the plan's seed");
  mix->add_flag("--include-payload", mix_payload, "Write zero-filled payload bytes");

  // train -----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train an M1 or M2 model from a labeled feature CSV");
  std::string tr_csv, tr_kind = "perceptron", tr_role = "m1", tr_out;
  TrainOptions tr_opts;
  ConfigFlags tr_flags;
  train->add_option("csv", tr_csv, "Feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--kind", tr_kind, "sgd | perceptron | mnb | bnb | gnb")->capture_default_str();
  train->add_option("--role", tr_role, "m1 (K-Means core samples) | m2 (all rows)")->capture_default_str();
  train->add_option("--per-class", tr_opts.per_class, "M1 core samples kept per class")->capture_default_str();
  train->add_option("--clusters", tr_opts.kmeans.clusters, "K-Means clusters per class")->capture_default_str();
  train->add_option("--epochs", tr_opts.epochs, "Passes for linear models")->capture_default_str();
  train->add_option("--learning-rate", tr_opts.learning_rate, "Linear model step size")->capture_default_str();
  train->add_option("--seed", tr_opts.seed, "Seed for selection, split and shuffling")->capture_default_str();
  train->add_option("-o,--out", tr_out, "Model file")->required();
  register_flags(train, tr_flags, kWindowFlags);

  // run -------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Drive a scenario over a capture; prints RunMetrics JSON");
  ConfigFlags run_flags;
  register_flags(run, run_flags, kRunFlags);

  // serve -----------------------------------------------------------------
  auto* srv = app.add_subcommand("serve", "Run the cascade behind the HTTP API");
  ConfigFlags srv_flags;
  auto srv_keys = kRunFlags;
  srv_keys.insert(srv_keys.end(), {{"--listen", "listen"}, {"--port", "port"}, {"--auth-token", "auth_token"}});
  register_flags(srv, srv_flags, srv_keys);

  // synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic capture");
  SynthOptions sy;
  std::string sy_out;
  synth->add_option("--packets", sy.packets, "Packet count")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
  synth->add_option("--rate", sy.rate, "Mean packets per second")->capture_default_str();
  synth->add_option("--confusion", sy.confusion, "Probability a flow looks like another class")->capture_default_str();
  synth->add_option("-o,--out", sy_out, "Output pcap; labels go to <out>.labels")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) {
      const auto cfg = ex_flags.resolve();
      cfg.window.validate();
      std::optional<TrafficClass> label;
      if (!ex_label.empty()) label = parse_traffic_class(ex_label);
      const auto stream = read_labeled_capture(ex_capture, label, ex_sidecar);
      std::ofstream file;
      auto& out = open_out(ex_out, file);
      write_feature_csv_header(out);
      FeatureExtractor fx(cfg.window);
      for (const auto& p : stream)
        for (const auto& e : fx.push(p)) write_feature_csv_row(out, e.features);
      for (const auto& e : fx.flush()) write_feature_csv_row(out, e.features);
      std::cerr << "extracted " << stream.size() << " packets\n";
    } else if (mix->parsed()) {
      std::ifstream in(mix_plan);
      auto doc = parse_mix_document(in, std::filesystem::path(mix_plan).parent_path());
      if (mix_seed) doc.plan.seed = *mix_seed;
      const auto merged = run_mix(doc);
      write_capture(merged, mix_out, {mix_payload});
      std::cerr << "wrote " << merged.size() << " packets to " << mix_out << '\n';
    } else if (train->parsed()) {
      const auto cfg = tr_flags.resolve();
      cfg.window.validate();
      tr_opts.kind = parse_model_kind(tr_kind);
      if (tr_role == "m1") tr_opts.role = ModelRole::M1;
      else if (tr_role == "m2") tr_opts.role = ModelRole::M2;
      else throw std::invalid_argument("unknown role '" + tr_role + "' (m1, m2)");
      tr_opts.kmeans.seed = tr_opts.seed;
      tr_opts.config_hash = feature_config_hash(cfg.window);
      std::ifstream in(tr_csv);
      const auto rows = read_feature_csv(in);
      auto result = train_model(rows, tr_opts);
      result.model.save(tr_out);
      nlohmann::json summary = {{"kind", tr_kind},
                                {"role", tr_role},
                                {"rows", rows.size()},
                                {"selected_rows", result.selected_rows},
                                {"train_rows", result.train_rows},
                                {"test_rows", result.test_rows},
                                {"test_report", report_json(result.report)}};
      std::cout << summary.dump(2) << '\n';
    } else if (run->parsed()) {
      const auto cfg = run_flags.resolve();
      cfg.validate();
      const auto inputs = load_run_inputs(cfg);
      Cascade cascade(inputs.m1, inputs.m2, cfg.cascade);
      std::ofstream log;
      if (!cfg.event_log.empty()) {
        log.open(cfg.event_log);
        if (!log) throw std::runtime_error("cannot open event log " + cfg.event_log.string());
        cascade.on_resolution([&log](const std::string& line) { log << line << '\n'; });
      }
      cascade.on_warning([](const std::string& w) { std::cerr << "warning: " << w << '\n'; });
      std::signal(SIGINT, on_signal);
      const auto metrics = run_stream(cascade, inputs.stream, cfg.window, cfg.pace, &g_stop);
      const auto doc = metrics.to_json().dump(2);
      if (!cfg.metrics_out.empty()) {
        std::ofstream out(cfg.metrics_out);
        out << doc << '\n';
      }
      std::cout << doc << '\n';
    } else if (srv->parsed()) {
      const auto cfg = srv_flags.resolve();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto metrics = serve(cfg, g_stop, &std::cerr);
      std::cout << metrics.to_json().dump(2) << '\n';
    } else if (synth->parsed()) {
      const auto stream = synthesize(sy);
      write_capture(stream, sy_out);
      std::cerr << "wrote " << stream.size() << " packets to " << sy_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
