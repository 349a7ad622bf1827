#include "flowguard/runner.hpp"

#include <thread>

namespace flowguard {

std::string_view to_string(Pace p) { return p == Pace::Max ? "max" : "realtime"; }

Pace parse_pace(std::string_view s) {
  if (s == "max") return Pace::Max;
  if (s == "realtime" || s == "real-time") return Pace::Realtime;
  throw std::invalid_argument("unknown pace '" + std::string(s) + "' (max, realtime)");
}

void check_compatible(const Classifier& model, const WindowConfig& cfg, std::string_view name) {
  if (model.input_dimension() != static_cast<Eigen::Index>(kFeatureDimension))
    throw std::invalid_argument(std::string(name) + ": model expects " + std::to_string(model.input_dimension()) +
                                " features, extractor produces " + std::to_string(kFeatureDimension));
  if (const auto* om = dynamic_cast<const OnlineModel*>(&model)) {
    const auto want = feature_config_hash(cfg);
    if (!om->config_hash().empty() && om->config_hash() != want)
      throw std::invalid_argument(std::string(name) + ": model was trained with feature config " + om->config_hash() +
                                  ", current config is " + want);
  }
}

RunMetrics run_stream(Cascade& cascade, std::span<const PacketRecord> packets, const WindowConfig& cfg, Pace pace,
                      const std::atomic<bool>* stop) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool interactive = cascade.config().scenario == 5 && cascade.config().human_mode == HumanMode::Interactive;
  auto stopped = [&] { return stop && stop->load(); };
  auto feed = [&](const std::vector<ExtractedPacket>& ready) {
    for (const auto& e : ready) cascade.process(e.features, PacketSummary::of(e.packet));
    if (interactive) cascade.expire_pending();
  };

  FeatureExtractor extractor(cfg);
  const double first_ts = packets.empty() ? 0.0 : packets.front().timestamp;
  for (const auto& p : packets) {
    if (stopped()) break;
    if (pace == Pace::Realtime) {
      const auto due = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(p.timestamp - first_ts));
      while (std::chrono::steady_clock::now() < due && !stopped())
        std::this_thread::sleep_until(std::min(due, std::chrono::steady_clock::now() + std::chrono::milliseconds(50)));
    }
    feed(extractor.push(p));
  }
  if (!stopped()) feed(extractor.flush());

  if (interactive) {
    const auto deadline = std::chrono::steady_clock::now() + cascade.config().human_timeout;
    while (!cascade.pending().empty() && std::chrono::steady_clock::now() < deadline && !stopped()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      cascade.expire_pending();
    }
    if (!stopped()) cascade.resolve_all_pending();
  }

  auto m = cascade.metrics_snapshot();
  m.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.throughput = m.elapsed_seconds > 0 ? static_cast<double>(m.m1_trp) / m.elapsed_seconds : 0.0;
  return m;
}

}  // namespace flowguard
