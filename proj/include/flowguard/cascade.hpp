#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowguard/features.hpp"
#include "flowguard/online_model.hpp"

namespace flowguard {

enum class HumanMode { Interactive, Oracle, None };
enum class Provenance { M1, M2, Human };
enum class EscalationStatus { PendingM2, PendingHuman, Resolved };

std::string_view to_string(HumanMode m);
std::string_view to_string(Provenance p);
std::string_view to_string(EscalationStatus s);
HumanMode parse_human_mode(std::string_view s);

struct CascadeConfig {
  double theta = 0.9;
  double alpha = 0.75;
  // 1 frozen M1, 2 M1 + ground-truth updates, 3 frozen M2, 4 cascade without
  // humans, 5 cascade with humans.
  int scenario = 5;
  HumanMode human_mode = HumanMode::Oracle;
  std::size_t batch_size = 1000;
  // M1 accepts at gamma1 >= theta (true) or gamma1 > theta (false). M2
  // always needs gamma2 > theta.
  bool m1_accept_inclusive = true;
  std::chrono::milliseconds human_timeout{60000};
  // Scenario 2: probability that a packet's ground truth is replayed into M1.
  double replay_fraction = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct PacketSummary {
  FiveTuple five_tuple;
  double timestamp = 0;
  std::uint32_t packet_size = 0;
  std::uint32_t payload_size = 0;

  static PacketSummary of(const PacketRecord& p) {
    return {five_tuple_of(p), p.timestamp, p.packet_size, p.payload_size};
  }
};

struct EscalationRecord {
  std::uint64_t id = 0;
  Eigen::VectorXd features;
  PacketSummary packet;
  Prediction m1_prediction;
  std::optional<Prediction> m2_prediction;
  EscalationStatus status = EscalationStatus::PendingM2;
  std::optional<TrafficClass> final_label;
  std::optional<Provenance> label_provenance;
  std::optional<TrafficClass> ground_truth;
  std::chrono::steady_clock::time_point created_at;
  double created_unix = 0;  // wall clock, seconds

  nlohmann::json to_json() const;
};

struct RunMetrics {
  std::uint64_t m1_trp = 0;
  std::uint64_t m1_cpp = 0;  // resolved at M1
  std::uint64_t m2_trp = 0;
  std::uint64_t m2_cpp = 0;  // accepted at M2 (gamma2 > theta)
  std::uint64_t hir = 0;
  double he = 0;  // hir / m1_trp
  std::uint64_t human_provenance = 0;
  std::uint64_t m2_provenance = 0;
  std::uint64_t m1_provenance = 0;
  std::uint64_t retrain_events = 0;
  std::uint64_t pending = 0;
  std::uint64_t labeled = 0;  // resolutions with ground truth
  std::uint64_t correct = 0;
  double accuracy = 0;
  double elapsed_seconds = 0;
  double throughput = 0;  // packets per second
  std::vector<double> batch_accuracy;

  nlohmann::json to_json() const;
  /// Counters only; ignores timing fields.
  bool same_counts(const RunMetrics& o) const;
};

/// HIR / TRP; zero when nothing was received.
inline double human_effort(std::uint64_t hir, std::uint64_t trp) {
  return trp ? static_cast<double>(hir) / static_cast<double>(trp) : 0.0;
}

struct ProcessResult {
  std::uint64_t id = 0;
  std::optional<TrafficClass> label;  // empty while awaiting a human
  std::optional<Provenance> provenance;
  Prediction m1;
  std::optional<Prediction> m2;
  bool retrained = false;
};

enum class SubmitStatus { Ok, UnknownId, AlreadyResolved };

struct CascadeEvent {
  enum class Kind { EscalationCreated, EscalationResolved };
  Kind kind;
  nlohmann::json payload;
};

/// Confidence-gated M1 -> M2 -> human coordinator. All members are
/// thread-safe; mutations are serialized internally and M1 snapshots are
/// swapped atomically on retrain.
class Cascade {
 public:
  using EventSink = std::function<void(const CascadeEvent&)>;
  using LineSink = std::function<void(const std::string&)>;

  Cascade(std::shared_ptr<const Classifier> m1, std::shared_ptr<const Classifier> m2, CascadeConfig cfg);

  /// Routes one packet. `x.label`, when present, is the ground truth used for
  /// accuracy, the oracle human and scenario-2 replay.
  ProcessResult process(const FeatureVector& x, const PacketSummary& pkt);

  SubmitStatus submit_human_label(std::uint64_t id, TrafficClass label);

  /// Resolves pending-human records older than the timeout with M2's label.
  std::size_t expire_pending(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now());
  /// Resolves every pending-human record with M2's label right away.
  std::size_t resolve_all_pending();

  std::vector<EscalationRecord> pending() const;
  std::optional<EscalationRecord> record(std::uint64_t id) const;

  RunMetrics metrics_snapshot() const;

  std::shared_ptr<const Classifier> m1() const;
  std::shared_ptr<const Classifier> m2() const { return m2_; }
  const CascadeConfig& config() const { return cfg_; }

  void on_event(EventSink sink);
  /// Receives one JSON line per resolution (the event log).
  void on_resolution(LineSink sink);
  /// Receives warnings such as timeout fallbacks.
  void on_warning(LineSink sink);

  /// Retrains a model snapshot: interpolate(m, partial_update(m, x, label), alpha).
  static std::shared_ptr<const Classifier> retrain_m1(const Classifier& m1, const Eigen::VectorXd& x,
                                                     TrafficClass label, double alpha);

 private:
  void resolve_locked(EscalationRecord& rec, TrafficClass label, Provenance prov, bool retrain,
                      std::vector<CascadeEvent>& events, std::vector<std::string>& lines);
  void finish_batch_locked();
  void emit(std::vector<CascadeEvent>& events, std::vector<std::string>& lines, std::vector<std::string>& warnings);

  CascadeConfig cfg_;
  mutable std::mutex mu_;
  std::shared_ptr<const Classifier> m1_;
  std::shared_ptr<const Classifier> m2_;
  std::map<std::uint64_t, EscalationRecord> records_;  // pending-human and resolved escalations
  std::uint64_t next_id_ = 1;
  RunMetrics counters_;
  std::uint64_t processed_ = 0;
  std::uint64_t batch_labeled_ = 0, batch_correct_ = 0;
  std::optional<std::chrono::steady_clock::time_point> started_;
  std::chrono::steady_clock::time_point last_;
  std::mt19937_64 rng_;
  std::vector<EventSink> event_sinks_;
  std::vector<LineSink> resolution_sinks_;
  std::vector<LineSink> warning_sinks_;
  std::mutex emit_mu_;
};

/// Drives a scenario over pre-extracted packets in order, at full speed.
/// Interactive mode waits up to the human timeout for pending labels at the end.
RunMetrics run_scenario(Cascade& cascade, std::span<const ExtractedPacket> stream);

}  // namespace flowguard
