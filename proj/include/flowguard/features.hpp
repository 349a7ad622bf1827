#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "flowguard/capture.hpp"

namespace flowguard {

struct WindowConfig {
  double processing_interval = 1.0;      // seconds
  double abnormal_size_threshold = 1500;  // bytes; strictly greater counts
  std::uint32_t port_frequency_threshold = 5;
  std::uint32_t short_lived_threshold = 5;  // packets per flow, strict less-than
  // Short-lived flows must show SYN, FIN or RST inside the window.
  bool short_lived_requires_flag = true;
  // Pool windows per source address instead of globally.
  bool group_by_source = false;
  AddressEncoding address_encoding = AddressEncoding::LastOctet;

  /// Throws std::invalid_argument when a threshold is not strictly positive.
  void validate() const;
};

std::int64_t window_id(double timestamp, const WindowConfig& cfg);

inline constexpr std::size_t kWindowStatCount = 24;

struct WindowStats {
  double packet_count = 0;
  double dst_port_entropy = 0;
  double most_freq_src_port = 0;
  double most_freq_dst_port = 0;
  double short_lived_connections = 0;
  double repeated_connection_attempts = 0;
  double scanning_count = 0;
  double flow_rate = 0;
  double source_entropy = 0;
  double rst_count = 0;
  double most_freq_packet_size_freq = 0;
  double abnormal_size_frequency = 0;
  double sequence_number_variance = 0;
  double avg_packet_number = 0;
  double syn_frequency = 0;
  double ack_frequency = 0;
  double tcp_frequency = 0;
  double udp_frequency = 0;
  double most_freq_protocol = 0;
  double packet_size_variance = 0;
  double most_freq_payload_size = 0;
  double avg_payload_size = 0;
  double packet_size_stddev = 0;
  double avg_packet_size = 0;

  /// Fields in declaration order.
  std::array<double, kWindowStatCount> values() const;
  static const std::array<std::string_view, kWindowStatCount>& names();
};

/// Natural-log Shannon entropy of a count distribution; zero counts contribute 0.
/// Throws std::invalid_argument when the counts sum to zero.
double entropy(std::span<const std::uint64_t> counts);

/// Single-pass accumulator for one window. Order-independent.
class WindowAccumulator {
 public:
  explicit WindowAccumulator(const WindowConfig& cfg) : cfg_(cfg) {}

  void add(const PacketRecord& p);
  std::uint64_t size() const { return count_; }
  WindowStats finish() const;

 private:
  struct FlowState {
    std::uint32_t packets = 0;
    bool lifecycle = false;  // saw SYN, FIN or RST
  };
  struct IpHash {
    std::size_t operator()(const IpAddress& ip) const noexcept;
  };
  struct TripleHash {
    std::size_t operator()(const std::tuple<IpAddress, IpAddress, std::uint16_t>& t) const noexcept;
  };

  struct Welford {
    std::uint64_t n = 0;
    double mean = 0;
    double m2 = 0;
    void add(double x) {
      ++n;
      const double d = x - mean;
      mean += d / static_cast<double>(n);
      m2 += d * (x - mean);
    }
    double variance() const { return n ? m2 / static_cast<double>(n) : 0.0; }
  };

  WindowConfig cfg_;
  std::uint64_t count_ = 0;
  std::unordered_map<std::uint16_t, std::uint64_t> src_ports_, dst_ports_;
  std::unordered_map<IpAddress, std::uint64_t, IpHash> sources_;
  std::unordered_map<FiveTuple, FlowState, FiveTupleHash> flows_;
  std::unordered_set<std::tuple<IpAddress, IpAddress, std::uint16_t>, TripleHash> syn_targets_;
  std::unordered_map<std::uint32_t, std::uint64_t> sizes_, payloads_;
  std::array<std::uint64_t, 256> protocols_{};
  std::uint64_t repeated_ = 0, scanning_ = 0, rst_ = 0, abnormal_ = 0, syn_ = 0, ack_ = 0, tcp_ = 0, udp_ = 0;
  double payload_sum_ = 0;
  Welford seq_, size_;
};

/// Statistics of one window's packets (precondition: non-empty, same window).
WindowStats compute_window_stats(std::span<const PacketRecord> packets, const WindowConfig& cfg);

inline constexpr std::size_t kFeatureDimension = kModelGeneralFeatureCount + kWindowStatCount;

struct FeatureVector {
  Eigen::VectorXd values;
  std::int64_t window_id = 0;
  std::optional<TrafficClass> label;
};

/// Column names of the 42 model features, general block first.
const std::array<std::string_view, kFeatureDimension>& feature_names();

/// General features (without timestamp) followed by the window statistics.
/// Throws std::invalid_argument if `stats_window` is not the packet's window.
FeatureVector assemble(const PacketRecord& pkt, const WindowStats& stats, std::int64_t stats_window,
                       const WindowConfig& cfg);

/// A packet together with its assembled (unscaled) features.
struct ExtractedPacket {
  PacketRecord packet;
  FeatureVector features;
};

/// Streaming extractor over a timestamp-ordered packet stream. Packets are
/// buffered until their window closes; push() returns the finished window's
/// vectors in arrival order, flush() drains the last window.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const WindowConfig& cfg);

  std::vector<ExtractedPacket> push(PacketRecord p);
  std::vector<ExtractedPacket> flush();

  std::uint64_t windows_emitted() const { return windows_; }

 private:
  std::vector<ExtractedPacket> close_window();

  WindowConfig cfg_;
  std::optional<std::int64_t> current_;
  std::vector<PacketRecord> pending_;
  std::uint64_t windows_ = 0;
};

/// Convenience batch form of FeatureExtractor.
std::vector<ExtractedPacket> extract_all(std::span<const PacketRecord> packets, const WindowConfig& cfg);

// ---------------------------------------------------------------------------
// Min-max scaling.

struct ScalerParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  Eigen::Index dimension() const { return min.size(); }
};

/// Per-dimension min/max over the rows of `rows`.
template <typename Derived>
ScalerParams fit_scaler(const Eigen::MatrixBase<Derived>& rows) {
  if (rows.rows() < 1) throw std::invalid_argument("fit_scaler: need at least one vector");
  return {rows.colwise().minCoeff().transpose(), rows.colwise().maxCoeff().transpose()};
}

ScalerParams fit_scaler(std::span<const FeatureVector> vectors);

/// (x - min) / (max - min) clamped to [0, 1]; constant dimensions map to 0.
template <typename Derived>
Eigen::VectorXd apply_scaler(const ScalerParams& params, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != params.dimension())
    throw std::invalid_argument("apply_scaler: dimension " + std::to_string(x.size()) + " != " +
                                std::to_string(params.dimension()));
  const Eigen::ArrayXd range = (params.max - params.min).array();
  const Eigen::ArrayXd scaled = (x.derived().array() - params.min.array()) / range;
  return (range > 0.0).select(scaled.max(0.0).min(1.0), 0.0).matrix();
}

// ---------------------------------------------------------------------------
// Feature CSV: 42 feature columns, window_id, label (empty when unknown).

void write_feature_csv_header(std::ostream& out);
void write_feature_csv_row(std::ostream& out, const FeatureVector& v);
void write_feature_csv(std::ostream& out, std::span<const FeatureVector> vectors);
std::vector<FeatureVector> read_feature_csv(std::istream& in);

}  // namespace flowguard
