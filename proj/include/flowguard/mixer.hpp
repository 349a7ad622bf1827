#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowguard/capture.hpp"

namespace flowguard {

/// Ordered packets, each labeled and tagged with its source; timestamps non-decreasing.
using LabeledStream = std::vector<PacketRecord>;

/// Partition of one capture's packet positions into flows keyed by five-tuple.
struct FlowIndex {
  struct Flow {
    FiveTuple key;
    std::vector<std::size_t> packets;  // strictly increasing
  };

  std::vector<Flow> flows;                   // ordered by first packet
  std::vector<std::size_t> flow_of_packet;   // packet position -> index into flows

  std::size_t first_packet_of(std::size_t packet) const { return flows[flow_of_packet[packet]].packets.front(); }
  bool is_flow_start(std::size_t packet) const {
    return packet < flow_of_packet.size() && first_packet_of(packet) == packet;
  }
  std::size_t packet_count() const { return flow_of_packet.size(); }
};

FlowIndex index_flows(std::span<const PacketRecord> capture);

/// Draws a uniform packet position and rewinds it to the first packet of its flow.
/// Throws std::invalid_argument on an empty capture.
std::size_t pick_injection(std::span<const PacketRecord> capture, const FlowIndex& index, std::mt19937_64& rng);

struct Injection {
  std::string capture;
  std::size_t flow_start = 0;
  double offset = 0.0;  // seconds after the base stream's first packet
};

struct MixPlan {
  std::string base;
  std::vector<Injection> injections;
  std::uint64_t seed = 0;
  // Flows replayed per injection, starting with the rewound flow.
  std::size_t flows_per_injection = 1;
};

class MixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time-shifts the selected flows of each injection so the first packet lands
/// at base start + offset and merges everything by timestamp. Ties are ordered
/// by (source_tag, ordinal). Throws MixError naming a bad injection.
LabeledStream merge(const LabeledStream& base, const MixPlan& plan,
                    const std::map<std::string, LabeledStream>& captures);

/// Packet positions of `capture` replayed by one injection.
std::vector<std::size_t> injected_packets(const FlowIndex& index, std::size_t flow_start, std::size_t flows);

// ---------------------------------------------------------------------------
// Capture writing and sidecar labels.

struct WriterOptions {
  // Store the zero-filled payload bytes too; off keeps files small while
  // preserving sizes in the record headers and IP length fields.
  bool include_payload = false;
};

/// Writes a nanosecond-resolution classic pcap. Throws std::invalid_argument
/// if a record is too small to hold its own headers.
void write_pcap(std::ostream& out, std::span<const PacketRecord> packets, const WriterOptions& opts = {});

/// One line per packet: ordinal<TAB>label<TAB>source_tag.
void write_sidecar(std::ostream& out, std::span<const PacketRecord> packets);

struct SidecarEntry {
  TrafficClass label;
  std::string source_tag;
};
std::vector<SidecarEntry> read_sidecar(std::istream& in);

/// Writes `path` and `path.labels`; I/O failures are reported with the path.
void write_capture(const LabeledStream& stream, const std::filesystem::path& path, const WriterOptions& opts = {});

std::filesystem::path sidecar_path_for(const std::filesystem::path& capture);

/// Reads every record of a capture file. When a sidecar exists next to it (or
/// is given) its labels and source tags are applied; otherwise `default_label`.
LabeledStream read_labeled_capture(const std::filesystem::path& capture, std::optional<TrafficClass> default_label = {},
                                   const std::filesystem::path& sidecar = {});

// ---------------------------------------------------------------------------
// Mix plan documents.
//
//   seed = 7
//   flows_per_injection = 1
//   base = lab
//   capture.lab = lab.pcap
//   capture.lab.label = iot_benign        # or capture.lab.sidecar = lab.pcap.labels
//   capture.mirai = mirai.pcap
//   capture.mirai.label = iot_malicious
//   inject = mirai 42 10.5                # explicit flow start
//   inject = mirai auto 20.0              # drawn with pick_injection

struct CaptureSource {
  std::filesystem::path path;
  std::optional<TrafficClass> label;
  std::filesystem::path sidecar;
};

struct MixDocument {
  MixPlan plan;
  std::map<std::string, CaptureSource> sources;
  // Injection indices whose flow start is drawn at resolve time.
  std::vector<std::size_t> auto_injections;
};

MixDocument parse_mix_document(std::istream& in, const std::filesystem::path& base_dir = {});
void write_mix_document(std::ostream& out, const MixDocument& doc);

/// Loads all sources, draws "auto" flow starts from the plan seed and merges.
LabeledStream run_mix(MixDocument& doc);

}  // namespace flowguard
