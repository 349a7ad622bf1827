#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowguard {

enum class TrafficClass : std::uint8_t { IotBenign = 0, IotMalicious = 1, TradBenign = 2, TradMalicious = 3 };

inline constexpr int kNumClasses = 4;

inline constexpr std::array<TrafficClass, kNumClasses> kAllClasses = {
    TrafficClass::IotBenign, TrafficClass::IotMalicious, TrafficClass::TradBenign, TrafficClass::TradMalicious};

/// Canonical lower-case name, e.g. "iot_malicious".
std::string_view to_string(TrafficClass c);
/// Parses canonical names; throws std::invalid_argument on anything else.
TrafficClass parse_traffic_class(std::string_view name);
std::optional<TrafficClass> try_parse_traffic_class(std::string_view name);

inline constexpr int class_index(TrafficClass c) { return static_cast<int>(c); }
inline TrafficClass class_from_index(int i) {
  if (i < 0 || i >= kNumClasses) throw std::out_of_range("class index out of range");
  return static_cast<TrafficClass>(i);
}

/// IPv4 or IPv6 address. IPv4 is stored in the first four bytes.
struct IpAddress {
  std::array<std::uint8_t, 16> bytes{};
  bool v6 = false;

  static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    IpAddress ip;
    ip.bytes[0] = a;
    ip.bytes[1] = b;
    ip.bytes[2] = c;
    ip.bytes[3] = d;
    return ip;
  }
  static IpAddress v4(std::uint32_t host_order);
  /// Dotted quad or RFC 4291 text; throws std::invalid_argument.
  static IpAddress parse(std::string_view text);

  std::uint8_t last_octet() const { return v6 ? bytes[15] : bytes[3]; }
  std::string to_string() const;

  friend bool operator==(const IpAddress&, const IpAddress&) = default;
  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
};

namespace ipproto {
inline constexpr std::uint8_t kIcmp = 1;
inline constexpr std::uint8_t kTcp = 6;
inline constexpr std::uint8_t kUdp = 17;
inline constexpr std::uint8_t kIcmpV6 = 58;
}  // namespace ipproto

struct FiveTuple {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  std::string to_string() const;

  friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
  friend auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

struct FiveTupleHash {
  std::size_t operator()(const FiveTuple& t) const noexcept;
};

struct PacketRecord {
  double timestamp = 0.0;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint8_t protocol = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flag = 0;
  std::uint8_t udp_flag = 0;
  std::uint8_t ttl = 0;
  std::uint8_t ack = 0;
  std::uint8_t syn = 0;
  std::uint8_t fin = 0;
  std::uint8_t psh = 0;
  std::uint8_t urg = 0;
  std::uint8_t rst = 0;
  std::uint32_t sequence_number = 0;
  std::uint32_t acknowledgment_number = 0;
  std::uint32_t packet_size = 0;
  std::uint32_t payload_size = 0;
  std::optional<TrafficClass> label;
  std::string source_tag;
  // Position of the packet within its originating capture.
  std::uint64_t ordinal = 0;
};

/// Compares everything a capture file carries (timestamp, addressing,
/// header fields, sizes); ignores label, source_tag and ordinal.
bool same_wire_fields(const PacketRecord& a, const PacketRecord& b);

/// Checks the record invariants (flag exclusivity, payload bound).
bool is_well_formed(const PacketRecord& p);

FiveTuple five_tuple_of(const PacketRecord& pkt);

enum class AddressEncoding { LastOctet, Drop };

inline constexpr std::size_t kGeneralFeatureCount = 19;
/// Model-facing general features: the general tuple without the timestamp.
inline constexpr std::size_t kModelGeneralFeatureCount = kGeneralFeatureCount - 1;

/// Ordered general-feature tuple. Index 0 is the timestamp (windowing only);
/// indices 1..18 are model-facing, in the order given by general_feature_names().
using GeneralFeatures = std::array<double, kGeneralFeatureCount>;

GeneralFeatures general_features(const PacketRecord& pkt, AddressEncoding enc = AddressEncoding::LastOctet);
const std::array<std::string_view, kGeneralFeatureCount>& general_feature_names();

// ---------------------------------------------------------------------------
// Classic pcap reading.

namespace pcap_magic {
inline constexpr std::uint32_t kMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kMicroSwapped = 0xd4c3b2a1;
inline constexpr std::uint32_t kNano = 0xa1b23c4d;
inline constexpr std::uint32_t kNanoSwapped = 0x4d3cb2a1;
}  // namespace pcap_magic

inline constexpr std::uint32_t kLinkTypeEthernet = 1;

struct CaptureHeader {
  std::uint32_t magic = pcap_magic::kMicro;
  std::uint32_t snaplen = 65535;
  std::uint32_t link_type = kLinkTypeEthernet;

  bool swapped() const { return magic == pcap_magic::kMicroSwapped || magic == pcap_magic::kNanoSwapped; }
  bool nanosecond() const { return magic == pcap_magic::kNano || magic == pcap_magic::kNanoSwapped; }
};

class CaptureError : public std::runtime_error {
 public:
  enum class Kind { TruncatedHeader, BadMagic, UnsupportedLinkType, Io };
  CaptureError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Lazily decodes packets from a classic pcap stream. Construction reads and
/// validates the global header (throws CaptureError). next() yields one record
/// per Ethernet/IP frame; other frames are skipped and counted. A truncated
/// record ends the stream and is reported through truncated_at().
class CaptureReader {
 public:
  explicit CaptureReader(std::istream& in, std::string source_tag = {});

  const CaptureHeader& header() const { return header_; }

  std::optional<PacketRecord> next();

  std::uint64_t frames_read() const { return frames_; }
  std::uint64_t packets_yielded() const { return yielded_; }
  std::uint64_t frames_skipped() const { return skipped_; }
  /// Byte offset of the record header that could not be read completely.
  std::optional<std::uint64_t> truncated_at() const { return truncated_at_; }

 private:
  std::uint32_t u32(const std::uint8_t* p) const;

  std::istream& in_;
  std::string tag_;
  CaptureHeader header_;
  std::uint64_t offset_ = 0;
  std::uint64_t frames_ = 0;
  std::uint64_t yielded_ = 0;
  std::uint64_t skipped_ = 0;
  std::optional<std::uint64_t> truncated_at_;
  std::string frame_;
  bool done_ = false;
};

/// Decodes one Ethernet frame. Returns nullopt for non-IP or undecodable frames.
std::optional<PacketRecord> decode_ethernet_frame(const std::uint8_t* data, std::size_t caplen, std::uint32_t orig_len);

}  // namespace flowguard
