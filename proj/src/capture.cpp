#include "flowguard/capture.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <istream>

namespace flowguard {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"iot_benign", "iot_malicious", "trad_benign",
                                                                    "trad_malicious"};

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88a8;

// Fills ports, flags and payload size from the transport header at `l4`.
// `l4_len` is the number of captured bytes available, `l4_total` the length
// the IP header claims for the transport segment.
void decode_transport(PacketRecord& r, const std::uint8_t* l4, std::size_t l4_len, std::size_t l4_total) {
  std::size_t header = 0;
  switch (r.protocol) {
    case ipproto::kTcp: {
      r.tcp_flag = 1;
      if (l4_len < 20) return;
      r.src_port = be16(l4);
      r.dst_port = be16(l4 + 2);
      r.sequence_number = be32(l4 + 4);
      r.acknowledgment_number = be32(l4 + 8);
      header = static_cast<std::size_t>(l4[12] >> 4) * 4;
      const std::uint8_t flags = l4[13];
      r.fin = flags & 0x01 ? 1 : 0;
      r.syn = flags & 0x02 ? 1 : 0;
      r.rst = flags & 0x04 ? 1 : 0;
      r.psh = flags & 0x08 ? 1 : 0;
      r.ack = flags & 0x10 ? 1 : 0;
      r.urg = flags & 0x20 ? 1 : 0;
      break;
    }
    case ipproto::kUdp:
      r.udp_flag = 1;
      if (l4_len < 8) return;
      r.src_port = be16(l4);
      r.dst_port = be16(l4 + 2);
      header = 8;
      break;
    case ipproto::kIcmp:
    case ipproto::kIcmpV6:
      header = 8;
      break;
    default:
      header = 0;
      break;
  }
  r.payload_size = l4_total > header ? static_cast<std::uint32_t>(l4_total - header) : 0;
}

bool is_ipv6_extension(std::uint8_t next) { return next == 0 || next == 43 || next == 60 || next == 44; }

}  // namespace

std::string_view to_string(TrafficClass c) { return kClassNames.at(static_cast<std::size_t>(c)); }

std::optional<TrafficClass> try_parse_traffic_class(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<std::size_t>(i)] == name) return static_cast<TrafficClass>(i);
  return std::nullopt;
}

TrafficClass parse_traffic_class(std::string_view name) {
  if (auto c = try_parse_traffic_class(name)) return *c;
  throw std::invalid_argument("unknown traffic class '" + std::string(name) + "'");
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
  return v4(static_cast<std::uint8_t>(host_order >> 24), static_cast<std::uint8_t>(host_order >> 16),
            static_cast<std::uint8_t>(host_order >> 8), static_cast<std::uint8_t>(host_order));
}

IpAddress IpAddress::parse(std::string_view text) {
  const std::string s(text);
  IpAddress ip;
  if (s.find(':') != std::string::npos) {
    ip.v6 = true;
    if (inet_pton(AF_INET6, s.c_str(), ip.bytes.data()) != 1) throw std::invalid_argument("bad IPv6 address: " + s);
  } else if (inet_pton(AF_INET, s.c_str(), ip.bytes.data()) != 1) {
    throw std::invalid_argument("bad IPv4 address: " + s);
  }
  return ip;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(v6 ? AF_INET6 : AF_INET, bytes.data(), buf, sizeof buf);
  return buf;
}

std::string FiveTuple::to_string() const {
  auto endpoint = [](const IpAddress& ip, std::uint16_t port) {
    return ip.v6 ? "[" + ip.to_string() + "]:" + std::to_string(port) : ip.to_string() + ":" + std::to_string(port);
  };
  return endpoint(src_ip, src_port) + " -> " + endpoint(dst_ip, dst_port) + " proto " + std::to_string(protocol);
}

std::size_t FiveTupleHash::operator()(const FiveTuple& t) const noexcept {
  // FNV-1a over the packed key.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (auto b : t.src_ip.bytes) mix(b);
  for (auto b : t.dst_ip.bytes) mix(b);
  mix(t.src_ip.v6);
  mix(static_cast<std::uint8_t>(t.src_port >> 8));
  mix(static_cast<std::uint8_t>(t.src_port));
  mix(static_cast<std::uint8_t>(t.dst_port >> 8));
  mix(static_cast<std::uint8_t>(t.dst_port));
  mix(t.protocol);
  return static_cast<std::size_t>(h);
}

bool same_wire_fields(const PacketRecord& a, const PacketRecord& b) {
  return a.timestamp == b.timestamp && a.src_ip == b.src_ip && a.dst_ip == b.dst_ip && a.protocol == b.protocol &&
         a.src_port == b.src_port && a.dst_port == b.dst_port && a.tcp_flag == b.tcp_flag &&
         a.udp_flag == b.udp_flag && a.ttl == b.ttl && a.ack == b.ack && a.syn == b.syn && a.fin == b.fin &&
         a.psh == b.psh && a.urg == b.urg && a.rst == b.rst && a.sequence_number == b.sequence_number &&
         a.acknowledgment_number == b.acknowledgment_number && a.packet_size == b.packet_size &&
         a.payload_size == b.payload_size;
}

bool is_well_formed(const PacketRecord& p) {
  if (p.tcp_flag + p.udp_flag > 1) return false;
  if (!p.tcp_flag && (p.ack | p.syn | p.fin | p.psh | p.urg | p.rst)) return false;
  return p.payload_size <= p.packet_size;
}

FiveTuple five_tuple_of(const PacketRecord& pkt) {
  const bool has_ports = pkt.protocol == ipproto::kTcp || pkt.protocol == ipproto::kUdp;
  return FiveTuple{pkt.src_ip, pkt.dst_ip, has_ports ? pkt.src_port : std::uint16_t{0},
                   has_ports ? pkt.dst_port : std::uint16_t{0}, pkt.protocol};
}

const std::array<std::string_view, kGeneralFeatureCount>& general_feature_names() {
  static const std::array<std::string_view, kGeneralFeatureCount> names = {
      "timestamp", "src_addr",  "dst_addr", "protocol", "src_port",        "dst_port",    "tcp",
      "udp",       "ttl",       "ack",      "syn",      "fin",             "psh",         "urg",
      "rst",       "seq_number", "packet_size", "ack_number", "payload_size"};
  return names;
}

GeneralFeatures general_features(const PacketRecord& p, AddressEncoding enc) {
  const bool tcp = p.tcp_flag != 0;
  const double src = enc == AddressEncoding::LastOctet ? p.src_ip.last_octet() / 255.0 : 0.0;
  const double dst = enc == AddressEncoding::LastOctet ? p.dst_ip.last_octet() / 255.0 : 0.0;
  return {p.timestamp,
          src,
          dst,
          static_cast<double>(p.protocol),
          static_cast<double>(p.src_port),
          static_cast<double>(p.dst_port),
          static_cast<double>(p.tcp_flag),
          static_cast<double>(p.udp_flag),
          static_cast<double>(p.ttl),
          static_cast<double>(p.ack),
          static_cast<double>(p.syn),
          static_cast<double>(p.fin),
          static_cast<double>(p.psh),
          static_cast<double>(p.urg),
          static_cast<double>(p.rst),
          tcp ? static_cast<double>(p.sequence_number) : 0.0,
          static_cast<double>(p.packet_size),
          tcp ? static_cast<double>(p.acknowledgment_number) : 0.0,
          static_cast<double>(p.payload_size)};
}

// ---------------------------------------------------------------------------

std::optional<PacketRecord> decode_ethernet_frame(const std::uint8_t* data, std::size_t caplen, std::uint32_t orig_len) {
  if (caplen < 14) return std::nullopt;
  std::size_t off = 12;
  std::uint16_t ether = be16(data + off);
  off += 2;
  while ((ether == kEtherVlan || ether == kEtherQinQ) && caplen >= off + 4) {
    ether = be16(data + off + 2);
    off += 4;
  }

  PacketRecord r;
  r.packet_size = orig_len;
  const std::uint8_t* ip = data + off;
  const std::size_t avail = caplen - off;

  if (ether == kEtherIpv4) {
    if (avail < 20 || (ip[0] >> 4) != 4) return std::nullopt;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || avail < ihl) return std::nullopt;
    const std::size_t total = be16(ip + 2);
    r.ttl = ip[8];
    r.protocol = ip[9];
    std::memcpy(r.src_ip.bytes.data(), ip + 12, 4);
    std::memcpy(r.dst_ip.bytes.data(), ip + 16, 4);
    const std::size_t l4_total = total > ihl ? total - ihl : 0;
    decode_transport(r, ip + ihl, avail - ihl, l4_total);
  } else if (ether == kEtherIpv6) {
    if (avail < 40 || (ip[0] >> 4) != 6) return std::nullopt;
    r.src_ip.v6 = r.dst_ip.v6 = true;
    std::memcpy(r.src_ip.bytes.data(), ip + 8, 16);
    std::memcpy(r.dst_ip.bytes.data(), ip + 24, 16);
    r.ttl = ip[7];
    std::size_t remaining = be16(ip + 4);
    std::uint8_t next = ip[6];
    std::size_t hdr = 40;
    while (is_ipv6_extension(next) && avail >= hdr + 8) {
      const std::size_t ext_len = next == 44 ? 8 : (static_cast<std::size_t>(ip[hdr + 1]) + 1) * 8;
      next = ip[hdr];
      hdr += ext_len;
      remaining = remaining > ext_len ? remaining - ext_len : 0;
    }
    if (avail < hdr) return std::nullopt;
    r.protocol = next;
    decode_transport(r, ip + hdr, avail - hdr, remaining);
  } else {
    return std::nullopt;
  }
  r.payload_size = std::min(r.payload_size, r.packet_size);
  return r;
}

CaptureReader::CaptureReader(std::istream& in, std::string source_tag) : in_(in), tag_(std::move(source_tag)) {
  std::array<std::uint8_t, 24> gh{};
  in_.read(reinterpret_cast<char*>(gh.data()), gh.size());
  if (in_.gcount() != static_cast<std::streamsize>(gh.size()))
    throw CaptureError(CaptureError::Kind::TruncatedHeader,
                       "truncated capture header: got " + std::to_string(in_.gcount()) + " of 24 bytes");
  offset_ = gh.size();

  const std::uint32_t le = std::uint32_t{gh[0]} | (std::uint32_t{gh[1]} << 8) | (std::uint32_t{gh[2]} << 16) |
                           (std::uint32_t{gh[3]} << 24);
  // Interpret the magic as little-endian; the "swapped" variants mean the file is big-endian.
  switch (le) {
    case pcap_magic::kMicro:
    case pcap_magic::kNano:
    case pcap_magic::kMicroSwapped:
    case pcap_magic::kNanoSwapped:
      header_.magic = le;
      break;
    default:
      throw CaptureError(CaptureError::Kind::BadMagic, "unrecognized capture magic 0x" + [&] {
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", le);
        return std::string(buf);
      }());
  }
  header_.snaplen = u32(gh.data() + 16);
  header_.link_type = u32(gh.data() + 20);
  if (header_.link_type != kLinkTypeEthernet)
    throw CaptureError(CaptureError::Kind::UnsupportedLinkType,
                       "unsupported link type " + std::to_string(header_.link_type) + " (only Ethernet = 1)");
}

std::uint32_t CaptureReader::u32(const std::uint8_t* p) const {
  if (header_.swapped()) return be32(p);
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::optional<PacketRecord> CaptureReader::next() {
  while (!done_) {
    std::array<std::uint8_t, 16> rh{};
    in_.read(reinterpret_cast<char*>(rh.data()), rh.size());
    const auto got = in_.gcount();
    if (got == 0) {
      done_ = true;
      break;
    }
    if (got != static_cast<std::streamsize>(rh.size())) {
      truncated_at_ = offset_;
      done_ = true;
      break;
    }
    const std::uint32_t sec = u32(rh.data());
    const std::uint32_t frac = u32(rh.data() + 4);
    const std::uint32_t incl = u32(rh.data() + 8);
    const std::uint32_t orig = u32(rh.data() + 12);
    frame_.resize(incl);
    in_.read(frame_.data(), incl);
    if (in_.gcount() != static_cast<std::streamsize>(incl)) {
      truncated_at_ = offset_;
      done_ = true;
      break;
    }
    offset_ += rh.size() + incl;
    ++frames_;

    auto rec = decode_ethernet_frame(reinterpret_cast<const std::uint8_t*>(frame_.data()), incl, orig);
    if (!rec) {
      ++skipped_;
      continue;
    }
    rec->timestamp = static_cast<double>(sec) + static_cast<double>(frac) * (header_.nanosecond() ? 1e-9 : 1e-6);
    rec->source_tag = tag_;
    rec->ordinal = yielded_++;
    return rec;
  }
  return std::nullopt;
}

}  // namespace flowguard
