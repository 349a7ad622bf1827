#pragma once

// Byte-level capture construction for parser tests, independent of the
// library's writer.

#include <cstdint>
#include <string>
#include <vector>

namespace pcapbytes {

struct Buffer {
  std::string bytes;
  bool big_endian = false;

  void u8(std::uint8_t v) { bytes.push_back(static_cast<char>(v)); }
  void be16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void be32(std::uint32_t v) {
    be16(static_cast<std::uint16_t>(v >> 16));
    be16(static_cast<std::uint16_t>(v));
  }
  // File-order 32-bit field.
  void f32(std::uint32_t v) {
    if (big_endian) return be32(v);
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f16(std::uint16_t v) {
    if (big_endian) return be16(v);
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void raw(const std::string& s) { bytes += s; }
};

inline std::string global_header(std::uint32_t magic, bool big_endian, std::uint32_t link = 1) {
  Buffer b{{}, big_endian};
  b.f32(magic);
  b.f16(2);
  b.f16(4);
  b.f32(0);
  b.f32(0);
  b.f32(65535);
  b.f32(link);
  return b.bytes;
}

inline std::string record(const std::string& frame, std::uint32_t sec, std::uint32_t frac, bool big_endian,
                          std::uint32_t orig_len = 0) {
  Buffer b{{}, big_endian};
  b.f32(sec);
  b.f32(frac);
  b.f32(static_cast<std::uint32_t>(frame.size()));
  b.f32(orig_len ? orig_len : static_cast<std::uint32_t>(frame.size()));
  b.raw(frame);
  return b.bytes;
}

inline std::string ethernet(std::uint16_t ethertype, const std::string& l3, std::vector<std::uint16_t> vlans = {}) {
  Buffer b;
  for (int i = 0; i < 12; ++i) b.u8(static_cast<std::uint8_t>(i));
  for (auto tag : vlans) {
    b.be16(0x8100);
    b.be16(tag);
  }
  b.be16(ethertype);
  b.raw(l3);
  return b.bytes;
}

inline std::string ipv4(std::uint8_t proto, std::uint32_t src, std::uint32_t dst, std::uint8_t ttl,
                        const std::string& l4) {
  Buffer b;
  b.u8(0x45);
  b.u8(0);
  b.be16(static_cast<std::uint16_t>(20 + l4.size()));
  b.be16(1);
  b.be16(0);
  b.u8(ttl);
  b.u8(proto);
  b.be16(0);
  b.be32(src);
  b.be32(dst);
  b.raw(l4);
  return b.bytes;
}

inline std::string ipv6(std::uint8_t next, std::uint8_t hop_limit, const std::string& l4, std::uint8_t src_last = 1,
                        std::uint8_t dst_last = 2, const std::string& extension = {}) {
  Buffer b;
  b.be32(0x60000000u);
  b.be16(static_cast<std::uint16_t>(extension.size() + l4.size()));
  b.u8(next);
  b.u8(hop_limit);
  for (int i = 0; i < 15; ++i) b.u8(i == 0 ? 0xfd : 0);
  b.u8(src_last);
  for (int i = 0; i < 15; ++i) b.u8(i == 0 ? 0xfd : 0);
  b.u8(dst_last);
  b.raw(extension);
  b.raw(l4);
  return b.bytes;
}

inline std::string tcp(std::uint16_t sport, std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                       std::uint8_t flags, std::size_t payload = 0) {
  Buffer b;
  b.be16(sport);
  b.be16(dport);
  b.be32(seq);
  b.be32(ack);
  b.u8(0x50);
  b.u8(flags);
  b.be16(65535);
  b.be16(0);
  b.be16(0);
  b.raw(std::string(payload, 'x'));
  return b.bytes;
}

inline std::string udp(std::uint16_t sport, std::uint16_t dport, std::size_t payload) {
  Buffer b;
  b.be16(sport);
  b.be16(dport);
  b.be16(static_cast<std::uint16_t>(8 + payload));
  b.be16(0);
  b.raw(std::string(payload, 'u'));
  return b.bytes;
}

inline std::string icmp_echo(std::size_t payload) {
  Buffer b;
  b.u8(8);
  b.u8(0);
  b.be16(0);
  b.be32(0x00010001);
  b.raw(std::string(payload, 'i'));
  return b.bytes;
}

namespace tcpflag {
inline constexpr std::uint8_t kFin = 0x01, kSyn = 0x02, kRst = 0x04, kPsh = 0x08, kAck = 0x10, kUrg = 0x20;
}

}  // namespace pcapbytes
