#include <doctest.h>

#include <sstream>

#include "flowguard/capture.hpp"
#include "flowguard/mixer.hpp"
#include "support/pcap_bytes.hpp"
#include "support/random_packets.hpp"

using namespace flowguard;
namespace pb = pcapbytes;
using namespace pcapbytes::tcpflag;

namespace {

std::vector<PacketRecord> read_all(const std::string& bytes, CaptureReader** keep = nullptr) {
  std::istringstream in(bytes);
  CaptureReader reader(in);
  std::vector<PacketRecord> out;
  while (auto r = reader.next()) out.push_back(*r);
  (void)keep;
  return out;
}

}  // namespace

TEST_CASE("traffic class names round trip") {
  for (auto c : kAllClasses) CHECK(parse_traffic_class(to_string(c)) == c);
  CHECK_THROWS_AS(parse_traffic_class("benign"), std::invalid_argument);
  CHECK_FALSE(try_parse_traffic_class("IoT-Benign").has_value());
}

TEST_CASE("single UDP packet in a microsecond little-endian file") {
  const auto frame = pb::ethernet(0x0800, pb::ipv4(17, 0x0a000001, 0x0a000002, 64, pb::udp(5000, 53, 100)));
  const auto file = pb::global_header(0xa1b2c3d4, false) + pb::record(frame, 10, 250000, false);
  const auto recs = read_all(file);
  REQUIRE(recs.size() == 1);
  const auto& p = recs[0];
  CHECK(p.udp_flag == 1);
  CHECK(p.tcp_flag == 0);
  CHECK(p.syn + p.ack + p.fin + p.psh + p.urg + p.rst == 0);
  CHECK(p.timestamp == doctest::Approx(10.25).epsilon(1e-12));
  CHECK(p.ttl == 64);
  CHECK(p.src_port == 5000);
  CHECK(p.dst_port == 53);
  CHECK(p.payload_size == 100);
  CHECK(p.packet_size == frame.size());
  CHECK(p.src_ip.to_string() == "10.0.0.1");
  CHECK(is_well_formed(p));
}

TEST_CASE("magic a1 b2 c3 d4 in file order means a big-endian file") {
  const auto frame = pb::ethernet(0x0800, pb::ipv4(17, 0x0a000001, 0x0a000002, 64, pb::udp(1, 2, 10)));
  const auto file = pb::global_header(0xa1b2c3d4, true) + pb::record(frame, 7, 500000, true);
  REQUIRE(static_cast<unsigned char>(file[0]) == 0xa1);
  std::istringstream in(file);
  CaptureReader reader(in);
  CHECK(reader.header().swapped());
  const auto r = reader.next();
  REQUIRE(r);
  CHECK(r->udp_flag == 1);
  CHECK(r->timestamp == doctest::Approx(7.5));
}

TEST_CASE("nanosecond magic in both byte orders") {
  const auto frame = pb::ethernet(0x0800, pb::ipv4(17, 1, 2, 9, pb::udp(1, 2, 0)));
  for (bool big : {false, true}) {
    const auto file = pb::global_header(0xa1b23c4d, big) + pb::record(frame, 3, 123456789, big);
    const auto recs = read_all(file);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].timestamp == 3.0 + 123456789 * 1e-9);
  }
}

TEST_CASE("three crafted TCP packets decode the flag bytes") {
  const std::uint8_t flags[3] = {kSyn, kSyn | kAck, kRst | kAck};
  std::string file = pb::global_header(0xa1b2c3d4, false);
  for (int i = 0; i < 3; ++i)
    file += pb::record(pb::ethernet(0x0800, pb::ipv4(6, 0x0a000001, 0x0a000002, 128,
                                                      pb::tcp(40000, 80, 1000u + i, 77u, flags[i], 5 * i))),
                       1, static_cast<std::uint32_t>(i), false);
  const auto recs = read_all(file);
  REQUIRE(recs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    // Hand decode: byte 13 of the TCP header carries the flags.
    CHECK(recs[i].syn == ((flags[i] & 0x02) != 0));
    CHECK(recs[i].ack == ((flags[i] & 0x10) != 0));
    CHECK(recs[i].rst == ((flags[i] & 0x04) != 0));
    CHECK(recs[i].fin == 0);
    CHECK(recs[i].tcp_flag == 1);
    CHECK(recs[i].sequence_number == 1000u + static_cast<unsigned>(i));
    CHECK(recs[i].acknowledgment_number == 77u);
    CHECK(recs[i].payload_size == static_cast<std::uint32_t>(5 * i));
    CHECK(recs[i].ordinal == static_cast<std::uint64_t>(i));
  }
}

TEST_CASE("empty input is a fatal truncated-header error") {
  std::istringstream in("");
  try {
    CaptureReader reader(in);
    FAIL("expected CaptureError");
  } catch (const CaptureError& e) {
    CHECK(e.kind() == CaptureError::Kind::TruncatedHeader);
  }
}

TEST_CASE("bad magic and unsupported link type are fatal") {
  std::istringstream bad(std::string(24, '\x11'));
  CHECK_THROWS_AS(CaptureReader{bad}, CaptureError);
  std::istringstream raw_ip(pb::global_header(0xa1b2c3d4, false, 101));
  try {
    CaptureReader reader(raw_ip);
    FAIL("expected CaptureError");
  } catch (const CaptureError& e) {
    CHECK(e.kind() == CaptureError::Kind::UnsupportedLinkType);
    CHECK(std::string(e.what()).find("101") != std::string::npos);
  }
}

TEST_CASE("truncated record stops the stream and reports its offset") {
  const auto frame = pb::ethernet(0x0800, pb::ipv4(17, 1, 2, 9, pb::udp(1, 2, 4)));
  const auto one = pb::record(frame, 1, 0, false);
  std::string file = pb::global_header(0xa1b2c3d4, false) + one + one.substr(0, one.size() - 3);
  std::istringstream in(file);
  CaptureReader reader(in);
  CHECK(reader.next().has_value());
  CHECK_FALSE(reader.next().has_value());
  REQUIRE(reader.truncated_at());
  CHECK(*reader.truncated_at() == 24 + one.size());
}

TEST_CASE("non-IP frames are skipped and counted") {
  const auto ip = pb::ethernet(0x0800, pb::ipv4(17, 1, 2, 9, pb::udp(1, 2, 4)));
  const auto arp = pb::ethernet(0x0806, std::string(28, '\0'));
  std::string file = pb::global_header(0xa1b2c3d4, false);
  for (const auto* f : {&ip, &arp, &ip, &arp, &arp}) file += pb::record(*f, 1, 0, false);
  std::istringstream in(file);
  CaptureReader reader(in);
  std::size_t n = 0;
  while (reader.next()) ++n;
  CHECK(n == 2);
  CHECK(reader.frames_read() == 5);
  CHECK(reader.frames_skipped() + reader.packets_yielded() == reader.frames_read());
}

TEST_CASE("VLAN tags, IPv6 extension headers and ICMP") {
  std::string file = pb::global_header(0xa1b2c3d4, false);
  file += pb::record(pb::ethernet(0x0800, pb::ipv4(6, 0x0a000001, 0x0a000009, 50, pb::tcp(1, 443, 5, 0, kSyn)),
                                  {100, 200}),
                     1, 0, false);
  std::string hop_by_hop(8, '\0');
  hop_by_hop[0] = 17;  // next header: UDP
  file += pb::record(pb::ethernet(0x86dd, pb::ipv6(0, 33, pb::udp(7, 8, 12), 5, 6, hop_by_hop)), 2, 0, false);
  file += pb::record(pb::ethernet(0x0800, pb::ipv4(1, 0x0a000001, 0x0a000002, 64, pb::icmp_echo(56))), 3, 0, false);
  const auto recs = read_all(file);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].dst_port == 443);
  CHECK(recs[0].syn == 1);
  CHECK(recs[0].dst_ip.last_octet() == 9);
  CHECK(recs[1].src_ip.v6);
  CHECK(recs[1].protocol == 17);
  CHECK(recs[1].udp_flag == 1);
  CHECK(recs[1].payload_size == 12);
  CHECK(recs[1].ttl == 33);
  CHECK(recs[1].src_ip.last_octet() == 5);
  CHECK(recs[2].protocol == 1);
  CHECK(recs[2].tcp_flag + recs[2].udp_flag == 0);
  const auto ft = five_tuple_of(recs[2]);
  CHECK(ft.src_port == 0);
  CHECK(ft.dst_port == 0);
}

TEST_CASE("five-tuple projection is direction sensitive") {
  PacketRecord p;
  p.src_ip = IpAddress::parse("10.0.0.1");
  p.dst_ip = IpAddress::parse("10.0.0.2");
  p.src_port = 5000;
  p.dst_port = 80;
  p.protocol = 6;
  p.tcp_flag = 1;
  const auto t = five_tuple_of(p);
  CHECK(t == FiveTuple{IpAddress::parse("10.0.0.1"), IpAddress::parse("10.0.0.2"), 5000, 80, 6});
  PacketRecord r = p;
  std::swap(r.src_ip, r.dst_ip);
  std::swap(r.src_port, r.dst_port);
  CHECK_FALSE(five_tuple_of(r) == t);
  CHECK(FiveTupleHash{}(t) == FiveTupleHash{}(five_tuple_of(p)));
}

TEST_CASE("general features copy header fields in documented order") {
  PacketRecord u;
  u.src_ip = IpAddress::parse("192.168.1.51");
  u.dst_ip = IpAddress::parse("10.0.0.255");
  u.protocol = 17;
  u.udp_flag = 1;
  u.ttl = 64;
  u.payload_size = 100;
  u.packet_size = 142;
  u.timestamp = 12.5;
  const auto g = general_features(u);
  const auto& names = general_feature_names();
  auto at = [&](std::string_view n) { return g[std::find(names.begin(), names.end(), n) - names.begin()]; };
  CHECK(names.size() == 19);
  CHECK(names[0] == "timestamp");
  CHECK(at("timestamp") == 12.5);
  CHECK(at("tcp") == 0);
  CHECK(at("udp") == 1);
  CHECK(at("ttl") == 64);
  CHECK(at("payload_size") == 100);
  CHECK(at("src_addr") == doctest::Approx(51.0 / 255.0));
  CHECK(at("dst_addr") == 1.0);
  for (auto f : {"ack", "syn", "fin", "psh", "urg", "rst", "seq_number", "ack_number"}) CHECK(at(f) == 0);
  CHECK(general_features(u) == g);

  PacketRecord s = u;
  s.protocol = 6;
  s.udp_flag = 0;
  s.tcp_flag = 1;
  s.syn = 1;
  const auto gs = general_features(s);
  CHECK(gs[std::find(names.begin(), names.end(), "syn") - names.begin()] == 1);
  CHECK(gs[std::find(names.begin(), names.end(), "ack") - names.begin()] == 0);

  const auto dropped = general_features(u, AddressEncoding::Drop);
  CHECK(dropped[1] == 0);
  CHECK(dropped[2] == 0);
}

TEST_CASE("non-TCP sequence and acknowledgment numbers encode as zero") {
  PacketRecord u;
  u.protocol = 17;
  u.udp_flag = 1;
  u.sequence_number = 99;
  u.acknowledgment_number = 5;
  const auto g = general_features(u);
  const auto& names = general_feature_names();
  CHECK(g[std::find(names.begin(), names.end(), "seq_number") - names.begin()] == 0);
  CHECK(g[std::find(names.begin(), names.end(), "ack_number") - names.begin()] == 0);
}

TEST_CASE("writer output re-parses to field-identical records") {
  const auto pkts = testgen::random_packets(500, 11);
  std::ostringstream out;
  write_pcap(out, pkts);
  const auto back = read_all(out.str());
  REQUIRE(back.size() == pkts.size());
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    INFO("packet " << i);
    CHECK(same_wire_fields(back[i], pkts[i]));
  }

  std::ostringstream with_payload;
  write_pcap(with_payload, pkts, {true});
  const auto back2 = read_all(with_payload.str());
  REQUIRE(back2.size() == pkts.size());
  for (std::size_t i = 0; i < pkts.size(); ++i) CHECK(same_wire_fields(back2[i], pkts[i]));
}
