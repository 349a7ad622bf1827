#include "flowguard/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace flowguard {

namespace {

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v >> 8));
  b.push_back(static_cast<char>(v));
}
void put32(std::string& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v >> 16));
  put16(b, static_cast<std::uint16_t>(v));
}
void put32le(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 24)};
  out.write(bytes, 4);
}

std::uint16_t ipv4_checksum(const std::string& b, std::size_t off) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < 20; i += 2)
    sum += (static_cast<std::uint8_t>(b[off + i]) << 8) | static_cast<std::uint8_t>(b[off + i + 1]);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

std::size_t transport_header_len(std::uint8_t proto) {
  switch (proto) {
    case ipproto::kTcp:
      return 20;
    case ipproto::kUdp:
    case ipproto::kIcmp:
    case ipproto::kIcmpV6:
      return 8;
    default:
      return 0;
  }
}

// Ethernet + IP + transport headers for one record.
std::string encode_headers(const PacketRecord& p) {
  const bool v6 = p.src_ip.v6;
  const std::size_t l4 = transport_header_len(p.protocol);
  std::string b;
  b.reserve(14 + 40 + l4);
  b.append(12, '\0');
  put16(b, v6 ? 0x86dd : 0x0800);

  const std::size_t ip_off = b.size();
  if (v6) {
    put32(b, 0x60000000u);
    put16(b, static_cast<std::uint16_t>(l4 + p.payload_size));
    b.push_back(static_cast<char>(p.protocol));
    b.push_back(static_cast<char>(p.ttl));
    b.append(reinterpret_cast<const char*>(p.src_ip.bytes.data()), 16);
    b.append(reinterpret_cast<const char*>(p.dst_ip.bytes.data()), 16);
  } else {
    b.push_back(0x45);
    b.push_back(0);
    put16(b, static_cast<std::uint16_t>(20 + l4 + p.payload_size));
    put32(b, 0);  // id, flags, fragment offset
    b.push_back(static_cast<char>(p.ttl));
    b.push_back(static_cast<char>(p.protocol));
    put16(b, 0);
    b.append(reinterpret_cast<const char*>(p.src_ip.bytes.data()), 4);
    b.append(reinterpret_cast<const char*>(p.dst_ip.bytes.data()), 4);
    const auto sum = ipv4_checksum(b, ip_off);
    b[ip_off + 10] = static_cast<char>(sum >> 8);
    b[ip_off + 11] = static_cast<char>(sum);
  }

  switch (p.protocol) {
    case ipproto::kTcp: {
      put16(b, p.src_port);
      put16(b, p.dst_port);
      put32(b, p.sequence_number);
      put32(b, p.acknowledgment_number);
      b.push_back(0x50);
      const std::uint8_t flags = static_cast<std::uint8_t>(p.fin | (p.syn << 1) | (p.rst << 2) | (p.psh << 3) |
                                                           (p.ack << 4) | (p.urg << 5));
      b.push_back(static_cast<char>(flags));
      put16(b, 65535);
      put32(b, 0);  // checksum, urgent pointer
      break;
    }
    case ipproto::kUdp:
      put16(b, p.src_port);
      put16(b, p.dst_port);
      put16(b, static_cast<std::uint16_t>(8 + p.payload_size));
      put16(b, 0);
      break;
    case ipproto::kIcmp:
    case ipproto::kIcmpV6:
      b.push_back(8);
      b.append(7, '\0');
      break;
    default:
      break;
  }
  return b;
}

}  // namespace

FlowIndex index_flows(std::span<const PacketRecord> capture) {
  FlowIndex index;
  index.flow_of_packet.resize(capture.size());
  std::unordered_map<FiveTuple, std::size_t, FiveTupleHash> slot;
  for (std::size_t i = 0; i < capture.size(); ++i) {
    const auto key = five_tuple_of(capture[i]);
    auto [it, inserted] = slot.try_emplace(key, index.flows.size());
    if (inserted) index.flows.push_back({key, {}});
    index.flows[it->second].packets.push_back(i);
    index.flow_of_packet[i] = it->second;
  }
  return index;
}

std::size_t pick_injection(std::span<const PacketRecord> capture, const FlowIndex& index, std::mt19937_64& rng) {
  if (capture.empty()) throw std::invalid_argument("pick_injection: empty capture");
  std::uniform_int_distribution<std::size_t> pos(0, capture.size() - 1);
  return index.first_packet_of(pos(rng));
}

std::vector<std::size_t> injected_packets(const FlowIndex& index, std::size_t flow_start, std::size_t flows) {
  std::vector<std::size_t> out;
  const std::size_t first_flow = index.flow_of_packet.at(flow_start);
  for (std::size_t f = first_flow; f < index.flows.size() && f < first_flow + flows; ++f)
    out.insert(out.end(), index.flows[f].packets.begin(), index.flows[f].packets.end());
  std::sort(out.begin(), out.end());
  return out;
}

LabeledStream merge(const LabeledStream& base, const MixPlan& plan,
                    const std::map<std::string, LabeledStream>& captures) {
  LabeledStream out = base;
  const double base_start = base.empty() ? 0.0 : base.front().timestamp;

  for (std::size_t i = 0; i < plan.injections.size(); ++i) {
    const auto& inj = plan.injections[i];
    const std::string name = "injection " + std::to_string(i) + " (" + inj.capture + ")";
    auto it = captures.find(inj.capture);
    if (it == captures.end()) throw MixError(name + ": unknown capture");
    if (inj.offset < 0.0 || !std::isfinite(inj.offset)) throw MixError(name + ": offset must be >= 0");
    const auto& src = it->second;
    const auto index = index_flows(src);
    if (!index.is_flow_start(inj.flow_start))
      throw MixError(name + ": packet " + std::to_string(inj.flow_start) + " is not a flow first-packet");

    const double shift = base_start + inj.offset - src[inj.flow_start].timestamp;
    for (auto pos : injected_packets(index, inj.flow_start, std::max<std::size_t>(plan.flows_per_injection, 1))) {
      PacketRecord r = src[pos];
      r.timestamp += shift;
      out.push_back(std::move(r));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const PacketRecord& a, const PacketRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.source_tag != b.source_tag) return a.source_tag < b.source_tag;
    return a.ordinal < b.ordinal;
  });
  return out;
}

// ---------------------------------------------------------------------------

void write_pcap(std::ostream& out, std::span<const PacketRecord> packets, const WriterOptions& opts) {
  put32le(out, pcap_magic::kNano);
  const char version[4] = {2, 0, 4, 0};
  out.write(version, 4);
  put32le(out, 0);  // thiszone
  put32le(out, 0);  // sigfigs
  put32le(out, 262144);
  put32le(out, kLinkTypeEthernet);

  for (const auto& p : packets) {
    if (!(p.timestamp >= 0.0)) throw std::invalid_argument("write_pcap: negative timestamp");
    std::string frame = encode_headers(p);
    const std::size_t wire = frame.size() + p.payload_size;
    if (p.packet_size < frame.size())
      throw std::invalid_argument("write_pcap: packet_size " + std::to_string(p.packet_size) +
                                  " smaller than its headers (" + std::to_string(frame.size()) + ")");
    if (opts.include_payload) frame.append(std::min<std::size_t>(wire, p.packet_size) - frame.size(), '\0');

    double whole = std::floor(p.timestamp);
    auto nsec = std::llround((p.timestamp - whole) * 1e9);
    if (nsec >= 1000000000) {
      whole += 1.0;
      nsec -= 1000000000;
    }
    put32le(out, static_cast<std::uint32_t>(whole));
    put32le(out, static_cast<std::uint32_t>(nsec));
    put32le(out, static_cast<std::uint32_t>(frame.size()));
    put32le(out, p.packet_size);
    out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
  }
}

void write_sidecar(std::ostream& out, std::span<const PacketRecord> packets) {
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const auto& p = packets[i];
    if (!p.label) throw std::invalid_argument("write_sidecar: packet " + std::to_string(i) + " has no label");
    out << i << '\t' << to_string(*p.label) << '\t' << p.source_tag << '\n';
  }
}

std::vector<SidecarEntry> read_sidecar(std::istream& in) {
  std::vector<SidecarEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::runtime_error("sidecar line " + std::to_string(lineno) + ": expected 3 fields");
    const auto ordinal = std::stoull(line.substr(0, t1));
    if (ordinal != entries.size())
      throw std::runtime_error("sidecar line " + std::to_string(lineno) + ": ordinal " + std::to_string(ordinal) +
                               " out of sequence");
    entries.push_back({parse_traffic_class(line.substr(t1 + 1, t2 - t1 - 1)), line.substr(t2 + 1)});
  }
  return entries;
}

std::filesystem::path sidecar_path_for(const std::filesystem::path& capture) {
  auto p = capture;
  p += ".labels";
  return p;
}

void write_capture(const LabeledStream& stream, const std::filesystem::path& path, const WriterOptions& opts) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_pcap(out, stream, opts);
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  const auto side = sidecar_path_for(path);
  std::ofstream out(side);
  if (!out) throw std::runtime_error("cannot open " + side.string() + " for writing");
  write_sidecar(out, stream);
  if (!out) throw std::runtime_error("write failed: " + side.string());
}

LabeledStream read_labeled_capture(const std::filesystem::path& capture, std::optional<TrafficClass> default_label,
                                   const std::filesystem::path& sidecar) {
  std::ifstream in(capture, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + capture.string());
  CaptureReader reader(in, capture.stem().string());
  LabeledStream out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  if (reader.truncated_at())
    throw std::runtime_error(capture.string() + ": truncated packet record at byte offset " +
                             std::to_string(*reader.truncated_at()));

  const auto side = sidecar.empty() ? sidecar_path_for(capture) : sidecar;
  if (std::filesystem::exists(side)) {
    std::ifstream sin(side);
    const auto entries = read_sidecar(sin);
    if (entries.size() != out.size())
      throw std::runtime_error(side.string() + ": " + std::to_string(entries.size()) + " labels for " +
                               std::to_string(out.size()) + " packets");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].label = entries[i].label;
      out[i].source_tag = entries[i].source_tag;
    }
  } else if (!sidecar.empty()) {
    throw std::runtime_error("sidecar not found: " + side.string());
  } else if (default_label) {
    for (auto& r : out) r.label = default_label;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

MixDocument parse_mix_document(std::istream& in, const std::filesystem::path& base_dir) {
  MixDocument doc;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("mix plan line " + std::to_string(lineno) + ": " + msg);
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "seed") {
      doc.plan.seed = std::stoull(value);
    } else if (key == "flows_per_injection") {
      doc.plan.flows_per_injection = std::stoull(value);
    } else if (key == "base") {
      doc.plan.base = value;
    } else if (key == "inject") {
      std::istringstream fields(value);
      std::string capture, start;
      double offset = 0;
      if (!(fields >> capture >> start >> offset)) fail("inject = <capture> <flow-start|auto> <offset>");
      Injection inj{capture, 0, offset};
      if (start == "auto") {
        doc.auto_injections.push_back(doc.plan.injections.size());
      } else {
        inj.flow_start = std::stoull(start);
      }
      doc.plan.injections.push_back(inj);
    } else if (key.rfind("capture.", 0) == 0) {
      const std::string rest = key.substr(8);
      const auto dot = rest.find('.');
      auto& src = doc.sources[rest.substr(0, dot)];
      if (dot == std::string::npos) {
        src.path = resolve(value);
      } else if (rest.substr(dot + 1) == "label") {
        src.label = parse_traffic_class(value);
      } else if (rest.substr(dot + 1) == "sidecar") {
        src.sidecar = resolve(value);
      } else {
        fail("unknown capture attribute '" + rest.substr(dot + 1) + "'");
      }
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (doc.plan.base.empty()) throw std::runtime_error("mix plan: missing base");
  for (const auto& [id, src] : doc.sources)
    if (src.path.empty()) throw std::runtime_error("mix plan: capture '" + id + "' has no path");
  return doc;
}

void write_mix_document(std::ostream& out, const MixDocument& doc) {
  out << "seed = " << doc.plan.seed << '\n';
  out << "flows_per_injection = " << doc.plan.flows_per_injection << '\n';
  out << "base = " << doc.plan.base << '\n';
  for (const auto& [id, src] : doc.sources) {
    out << "capture." << id << " = " << src.path.string() << '\n';
    if (src.label) out << "capture." << id << ".label = " << to_string(*src.label) << '\n';
    if (!src.sidecar.empty()) out << "capture." << id << ".sidecar = " << src.sidecar.string() << '\n';
  }
  std::ostringstream offset;
  offset.precision(17);
  for (std::size_t i = 0; i < doc.plan.injections.size(); ++i) {
    const auto& inj = doc.plan.injections[i];
    const bool is_auto = std::find(doc.auto_injections.begin(), doc.auto_injections.end(), i) != doc.auto_injections.end();
    offset.str({});
    offset << inj.offset;
    out << "inject = " << inj.capture << ' ' << (is_auto ? std::string("auto") : std::to_string(inj.flow_start)) << ' '
        << offset.str() << '\n';
  }
}

LabeledStream run_mix(MixDocument& doc) {
  std::map<std::string, LabeledStream> streams;
  for (const auto& [id, src] : doc.sources) {
    auto stream = read_labeled_capture(src.path, src.label, src.sidecar);
    const bool has_sidecar = !src.sidecar.empty() || std::filesystem::exists(sidecar_path_for(src.path));
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (!stream[i].label) throw std::runtime_error("capture '" + id + "' has no labels (set .label or .sidecar)");
      if (!has_sidecar) stream[i].source_tag = id;
    }
    streams.emplace(id, std::move(stream));
  }
  auto base = streams.find(doc.plan.base);
  if (base == streams.end()) throw std::runtime_error("mix plan: base '" + doc.plan.base + "' is not a declared capture");

  std::mt19937_64 rng(doc.plan.seed);
  for (auto i : doc.auto_injections) {
    auto& inj = doc.plan.injections[i];
    auto it = streams.find(inj.capture);
    if (it == streams.end()) throw MixError("injection " + std::to_string(i) + ": unknown capture '" + inj.capture + "'");
    inj.flow_start = pick_injection(it->second, index_flows(it->second), rng);
  }
  doc.auto_injections.clear();
  return merge(base->second, doc.plan, streams);
}

}  // namespace flowguard
