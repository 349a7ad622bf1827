#include "flowguard/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace flowguard {

namespace {

using Rng = std::mt19937_64;

template <typename T>
T uniform_int(Rng& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Endpoints {
  IpAddress src, dst;
  std::uint16_t sport = 0, dport = 0;
  std::uint8_t protocol = ipproto::kTcp;
  std::uint8_t ttl = 64;
};

IpAddress host(bool v6, std::uint8_t net, std::uint8_t sub, std::uint8_t last) {
  if (!v6) return IpAddress::v4((std::uint32_t{net} << 24) | (std::uint32_t{sub} << 8) | last);
  IpAddress a;
  a.v6 = true;
  a.bytes[0] = 0xfd;
  a.bytes[1] = net;
  a.bytes[14] = sub;
  a.bytes[15] = last;
  return a;
}

Endpoints endpoints_for(TrafficClass c, bool v6, Rng& rng) {
  Endpoints e;
  const auto eph = uniform_int<std::uint16_t>(rng, 32768, 60999);
  switch (c) {
    case TrafficClass::IotBenign:
      e.src = host(v6, 10, 1, uniform_int<std::uint8_t>(rng, 10, 59));
      e.dst = host(v6, 10, 0, 1);
      if (uniform_int(rng, 0, 1)) {
        e.protocol = ipproto::kTcp;
        e.dport = 1883;
      } else {
        e.protocol = ipproto::kUdp;
        e.dport = 5683;
      }
      e.sport = eph;
      e.ttl = 64;
      break;
    case TrafficClass::IotMalicious:
      e.src = host(v6, 10, 1, uniform_int<std::uint8_t>(rng, 60, 109));
      e.dst = host(v6, 10, 0, uniform_int<std::uint8_t>(rng, 200, 209));
      e.protocol = ipproto::kTcp;
      e.dport = uniform_int(rng, 0, 1) ? 23 : 80;
      e.sport = uniform_int<std::uint16_t>(rng, 1024, 65535);
      e.ttl = 64;
      break;
    case TrafficClass::TradBenign:
      e.src = host(v6, 192, 1, uniform_int<std::uint8_t>(rng, 10, 59));
      e.dst = host(v6, 172, 0, uniform_int<std::uint8_t>(rng, 1, 20));
      e.protocol = ipproto::kTcp;
      e.dport = uniform_int(rng, 0, 3) ? 443 : 80;
      e.sport = eph;
      e.ttl = 128;
      break;
    case TrafficClass::TradMalicious:
      e.src = host(v6, 192, 1, uniform_int<std::uint8_t>(rng, 200, 239));
      e.dst = host(v6, 172, 0, uniform_int<std::uint8_t>(rng, 100, 120));
      if (uniform_int(rng, 0, 1)) {
        e.protocol = ipproto::kTcp;
        e.dport = uniform_int<std::uint16_t>(rng, 1, 1024);
      } else {
        e.protocol = ipproto::kUdp;
        e.dport = 53;
      }
      e.sport = uniform_int<std::uint16_t>(rng, 40000, 40100);
      e.ttl = 255;
      break;
  }
  return e;
}

struct Draft {
  std::int64_t ns;
  std::uint64_t flow;
  std::uint32_t index;
  PacketRecord rec;
};

std::uint32_t header_bytes(const Endpoints& e) {
  const std::uint32_t ip = e.src.v6 ? 40 : 20;
  const std::uint32_t l4 = e.protocol == ipproto::kTcp ? 20 : 8;
  return 14 + ip + l4;
}

void set_flags(PacketRecord& r, bool syn, bool ack, bool fin, bool psh, bool rst) {
  r.syn = syn;
  r.ack = ack;
  r.fin = fin;
  r.psh = psh;
  r.rst = rst;
}

// Appends one flow's packets; `t0` in nanoseconds relative to the start.
void emit_flow(TrafficClass cls, TrafficClass shape, std::int64_t t0, std::uint64_t flow, bool v6, Rng& rng,
               std::vector<Draft>& out) {
  Endpoints e = endpoints_for(shape, v6, rng);
  int length = 1;
  double gap_lo = 0.001, gap_hi = 0.002;
  std::uint32_t pay_lo = 0, pay_hi = 0;
  switch (cls) {
    case TrafficClass::IotBenign:
      length = uniform_int(rng, 6, 20);
      gap_lo = 0.05, gap_hi = 0.2;
      pay_lo = 10, pay_hi = 90;
      break;
    case TrafficClass::IotMalicious:
      length = uniform_int(rng, 1, 2);
      gap_lo = 0.0005, gap_hi = 0.002;
      break;
    case TrafficClass::TradBenign:
      length = uniform_int(rng, 8, 40);
      gap_lo = 0.005, gap_hi = 0.05;
      pay_lo = 60, pay_hi = 1400;
      break;
    case TrafficClass::TradMalicious:
      length = e.protocol == ipproto::kTcp ? 1 : uniform_int(rng, 3, 12);
      gap_lo = 0.0002, gap_hi = 0.001;
      if (e.protocol == ipproto::kUdp) pay_lo = 1200, pay_hi = 1500;
      break;
  }
  const std::uint32_t isn = uniform_int<std::uint32_t>(rng, 0, 0xffffffffu);
  const std::uint32_t peer = uniform_int<std::uint32_t>(rng, 0, 0xffffffffu);
  std::uint32_t seq = isn;
  double t = 0;
  for (int i = 0; i < length; ++i) {
    PacketRecord r;
    r.src_ip = e.src;
    r.dst_ip = e.dst;
    r.protocol = e.protocol;
    r.src_port = e.sport;
    r.dst_port = e.dport;
    r.ttl = e.ttl;
    r.label = cls;
    r.payload_size = pay_hi ? uniform_int(rng, pay_lo, pay_hi) : 0;
    r.packet_size = header_bytes(e) + r.payload_size;
    if (e.protocol == ipproto::kTcp) {
      r.tcp_flag = 1;
      const bool first = i == 0, last = i + 1 == length && length > 1;
      if (cls == TrafficClass::IotMalicious || cls == TrafficClass::TradMalicious)
        set_flags(r, true, false, false, false, false);
      else if (first)
        set_flags(r, true, false, false, false, false);
      else if (last)
        set_flags(r, false, true, true, false, false);
      else
        set_flags(r, false, true, false, r.payload_size > 0, false);
      r.sequence_number = seq;
      r.acknowledgment_number = r.ack ? peer + static_cast<std::uint32_t>(i) : 0;
      seq += r.payload_size + (r.syn || r.fin ? 1 : 0);
    } else {
      r.udp_flag = 1;
    }
    const auto ns = t0 + static_cast<std::int64_t>(std::llround(t * 1e9));
    out.push_back({ns, flow, static_cast<std::uint32_t>(i), std::move(r)});
    t += uniform_real(rng, gap_lo, gap_hi);
  }
}

}  // namespace

LabeledStream synthesize(const SynthOptions& opts) {
  if (opts.rate <= 0) throw std::invalid_argument("synthesize: rate must be > 0");
  if (opts.start_time < 1) throw std::invalid_argument("synthesize: start_time must be >= 1");
  Rng rng(opts.seed);
  std::discrete_distribution<int> pick_class(opts.class_weights.begin(), opts.class_weights.end());
  std::bernoulli_distribution confuse(opts.confusion), use_v6(opts.ipv6_fraction);

  const double duration = static_cast<double>(opts.packets) / opts.rate;
  const auto span_ns = static_cast<std::int64_t>(duration * 1e9);
  std::vector<Draft> drafts;
  drafts.reserve(opts.packets + 64);
  std::uint64_t flow = 0;
  while (drafts.size() < opts.packets) {
    const auto cls = class_from_index(pick_class(rng));
    auto shape = cls;
    if (confuse(rng)) shape = class_from_index((class_index(cls) + uniform_int(rng, 1, kNumClasses - 1)) % kNumClasses);
    const auto t0 = span_ns > 0 ? uniform_int<std::int64_t>(rng, 0, span_ns) : 0;
    emit_flow(cls, shape, t0, flow++, use_v6(rng), rng, drafts);
  }
  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    return std::tie(a.ns, a.flow, a.index) < std::tie(b.ns, b.flow, b.index);
  });
  drafts.resize(opts.packets);

  const auto base_sec = static_cast<std::int64_t>(std::floor(opts.start_time));
  LabeledStream out;
  out.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    auto& r = drafts[i].rec;
    const std::int64_t ns = drafts[i].ns;
    r.timestamp = static_cast<double>(base_sec + ns / 1000000000) + static_cast<double>(ns % 1000000000) * 1e-9;
    r.source_tag = opts.source_tag;
    r.ordinal = i;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace flowguard
