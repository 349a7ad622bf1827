#include "flowguard/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace flowguard {

void WindowConfig::validate() const {
  if (!(processing_interval > 0)) throw std::invalid_argument("processing_interval must be > 0");
  if (!(abnormal_size_threshold > 0)) throw std::invalid_argument("abnormal_size_threshold must be > 0");
  if (port_frequency_threshold == 0) throw std::invalid_argument("port_frequency_threshold must be > 0");
  if (short_lived_threshold == 0) throw std::invalid_argument("short_lived_threshold must be > 0");
}

std::int64_t window_id(double timestamp, const WindowConfig& cfg) {
  return static_cast<std::int64_t>(std::floor(timestamp / cfg.processing_interval));
}

std::array<double, kWindowStatCount> WindowStats::values() const {
  return {packet_count,
          dst_port_entropy,
          most_freq_src_port,
          most_freq_dst_port,
          short_lived_connections,
          repeated_connection_attempts,
          scanning_count,
          flow_rate,
          source_entropy,
          rst_count,
          most_freq_packet_size_freq,
          abnormal_size_frequency,
          sequence_number_variance,
          avg_packet_number,
          syn_frequency,
          ack_frequency,
          tcp_frequency,
          udp_frequency,
          most_freq_protocol,
          packet_size_variance,
          most_freq_payload_size,
          avg_payload_size,
          packet_size_stddev,
          avg_packet_size};
}

const std::array<std::string_view, kWindowStatCount>& WindowStats::names() {
  static const std::array<std::string_view, kWindowStatCount> n = {"packet_count",
                                                                   "dst_port_entropy",
                                                                   "most_freq_src_port",
                                                                   "most_freq_dst_port",
                                                                   "short_lived_connections",
                                                                   "repeated_connection_attempts",
                                                                   "scanning_count",
                                                                   "flow_rate",
                                                                   "source_entropy",
                                                                   "rst_count",
                                                                   "most_freq_packet_size_freq",
                                                                   "abnormal_size_frequency",
                                                                   "sequence_number_variance",
                                                                   "avg_packet_number",
                                                                   "syn_frequency",
                                                                   "ack_frequency",
                                                                   "tcp_frequency",
                                                                   "udp_frequency",
                                                                   "most_freq_protocol",
                                                                   "packet_size_variance",
                                                                   "most_freq_payload_size",
                                                                   "avg_payload_size",
                                                                   "packet_size_stddev",
                                                                   "avg_packet_size"};
  return n;
}

double entropy(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("entropy: empty distribution");
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  // -0.0 for a single category
  return h > 0 ? h : 0.0;
}

namespace {

template <typename Map>
double map_entropy(const Map& m) {
  std::vector<std::uint64_t> counts;
  counts.reserve(m.size());
  for (const auto& [k, c] : m) counts.push_back(c);
  return entropy(counts);
}

// Modal key with smallest-value tie break; ignores keys below `min_count`.
template <typename Map>
std::pair<double, std::uint64_t> mode_of(const Map& m, std::uint64_t min_count = 1) {
  bool found = false;
  typename Map::key_type best{};
  std::uint64_t best_count = 0;
  for (const auto& [k, c] : m) {
    if (c < min_count) continue;
    if (!found || c > best_count || (c == best_count && k < best)) {
      best = k;
      best_count = c;
      found = true;
    }
  }
  return {found ? static_cast<double>(best) : 0.0, best_count};
}

std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

std::size_t WindowAccumulator::IpHash::operator()(const IpAddress& ip) const noexcept {
  std::uint64_t a, b;
  std::memcpy(&a, ip.bytes.data(), 8);
  std::memcpy(&b, ip.bytes.data() + 8, 8);
  return static_cast<std::size_t>(mix64(mix64(a, b), ip.v6));
}

std::size_t WindowAccumulator::TripleHash::operator()(
    const std::tuple<IpAddress, IpAddress, std::uint16_t>& t) const noexcept {
  IpHash h;
  return static_cast<std::size_t>(mix64(mix64(h(std::get<0>(t)), h(std::get<1>(t))), std::get<2>(t)));
}

void WindowAccumulator::add(const PacketRecord& p) {
  ++count_;
  const bool tcp = p.tcp_flag != 0;
  ++src_ports_[p.src_port];
  ++dst_ports_[p.dst_port];
  ++sources_[p.src_ip];

  auto& flow = flows_[five_tuple_of(p)];
  ++flow.packets;
  if (p.syn || p.fin || p.rst) flow.lifecycle = true;

  if (p.syn) {
    ++syn_;
    if (!syn_targets_.emplace(p.src_ip, p.dst_ip, p.dst_port).second) ++repeated_;
    if (!p.ack) ++scanning_;
  }
  if (p.ack) ++ack_;
  if (p.rst) ++rst_;
  if (tcp) ++tcp_;
  if (p.udp_flag) ++udp_;
  ++protocols_[p.protocol];

  ++sizes_[p.packet_size];
  ++payloads_[p.payload_size];
  if (p.packet_size > cfg_.abnormal_size_threshold) ++abnormal_;
  payload_sum_ += p.payload_size;
  size_.add(p.packet_size);
  seq_.add(tcp ? static_cast<double>(p.sequence_number) : 0.0);
}

WindowStats WindowAccumulator::finish() const {
  if (count_ == 0) throw std::logic_error("WindowAccumulator::finish on an empty window");
  const double n = static_cast<double>(count_);
  const double interval = cfg_.processing_interval;
  WindowStats s;
  s.packet_count = n;
  s.dst_port_entropy = map_entropy(dst_ports_);
  s.most_freq_src_port = mode_of(src_ports_, cfg_.port_frequency_threshold).first;
  s.most_freq_dst_port = mode_of(dst_ports_, cfg_.port_frequency_threshold).first;

  std::uint64_t short_lived = 0;
  for (const auto& [key, f] : flows_)
    if (f.packets < cfg_.short_lived_threshold && (f.lifecycle || !cfg_.short_lived_requires_flag)) ++short_lived;
  s.short_lived_connections = static_cast<double>(short_lived);
  s.repeated_connection_attempts = static_cast<double>(repeated_);
  s.scanning_count = static_cast<double>(scanning_);
  s.flow_rate = n / interval;
  s.source_entropy = map_entropy(sources_);
  s.rst_count = static_cast<double>(rst_);
  s.most_freq_packet_size_freq = static_cast<double>(mode_of(sizes_).second);
  s.abnormal_size_frequency = static_cast<double>(abnormal_);
  s.sequence_number_variance = seq_.variance();
  s.avg_packet_number = n;
  s.syn_frequency = static_cast<double>(syn_) / interval;
  s.ack_frequency = static_cast<double>(ack_) / interval;
  s.tcp_frequency = static_cast<double>(tcp_) / n;
  s.udp_frequency = static_cast<double>(udp_) / n;

  std::size_t proto = 0;
  for (std::size_t i = 1; i < protocols_.size(); ++i)
    if (protocols_[i] > protocols_[proto]) proto = i;
  s.most_freq_protocol = static_cast<double>(proto);

  s.packet_size_variance = size_.variance();
  s.most_freq_payload_size = mode_of(payloads_).first;
  s.avg_payload_size = payload_sum_ / n;
  s.packet_size_stddev = std::sqrt(s.packet_size_variance);
  s.avg_packet_size = size_.mean;
  return s;
}

WindowStats compute_window_stats(std::span<const PacketRecord> packets, const WindowConfig& cfg) {
  WindowAccumulator acc(cfg);
  for (const auto& p : packets) acc.add(p);
  return acc.finish();
}

const std::array<std::string_view, kFeatureDimension>& feature_names() {
  static const auto names = [] {
    std::array<std::string_view, kFeatureDimension> n{};
    const auto& general = general_feature_names();
    for (std::size_t i = 0; i < kModelGeneralFeatureCount; ++i) n[i] = general[i + 1];
    const auto& stats = WindowStats::names();
    for (std::size_t i = 0; i < kWindowStatCount; ++i) n[kModelGeneralFeatureCount + i] = stats[i];
    return n;
  }();
  return names;
}

FeatureVector assemble(const PacketRecord& pkt, const WindowStats& stats, std::int64_t stats_window,
                       const WindowConfig& cfg) {
  const auto w = window_id(pkt.timestamp, cfg);
  if (w != stats_window)
    throw std::invalid_argument("assemble: packet window " + std::to_string(w) + " != stats window " +
                                std::to_string(stats_window));
  FeatureVector v;
  v.values.resize(static_cast<Eigen::Index>(kFeatureDimension));
  const auto general = general_features(pkt, cfg.address_encoding);
  for (std::size_t i = 0; i < kModelGeneralFeatureCount; ++i) v.values[static_cast<Eigen::Index>(i)] = general[i + 1];
  const auto st = stats.values();
  for (std::size_t i = 0; i < kWindowStatCount; ++i)
    v.values[static_cast<Eigen::Index>(kModelGeneralFeatureCount + i)] = st[i];
  v.window_id = w;
  v.label = pkt.label;
  return v;
}

// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(const WindowConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<ExtractedPacket> FeatureExtractor::push(PacketRecord p) {
  const auto w = window_id(p.timestamp, cfg_);
  std::vector<ExtractedPacket> out;
  if (current_ && w < *current_)
    throw std::invalid_argument("FeatureExtractor: packet at t=" + std::to_string(p.timestamp) +
                                " precedes the open window");
  if (current_ && w != *current_) out = close_window();
  current_ = w;
  pending_.push_back(std::move(p));
  return out;
}

std::vector<ExtractedPacket> FeatureExtractor::flush() { return close_window(); }

std::vector<ExtractedPacket> FeatureExtractor::close_window() {
  std::vector<ExtractedPacket> out;
  if (pending_.empty()) return out;
  out.reserve(pending_.size());
  const auto w = *current_;

  if (cfg_.group_by_source) {
    std::map<IpAddress, WindowAccumulator> groups;
    for (const auto& p : pending_) groups.try_emplace(p.src_ip, cfg_).first->second.add(p);
    std::map<IpAddress, WindowStats> stats;
    for (const auto& [ip, acc] : groups) stats.emplace(ip, acc.finish());
    for (auto& p : pending_) {
      auto v = assemble(p, stats.at(p.src_ip), w, cfg_);
      out.push_back({std::move(p), std::move(v)});
    }
    windows_ += groups.size();
  } else {
    const auto stats = compute_window_stats(pending_, cfg_);
    for (auto& p : pending_) {
      auto v = assemble(p, stats, w, cfg_);
      out.push_back({std::move(p), std::move(v)});
    }
    ++windows_;
  }
  pending_.clear();
  return out;
}

std::vector<ExtractedPacket> extract_all(std::span<const PacketRecord> packets, const WindowConfig& cfg) {
  FeatureExtractor ex(cfg);
  std::vector<ExtractedPacket> out;
  out.reserve(packets.size());
  for (const auto& p : packets) {
    auto done = ex.push(p);
    std::move(done.begin(), done.end(), std::back_inserter(out));
  }
  auto rest = ex.flush();
  std::move(rest.begin(), rest.end(), std::back_inserter(out));
  return out;
}

// ---------------------------------------------------------------------------

ScalerParams fit_scaler(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("fit_scaler: need at least one vector");
  const auto d = vectors.front().values.size();
  ScalerParams p{vectors.front().values, vectors.front().values};
  for (const auto& v : vectors) {
    if (v.values.size() != d) throw std::invalid_argument("fit_scaler: dimension mismatch");
    p.min = p.min.cwiseMin(v.values);
    p.max = p.max.cwiseMax(v.values);
  }
  return p;
}

// ---------------------------------------------------------------------------

void write_feature_csv_header(std::ostream& out) {
  for (auto name : feature_names()) out << name << ',';
  out << "window_id,label\n";
}

void write_feature_csv_row(std::ostream& out, const FeatureVector& v) {
  char buf[32];
  for (Eigen::Index i = 0; i < v.values.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v.values[i]);
    out.write(buf, end - buf);
    out.put(',');
  }
  out << v.window_id << ',';
  if (v.label) out << to_string(*v.label);
  out.put('\n');
}

void write_feature_csv(std::ostream& out, std::span<const FeatureVector> vectors) {
  write_feature_csv_header(out);
  for (const auto& v : vectors) write_feature_csv_row(out, v);
}

std::vector<FeatureVector> read_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("feature CSV: missing header");
  {
    std::ostringstream expected;
    write_feature_csv_header(expected);
    auto want = expected.str();
    want.pop_back();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != want) throw std::runtime_error("feature CSV: unexpected header");
  }
  std::vector<FeatureVector> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    FeatureVector v;
    v.values.resize(static_cast<Eigen::Index>(kFeatureDimension));
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto bad = [&](const char* what) {
      throw std::runtime_error("feature CSV line " + std::to_string(lineno) + ": " + what);
    };
    for (Eigen::Index i = 0; i < v.values.size(); ++i) {
      auto [next, ec] = std::from_chars(p, end, v.values[i]);
      if (ec != std::errc() || next == end || *next != ',') bad("bad feature value");
      p = next + 1;
    }
    auto [next, ec] = std::from_chars(p, end, v.window_id);
    if (ec != std::errc() || next == end || *next != ',') bad("bad window_id");
    const std::string_view label(next + 1, static_cast<std::size_t>(end - next - 1));
    if (!label.empty()) {
      v.label = try_parse_traffic_class(label);
      if (!v.label) bad("unknown label");
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

}  // namespace flowguard
