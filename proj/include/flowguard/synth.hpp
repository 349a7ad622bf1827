#pragma once

#include <array>
#include <cstdint>

#include "flowguard/mixer.hpp"

namespace flowguard {

/// Parameters of the synthetic four-class traffic generator.
struct SynthOptions {
  std::size_t packets = 10000;
  std::uint64_t seed = 1;
  double start_time = 1000.0;  // epoch seconds of the first flow
  double rate = 2000.0;        // mean packets per second
  // Relative class frequencies, indexed by class_index().
  std::array<double, kNumClasses> class_weights{0.25, 0.25, 0.25, 0.25};
  // Probability that a flow borrows another class's addressing and ports.
  double confusion = 0.0;
  // Fraction of IPv6 flows.
  double ipv6_fraction = 0.05;
  std::string source_tag = "synth";
};

/// Labeled, timestamp-ordered packets drawn from per-class flow profiles:
/// periodic IoT telemetry, IoT SYN floods, web sessions and port scans /
/// UDP floods. Timestamps are whole nanoseconds so they survive a capture
/// round trip unchanged. Deterministic for a fixed seed.
LabeledStream synthesize(const SynthOptions& opts);

}  // namespace flowguard
