#pragma once

#include <atomic>
#include <span>
#include <string_view>

#include "flowguard/cascade.hpp"

namespace flowguard {

enum class Pace { Max, Realtime };

std::string_view to_string(Pace p);
/// Accepts "max" and "realtime" (also "real-time").
Pace parse_pace(std::string_view s);

/// Throws std::invalid_argument when `model` cannot consume vectors built
/// with `cfg`: wrong input dimension or, for OnlineModel, a different
/// feature config hash.
void check_compatible(const Classifier& model, const WindowConfig& cfg, std::string_view name);

/// Extracts features from a timestamp-ordered stream and drives the cascade
/// packet by packet. Realtime pacing replays by original timestamps. Pending
/// human records are expired as the stream advances and drained at the end,
/// so every escalation is resolved on return unless `stop` was raised.
RunMetrics run_stream(Cascade& cascade, std::span<const PacketRecord> packets, const WindowConfig& cfg,
                      Pace pace = Pace::Max, const std::atomic<bool>* stop = nullptr);

}  // namespace flowguard
