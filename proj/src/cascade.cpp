#include "flowguard/cascade.hpp"

#include <thread>

namespace flowguard {

namespace {

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

nlohmann::json five_tuple_json(const FiveTuple& t) {
  return {{"src_ip", t.src_ip.to_string()},
          {"dst_ip", t.dst_ip.to_string()},
          {"src_port", t.src_port},
          {"dst_port", t.dst_port},
          {"protocol", t.protocol}};
}

nlohmann::json prediction_json(const Prediction& p) {
  return {{"label", to_string(p.label)},
          {"confidence", p.confidence},
          {"per_class", {p.per_class[0], p.per_class[1], p.per_class[2], p.per_class[3]}}};
}

}  // namespace

std::string_view to_string(HumanMode m) {
  switch (m) {
    case HumanMode::Interactive:
      return "interactive";
    case HumanMode::Oracle:
      return "oracle";
    case HumanMode::None:
      return "none";
  }
  return "?";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::M1:
      return "m1";
    case Provenance::M2:
      return "m2";
    case Provenance::Human:
      return "human";
  }
  return "?";
}

std::string_view to_string(EscalationStatus s) {
  switch (s) {
    case EscalationStatus::PendingM2:
      return "pending_m2";
    case EscalationStatus::PendingHuman:
      return "pending_human";
    case EscalationStatus::Resolved:
      return "resolved";
  }
  return "?";
}

HumanMode parse_human_mode(std::string_view s) {
  for (auto m : {HumanMode::Interactive, HumanMode::Oracle, HumanMode::None})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown human mode '" + std::string(s) + "' (interactive, oracle, none)");
}

void CascadeConfig::validate() const {
  if (!(theta >= 0 && theta <= 1)) throw std::invalid_argument("theta must lie in [0, 1]");
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (scenario < 1 || scenario > 5) throw std::invalid_argument("scenario must be 1-5");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  if (!(replay_fraction >= 0 && replay_fraction <= 1)) throw std::invalid_argument("replay_fraction must lie in [0, 1]");
}

nlohmann::json EscalationRecord::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["status"] = to_string(status);
  j["five_tuple"] = five_tuple_json(packet.five_tuple);
  j["five_tuple_text"] = packet.five_tuple.to_string();
  j["timestamp"] = packet.timestamp;
  j["packet_size"] = packet.packet_size;
  j["payload_size"] = packet.payload_size;
  j["created_at"] = created_unix;
  j["m1"] = prediction_json(m1_prediction);
  j["m2"] = m2_prediction ? prediction_json(*m2_prediction) : nlohmann::json(nullptr);
  j["final_label"] = final_label ? nlohmann::json(to_string(*final_label)) : nlohmann::json(nullptr);
  j["provenance"] = label_provenance ? nlohmann::json(to_string(*label_provenance)) : nlohmann::json(nullptr);
  auto feats = nlohmann::json::array();
  for (Eigen::Index i = 0; i < features.size(); ++i) feats.push_back(features[i]);
  j["features"] = feats;
  return j;
}

nlohmann::json RunMetrics::to_json() const {
  return {{"m1_trp", m1_trp},
          {"m1_cpp", m1_cpp},
          {"m2_trp", m2_trp},
          {"m2_cpp", m2_cpp},
          {"hir", hir},
          {"he", he},
          {"he_percent", he * 100.0},
          {"provenance", {{"m1", m1_provenance}, {"m2", m2_provenance}, {"human", human_provenance}}},
          {"retrain_events", retrain_events},
          {"pending", pending},
          {"labeled", labeled},
          {"correct", correct},
          {"accuracy", accuracy},
          {"elapsed_seconds", elapsed_seconds},
          {"throughput", throughput},
          {"batch_accuracy", batch_accuracy}};
}

bool RunMetrics::same_counts(const RunMetrics& o) const {
  return m1_trp == o.m1_trp && m1_cpp == o.m1_cpp && m2_trp == o.m2_trp && m2_cpp == o.m2_cpp && hir == o.hir &&
         he == o.he && human_provenance == o.human_provenance && m2_provenance == o.m2_provenance &&
         m1_provenance == o.m1_provenance && retrain_events == o.retrain_events && pending == o.pending &&
         labeled == o.labeled && correct == o.correct && accuracy == o.accuracy && batch_accuracy == o.batch_accuracy;
}

// ---------------------------------------------------------------------------

Cascade::Cascade(std::shared_ptr<const Classifier> m1, std::shared_ptr<const Classifier> m2, CascadeConfig cfg)
    : cfg_(cfg), m1_(std::move(m1)), m2_(std::move(m2)), rng_(cfg.seed) {
  cfg_.validate();
  const bool needs_m1 = cfg_.scenario != 3;
  const bool needs_m2 = cfg_.scenario >= 3;
  if (needs_m1 && !m1_) throw std::invalid_argument("scenario " + std::to_string(cfg_.scenario) + " needs an M1 model");
  if (needs_m2 && !m2_) throw std::invalid_argument("scenario " + std::to_string(cfg_.scenario) + " needs an M2 model");
  if (cfg_.scenario == 4) cfg_.human_mode = HumanMode::None;
}

std::shared_ptr<const Classifier> Cascade::retrain_m1(const Classifier& m1, const Eigen::VectorXd& x,
                                                      TrafficClass label, double alpha) {
  return m1.retrained(x, label, alpha);
}

std::shared_ptr<const Classifier> Cascade::m1() const {
  std::lock_guard lock(mu_);
  return m1_;
}

void Cascade::on_event(EventSink sink) {
  std::lock_guard lock(emit_mu_);
  event_sinks_.push_back(std::move(sink));
}
void Cascade::on_resolution(LineSink sink) {
  std::lock_guard lock(emit_mu_);
  resolution_sinks_.push_back(std::move(sink));
}
void Cascade::on_warning(LineSink sink) {
  std::lock_guard lock(emit_mu_);
  warning_sinks_.push_back(std::move(sink));
}

void Cascade::finish_batch_locked() {
  counters_.batch_accuracy.push_back(batch_labeled_ ? static_cast<double>(batch_correct_) /
                                                          static_cast<double>(batch_labeled_)
                                                    : 0.0);
  batch_labeled_ = batch_correct_ = 0;
}

void Cascade::resolve_locked(EscalationRecord& rec, TrafficClass label, Provenance prov, bool retrain,
                             std::vector<CascadeEvent>& events, std::vector<std::string>& lines) {
  const bool was_pending_human = rec.status == EscalationStatus::PendingHuman;
  rec.status = EscalationStatus::Resolved;
  rec.final_label = label;
  rec.label_provenance = prov;

  switch (prov) {
    case Provenance::M1:
      ++counters_.m1_provenance;
      break;
    case Provenance::M2:
      ++counters_.m2_provenance;
      break;
    case Provenance::Human:
      ++counters_.human_provenance;
      break;
  }
  if (was_pending_human) ++counters_.hir;
  if (retrain) {
    m1_ = retrain_m1(*m1_, rec.features, label, cfg_.alpha);
    ++counters_.retrain_events;
  }
  if (rec.ground_truth) {
    ++counters_.labeled;
    ++batch_labeled_;
    if (*rec.ground_truth == label) {
      ++counters_.correct;
      ++batch_correct_;
    }
  }

  nlohmann::json line = {{"id", rec.id},
                         {"ts", rec.packet.timestamp},
                         {"five_tuple", five_tuple_json(rec.packet.five_tuple)},
                         {"gamma1", rec.m1_prediction.confidence},
                         {"provenance", to_string(prov)},
                         {"label", to_string(label)},
                         {"retrained", retrain}};
  if (rec.m2_prediction) line["gamma2"] = rec.m2_prediction->confidence;
  if (rec.ground_truth) line["ground_truth"] = to_string(*rec.ground_truth);
  lines.push_back(line.dump());
  if (was_pending_human) {
    nlohmann::json payload = {{"id", rec.id}, {"label", to_string(label)}, {"provenance", to_string(prov)},
                              {"retrained", retrain}};
    events.push_back({CascadeEvent::Kind::EscalationResolved, std::move(payload)});
  }
}

void Cascade::emit(std::vector<CascadeEvent>& events, std::vector<std::string>& lines,
                   std::vector<std::string>& warnings) {
  for (const auto& w : warnings)
    for (const auto& s : warning_sinks_) s(w);
  for (const auto& l : lines)
    for (const auto& s : resolution_sinks_) s(l);
  for (const auto& e : events)
    for (const auto& s : event_sinks_) s(e);
}

ProcessResult Cascade::process(const FeatureVector& x, const PacketSummary& pkt) {
  std::vector<CascadeEvent> events;
  std::vector<std::string> lines, warnings;
  ProcessResult result;

  std::unique_lock lock(mu_);
  const auto now = std::chrono::steady_clock::now();
  if (!started_) started_ = now;
  last_ = now;

  EscalationRecord rec;
  rec.id = next_id_++;
  rec.features = x.values;
  rec.packet = pkt;
  rec.ground_truth = x.label;
  rec.created_at = now;
  rec.created_unix = unix_now();
  result.id = rec.id;
  ++counters_.m1_trp;

  auto finish = [&](TrafficClass label, Provenance prov, bool retrain) {
    resolve_locked(rec, label, prov, retrain, events, lines);
    result.label = label;
    result.provenance = prov;
    result.retrained = retrain;
  };

  switch (cfg_.scenario) {
    case 1:
    case 2: {
      rec.m1_prediction = m1_->predict(x.values);
      ++counters_.m1_cpp;
      bool replay = false;
      if (cfg_.scenario == 2 && x.label) {
        std::bernoulli_distribution coin(cfg_.replay_fraction);
        replay = coin(rng_);
      }
      finish(rec.m1_prediction.label, Provenance::M1, false);
      if (replay) {
        m1_ = retrain_m1(*m1_, x.values, *x.label, cfg_.alpha);
        ++counters_.retrain_events;
        result.retrained = true;
      }
      break;
    }
    case 3: {
      rec.m2_prediction = m2_->predict(x.values);
      rec.m1_prediction = *rec.m2_prediction;
      ++counters_.m2_trp;
      ++counters_.m2_cpp;
      finish(rec.m2_prediction->label, Provenance::M2, false);
      break;
    }
    default: {
      rec.m1_prediction = m1_->predict(x.values);
      const double g1 = rec.m1_prediction.confidence;
      const bool m1_ok = cfg_.m1_accept_inclusive ? g1 >= cfg_.theta : g1 > cfg_.theta;
      if (m1_ok) {
        ++counters_.m1_cpp;
        finish(rec.m1_prediction.label, Provenance::M1, false);
        break;
      }
      ++counters_.m2_trp;
      rec.m2_prediction = m2_->predict(x.values);
      if (rec.m2_prediction->confidence > cfg_.theta) {
        ++counters_.m2_cpp;
        finish(rec.m2_prediction->label, Provenance::M2, true);
        break;
      }

      rec.status = EscalationStatus::PendingHuman;
      result.m1 = rec.m1_prediction;
      result.m2 = rec.m2_prediction;
      if (cfg_.human_mode == HumanMode::Interactive) {
        events.push_back({CascadeEvent::Kind::EscalationCreated, rec.to_json()});
        records_.emplace(rec.id, rec);
        break;
      }
      if (cfg_.human_mode == HumanMode::Oracle && rec.ground_truth) {
        finish(*rec.ground_truth, Provenance::Human, true);
      } else {
        if (cfg_.human_mode == HumanMode::Oracle)
          warnings.push_back("escalation " + std::to_string(rec.id) + ": no ground truth for the oracle; using M2 label");
        finish(rec.m2_prediction->label, Provenance::M2, true);
      }
      records_.emplace(rec.id, rec);
      break;
    }
  }
  result.m1 = rec.m1_prediction;
  result.m2 = rec.m2_prediction;

  if (++processed_ % cfg_.batch_size == 0) finish_batch_locked();

  std::lock_guard emit_lock(emit_mu_);
  lock.unlock();
  emit(events, lines, warnings);
  return result;
}

SubmitStatus Cascade::submit_human_label(std::uint64_t id, TrafficClass label) {
  std::vector<CascadeEvent> events;
  std::vector<std::string> lines, warnings;
  std::unique_lock lock(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) return SubmitStatus::UnknownId;
  if (it->second.status != EscalationStatus::PendingHuman) return SubmitStatus::AlreadyResolved;
  resolve_locked(it->second, label, Provenance::Human, true, events, lines);
  last_ = std::chrono::steady_clock::now();
  std::lock_guard emit_lock(emit_mu_);
  lock.unlock();
  emit(events, lines, warnings);
  return SubmitStatus::Ok;
}

std::size_t Cascade::expire_pending(std::chrono::steady_clock::time_point now) {
  std::vector<CascadeEvent> events;
  std::vector<std::string> lines, warnings;
  std::unique_lock lock(mu_);
  std::size_t n = 0;
  for (auto& [id, rec] : records_) {
    if (rec.status != EscalationStatus::PendingHuman || now - rec.created_at < cfg_.human_timeout) continue;
    warnings.push_back("escalation " + std::to_string(id) + ": human label timed out; using M2 label");
    resolve_locked(rec, rec.m2_prediction->label, Provenance::M2, true, events, lines);
    ++n;
  }
  std::lock_guard emit_lock(emit_mu_);
  lock.unlock();
  emit(events, lines, warnings);
  return n;
}

std::size_t Cascade::resolve_all_pending() {
  return expire_pending(std::chrono::steady_clock::time_point::max() - cfg_.human_timeout);
}

std::vector<EscalationRecord> Cascade::pending() const {
  std::lock_guard lock(mu_);
  std::vector<EscalationRecord> out;
  for (const auto& [id, rec] : records_)
    if (rec.status == EscalationStatus::PendingHuman) out.push_back(rec);
  return out;
}

std::optional<EscalationRecord> Cascade::record(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

RunMetrics Cascade::metrics_snapshot() const {
  std::lock_guard lock(mu_);
  RunMetrics m = counters_;
  m.he = human_effort(m.hir, m.m1_trp);
  m.accuracy = m.labeled ? static_cast<double>(m.correct) / static_cast<double>(m.labeled) : 0.0;
  m.pending = 0;
  for (const auto& [id, rec] : records_)
    if (rec.status == EscalationStatus::PendingHuman) ++m.pending;
  if (started_) {
    m.elapsed_seconds = std::chrono::duration<double>(last_ - *started_).count();
    m.throughput = m.elapsed_seconds > 0 ? static_cast<double>(m.m1_trp) / m.elapsed_seconds : 0.0;
  }
  return m;
}

RunMetrics run_scenario(Cascade& cascade, std::span<const ExtractedPacket> stream) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool interactive =
      cascade.config().human_mode == HumanMode::Interactive && cascade.config().scenario == 5;
  for (const auto& e : stream) {
    cascade.process(e.features, PacketSummary::of(e.packet));
    if (interactive) cascade.expire_pending();
  }
  if (interactive) {
    const auto deadline = std::chrono::steady_clock::now() + cascade.config().human_timeout;
    while (!cascade.pending().empty() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      cascade.expire_pending();
    }
    cascade.resolve_all_pending();
  }
  auto m = cascade.metrics_snapshot();
  m.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.throughput = m.elapsed_seconds > 0 ? static_cast<double>(m.m1_trp) / m.elapsed_seconds : 0.0;
  return m;
}

}  // namespace flowguard
