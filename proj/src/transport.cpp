#include "tacnet/transport.hpp"

#include <algorithm>
#include <cmath>

namespace tacnet {

namespace {
constexpr double kRttAlpha = 0.125;
constexpr double kRttBeta = 0.25;
}  // namespace

Connection::Connection(Simulator& sim, int flow_id, TransportConfig config, EmitFn emit)
    : sim_(sim), flow_id_(flow_id), config_(config), emit_(std::move(emit)) {
  state_.cwnd_bytes = std::clamp(config_.initial_cwnd_bytes, config_.cwnd_min_bytes, config_.cwnd_cap_bytes);
  state_.rto_ms = config_.rto_initial_ms;
}

void Connection::open() {
  if (opened_) return;
  opened_ = true;
  open_time_ = sim_.now();
  send_syn();
}

void Connection::send_syn() {
  ++syn_transmissions_;
  syn_sent_ = sim_.now();
  Packet p;
  p.flow_id = flow_id_;
  p.kind = PacketKind::Syn;
  p.size_bytes = config_.handshake_bytes;
  emit_(p);
  arm_timer(sim_.now() + state_.rto_ms / 1000.0);
}

std::int64_t Connection::send_payload(std::int64_t n_bytes) {
  if (closed_) throw Error("send_payload on a closed connection");
  if (n_bytes <= 0) return 0;
  state_.send_queue_bytes += n_bytes;
  state_.total_enqueued_bytes += n_bytes;
  try_send();
  return n_bytes;
}

void Connection::clear_send_queue() {
  state_.total_enqueued_bytes -= state_.send_queue_bytes;
  state_.send_queue_bytes = 0;
}

std::int64_t Connection::set_cwnd(double target_bytes) {
  const double clamped = std::clamp(std::round(target_bytes), static_cast<double>(config_.cwnd_min_bytes),
                                    static_cast<double>(config_.cwnd_cap_bytes));
  state_.cwnd_bytes = static_cast<std::int64_t>(clamped);
  try_send();
  return state_.cwnd_bytes;
}

void Connection::try_send() {
  if (!established_ || closed_) return;
  bool sent = false;
  while (!lost_queue_.empty() && pipe() < state_.cwnd_bytes) {
    const std::int64_t seq = *lost_queue_.begin();
    transmit(seq, true);
    // the repaired head of the window gets a full timeout of its own
    if (seq == state_.snd_una) restart_timer();
    sent = true;
  }
  while (state_.send_queue_bytes > 0 && pipe() < state_.cwnd_bytes) {
    const int size = static_cast<int>(std::min<std::int64_t>(state_.send_queue_bytes, config_.segment_bytes));
    state_.send_queue_bytes -= size;
    const std::int64_t seq = state_.next_seq++;
    segments_.push_back(Segment{size, sim_.now(), sim_.now(), 0, 0, 0, false});
    state_.bytes_in_flight += size;
    transmit(seq, false);
    sent = true;
  }
  if (sent && !timer_armed_) restart_timer();
}

void Connection::transmit(std::int64_t seq, bool retransmission) {
  Segment& seg = segments_[static_cast<std::size_t>(seq)];
  if (seg.lost) {
    seg.lost = false;
    state_.lost_bytes -= seg.size;
    lost_queue_.erase(seq);
  }
  seg.last_sent = sim_.now();
  seg.last_tx = ++tx_counter_;
  seg.dup_after = 0;
  ++seg.transmissions;
  ++state_.data_packets_sent;
  state_.window.sent_bytes += seg.size;
  if (retransmission) {
    ++state_.retransmissions;
    ++state_.window.retransmissions;
  }
  Packet p;
  p.flow_id = flow_id_;
  p.seq = seq;
  p.kind = PacketKind::Data;
  p.size_bytes = seg.size;
  p.hdr.tx_index = seg.last_tx;
  record_sample();
  emit_(p);
}

void Connection::on_packet(const Packet& packet) {
  if (closed_) return;
  if (packet.kind == PacketKind::SynAck) {
    if (established_) return;
    established_ = true;
    established_time_ = sim_.now();
    if (syn_transmissions_ == 1) take_rtt_sample((sim_.now() - syn_sent_) * 1000.0);
    disarm_timer();
    try_send();
  } else if (packet.kind == PacketKind::Ack) {
    on_ack(packet);
  }
}

void Connection::on_ack(const Packet& ack) {
  ++state_.window.acks_received;
  const TransportHeader& h = ack.hdr;
  std::vector<std::int64_t> newly;

  auto mark = [&](std::int64_t seq) {
    Segment& seg = segments_[static_cast<std::size_t>(seq)];
    if (seg.acked) return;
    seg.acked = true;
    if (seg.lost) {
      seg.lost = false;
      state_.lost_bytes -= seg.size;
      lost_queue_.erase(seq);
    }
    newly.push_back(seq);
  };

  bool bad = false;
  std::int64_t cum = h.cum_ack;
  if (cum > state_.next_seq) {
    bad = true;
    cum = state_.next_seq;
  }
  for (std::int64_t s = state_.snd_una; s < cum; ++s) mark(s);
  for (int b = 0; b < h.sack_count; ++b) {
    std::int64_t begin = std::max(h.sack[b].begin, state_.snd_una);
    std::int64_t end = h.sack[b].end;
    if (end > state_.next_seq) {
      bad = true;
      end = state_.next_seq;
    }
    for (std::int64_t s = begin; s < end; ++s) mark(s);
  }
  if (h.echo_seq >= state_.next_seq) bad = true;
  if (bad) ++state_.protocol_errors;

  std::int64_t newly_bytes = 0;
  std::vector<std::int64_t> lost;
  for (std::int64_t s : newly) {
    const Segment& seg = segments_[static_cast<std::size_t>(s)];
    newly_bytes += seg.size;
    if (s > state_.snd_una) state_.sacked.insert(s);
    // Gap detection: a segment whose latest transmission precedes
    // dup_threshold acknowledged transmissions is presumed lost.
    for (std::int64_t o = state_.snd_una; o < state_.next_seq; ++o) {
      Segment& other = segments_[static_cast<std::size_t>(o)];
      if (other.acked || other.lost || other.last_tx >= seg.last_tx) continue;
      if (++other.dup_after == config_.dup_threshold) lost.push_back(o);
    }
  }

  // Karn: only segments transmitted once yield RTT samples.
  if (h.echo_seq >= 0 && h.echo_seq < state_.next_seq &&
      std::find(newly.begin(), newly.end(), h.echo_seq) != newly.end()) {
    const Segment& seg = segments_[static_cast<std::size_t>(h.echo_seq)];
    if (seg.transmissions == 1) take_rtt_sample((sim_.now() - seg.first_sent) * 1000.0);
  }

  state_.bytes_in_flight -= newly_bytes;
  state_.total_acked_bytes += newly_bytes;
  state_.window.acked_bytes += newly_bytes;
  state_.cumulative_acked_kb = static_cast<double>(state_.total_acked_bytes) / 1000.0;

  const std::int64_t old_una = state_.snd_una;
  while (state_.snd_una < state_.next_seq && segments_[static_cast<std::size_t>(state_.snd_una)].acked) {
    state_.sacked.erase(state_.snd_una);
    ++state_.snd_una;
  }
  if (state_.snd_una > old_una && state_.has_rtt) state_.rto_ms = rto_from_estimator();

  std::sort(lost.begin(), lost.end());
  for (std::int64_t s : lost) {
    if (segments_[static_cast<std::size_t>(s)].acked) continue;
    mark_lost(s);
    if (observer_) observer_->on_loss(*this, sim_.now(), LossKind::Gap, s);
  }

  if (state_.snd_una == state_.next_seq) {
    disarm_timer();
  } else if (state_.snd_una > old_una) {
    restart_timer();
  }

  if (std::isnan(completion_time_) && all_acked()) completion_time_ = sim_.now();

  if (observer_ && newly_bytes > 0) observer_->on_ack(*this, sim_.now(), newly_bytes);
  record_sample();
  try_send();
}

void Connection::on_timeout() {
  timer_armed_ = false;
  if (!established_) {
    state_.rto_ms = std::min(state_.rto_ms * 2.0, config_.rto_max_ms);
    send_syn();
    return;
  }
  if (state_.snd_una >= state_.next_seq) return;
  ++state_.timeouts;
  ++state_.window.timeouts;
  // everything still outstanding is presumed lost; the oldest goes first
  for (std::int64_t s = state_.snd_una; s < state_.next_seq; ++s)
    if (!segments_[static_cast<std::size_t>(s)].acked) mark_lost(s);
  const std::int64_t oldest = state_.snd_una;
  transmit(oldest, true);
  state_.rto_ms = std::min(state_.rto_ms * 2.0, config_.rto_max_ms);
  restart_timer();
  if (observer_) observer_->on_loss(*this, sim_.now(), LossKind::Timeout, oldest);
  try_send();
}

void Connection::mark_lost(std::int64_t seq) {
  Segment& seg = segments_[static_cast<std::size_t>(seq)];
  if (seg.lost || seg.acked) return;
  seg.lost = true;
  state_.lost_bytes += seg.size;
  lost_queue_.insert(seq);
}

void Connection::take_rtt_sample(double rtt_ms) {
  if (!state_.has_rtt) {
    state_.srtt_ms = rtt_ms;
    state_.rttvar_ms = rtt_ms / 2.0;
    state_.has_rtt = true;
  } else {
    state_.rttvar_ms = (1.0 - kRttBeta) * state_.rttvar_ms + kRttBeta * std::abs(state_.srtt_ms - rtt_ms);
    state_.srtt_ms = (1.0 - kRttAlpha) * state_.srtt_ms + kRttAlpha * rtt_ms;
  }
  state_.last_rtt_ms = rtt_ms;
  state_.rto_ms = rto_from_estimator();
  auto& w = state_.window;
  w.min_rtt_ms = w.min_rtt_ms == 0.0 ? rtt_ms : std::min(w.min_rtt_ms, rtt_ms);
  w.max_rtt_ms = std::max(w.max_rtt_ms, rtt_ms);
  rtt_samples_.push_back({sim_.now(), rtt_ms});
}

double Connection::rto_from_estimator() const {
  // the variance term is floored at rto_min so a steady path does not
  // collapse the timeout onto the round trip itself
  return std::min(state_.srtt_ms + std::max(4.0 * state_.rttvar_ms, config_.rto_min_ms), config_.rto_max_ms);
}

void Connection::arm_timer(double at) {
  timer_armed_ = true;
  timer_deadline_ = at;
  const std::uint64_t gen = ++timer_generation_;
  sim_.schedule_at(at, [this, gen] {
    if (gen != timer_generation_ || !timer_armed_ || closed_) return;
    on_timeout();
  });
}

void Connection::disarm_timer() {
  timer_armed_ = false;
  ++timer_generation_;
}

FeatureVector Connection::current_features() const {
  const auto& s = state_;
  return {static_cast<double>(s.window.acked_bytes),
          static_cast<double>(s.window.sent_bytes),
          static_cast<double>(s.window.retransmissions),
          static_cast<double>(s.window.timeouts),
          static_cast<double>(s.window.acks_received),
          s.cumulative_acked_kb,
          s.last_rtt_ms,
          s.window.min_rtt_ms,
          s.window.max_rtt_ms,
          s.srtt_ms,
          s.rttvar_ms,
          static_cast<double>(s.cwnd_bytes),
          static_cast<double>(s.bytes_in_flight),
          static_cast<double>(s.send_queue_bytes)};
}

void Connection::record_sample() { window_samples_.push_back(current_features()); }

void Connection::begin_window(double now) {
  window_start_ = now;
  window_samples_.clear();
  state_.window = WindowCounters{};
}

StatSnapshot Connection::collect_window_stats(double now) {
  if (std::abs(now - window_start_ - config_.stats_window_s) > 1e-9)
    throw Error("collect_window_stats called mid-window");
  record_sample();
  StatSnapshot snap;
  snap.window_start_s = window_start_;
  snap.window_end_s = window_start_ + config_.stats_window_s;
  for (int f = 0; f < kFeatureCount; ++f) {
    auto& series = snap.series[static_cast<std::size_t>(f)];
    series.reserve(window_samples_.size());
    for (const auto& row : window_samples_) series.push_back(row[static_cast<std::size_t>(f)]);
  }
  // abut the next window exactly on the previous end
  begin_window(snap.window_end_s);
  return snap;
}

Receiver::Receiver(Simulator& sim, int flow_id, TransportConfig config, EmitFn emit)
    : sim_(sim), flow_id_(flow_id), config_(config), emit_(std::move(emit)) {}

void Receiver::on_packet(const Packet& packet) {
  if (packet.kind == PacketKind::Syn) {
    Packet reply;
    reply.flow_id = flow_id_;
    reply.kind = PacketKind::SynAck;
    reply.size_bytes = config_.handshake_bytes;
    emit_(reply);
    return;
  }
  if (packet.kind != PacketKind::Data) return;

  const std::int64_t seq = packet.seq;
  if (seq < next_expected_ || out_of_order_.count(seq)) {
    ++duplicates_;
  } else if (seq == next_expected_) {
    delivered_.push_back(seq);
    delivered_bytes_ += packet.size_bytes;
    ++next_expected_;
    for (auto it = out_of_order_.begin(); it != out_of_order_.end() && it->first == next_expected_;) {
      delivered_.push_back(it->first);
      delivered_bytes_ += it->second;
      ++next_expected_;
      it = out_of_order_.erase(it);
    }
  } else {
    out_of_order_.emplace(seq, packet.size_bytes);
  }

  Packet ack;
  ack.flow_id = flow_id_;
  ack.seq = seq;
  ack.kind = PacketKind::Ack;
  ack.size_bytes = config_.ack_bytes;
  ack.hdr.cum_ack = next_expected_;
  ack.hdr.echo_seq = seq;
  ack.hdr.tx_index = packet.hdr.tx_index;

  // SACK blocks: the block holding the triggering segment first, then the
  // highest remaining blocks.
  std::vector<SackBlock> blocks;
  for (auto it = out_of_order_.begin(); it != out_of_order_.end();) {
    SackBlock b{it->first, it->first + 1};
    ++it;
    while (it != out_of_order_.end() && it->first == b.end) {
      ++b.end;
      ++it;
    }
    blocks.push_back(b);
  }
  auto first = std::find_if(blocks.begin(), blocks.end(),
                            [&](const SackBlock& b) { return b.begin <= seq && seq < b.end; });
  if (first != blocks.end()) {
    ack.hdr.sack[ack.hdr.sack_count++] = *first;
    blocks.erase(first);
  }
  for (auto it = blocks.rbegin(); it != blocks.rend() && ack.hdr.sack_count < kMaxSackBlocks; ++it)
    ack.hdr.sack[ack.hdr.sack_count++] = *it;
  emit_(ack);
}

}  // namespace tacnet
