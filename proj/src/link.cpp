#include "tacnet/link.hpp"

#include <algorithm>
#include <cstdio>

namespace tacnet {

void LinkProfile::validate() const {
  if (!(rate_bps > 0.0)) throw Error("link profile '" + name + "': rate_bps must be > 0");
  if (!(one_way_delay_ms >= 0.0)) throw Error("link profile '" + name + "': one_way_delay_ms must be >= 0");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0))
    throw Error("link profile '" + name + "': loss_prob must be in [0, 1]");
  if (queue_capacity_bytes <= 0) throw Error("link profile '" + name + "': queue_capacity_bytes must be > 0");
}

namespace {

const char* kind_name(PacketKind k) {
  switch (k) {
    case PacketKind::Data: return "data";
    case PacketKind::Ack: return "ack";
    case PacketKind::Syn: return "syn";
    case PacketKind::SynAck: return "synack";
    case PacketKind::Background: return "bg";
  }
  return "?";
}

}  // namespace

Link::Link(Simulator& sim, std::string id, LinkProfile profile, Rng loss_rng)
    : sim_(sim), id_(std::move(id)), profile_(std::move(profile)), loss_rng_(loss_rng) {
  profile_.validate();
}

void Link::set_profile(const LinkProfile& profile) {
  profile.validate();
  profile_ = profile;
  if (sim_.tracing()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.9f %s profile %s", sim_.now(), id_.c_str(), profile_.name.c_str());
    sim_.trace(buf);
  }
}

Admission Link::transmit(Packet packet) {
  ++counters_.enqueued;
  packet.enqueue_time_s = sim_.now();
  const bool full = queue_bytes_ + packet.size_bytes > profile_.queue_capacity_bytes;
  if (sim_.tracing()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.9f %s %s f%d s%lld %s %d", sim_.now(), id_.c_str(),
                  full ? "tdrop" : "enq", packet.flow_id, static_cast<long long>(packet.seq),
                  kind_name(packet.kind), packet.size_bytes);
    sim_.trace(buf);
  }
  if (full) {
    ++counters_.tail_dropped;
    return Admission::TailDropped;
  }
  ++counters_.in_queue;
  queue_bytes_ += packet.size_bytes;
  queue_.push_back(std::move(packet));
  if (!busy_) start_serialization();
  return Admission::Accepted;
}

void Link::start_serialization() {
  busy_ = true;
  const Packet& head = queue_.front();
  // The profile in force when serialization starts governs this packet.
  const double ser_s = head.size_bytes * 8.0 / profile_.rate_bps;
  current_delay_s_ = profile_.one_way_delay_ms / 1000.0;
  current_lost_ = profile_.loss_prob > 0.0 && loss_rng_.bernoulli(profile_.loss_prob);
  sim_.schedule_in(ser_s, [this] { finish_serialization(); });
}

void Link::finish_serialization() {
  Packet packet = std::move(queue_.front());
  queue_.pop_front();
  queue_bytes_ -= packet.size_bytes;
  busy_ = false;

  if (current_lost_) {
    ++counters_.loss_dropped;
    --counters_.in_queue;
    if (sim_.tracing()) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.9f %s ldrop f%d s%lld %s %d", sim_.now(), id_.c_str(), packet.flow_id,
                    static_cast<long long>(packet.seq), kind_name(packet.kind), packet.size_bytes);
      sim_.trace(buf);
    }
  } else {
    // FIFO: a shorter delay after a profile change never overtakes earlier packets.
    const double at = std::max(sim_.now() + current_delay_s_, last_delivery_s_);
    last_delivery_s_ = at;
    sim_.schedule_at(at, [this, p = std::move(packet)]() mutable {
      ++counters_.delivered;
      --counters_.in_queue;
      if (sim_.tracing()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.9f %s dlv f%d s%lld %s %d", sim_.now(), id_.c_str(), p.flow_id,
                      static_cast<long long>(p.seq), kind_name(p.kind), p.size_bytes);
        sim_.trace(buf);
      }
      if (on_deliver_) on_deliver_(std::move(p));
    });
  }
  if (!queue_.empty()) start_serialization();
}

}  // namespace tacnet
