#include "tacnet/network.hpp"

namespace tacnet {

namespace {
constexpr double kTrafficPumpS = 1.0;
constexpr double kAppTickS = 0.01;
}  // namespace

Network::Network(Scenario scenario, std::uint64_t seed, NetworkOptions options)
    : scenario_(std::move(scenario)), seed_(seed), options_(options) {
  scenario_.validate();
  sim_.enable_trace(options_.trace);
  topology_ = build_dumbbell(scenario_.hosts);
  const Rng root(seed_);

  for (const auto& id : topology_.access_links) {
    LinkProfile p = scenario_.access_profile;
    links_[id] = std::make_unique<Link>(sim_, id, p, root.substream("loss/" + id));
  }
  const LinkProfile& first = scenario_.bottleneck.entries.front().profile;
  for (Side side : {Side::LS, Side::RS}) {
    const std::string id = Topology::bottleneck_direction(side);
    links_[id] = std::make_unique<Link>(sim_, id, first, root.substream("loss/" + id));
  }
  for (auto& [id, l] : links_) {
    l->set_on_deliver([this](Packet p) { forward(std::move(p)); });
  }

  const std::size_t n = topology_.hosts.size();
  paths_.resize(n * n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t d = 0; d < n; ++d) {
      if (s == d) continue;
      for (const auto& id : topology_.path(static_cast<int>(s), static_cast<int>(d)))
        paths_[s * n + d].push_back(links_.at(id).get());
    }

  for (std::size_t i = 1; i < scenario_.bottleneck.entries.size(); ++i) {
    const auto& entry = scenario_.bottleneck.entries[i];
    sim_.schedule_at(entry.at_time_s, [this, profile = entry.profile] {
      link(Topology::bottleneck_direction(Side::LS)).set_profile(profile);
      link(Topology::bottleneck_direction(Side::RS)).set_profile(profile);
    });
  }

  sender_host_ = topology_.host(scenario_.sender).id;
  receiver_host_ = topology_.host(scenario_.receiver).id;
  traffic_src_host_ = topology_.host(scenario_.traffic_source).id;
  traffic_dst_host_ = topology_.host(scenario_.traffic_sink).id;

  sender_ = std::make_unique<Connection>(sim_, kMeasuredFlow, options_.transport,
                                         [this](Packet p) { inject(std::move(p), sender_host_, receiver_host_); });
  receiver_ = std::make_unique<Receiver>(sim_, kMeasuredFlow, options_.transport,
                                         [this](Packet p) { inject(std::move(p), receiver_host_, sender_host_); });
  endpoints_[{receiver_host_, kMeasuredFlow}] = [this](const Packet& p) { receiver_->on_packet(p); };
  endpoints_[{sender_host_, kMeasuredFlow}] = [this](const Packet& p) { sender_->on_packet(p); };

  if (options_.background_traffic && !scenario_.traffic.empty()) {
    traffic_ = std::make_unique<TrafficGenerator>(scenario_, seed_);
    sim_.schedule_at(0.0, [this] { pump_traffic(); });
  }
}

Link& Network::link(const std::string& id) {
  auto it = links_.find(id);
  if (it == links_.end()) throw Error("unknown link '" + id + "'");
  return *it->second;
}

std::vector<const Link*> Network::links() const {
  std::vector<const Link*> out;
  for (const auto& [id, l] : links_) out.push_back(l.get());
  return out;
}

const LinkProfile& Network::active_profile() const {
  return links_.at(Topology::bottleneck_direction(Side::LS))->profile();
}

bool Network::all_links_conserved() const {
  for (const auto& [id, l] : links_)
    if (!l->conserved()) return false;
  return true;
}

void Network::inject(Packet packet, int src_host, int dst_host) {
  packet.src_host = src_host;
  packet.dst_host = dst_host;
  packet.inject_time_s = sim_.now();
  packet.hop = 0;
  forward(std::move(packet));
}

void Network::forward(Packet packet) {
  const auto& path = paths_[static_cast<std::size_t>(packet.src_host) * topology_.hosts.size() +
                            static_cast<std::size_t>(packet.dst_host)];
  if (packet.hop >= static_cast<int>(path.size())) {
    deliver(std::move(packet));
    return;
  }
  Link* next = path[static_cast<std::size_t>(packet.hop)];
  ++packet.hop;
  next->transmit(std::move(packet));
}

void Network::deliver(Packet packet) {
  auto it = endpoints_.find({packet.dst_host, packet.flow_id});
  if (it != endpoints_.end()) {
    it->second(packet);
  } else if (packet.kind == PacketKind::Background) {
    ++background_delivered_;
  }
}

int Network::flow_number(const std::string& flow_id) {
  auto [it, inserted] = flow_numbers_.emplace(flow_id, 100 + static_cast<int>(flow_numbers_.size()));
  return it->second;
}

void Network::pump_traffic() {
  const double until = sim_.now() + kTrafficPumpS;
  for (auto& ev : traffic_->advance(until)) {
    sim_.schedule_at(ev.time_s, [this, ev] { handle_traffic(ev); });
  }
  sim_.schedule_at(until, [this] { pump_traffic(); });
}

void Network::handle_traffic(const TrafficEvent& ev) {
  switch (ev.kind) {
    case TrafficEventKind::Packet: {
      Packet p;
      p.flow_id = flow_number(ev.flow_id);
      p.seq = background_seq_[ev.flow_id]++;
      p.kind = PacketKind::Background;
      p.size_bytes = ev.bytes;
      inject(std::move(p), traffic_src_host_, traffic_dst_host_);
      break;
    }
    case TrafficEventKind::AdaptiveStart: {
      AdaptiveFlow& f = adaptive_[ev.flow_id];
      if (!f.conn) {
        const int id = flow_number(ev.flow_id);
        f.conn = std::make_unique<Connection>(sim_, id, options_.transport, [this](Packet p) {
          inject(std::move(p), traffic_src_host_, traffic_dst_host_);
        });
        f.rx = std::make_unique<Receiver>(sim_, id, options_.transport, [this](Packet p) {
          inject(std::move(p), traffic_dst_host_, traffic_src_host_);
        });
        f.cubic = std::make_unique<CubicController>();
        f.conn->set_observer(f.cubic.get());
        Connection* c = f.conn.get();
        Receiver* r = f.rx.get();
        endpoints_[{traffic_dst_host_, id}] = [r](const Packet& p) { r->on_packet(p); };
        endpoints_[{traffic_src_host_, id}] = [c](const Packet& p) { c->on_packet(p); };
        f.conn->open();
      }
      f.active = true;
      f.rate_bps = ev.rate_bps;
      f.byte_credit = 0.0;
      const std::uint64_t gen = ++f.generation;
      adaptive_tick(ev.flow_id, gen);
      break;
    }
    case TrafficEventKind::AdaptiveStop: {
      auto it = adaptive_.find(ev.flow_id);
      if (it == adaptive_.end()) break;
      it->second.active = false;
      ++it->second.generation;
      it->second.conn->clear_send_queue();
      break;
    }
  }
}

void Network::adaptive_tick(const std::string& flow, std::uint64_t generation) {
  AdaptiveFlow& f = adaptive_.at(flow);
  if (!f.active || f.generation != generation) return;
  // application-limited bulk source: at most rate_bps of fresh data
  f.byte_credit += f.rate_bps * kAppTickS / 8.0;
  const auto whole = static_cast<std::int64_t>(f.byte_credit);
  if (whole > 0 && f.conn->state().send_queue_bytes < 4 * options_.transport.segment_bytes) {
    f.conn->send_payload(whole);
    f.byte_credit -= static_cast<double>(whole);
  } else if (whole > 0) {
    f.byte_credit = 0.0;  // sender is backlogged; drop unused credit
  }
  sim_.schedule_in(kAppTickS, [this, flow, generation] { adaptive_tick(flow, generation); });
}

}  // namespace tacnet
