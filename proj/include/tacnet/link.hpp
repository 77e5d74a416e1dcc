#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>

#include "tacnet/rng.hpp"
#include "tacnet/sim.hpp"

namespace tacnet {

/// Physical behaviour of one link direction.
struct LinkProfile {
  std::string name;
  double rate_bps = 1e6;
  double one_way_delay_ms = 0.0;
  double loss_prob = 0.0;
  std::int64_t queue_capacity_bytes = 125000;

  /// Nominal round trip: twice the one-way delay, serialization excluded.
  double nominal_rtt_s() const { return 2.0 * one_way_delay_ms / 1000.0; }
  /// Bandwidth-delay product in bytes over the nominal round trip.
  double bdp_bytes() const { return rate_bps / 8.0 * nominal_rtt_s(); }

  /// Throws tacnet::Error when a field is out of range.
  void validate() const;
};

enum class PacketKind : std::uint8_t { Data, Ack, Syn, SynAck, Background };

struct SackBlock {
  std::int64_t begin = 0;  // first segment in block
  std::int64_t end = 0;    // one past the last segment
};

inline constexpr int kMaxSackBlocks = 4;

struct TransportHeader {
  std::int64_t tx_index = 0;
  std::int64_t cum_ack = 0;  // next expected segment
  std::int64_t echo_seq = -1;
  std::array<SackBlock, kMaxSackBlocks> sack{};
  int sack_count = 0;
};

struct Packet {
  int flow_id = 0;
  std::int64_t seq = 0;
  int size_bytes = 0;
  PacketKind kind = PacketKind::Data;
  double enqueue_time_s = 0.0;  // entry into the current link
  double inject_time_s = 0.0;   // entry into the network
  int src_host = 0;
  int dst_host = 0;
  int hop = 0;
  TransportHeader hdr{};
};

enum class Admission { Accepted, TailDropped };

struct LinkCounters {
  std::uint64_t enqueued = 0;  // every packet offered to the link
  std::uint64_t delivered = 0;
  std::uint64_t tail_dropped = 0;
  std::uint64_t loss_dropped = 0;
  std::uint64_t in_queue = 0;  // accepted, not yet delivered or lost
};

/// One direction of a point-to-point link: FIFO byte-limited queue, a
/// serializer at the active rate, Bernoulli loss drawn at serialization and
/// a fixed propagation delay. Profile changes apply to packets that have not
/// started serializing; queued bytes above a reduced capacity stay queued.
class Link {
 public:
  using DeliverFn = std::function<void(Packet)>;

  Link(Simulator& sim, std::string id, LinkProfile profile, Rng loss_rng);
  Link(const Link&) = delete;
  Link& operator=(const Link&) = delete;

  const std::string& id() const { return id_; }
  const LinkProfile& profile() const { return profile_; }
  void set_profile(const LinkProfile& profile);

  void set_on_deliver(DeliverFn fn) { on_deliver_ = std::move(fn); }

  /// Offers a packet to the queue at the current simulated time.
  Admission transmit(Packet packet);

  const LinkCounters& counters() const { return counters_; }
  /// Bytes waiting plus the packet being serialized.
  std::int64_t queue_bytes() const { return queue_bytes_; }
  bool conserved() const {
    return counters_.enqueued ==
           counters_.delivered + counters_.tail_dropped + counters_.loss_dropped + counters_.in_queue;
  }

 private:
  void start_serialization();
  void finish_serialization();

  Simulator& sim_;
  std::string id_;
  LinkProfile profile_;
  Rng loss_rng_;
  DeliverFn on_deliver_;

  std::deque<Packet> queue_;
  std::int64_t queue_bytes_ = 0;
  bool busy_ = false;
  bool current_lost_ = false;
  double current_delay_s_ = 0.0;
  double last_delivery_s_ = 0.0;
  LinkCounters counters_;
};

}  // namespace tacnet
