#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "tacnet/link.hpp"
#include "tacnet/sim.hpp"

namespace tacnet {

struct TransportConfig {
  int segment_bytes = 1000;
  int ack_bytes = 40;
  int handshake_bytes = 40;
  std::int64_t cwnd_cap_bytes = 150000;
  std::int64_t cwnd_min_bytes = 2000;
  std::int64_t initial_cwnd_bytes = 2000;
  double rto_initial_ms = 3000.0;
  double rto_min_ms = 200.0;
  double rto_max_ms = 60000.0;
  int dup_threshold = 3;
  double stats_window_s = 0.1;
};

/// Per-connection statistic schema. Bump the version whenever the list or
/// order changes; checkpoints record it.
inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr int kFeatureCount = 14;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "acked_bytes_window", "sent_bytes_window", "retransmissions_window", "timeouts_window",
    "acks_window",        "cumulative_acked_kb", "last_rtt_ms",          "min_rtt_window_ms",
    "max_rtt_window_ms",  "srtt_ms",           "rttvar_ms",              "cwnd_bytes",
    "bytes_in_flight",    "send_queue_bytes"};

using FeatureVector = std::array<double, kFeatureCount>;

struct WindowCounters {
  std::int64_t sent_bytes = 0;
  std::int64_t acked_bytes = 0;
  std::int64_t retransmissions = 0;
  std::int64_t timeouts = 0;
  std::int64_t acks_received = 0;
  double min_rtt_ms = 0.0;  // 0 until the first sample of the window
  double max_rtt_ms = 0.0;
};

struct ConnectionState {
  std::int64_t cwnd_bytes = 0;
  std::int64_t bytes_in_flight = 0;
  std::int64_t next_seq = 0;
  std::int64_t snd_una = 0;
  std::int64_t send_queue_bytes = 0;
  std::set<std::int64_t> sacked;  // acked segments above snd_una
  std::int64_t lost_bytes = 0;    // in flight but presumed lost, awaiting retransmission
  bool has_rtt = false;
  double srtt_ms = 0.0;
  double rttvar_ms = 0.0;
  double rto_ms = 0.0;
  double last_rtt_ms = 0.0;
  double cumulative_acked_kb = 0.0;
  WindowCounters window;

  std::int64_t total_enqueued_bytes = 0;
  std::int64_t total_acked_bytes = 0;
  std::int64_t data_packets_sent = 0;
  std::int64_t retransmissions = 0;
  std::int64_t timeouts = 0;
  std::int64_t protocol_errors = 0;
};

/// Feature series gathered over one decision window. Each series holds one
/// sample per transport event in the window plus a closing sample.
struct StatSnapshot {
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  std::array<std::vector<double>, kFeatureCount> series;
};

struct RttSample {
  double time_s = 0.0;
  double rtt_ms = 0.0;
};

enum class LossKind { Gap, Timeout };

class Connection;

/// Hooks for sender-side congestion controllers.
class CongestionObserver {
 public:
  virtual ~CongestionObserver() = default;
  virtual void on_ack(Connection& conn, double now, std::int64_t newly_acked_bytes) = 0;
  virtual void on_loss(Connection& conn, double now, LossKind kind, std::int64_t seq) = 0;
};

/// Sender half of the reliable transport: fixed-size segments, selective
/// acknowledgements, RFC 6298 style RTT estimation with Karn's rule,
/// gap-based loss detection and an exponentially backed-off timer. Segments
/// presumed lost stop counting against the window until retransmitted, and
/// retransmissions go out ahead of new data.
class Connection {
 public:
  using EmitFn = std::function<void(Packet)>;

  Connection(Simulator& sim, int flow_id, TransportConfig config, EmitFn emit);
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  int flow_id() const { return flow_id_; }
  const TransportConfig& config() const { return config_; }
  const ConnectionState& state() const { return state_; }

  /// Starts the one round-trip handshake.
  void open();
  bool established() const { return established_; }
  double open_time() const { return open_time_; }
  double established_time() const { return established_time_; }
  void close() { closed_ = true; }

  /// Queues `n_bytes` of application payload; returns the bytes accepted.
  std::int64_t send_payload(std::int64_t n_bytes);
  /// Drops payload that has not been segmented yet.
  void clear_send_queue();

  /// Clamps to [cwnd_min, cwnd_cap] and re-evaluates sending.
  std::int64_t set_cwnd(double target_bytes);

  /// Entry point for packets addressed to the sender.
  void on_packet(const Packet& packet);
  void on_ack(const Packet& ack);
  void on_timeout();

  void begin_window(double now);
  /// Must be called exactly one stats window after the previous call.
  StatSnapshot collect_window_stats(double now);

  bool all_acked() const {
    return state_.total_enqueued_bytes > 0 && state_.total_acked_bytes == state_.total_enqueued_bytes &&
           state_.send_queue_bytes == 0;
  }
  double completion_time() const { return completion_time_; }

  const std::vector<RttSample>& rtt_samples() const { return rtt_samples_; }
  int transmissions_of(std::int64_t seq) const { return segments_.at(static_cast<std::size_t>(seq)).transmissions; }
  bool timer_armed() const { return timer_armed_; }
  double timer_deadline() const { return timer_deadline_; }

  void set_observer(CongestionObserver* observer) { observer_ = observer; }

  FeatureVector current_features() const;

 private:
  struct Segment {
    int size = 0;
    double first_sent = 0.0;
    double last_sent = 0.0;
    std::int64_t last_tx = 0;
    int transmissions = 0;
    int dup_after = 0;
    bool acked = false;
    bool lost = false;
  };

  void send_syn();
  void try_send();
  void transmit(std::int64_t seq, bool retransmission);
  void mark_lost(std::int64_t seq);
  std::int64_t pipe() const { return state_.bytes_in_flight - state_.lost_bytes; }
  void take_rtt_sample(double rtt_ms);
  double rto_from_estimator() const;
  void arm_timer(double at);
  void disarm_timer();
  void restart_timer() { arm_timer(sim_.now() + state_.rto_ms / 1000.0); }
  void record_sample();

  Simulator& sim_;
  int flow_id_;
  TransportConfig config_;
  EmitFn emit_;
  CongestionObserver* observer_ = nullptr;

  ConnectionState state_;
  std::vector<Segment> segments_;
  std::set<std::int64_t> lost_queue_;
  std::int64_t tx_counter_ = 0;

  bool opened_ = false;
  bool established_ = false;
  bool closed_ = false;
  int syn_transmissions_ = 0;
  double syn_sent_ = 0.0;
  double open_time_ = 0.0;
  double established_time_ = std::numeric_limits<double>::quiet_NaN();
  double completion_time_ = std::numeric_limits<double>::quiet_NaN();

  bool timer_armed_ = false;
  double timer_deadline_ = 0.0;
  std::uint64_t timer_generation_ = 0;

  double window_start_ = 0.0;
  std::vector<FeatureVector> window_samples_;
  std::vector<RttSample> rtt_samples_;
};

/// Receiver half: reassembles segments, delivers each one to the
/// application exactly once and in order, and acknowledges every data packet.
class Receiver {
 public:
  using EmitFn = std::function<void(Packet)>;

  Receiver(Simulator& sim, int flow_id, TransportConfig config, EmitFn emit);

  void on_packet(const Packet& packet);

  /// Segments handed to the application, in delivery order.
  const std::vector<std::int64_t>& delivered() const { return delivered_; }
  std::int64_t delivered_bytes() const { return delivered_bytes_; }
  std::int64_t duplicates_received() const { return duplicates_; }
  std::int64_t next_expected() const { return next_expected_; }

 private:
  Simulator& sim_;
  int flow_id_;
  TransportConfig config_;
  EmitFn emit_;
  std::int64_t next_expected_ = 0;
  std::map<std::int64_t, int> out_of_order_;  // seq -> payload bytes
  std::vector<std::int64_t> delivered_;
  std::int64_t delivered_bytes_ = 0;
  std::int64_t duplicates_ = 0;
};

}  // namespace tacnet
