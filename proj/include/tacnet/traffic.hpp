#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tacnet/rng.hpp"

namespace tacnet {

struct Scenario;

enum class FlowKind { Elephant, Mice };
enum class Adaptivity { Adaptive, Nonadaptive };

struct BurstSpec {
  double mean_interval_s = 0.5;
  std::int64_t burst_bytes = 1500;
  double burst_duration_ms = 10.0;

  bool operator==(const BurstSpec&) const = default;
};

/// One scripted flow window, in period-local time.
struct TrafficLine {
  double start_s = 0.0;
  double stop_s = 0.0;
  std::string flow_id;
  FlowKind kind = FlowKind::Elephant;
  Adaptivity adaptivity = Adaptivity::Nonadaptive;
  double rate_bps = 0.0;  // elephants
  BurstSpec burst;        // mice

  /// Elephants: the scripted rate. Mice: burst_bytes * 8 / mean_interval_s.
  double mean_rate_bps() const;
  bool active_at(double local_t) const { return start_s <= local_t && local_t < stop_s; }

  bool operator==(const TrafficLine&) const = default;
};

/// Background pattern for one bottleneck profile phase, repeated every
/// period_s from the start of the phase.
struct TrafficScript {
  std::vector<TrafficLine> events;
  double period_s = 8.0;

  bool empty() const { return events.empty(); }
  bool operator==(const TrafficScript&) const = default;
};

/// Line grammar, one event per line, `#` starts a comment:
///   period <seconds>
///   <start_s> <stop_s> [flow_id] <ELEPHANT|MICE> <adaptive|nonadaptive> <rate_bps>
///   <start_s> <stop_s> [flow_id] MICE <adaptive|nonadaptive> <mean_interval_s> <burst_bytes> [burst_duration_ms]
/// A missing flow_id is replaced by "flow<line>".
TrafficScript parse_script(std::string_view text);
std::string to_text(const TrafficScript& script);

/// Deterministic background load at absolute time t: nonadaptive elephants
/// plus the mean rate of mice, for the pattern bound to the active profile.
double offered_load(const Scenario& scenario, double t);

/// Number of adaptive elephant windows active at t.
int active_adaptive_flows(const Scenario& scenario, double t);

/// Sorted times in (t0, t1) where the bottleneck rate, offered load or
/// adaptive-flow count may change.
std::vector<double> load_breakpoints(const Scenario& scenario, double t0, double t1);

enum class TrafficEventKind { AdaptiveStop = 0, AdaptiveStart = 1, Packet = 2 };

struct TrafficEvent {
  double time_s = 0.0;
  TrafficEventKind kind = TrafficEventKind::Packet;
  std::string flow_id;
  int bytes = 0;           // Packet
  double rate_bps = 0.0;   // AdaptiveStart: application rate cap
  std::size_t phase = 0;   // transition-schedule index that produced it
  std::size_t line = 0;

  bool operator==(const TrafficEvent&) const = default;
};

/// Incremental event source. Elephants emit back-to-back packets at their
/// rate; mice emit bursts whose start times are Poisson within each window.
/// Each (phase, line) pair owns its own random stream.
class TrafficGenerator {
 public:
  static constexpr int kPacketBytes = 1000;

  TrafficGenerator(const Scenario& scenario, std::uint64_t seed);

  /// All events with time < t_end not returned by earlier calls.
  std::vector<TrafficEvent> advance(double t_end);

 private:
  void generate_block();

  const Scenario& scenario_;
  Rng traffic_rng_;
  std::size_t phase_ = 0;
  std::int64_t period_index_ = 0;
  double generated_until_ = 0.0;
  std::vector<Rng> line_rngs_;
  std::vector<TrafficEvent> pending_;
};

std::vector<TrafficEvent> generate_events(const Scenario& scenario, std::uint64_t seed, double horizon_s);

}  // namespace tacnet
