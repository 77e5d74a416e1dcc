#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tacnet/baselines.hpp"
#include "tacnet/link.hpp"
#include "tacnet/scenario.hpp"
#include "tacnet/sim.hpp"
#include "tacnet/topology.hpp"
#include "tacnet/traffic.hpp"
#include "tacnet/transport.hpp"

namespace tacnet {

struct NetworkOptions {
  TransportConfig transport;
  bool trace = false;
  bool background_traffic = true;
};

/// One self-contained simulation instance: the dumbbell links, the scripted
/// bottleneck transitions, background traffic, and the measured flow
/// between the scenario's sender and receiver. Instances share nothing and
/// can be moved to other threads.
class Network {
 public:
  static constexpr int kMeasuredFlow = 1;

  Network(Scenario scenario, std::uint64_t seed, NetworkOptions options = {});
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  Simulator& sim() { return sim_; }
  const Simulator& sim() const { return sim_; }
  const Scenario& scenario() const { return scenario_; }
  const Topology& topology() const { return topology_; }
  std::uint64_t seed() const { return seed_; }

  Link& link(const std::string& id);
  std::vector<const Link*> links() const;
  Link& bottleneck_forward() { return link(Topology::bottleneck_direction(Side::LS)); }
  const LinkProfile& active_profile() const;
  bool all_links_conserved() const;

  Connection& sender() { return *sender_; }
  Receiver& receiver() { return *receiver_; }

  /// Sends a packet from one host to another along the dumbbell path.
  void inject(Packet packet, int src_host, int dst_host);

  std::int64_t background_packets_delivered() const { return background_delivered_; }
  std::size_t adaptive_flow_count() const { return adaptive_.size(); }

 private:
  struct AdaptiveFlow {
    std::unique_ptr<Connection> conn;
    std::unique_ptr<Receiver> rx;
    std::unique_ptr<CubicController> cubic;
    bool active = false;
    double rate_bps = 0.0;
    double byte_credit = 0.0;
    std::uint64_t generation = 0;
  };

  void forward(Packet packet);
  void deliver(Packet packet);
  void pump_traffic();
  void handle_traffic(const TrafficEvent& ev);
  void adaptive_tick(const std::string& flow, std::uint64_t generation);
  int flow_number(const std::string& flow_id);

  Scenario scenario_;
  std::uint64_t seed_;
  NetworkOptions options_;
  Simulator sim_;
  Topology topology_;
  std::map<std::string, std::unique_ptr<Link>> links_;
  std::vector<std::vector<Link*>> paths_;  // src * hosts + dst
  std::map<std::pair<int, int>, std::function<void(const Packet&)>> endpoints_;

  int sender_host_ = 0;
  int receiver_host_ = 0;
  int traffic_src_host_ = 0;
  int traffic_dst_host_ = 0;
  std::unique_ptr<Connection> sender_;
  std::unique_ptr<Receiver> receiver_;

  std::unique_ptr<TrafficGenerator> traffic_;
  std::map<std::string, int> flow_numbers_;
  std::map<std::string, std::int64_t> background_seq_;
  std::map<std::string, AdaptiveFlow> adaptive_;
  std::int64_t background_delivered_ = 0;
};

}  // namespace tacnet
