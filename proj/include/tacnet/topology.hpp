#pragma once

#include <string>
#include <vector>

#include "tacnet/link.hpp"

namespace tacnet {

enum class Side { LS, RS };

struct Host {
  int id = 0;
  std::string name;
  Side side = Side::LS;
};

struct DumbbellConfig {
  std::vector<std::string> ls_hosts;
  std::vector<std::string> rs_hosts;
};

/// Two host groups joined by a single bottleneck. Each host has an uplink
/// and a downlink access link; the bottleneck has one link per direction.
struct Topology {
  std::vector<Host> hosts;
  std::string bottleneck_link = "bottleneck";
  std::vector<std::string> access_links;

  /// Link id of the bottleneck in the given direction of travel.
  static std::string bottleneck_direction(Side from);
  static std::string uplink(const Host& h) { return "access:" + h.name + ":up"; }
  static std::string downlink(const Host& h) { return "access:" + h.name + ":down"; }

  /// Throws on unknown names.
  const Host& host(const std::string& name) const;
  /// Ordered link ids from src to dst.
  std::vector<std::string> path(int src, int dst) const;
};

/// Errors on duplicate host names or an empty side.
Topology build_dumbbell(const DumbbellConfig& config);

struct TransitionEntry {
  double at_time_s = 0.0;
  LinkProfile profile;
};

struct TransitionSchedule {
  std::vector<TransitionEntry> entries;

  /// Non-empty, first entry at t = 0, strictly ascending times, valid profiles.
  void validate() const;
  /// Index of the latest entry with at_time_s <= t.
  std::size_t index_at(double t) const;
  /// Start of the phase containing t and end (infinity for the last phase).
  double phase_start(std::size_t index) const { return entries[index].at_time_s; }
  double phase_end(std::size_t index) const;
};

const LinkProfile& apply_transition(const TransitionSchedule& schedule, double now);

}  // namespace tacnet
