#include "tacnet/topology.hpp"

#include <limits>
#include <set>

namespace tacnet {

std::string Topology::bottleneck_direction(Side from) {
  return from == Side::LS ? "bottleneck:fwd" : "bottleneck:rev";
}

const Host& Topology::host(const std::string& name) const {
  for (const auto& h : hosts)
    if (h.name == name) return h;
  throw Error("unknown host '" + name + "'");
}

std::vector<std::string> Topology::path(int src, int dst) const {
  const Host& a = hosts.at(src);
  const Host& b = hosts.at(dst);
  std::vector<std::string> links{uplink(a)};
  if (a.side != b.side) links.push_back(bottleneck_direction(a.side));
  links.push_back(downlink(b));
  return links;
}

Topology build_dumbbell(const DumbbellConfig& config) {
  if (config.ls_hosts.empty()) throw Error("dumbbell: LS side has no hosts");
  if (config.rs_hosts.empty()) throw Error("dumbbell: RS side has no hosts");
  Topology topo;
  std::set<std::string> seen;
  auto add = [&](const std::string& name, Side side) {
    if (name.empty()) throw Error("dumbbell: empty host name");
    if (!seen.insert(name).second) throw Error("dumbbell: duplicate host '" + name + "'");
    Host h{static_cast<int>(topo.hosts.size()), name, side};
    topo.access_links.push_back(Topology::uplink(h));
    topo.access_links.push_back(Topology::downlink(h));
    topo.hosts.push_back(std::move(h));
  };
  for (const auto& n : config.ls_hosts) add(n, Side::LS);
  for (const auto& n : config.rs_hosts) add(n, Side::RS);
  return topo;
}

void TransitionSchedule::validate() const {
  if (entries.empty()) throw Error("transition schedule is empty");
  if (entries.front().at_time_s != 0.0) throw Error("transition schedule must start at t = 0");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].profile.validate();
    if (i > 0 && !(entries[i].at_time_s > entries[i - 1].at_time_s))
      throw Error("transition schedule times must be strictly ascending");
  }
}

std::size_t TransitionSchedule::index_at(double t) const {
  if (entries.empty()) throw Error("transition schedule is empty");
  std::size_t idx = 0;
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].at_time_s <= t) idx = i;
  return idx;
}

double TransitionSchedule::phase_end(std::size_t index) const {
  return index + 1 < entries.size() ? entries[index + 1].at_time_s : std::numeric_limits<double>::infinity();
}

const LinkProfile& apply_transition(const TransitionSchedule& schedule, double now) {
  return schedule.entries[schedule.index_at(now)].profile;
}

}  // namespace tacnet
