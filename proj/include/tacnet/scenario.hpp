#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "tacnet/topology.hpp"
#include "tacnet/traffic.hpp"

namespace tacnet {

/// Everything needed to instantiate one simulated network.
struct Scenario {
  std::string name = "custom";
  std::uint64_t seed = 1;
  DumbbellConfig hosts{{"sender", "traffic-gen"}, {"receiver", "traffic-sink"}};
  std::string sender = "sender";
  std::string receiver = "receiver";
  std::string traffic_source = "traffic-gen";
  std::string traffic_sink = "traffic-sink";
  LinkProfile access_profile{"access", 100e6, 0.0, 0.0, 10'000'000};
  TransitionSchedule bottleneck;
  /// Background pattern per bottleneck profile name.
  std::map<std::string, TrafficScript> traffic;

  /// Pattern bound to a schedule phase, or nullptr when the phase is quiet.
  const TrafficScript* script_for_phase(std::size_t phase) const;
  void validate() const;
};

/// Parses the JSON scenario document. Relative traffic file references are
/// resolved against `base_dir`. A profile without queue_capacity_bytes gets
/// one bandwidth-delay product.
Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);

/// Copy of `scenario` with the loss of the final schedule phase replaced.
Scenario with_final_loss(Scenario scenario, double loss_prob);

namespace scenarios {

LinkProfile satcom();
LinkProfile uhf(double loss_prob = 0.03);
TrafficScript satcom_pattern();
TrafficScript uhf_pattern();

/// SATCOM for 10 s then UHF, with background traffic on both phases.
Scenario tactical(double uhf_loss = 0.03);
/// Same link transition, no background traffic.
Scenario tactical_quiet(double uhf_loss = 0.03);
/// One lossy UHF link shared with the UHF background pattern.
Scenario desk(double loss = 0.03);
Scenario satcom_static();
Scenario uhf_static(double loss = 0.03);

/// Built-in by name (tactical, tactical-quiet, desk, satcom-static,
/// uhf-static), else a scenario file path.
Scenario resolve(const std::string& name_or_path);

}  // namespace scenarios

}  // namespace tacnet
