#include "tacnet/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tacnet {

using nlohmann::json;

const TrafficScript* Scenario::script_for_phase(std::size_t phase) const {
  if (phase >= bottleneck.entries.size()) return nullptr;
  auto it = traffic.find(bottleneck.entries[phase].profile.name);
  return it == traffic.end() ? nullptr : &it->second;
}

void Scenario::validate() const {
  bottleneck.validate();
  access_profile.validate();
  const Topology topo = build_dumbbell(hosts);
  for (const auto* role : {&sender, &receiver, &traffic_source, &traffic_sink}) topo.host(*role);
  if (topo.host(sender).side == topo.host(receiver).side)
    throw Error("scenario: sender and receiver must sit on opposite sides");
  if (topo.host(traffic_source).side == topo.host(traffic_sink).side)
    throw Error("scenario: traffic source and sink must sit on opposite sides");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LinkProfile profile_from_json(const json& j, const std::string& name) {
  LinkProfile p;
  p.name = j.value("name", name);
  p.rate_bps = j.at("rate_bps").get<double>();
  p.one_way_delay_ms = j.at("one_way_delay_ms").get<double>();
  p.loss_prob = j.value("loss_prob", 0.0);
  if (j.contains("queue_capacity_bytes")) {
    p.queue_capacity_bytes = j.at("queue_capacity_bytes").get<std::int64_t>();
  } else {
    p.queue_capacity_bytes = std::max<std::int64_t>(1500, std::llround(p.bdp_bytes()));
  }
  p.validate();
  return p;
}

json profile_to_json(const LinkProfile& p) {
  return json{{"rate_bps", p.rate_bps},
              {"one_way_delay_ms", p.one_way_delay_ms},
              {"loss_prob", p.loss_prob},
              {"queue_capacity_bytes", p.queue_capacity_bytes}};
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
  try {
    Scenario s;
    s.name = doc.value("name", std::string("custom"));
    s.seed = doc.value("seed", std::uint64_t{1});
    if (doc.contains("hosts")) {
      s.hosts.ls_hosts = doc["hosts"].at("ls").get<std::vector<std::string>>();
      s.hosts.rs_hosts = doc["hosts"].at("rs").get<std::vector<std::string>>();
    }
    s.sender = s.hosts.ls_hosts.empty() ? "" : s.hosts.ls_hosts.front();
    s.receiver = s.hosts.rs_hosts.empty() ? "" : s.hosts.rs_hosts.front();
    s.traffic_source = s.hosts.ls_hosts.size() > 1 ? s.hosts.ls_hosts[1] : s.sender;
    s.traffic_sink = s.hosts.rs_hosts.size() > 1 ? s.hosts.rs_hosts[1] : s.receiver;
    if (doc.contains("roles")) {
      const auto& r = doc["roles"];
      s.sender = r.value("sender", s.sender);
      s.receiver = r.value("receiver", s.receiver);
      s.traffic_source = r.value("traffic_source", s.traffic_source);
      s.traffic_sink = r.value("traffic_sink", s.traffic_sink);
    }
    if (doc.contains("access_profile")) s.access_profile = profile_from_json(doc["access_profile"], "access");

    std::map<std::string, LinkProfile> named;
    if (doc.contains("profiles"))
      for (const auto& [key, val] : doc["profiles"].items()) named[key] = profile_from_json(val, key);

    for (const auto& entry : doc.at("transitions")) {
      TransitionEntry te;
      te.at_time_s = entry.at("at_time_s").get<double>();
      const auto& prof = entry.at("profile");
      if (prof.is_string()) {
        auto it = named.find(prof.get<std::string>());
        if (it == named.end()) throw Error("scenario: unknown profile '" + prof.get<std::string>() + "'");
        te.profile = it->second;
      } else {
        te.profile = profile_from_json(prof, prof.value("name", "phase" + std::to_string(s.bottleneck.entries.size())));
      }
      s.bottleneck.entries.push_back(std::move(te));
    }

    if (doc.contains("traffic")) {
      for (const auto& [key, val] : doc["traffic"].items()) {
        std::string text;
        if (val.is_string()) {
          text = read_file(base_dir / val.get<std::string>());
        } else if (val.contains("file")) {
          text = read_file(base_dir / val["file"].get<std::string>());
        } else {
          text = val.at("text").get<std::string>();
        }
        s.traffic[key] = parse_script(text);
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.parent_path());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["seed"] = s.seed;
  doc["hosts"] = {{"ls", s.hosts.ls_hosts}, {"rs", s.hosts.rs_hosts}};
  doc["roles"] = {{"sender", s.sender},
                  {"receiver", s.receiver},
                  {"traffic_source", s.traffic_source},
                  {"traffic_sink", s.traffic_sink}};
  doc["access_profile"] = profile_to_json(s.access_profile);
  json profiles = json::object();
  json transitions = json::array();
  for (const auto& e : s.bottleneck.entries) {
    profiles[e.profile.name] = profile_to_json(e.profile);
    json inline_profile = profile_to_json(e.profile);
    inline_profile["name"] = e.profile.name;
    transitions.push_back({{"at_time_s", e.at_time_s}, {"profile", inline_profile}});
  }
  doc["profiles"] = profiles;
  doc["transitions"] = transitions;
  json traffic = json::object();
  for (const auto& [k, v] : s.traffic) traffic[k] = {{"text", to_text(v)}};
  doc["traffic"] = traffic;
  return doc.dump(2);
}

Scenario with_final_loss(Scenario scenario, double loss_prob) {
  if (scenario.bottleneck.entries.empty()) throw Error("scenario has no link profile");
  scenario.bottleneck.entries.back().profile.loss_prob = loss_prob;
  scenario.bottleneck.entries.back().profile.validate();
  return scenario;
}

namespace scenarios {

LinkProfile satcom() { return {"SATCOM", 1e6, 500.0, 0.0, 125000}; }

LinkProfile uhf(double loss_prob) { return {"UHF", 256e3, 125.0, loss_prob, 8000}; }

TrafficScript satcom_pattern() {
  // Two elephants alternating every 2 s at 40% of 1 Mb/s (one UDP-like, one
  // TCP-like) and two Poisson mice.
  return parse_script(
      "period 8\n"
      "0 2 video ELEPHANT nonadaptive 400000\n"
      "4 6 video ELEPHANT nonadaptive 400000\n"
      "2 4 bulk ELEPHANT adaptive 400000\n"
      "6 8 bulk ELEPHANT adaptive 400000\n"
      "0 8 mice-a MICE nonadaptive 0.5 1500\n"
      "0 8 mice-b MICE nonadaptive 0.5 1500\n");
}

TrafficScript uhf_pattern() {
  // UDP elephants stop on UHF; the TCP-like ones scale to 40% of 256 kb/s.
  return parse_script(
      "period 8\n"
      "0 2 bulk-a ELEPHANT adaptive 102400\n"
      "4 6 bulk-a ELEPHANT adaptive 102400\n"
      "2 4 bulk-b ELEPHANT adaptive 102400\n"
      "6 8 bulk-b ELEPHANT adaptive 102400\n"
      "0 8 mice-a MICE nonadaptive 0.5 1500\n"
      "0 8 mice-b MICE nonadaptive 0.5 1500\n");
}

Scenario tactical(double uhf_loss) {
  Scenario s = tactical_quiet(uhf_loss);
  s.name = "tactical";
  s.traffic["SATCOM"] = satcom_pattern();
  s.traffic["UHF"] = uhf_pattern();
  return s;
}

Scenario tactical_quiet(double uhf_loss) {
  Scenario s;
  s.name = "tactical-quiet";
  s.bottleneck.entries = {{0.0, satcom()}, {10.0, uhf(uhf_loss)}};
  return s;
}

Scenario desk(double loss) {
  Scenario s = uhf_static(loss);
  s.name = "desk";
  s.traffic["UHF"] = uhf_pattern();
  return s;
}

Scenario satcom_static() {
  Scenario s;
  s.name = "satcom-static";
  s.bottleneck.entries = {{0.0, satcom()}};
  return s;
}

Scenario uhf_static(double loss) {
  Scenario s;
  s.name = "uhf-static";
  s.bottleneck.entries = {{0.0, uhf(loss)}};
  return s;
}

Scenario resolve(const std::string& name_or_path) {
  if (name_or_path == "tactical") return tactical();
  if (name_or_path == "tactical-quiet") return tactical_quiet();
  if (name_or_path == "desk") return desk();
  if (name_or_path == "satcom-static") return satcom_static();
  if (name_or_path == "uhf-static") return uhf_static();
  return load_scenario(name_or_path);
}

}  // namespace scenarios

}  // namespace tacnet
