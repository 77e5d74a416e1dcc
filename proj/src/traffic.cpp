#include "tacnet/traffic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tacnet/scenario.hpp"

namespace tacnet {

double TrafficLine::mean_rate_bps() const {
  if (kind == FlowKind::Elephant) return rate_bps;
  return static_cast<double>(burst.burst_bytes) * 8.0 / burst.mean_interval_s;
}

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

double to_number(const std::string& tok, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || !std::isfinite(v))
    throw Error("traffic script line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  return v;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void validate_script(const TrafficScript& s) {
  if (!(s.period_s > 0.0)) throw Error("traffic script: period must be > 0");
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.start_s < 0.0 || e.stop_s < 0.0) throw Error("traffic script: negative time for flow " + e.flow_id);
    if (!(e.start_s < e.stop_s)) throw Error("traffic script: start must precede stop for flow " + e.flow_id);
    if (e.stop_s > s.period_s) throw Error("traffic script: flow " + e.flow_id + " extends past the period");
    if (e.kind == FlowKind::Elephant && e.rate_bps < 0.0)
      throw Error("traffic script: negative rate for flow " + e.flow_id);
    if (e.kind == FlowKind::Mice && (!(e.burst.mean_interval_s > 0.0) || e.burst.burst_bytes <= 0 ||
                                     e.burst.burst_duration_ms < 0.0))
      throw Error("traffic script: invalid burst definition for flow " + e.flow_id);
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = s.events[j];
      if (o.flow_id == e.flow_id && o.start_s < e.stop_s && e.start_s < o.stop_s)
        throw Error("traffic script: overlapping windows for flow " + e.flow_id);
    }
  }
}

}  // namespace

TrafficScript parse_script(std::string_view text) {
  TrafficScript script;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const std::string where = "traffic script line " + std::to_string(line_no);
    if (upper(tok[0]) == "PERIOD") {
      if (tok.size() != 2) throw Error(where + ": expected 'period <seconds>'");
      script.period_s = to_number(tok[1], line_no);
      continue;
    }
    if (tok.size() < 5) throw Error(where + ": too few fields");

    TrafficLine ev;
    ev.start_s = to_number(tok[0], line_no);
    ev.stop_s = to_number(tok[1], line_no);
    std::size_t k = 2;
    const std::string maybe_kind = upper(tok[2]);
    if (maybe_kind == "ELEPHANT" || maybe_kind == "MICE") {
      ev.flow_id = "flow" + std::to_string(line_no);
    } else {
      ev.flow_id = tok[2];
      k = 3;
    }
    if (tok.size() < k + 3) throw Error(where + ": too few fields");
    const std::string kind = upper(tok[k]);
    if (kind == "ELEPHANT") {
      ev.kind = FlowKind::Elephant;
    } else if (kind == "MICE") {
      ev.kind = FlowKind::Mice;
    } else {
      throw Error(where + ": unknown flow kind '" + tok[k] + "'");
    }
    const std::string adapt = upper(tok[k + 1]);
    if (adapt == "ADAPTIVE") {
      ev.adaptivity = Adaptivity::Adaptive;
    } else if (adapt == "NONADAPTIVE") {
      ev.adaptivity = Adaptivity::Nonadaptive;
    } else {
      throw Error(where + ": unknown adaptivity '" + tok[k + 1] + "'");
    }
    const std::size_t params = tok.size() - (k + 2);
    if (ev.kind == FlowKind::Elephant) {
      if (params != 1) throw Error(where + ": elephant expects <rate_bps>");
      ev.rate_bps = to_number(tok[k + 2], line_no);
    } else {
      if (params != 2 && params != 3) throw Error(where + ": mice expects <mean_interval_s> <burst_bytes>");
      ev.burst.mean_interval_s = to_number(tok[k + 2], line_no);
      ev.burst.burst_bytes = static_cast<std::int64_t>(to_number(tok[k + 3], line_no));
      if (params == 3) ev.burst.burst_duration_ms = to_number(tok[k + 4], line_no);
    }
    script.events.push_back(std::move(ev));
  }
  validate_script(script);
  return script;
}

std::string to_text(const TrafficScript& script) {
  std::string out = "period " + format_number(script.period_s) + "\n";
  for (const auto& e : script.events) {
    out += format_number(e.start_s) + " " + format_number(e.stop_s) + " " + e.flow_id + " ";
    out += e.kind == FlowKind::Elephant ? "ELEPHANT " : "MICE ";
    out += e.adaptivity == Adaptivity::Adaptive ? "adaptive " : "nonadaptive ";
    if (e.kind == FlowKind::Elephant) {
      out += format_number(e.rate_bps);
    } else {
      out += format_number(e.burst.mean_interval_s) + " " + std::to_string(e.burst.burst_bytes) + " " +
             format_number(e.burst.burst_duration_ms);
    }
    out += "\n";
  }
  return out;
}

namespace {

double local_time(const TrafficScript& s, double phase_start, double t) {
  double tau = std::fmod(t - phase_start, s.period_s);
  if (tau < 0.0) tau += s.period_s;
  return tau;
}

}  // namespace

double offered_load(const Scenario& scenario, double t) {
  if (t < 0.0) return 0.0;
  const std::size_t phase = scenario.bottleneck.index_at(t);
  const TrafficScript* script = scenario.script_for_phase(phase);
  if (!script) return 0.0;
  const double tau = local_time(*script, scenario.bottleneck.phase_start(phase), t);
  double load = 0.0;
  for (const auto& e : script->events) {
    if (!e.active_at(tau)) continue;
    if (e.kind == FlowKind::Mice || e.adaptivity == Adaptivity::Nonadaptive) load += e.mean_rate_bps();
  }
  return load;
}

int active_adaptive_flows(const Scenario& scenario, double t) {
  if (t < 0.0) return 0;
  const std::size_t phase = scenario.bottleneck.index_at(t);
  const TrafficScript* script = scenario.script_for_phase(phase);
  if (!script) return 0;
  const double tau = local_time(*script, scenario.bottleneck.phase_start(phase), t);
  int n = 0;
  for (const auto& e : script->events)
    if (e.kind == FlowKind::Elephant && e.adaptivity == Adaptivity::Adaptive && e.active_at(tau)) ++n;
  return n;
}

std::vector<double> load_breakpoints(const Scenario& scenario, double t0, double t1) {
  std::vector<double> points;
  const auto& sched = scenario.bottleneck;
  for (std::size_t p = 0; p < sched.entries.size(); ++p) {
    const double ps = sched.phase_start(p);
    const double pe = std::min(sched.phase_end(p), t1);
    if (ps >= t1 || pe <= t0) continue;
    if (ps > t0) points.push_back(ps);
    const TrafficScript* script = scenario.script_for_phase(p);
    if (!script) continue;
    const double from = std::max(ps, t0);
    auto k = static_cast<std::int64_t>(std::floor((from - ps) / script->period_s));
    for (;; ++k) {
      const double base = ps + static_cast<double>(k) * script->period_s;
      if (base >= pe) break;
      if (base > t0) points.push_back(base);
      for (const auto& e : script->events) {
        for (double edge : {base + e.start_s, base + e.stop_s})
          if (edge > t0 && edge < pe) points.push_back(edge);
      }
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

TrafficGenerator::TrafficGenerator(const Scenario& scenario, std::uint64_t seed)
    : scenario_(scenario), traffic_rng_(Rng(seed).substream("traffic")) {
  scenario_.bottleneck.validate();
}

void TrafficGenerator::generate_block() {
  const auto& sched = scenario_.bottleneck;
  const TrafficScript* script = scenario_.script_for_phase(phase_);
  const double ps = sched.phase_start(phase_);
  const double pe = sched.phase_end(phase_);

  if (period_index_ == 0) {
    line_rngs_.clear();
    if (script)
      for (std::size_t i = 0; i < script->events.size(); ++i)
        line_rngs_.push_back(traffic_rng_.substream(std::to_string(phase_) + "/" + std::to_string(i)));
  }

  if (!script || script->empty()) {
    // quiet phase: nothing until the next transition
    generated_until_ = pe;
    ++phase_;
    period_index_ = 0;
    return;
  }

  const double base = ps + static_cast<double>(period_index_) * script->period_s;
  const double block_end = std::min(base + script->period_s, pe);
  std::vector<TrafficEvent> block;

  for (std::size_t li = 0; li < script->events.size(); ++li) {
    const TrafficLine& e = script->events[li];
    const double w0 = base + e.start_s;
    const double w1 = std::min(base + e.stop_s, pe);
    if (e.kind == FlowKind::Elephant && e.adaptivity == Adaptivity::Adaptive) {
      if (w0 < block_end && w0 < w1) {
        block.push_back({w0, TrafficEventKind::AdaptiveStart, e.flow_id, 0, e.rate_bps, phase_, li});
        block.push_back({w1, TrafficEventKind::AdaptiveStop, e.flow_id, 0, 0.0, phase_, li});
      }
    } else if (e.kind == FlowKind::Elephant) {
      if (e.rate_bps <= 0.0) continue;
      const double gap = kPacketBytes * 8.0 / e.rate_bps;
      for (std::int64_t j = 0;; ++j) {
        const double t = w0 + static_cast<double>(j) * gap;
        if (t >= w1) break;
        block.push_back({t, TrafficEventKind::Packet, e.flow_id, kPacketBytes, 0.0, phase_, li});
      }
    } else {
      // Poisson burst arrivals restart at each window start; the stream
      // continues across periods so draws depend only on seed and index.
      Rng& rng = line_rngs_[li];
      const auto npkts = (e.burst.burst_bytes + kPacketBytes - 1) / kPacketBytes;
      const double spacing = npkts > 1 ? e.burst.burst_duration_ms / 1000.0 / static_cast<double>(npkts) : 0.0;
      double t = w0;
      for (;;) {
        t += rng.exponential(e.burst.mean_interval_s);
        if (t >= w1) break;
        std::int64_t left = e.burst.burst_bytes;
        for (std::int64_t j = 0; j < npkts; ++j) {
          const double tp = t + static_cast<double>(j) * spacing;
          const int bytes = static_cast<int>(std::min<std::int64_t>(left, kPacketBytes));
          left -= bytes;
          if (tp < pe) block.push_back({tp, TrafficEventKind::Packet, e.flow_id, bytes, 0.0, phase_, li});
        }
      }
    }
  }

  std::stable_sort(block.begin(), block.end(), [](const TrafficEvent& a, const TrafficEvent& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  pending_.insert(pending_.end(), block.begin(), block.end());

  generated_until_ = block_end;
  if (block_end >= pe) {
    ++phase_;
    period_index_ = 0;
  } else {
    ++period_index_;
  }
}

std::vector<TrafficEvent> TrafficGenerator::advance(double t_end) {
  while (generated_until_ < t_end && phase_ < scenario_.bottleneck.entries.size()) generate_block();
  // blocks are generated in time order but bursts may spill past block ends
  std::stable_sort(pending_.begin(), pending_.end(), [](const TrafficEvent& a, const TrafficEvent& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  auto split = std::partition_point(pending_.begin(), pending_.end(),
                                    [&](const TrafficEvent& e) { return e.time_s < t_end; });
  std::vector<TrafficEvent> out(pending_.begin(), split);
  pending_.erase(pending_.begin(), split);
  return out;
}

std::vector<TrafficEvent> generate_events(const Scenario& scenario, std::uint64_t seed, double horizon_s) {
  TrafficGenerator gen(scenario, seed);
  return gen.advance(horizon_s);
}

}  // namespace tacnet
