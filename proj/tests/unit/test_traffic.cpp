#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "tacnet/scenario.hpp"
#include "tacnet/traffic.hpp"

using namespace tacnet;

TEST_CASE("parse_script single elephant") {
  const TrafficScript s = parse_script("0.0 2.0 ELEPHANT nonadaptive 400000");
  REQUIRE(s.events.size() == 1);
  const TrafficLine& e = s.events[0];
  CHECK(e.start_s == 0.0);
  CHECK(e.stop_s == 2.0);
  CHECK(e.stop_s - e.start_s == 2.0);
  CHECK(e.kind == FlowKind::Elephant);
  CHECK(e.adaptivity == Adaptivity::Nonadaptive);
  CHECK(e.rate_bps == 400000.0);
  CHECK(e.mean_rate_bps() == 400000.0);
  CHECK(parse_script(to_text(s)) == s);
}

TEST_CASE("parse_script round trip of the built-in patterns") {
  for (const auto& s : {scenarios::satcom_pattern(), scenarios::uhf_pattern()}) {
    CHECK(parse_script(to_text(s)) == s);
    CHECK(to_text(parse_script(to_text(s))) == to_text(s));
  }
}

TEST_CASE("parse_script empty and comments") {
  CHECK(parse_script("").empty());
  CHECK(parse_script("# nothing here\n\n   \n").empty());
  const TrafficScript s = parse_script("period 4 # seconds\n0 1 m MICE nonadaptive 0.25 3000 20 # bursty\n");
  CHECK(s.period_s == 4.0);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].burst == BurstSpec{0.25, 3000, 20.0});
  CHECK(s.events[0].mean_rate_bps() == doctest::Approx(3000 * 8 / 0.25));
}

TEST_CASE("parse_script errors") {
  CHECK_THROWS_AS(parse_script("2.0 1.0 ELEPHANT nonadaptive 1000"), Error);
  CHECK_THROWS_AS(parse_script("-1 1 ELEPHANT nonadaptive 1000"), Error);
  CHECK_THROWS_AS(parse_script("0 1 WHALE nonadaptive 1000"), Error);
  CHECK_THROWS_AS(parse_script("0 1 ELEPHANT sometimes 1000"), Error);
  CHECK_THROWS_AS(parse_script("0 1 ELEPHANT nonadaptive -5"), Error);
  CHECK_THROWS_AS(parse_script("0 1 MICE nonadaptive 0 1500"), Error);
  CHECK_THROWS_AS(parse_script("0 1 MICE nonadaptive 0.5 0"), Error);
  CHECK_THROWS_AS(parse_script("0 3 a ELEPHANT nonadaptive 1\n2 4 a ELEPHANT nonadaptive 1"), Error);
  CHECK_THROWS_AS(parse_script("period 0"), Error);
  CHECK_THROWS_AS(parse_script("period 4\n0 5 ELEPHANT nonadaptive 1"), Error);
  CHECK_THROWS_AS(parse_script("0 1 ELEPHANT nonadaptive abc"), Error);
  CHECK_NOTHROW(parse_script("0 2 a ELEPHANT nonadaptive 1\n2 4 a ELEPHANT nonadaptive 1"));
}

namespace {

Scenario with_script(const std::string& text) {
  Scenario s = scenarios::satcom_static();
  s.traffic["SATCOM"] = parse_script(text);
  return s;
}

}  // namespace

TEST_CASE("offered_load") {
  SUBCASE("single elephant") {
    const Scenario s = with_script("0 2 ELEPHANT nonadaptive 400000");
    CHECK(offered_load(s, 1.0) == 400000.0);
    CHECK(offered_load(s, 2.5) == 0.0);
    CHECK(offered_load(s, 9.0) == 400000.0);  // next period
  }
  SUBCASE("no script") {
    const Scenario s = scenarios::tactical_quiet();
    for (double t = 0; t < 40; t += 0.37) CHECK(offered_load(s, t) == 0.0);
  }
  SUBCASE("after the transition only mice remain nonadaptive") {
    const Scenario s = scenarios::tactical();
    const double mice = 2 * 1500 * 8 / 0.5;
    for (double t = 10.0; t < 60.0; t += 0.1) CHECK(offered_load(s, t) == doctest::Approx(mice));
    CHECK(offered_load(s, 1.0) == doctest::Approx(400000 + mice));
    CHECK(offered_load(s, 3.0) == doctest::Approx(mice));
  }
  SUBCASE("adaptive elephants are excluded and counted separately") {
    const Scenario s = scenarios::tactical();
    CHECK(active_adaptive_flows(s, 1.0) == 0);
    CHECK(active_adaptive_flows(s, 3.0) == 1);
    CHECK(active_adaptive_flows(s, 10.5) == 1);
  }
}

TEST_CASE("offered_load is piecewise constant and bounded") {
  const Scenario s = scenarios::tactical();
  double bound = 0.0;
  for (const auto& [name, script] : s.traffic)
    for (const auto& e : script.events) bound += e.mean_rate_bps();
  const auto points = load_breakpoints(s, 0.0, 60.0);
  CHECK(!points.empty());
  std::vector<double> edges{0.0};
  edges.insert(edges.end(), points.begin(), points.end());
  edges.push_back(60.0);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    const double v = offered_load(s, a);
    CHECK(v <= bound);
    for (int k = 1; k < 10; ++k) CHECK(offered_load(s, a + (b - a) * k / 10.0) == v);
  }
}

TEST_CASE("elephants alternate at two second boundaries") {
  const Scenario s = scenarios::tactical();
  const auto events = generate_events(s, 1, 8.0);
  std::set<std::string> by_slot[4];
  for (const auto& e : events) {
    if (e.flow_id.rfind("mice", 0) == 0 || e.kind == TrafficEventKind::AdaptiveStop) continue;
    const int slot = static_cast<int>(std::floor(e.time_s / 2.0));
    by_slot[slot].insert(e.flow_id);
  }
  CHECK(by_slot[0] == std::set<std::string>{"video"});
  CHECK(by_slot[1] == std::set<std::string>{"bulk"});
  CHECK(by_slot[2] == std::set<std::string>{"video"});
  CHECK(by_slot[3] == std::set<std::string>{"bulk"});
  int video = 0;
  for (const auto& e : events)
    if (e.flow_id == "video") {
      ++video;
      CHECK(e.bytes == TrafficGenerator::kPacketBytes);
    }
  // 400 kb/s of 1000-byte packets for 4 s
  CHECK(video == 200);
}

TEST_CASE("mice inter-arrival mean") {
  const Scenario s = with_script("period 100000\n0 100000 m MICE nonadaptive 0.5 1000");
  TrafficGenerator gen(s, 42);
  std::vector<double> times;
  while (times.size() < 10001) {
    for (const auto& e : gen.advance(times.empty() ? 1000.0 : times.back() + 1000.0)) times.push_back(e.time_s);
  }
  times.resize(10001);
  double sum = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) sum += times[i] - times[i - 1];
  const double mean = sum / 10000.0;
  CHECK(std::abs(mean - 0.5) < 0.05 * 0.5);
}

TEST_CASE("generate_events is deterministic and incremental") {
  const Scenario s = scenarios::tactical();
  const auto a = generate_events(s, 9, 60.0);
  CHECK(a == generate_events(s, 9, 60.0));
  CHECK(a != generate_events(s, 10, 60.0));
  TrafficGenerator gen(s, 9);
  std::vector<TrafficEvent> b;
  for (double t = 0.1; t < 60.05; t += 0.1) {
    auto chunk = gen.advance(std::min(t, 60.0));
    b.insert(b.end(), chunk.begin(), chunk.end());
  }
  CHECK(a == b);
  CHECK(std::is_sorted(a.begin(), a.end(), [](const auto& x, const auto& y) { return x.time_s < y.time_s; }));
}

TEST_CASE("pattern switches exactly at the transition") {
  const Scenario s = scenarios::tactical();
  const auto events = generate_events(s, 3, 60.0);
  bool saw_uhf_start = false;
  for (const auto& e : events) {
    if (e.time_s >= 10.0) {
      CHECK(e.phase == 1);
      CHECK(e.flow_id != "video");
    } else {
      CHECK(e.phase == 0);
    }
    if (e.time_s == 10.0 && e.kind == TrafficEventKind::AdaptiveStart) saw_uhf_start = true;
  }
  CHECK(saw_uhf_start);
}

TEST_CASE("periodicity of deterministic events within a phase") {
  const Scenario s = scenarios::satcom_static();
  Scenario sc = s;
  sc.traffic["SATCOM"] = scenarios::satcom_pattern();
  const auto events = generate_events(sc, 4, 32.0);
  std::map<std::string, std::vector<double>> local[4];
  for (const auto& e : events) {
    if (e.flow_id.rfind("mice", 0) == 0 || e.kind == TrafficEventKind::AdaptiveStop) continue;
    const int period = static_cast<int>(e.time_s / 8.0);
    local[period][e.flow_id].push_back(e.time_s - 8.0 * period);
  }
  for (int p = 1; p < 4; ++p) {
    REQUIRE(local[p].size() == local[0].size());
    for (const auto& [flow, times] : local[0]) {
      REQUIRE(local[p][flow].size() == times.size());
      for (std::size_t i = 0; i < times.size(); ++i) CHECK(local[p][flow][i] == doctest::Approx(times[i]).epsilon(1e-9));
    }
  }
}
