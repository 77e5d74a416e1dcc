#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tacnet/metrics.hpp"
#include "tacnet/scenario.hpp"

using namespace tacnet;

TEST_CASE("compute_rti examples") {
  CHECK(compute_rti(std::vector<double>{1.0, 1.0}) == 0.0);
  CHECK(compute_rti(std::vector<double>{2.0, 4.0}) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(compute_rti(std::vector<double>{2.5}) == doctest::Approx(0.9163).epsilon(1e-4));
  RtiInputs in;
  in.per_link = {{"SATCOM", 2000.0, 1000.0, 3}, {"UHF", 1000.0, 250.0, 5}};
  CHECK(compute_rti(in) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(compute_rti(std::vector<double>{}), Error);
  CHECK_THROWS_AS(compute_rti(std::vector<double>{0.0}), Error);
  in.per_link[0].rtt_nom_ms = 0.0;
  CHECK_THROWS_AS(compute_rti(in), Error);
}

TEST_CASE("compute_rti properties") {
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> ratios(1 + r.below(5));
    for (double& x : ratios) x = r.uniform(0.5, 20.0);
    const double base = compute_rti(ratios);
    const double c = r.uniform(0.1, 10.0);
    std::vector<double> scaled = ratios;
    for (double& x : scaled) x *= c;
    CHECK(compute_rti(scaled) == doctest::Approx(base + std::log(c)).epsilon(1e-12));
    std::vector<double> bumped = ratios;
    bumped[r.below(bumped.size())] += r.uniform(1e-6, 1.0);
    CHECK(compute_rti(bumped) > base);
    CHECK(compute_rti(std::vector<double>(ratios.size(), 1.0)) == 0.0);
  }
}

TEST_CASE("split_rtt_by_link") {
  const TransitionSchedule s = scenarios::tactical().bottleneck;
  SUBCASE("samples before the transition only") {
    const RtiInputs in = split_rtt_by_link({{1.0, 1100}, {5.0, 1500}, {9.9, 1300}}, s);
    REQUIRE(in.per_link.size() == 1);
    CHECK(in.per_link[0].profile == "SATCOM");
    CHECK(in.per_link[0].rtt_max_ms == 1500);
    CHECK(in.per_link[0].rtt_nom_ms == 1000);
    CHECK(in.omitted == std::vector<std::string>{"UHF"});
  }
  SUBCASE("a sample at the transition belongs to the new link") {
    const RtiInputs in = split_rtt_by_link({{9.0, 1200}, {10.0, 3000}}, s);
    REQUIRE(in.per_link.size() == 2);
    CHECK(in.per_link[0].rtt_max_ms == 1200);
    CHECK(in.per_link[1].rtt_max_ms == 3000);
    CHECK(in.per_link[1].rtt_nom_ms == 250);
  }
  SUBCASE("constructed trace") {
    Rng r(2);
    std::vector<RttSample> trace;
    double max_a = 0, max_b = 0;
    std::size_t na = 0, nb = 0;
    for (int i = 0; i < 500; ++i) {
      const double t = r.uniform(0, 40);
      const double v = r.uniform(100, 5000);
      trace.push_back({t, v});
      if (t < 10) {
        max_a = std::max(max_a, v);
        ++na;
      } else {
        max_b = std::max(max_b, v);
        ++nb;
      }
    }
    const RtiInputs in = split_rtt_by_link(trace, s);
    REQUIRE(in.per_link.size() == 2);
    CHECK(in.per_link[0].rtt_max_ms == max_a);
    CHECK(in.per_link[1].rtt_max_ms == max_b);
    CHECK(in.per_link[0].samples + in.per_link[1].samples == trace.size());
    CHECK(in.per_link[0].samples == na);
    CHECK(in.omitted.empty());
  }
  SUBCASE("below nominal is flagged, not clamped") {
    const RtiInputs in = split_rtt_by_link({{1.0, 900}}, scenarios::satcom_static().bottleneck);
    CHECK(in.below_nominal);
    CHECK(compute_rti(in) == doctest::Approx(std::log(0.9)));
  }
}

TEST_CASE("aggregate") {
  SUBCASE("single report") {
    const auto rows = aggregate({{"cubic", 0.03, 1, 12.5, 40, 0.7}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].time_mean == 12.5);
    CHECK(rows[0].time_std == 0.0);
    CHECK(rows[0].retx_mean == 40.0);
    CHECK(rows[0].rti_mean == 0.7);
  }
  SUBCASE("two reports") {
    const auto rows = aggregate({{"cubic", 0.0, 1, 10.0, 0, 0}, {"cubic", 0.0, 2, 20.0, 0, 0}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].time_mean == 15.0);
    CHECK(rows[0].time_std == 5.0);
  }
  SUBCASE("one row per batch") {
    std::vector<EpisodeReport> reps;
    Rng r(3);
    double sum = 0, sq = 0;
    for (int i = 0; i < 100; ++i) {
      const double t = r.uniform(5, 30);
      sum += t;
      sq += t * t;
      reps.push_back({"marlin", 0.03, static_cast<std::uint64_t>(i), t, static_cast<std::int64_t>(r.below(50)), 0.1});
    }
    reps.push_back({"fixed", 0.03, 1, 10.0, 3, 0.2});
    reps.push_back({"marlin", 0.01, 1, 10.0, 3, 0.2});
    const auto rows = aggregate(reps);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].policy == "fixed");
    CHECK(rows[1].policy == "marlin");
    CHECK(rows[1].loss_c == 0.01);
    CHECK(rows[2].loss_c == 0.03);
    CHECK(rows[2].episodes == 100);
    CHECK(rows[2].time_mean == doctest::Approx(sum / 100));
    CHECK(rows[2].time_std == doctest::Approx(std::sqrt(sq / 100 - (sum / 100) * (sum / 100))));
  }
  CHECK_THROWS_AS(aggregate({}), Error);
}

TEST_CASE("episode csv round trip") {
  const std::vector<EpisodeReport> reps{{"marlin", 0.03, 7, 19.25, 12, 0.1234567890123, true, false},
                                        {"cubic", 0.0, 8, 1.0 / 3.0, 0, -0.01, false, true}};
  std::ostringstream os;
  write_episode_csv(os, reps);
  CHECK(os.str().rfind("policy,loss_c,seed,completion_time_s,retransmissions,rti", 0) == 0);
  std::istringstream is(os.str());
  const auto back = read_episode_csv(is);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].policy == reps[i].policy);
    CHECK(back[i].loss_c == reps[i].loss_c);
    CHECK(back[i].seed == reps[i].seed);
    CHECK(back[i].completion_time_s == reps[i].completion_time_s);
    CHECK(back[i].retransmissions == reps[i].retransmissions);
    CHECK(back[i].rti == reps[i].rti);
    CHECK(back[i].terminal == reps[i].terminal);
    CHECK(back[i].rti_flagged == reps[i].rti_flagged);
  }
}

TEST_CASE("episode csv schema errors") {
  std::istringstream missing("policy,loss_c,seed,completion_time_s\nmarlin,0.03,1,10\n");
  CHECK_THROWS_WITH_AS(read_episode_csv(missing), doctest::Contains("schema error"), Error);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_episode_csv(empty), Error);
  std::istringstream bad("policy,loss_c,seed,completion_time_s,retransmissions,rti\nmarlin,x,1,10,2,0.1\n");
  CHECK_THROWS_AS(read_episode_csv(bad), Error);
}

TEST_CASE("summary outputs") {
  const auto rows = aggregate({{"cubic", 0.03, 1, 10.0, 4, 0.5}, {"cubic", 0.03, 2, 12.0, 6, 0.7}});
  std::ostringstream os;
  write_summary_csv(os, rows);
  CHECK(os.str().find("cubic") != std::string::npos);
  const auto j = nlohmann::json::parse(summary_json(rows));
  REQUIRE(j.is_array());
  CHECK(j[0]["policy"] == "cubic");
  CHECK(j[0]["time_mean_s"].get<double>() == 11.0);
  CHECK(j[0]["retx_mean"].get<double>() == 5.0);
  CHECK(j[0]["episodes"].get<int>() == 2);
}

TEST_CASE("format_double round trips") {
  Rng r(4);
  for (int i = 0; i < 1000; ++i) {
    const double v = r.gaussian(0, std::pow(10.0, r.uniform(-10, 10)));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.03) == "0.03");
  CHECK(format_double(15.0) == "15");
}
