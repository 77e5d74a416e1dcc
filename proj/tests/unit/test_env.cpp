#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tacnet/env.hpp"

using namespace tacnet;

namespace {

// Straightforward re-statement of the seven window statistics.
std::array<double, 7> stats_oracle(const std::vector<double>& xs, double prev_last, double alpha) {
  if (xs.empty()) return {prev_last, prev_last, 0.0, prev_last, prev_last, prev_last, 0.0};
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double lo = xs[0], hi = xs[0], ema = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    lo = std::min(lo, xs[i]);
    hi = std::max(hi, xs[i]);
    ema = alpha * xs[i] + (1 - alpha) * ema;
  }
  return {xs.back(), mean, std::sqrt(ss / n), lo, hi, ema, xs.back() - prev_last};
}

}  // namespace

TEST_CASE("feature_stats examples") {
  const std::vector<double> one{5.0};
  CHECK(feature_stats(one, 5.0) == std::array<double, 7>{5, 5, 0, 5, 5, 5, 0});
  CHECK(feature_stats({}, 7.0) == std::array<double, 7>{7, 7, 0, 7, 7, 7, 0});
  const std::vector<double> three{1, 2, 3};
  const auto s = feature_stats(three, 0.0);
  CHECK(s[0] == 3.0);
  CHECK(s[1] == 2.0);
  CHECK(s[2] == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(s[3] == 1.0);
  CHECK(s[4] == 3.0);
  // 1 -> 1.3 -> 1.81 with smoothing 0.3
  CHECK(s[5] == doctest::Approx(1.81).epsilon(1e-12));
  CHECK(s[6] == 3.0);
}

TEST_CASE("feature_stats matches the oracle on random series") {
  Rng r(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> xs(r.below(30));
    for (double& x : xs) x = r.gaussian(0, std::pow(10.0, r.uniform(-3, 6)));
    const double prev = r.gaussian(0, 100);
    const auto got = feature_stats(xs, prev);
    const auto want = stats_oracle(xs, prev, 0.3);
    for (int k = 0; k < 7; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12).scale(1e-9));
  }
}

TEST_CASE("apply_action") {
  Simulator sim;
  Connection conn(sim, 1, TransportConfig{}, [](Packet) {});
  auto at = [&](double cwnd, double gain) {
    conn.set_cwnd(cwnd);
    return apply_action(conn, gain);
  };
  CHECK(at(100000, 0.3) == 130000);
  CHECK(at(100000, -0.3) == 70000);
  CHECK(at(100000, 0.0) == 100000);
  CHECK(at(140000, 1.0) == 150000);
  CHECK(at(100000, 5.0) == 150000);
  CHECK(at(3000, -1.0) == 2000);
  // two gains compose multiplicatively while unclamped
  Rng r(3);
  for (int i = 0; i < 200; ++i) {
    const double g1 = r.uniform(-0.5, 0.5), g2 = r.uniform(-0.5, 0.5);
    conn.set_cwnd(40000);
    apply_action(conn, g1);
    const double two = static_cast<double>(apply_action(conn, g2));
    const double one = 40000 * (1 + g1) * (1 + g2);
    // each application rounds to whole bytes
    CHECK(std::abs(two - one) <= 0.5 * (1 + g2) + 0.5);
  }
  CHECK_THROWS_AS(apply_action(conn, std::nan("")), Error);
}

TEST_CASE("compute_target") {
  const Scenario satcom = scenarios::satcom_static();
  CHECK(compute_target(satcom, 1.0) == doctest::Approx(125.0));
  CHECK(compute_target(satcom, 0.0) == 0.0);
  Scenario bg = satcom;
  bg.traffic["SATCOM"] = parse_script("period 8\n0 8 ELEPHANT nonadaptive 400000");
  CHECK(compute_target(bg, 1.0) == doctest::Approx(75.0));
  Scenario full = satcom;
  full.traffic["SATCOM"] = parse_script("period 8\n0 8 ELEPHANT nonadaptive 2000000");
  CHECK(compute_target(full, 8.0) == doctest::Approx(1.0));  // 1 kb/s floor

  const Scenario t = scenarios::tactical();
  Rng r(8);
  for (int i = 0; i < 300; ++i) {
    const double a = r.uniform(0, 40), b = a + r.uniform(0, 20), c = b + r.uniform(0, 20);
    CHECK(compute_target(t, c) >= compute_target(t, b));
    CHECK(compute_target(t, a, c) == doctest::Approx(compute_target(t, a, b) + compute_target(t, b, c)).epsilon(1e-10));
  }
}

TEST_CASE("compute_reward") {
  CHECK(compute_reward({100, 0, 0, 0}) == doctest::Approx(-1.0));
  CHECK(compute_reward({100, 100, 0, 0}) == doctest::Approx(-0.5));
  CHECK(compute_reward({100, 100, 2, 0.03}) == doctest::Approx(-1.47));
  CHECK_THROWS_AS(compute_reward({0, 1, 0, 0}), Error);
  CHECK_THROWS_AS(compute_reward({1, -1, 0, 0}), Error);
  CHECK_THROWS_AS(compute_reward({1, 1, -1, 0}), Error);

  Rng r(99);
  for (int i = 0; i < 2000; ++i) {
    const RewardInputs in{r.uniform(1e-3, 1e4), r.uniform(0, 1e5), static_cast<double>(r.below(500)), r.uniform(0, 1)};
    CHECK(compute_reward(in) < 0.0);
    RewardInputs more_acked = in;
    more_acked.acked_cumulative_kb += r.uniform(1e-3, 100);
    CHECK(compute_reward(more_acked) > compute_reward(in));
    if (in.loss_c < 1.0) {
      RewardInputs more_retx = in;
      more_retx.retransmissions += 1 + static_cast<double>(r.below(10));
      CHECK(compute_reward(more_retx) < compute_reward(in));
    }
  }
}

TEST_CASE("normalizer") {
  SUBCASE("matches a bias-corrected exponential average") {
    Normalizer n(3, 0.9, 1e-8, 1e9);
    Rng r(1);
    double m1 = 0, m2 = 0, w = 0;
    for (int t = 1; t <= 50; ++t) {
      const double x = r.gaussian(5, 2);
      n.update(std::vector<double>{x, 0, 0});
      m1 = 0.9 * m1 + 0.1 * x;
      m2 = 0.9 * m2 + 0.1 * x * x;
      w = 1 - std::pow(0.9, t);
      CHECK(n.mean(0) == doctest::Approx(m1 / w).epsilon(1e-12));
      CHECK(n.variance(0) == doctest::Approx(m2 / w - (m1 / w) * (m1 / w)).epsilon(1e-9));
    }
    const auto z = n.normalize(std::vector<double>{7.0, 0, 0});
    CHECK(z[0] == doctest::Approx((7.0 - m1 / w) / std::sqrt(m2 / w - (m1 / w) * (m1 / w) + 1e-8)).epsilon(1e-9));
  }
  SUBCASE("first update gives the sample as the mean") {
    Normalizer n(2);
    n.update(std::vector<double>{3.0, -4.0});
    CHECK(n.mean(0) == doctest::Approx(3.0));
    CHECK(n.mean(1) == doctest::Approx(-4.0));
    CHECK(n.variance(0) == doctest::Approx(0.0).scale(1e-9));
  }
  SUBCASE("finite for arbitrary magnitudes") {
    Normalizer n(4);
    Rng r(2);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{r.gaussian(0, 1e300), 1e-300 * r.uniform(), 0.0, r.gaussian(0, 1e12)};
      n.update(x);
      for (double v : n.normalize(x)) CHECK(std::isfinite(v));
      for (std::size_t k = 0; k < 4; ++k) CHECK(n.variance(k) >= 0.0);
    }
  }
  SUBCASE("frozen does not move") {
    Normalizer n(1);
    n.update(std::vector<double>{1.0});
    n.set_frozen(true);
    const Normalizer before = n;
    n.update(std::vector<double>{100.0});
    CHECK(n == before);
  }
}

namespace {

EnvConfig training() {
  EnvConfig c;
  c.mode = EnvMode::Training;
  return c;
}

}  // namespace

TEST_CASE("reset") {
  Env env(scenarios::tactical(), training());
  const Observation o = env.reset(4);
  CHECK(o.rows == 10);
  CHECK(o.cols == 98);
  CHECK(o.values.size() == 980);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 98; ++c) CHECK(o.at(r, c) == 0.0);
  const auto first = env.normalizer().normalize(env.raw_state());
  CHECK(std::equal(first.begin(), first.end(), o.row(9).begin()));
  CHECK(std::any_of(env.raw_state().begin(), env.raw_state().end(), [](double v) { return v != 0.0; }));
  for (double v : o.values) CHECK(std::isfinite(v));

  Env other(scenarios::tactical(), training());
  CHECK(other.reset(4) == o);

  SUBCASE("a warmed normalizer gives a nonzero first row") {
    for (int i = 0; i < 30; ++i) env.step(0.1);
    const Observation again = env.reset(4);
    CHECK(std::any_of(again.row(9).begin(), again.row(9).end(), [](double v) { return v != 0.0; }));
  }
  SUBCASE("reset mid-episode starts over") {
    for (int i = 0; i < 30; ++i) env.step(0.1);
    env.reset(5);
    CHECK(env.steps() == 0);
    CHECK(env.network().sender().state().retransmissions == 0);
    CHECK(env.network().sim().now() < 2.0);
  }
}

TEST_CASE("training episode") {
  Env env(scenarios::tactical(), training());
  Observation prev = env.reset(2);
  const double t0 = env.network().sim().now();
  Rng r(6);
  StepResult res;
  for (int i = 1; i <= 200; ++i) {
    res = env.step(r.uniform(-1, 1));
    CHECK(res.reward < 0.0);
    CHECK_FALSE(res.terminal);
    CHECK(res.truncated == (i == 200));
    for (int row = 0; row < 9; ++row)
      for (int c = 0; c < 98; ++c) REQUIRE(res.observation.at(row, c) == prev.at(row + 1, c));
    for (double v : res.observation.values) REQUIRE(std::isfinite(v));
    prev = res.observation;
  }
  CHECK(res.info.at("sim_time_s") - t0 == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(env.needs_reset());
  CHECK_THROWS_AS(env.step(0.0), Error);

  SUBCASE("normalizer persists across training resets") {
    const auto count = env.normalizer().count();
    env.reset(3);
    CHECK(env.normalizer().count() == count + 1);
  }
}

TEST_CASE("identical seeds and actions give identical steps") {
  Env a(scenarios::tactical(), training()), b(scenarios::tactical(), training());
  CHECK(a.reset(11) == b.reset(11));
  for (int i = 0; i < 120; ++i) {
    const double g = std::sin(i * 0.7);
    const StepResult x = a.step(g), y = b.step(g);
    REQUIRE(x.observation == y.observation);
    REQUIRE(x.reward == y.reward);
    REQUIRE(x.info == y.info);
  }
}

TEST_CASE("evaluation episode completes the payload") {
  EnvConfig c;
  c.mode = EnvMode::Evaluation;
  c.control = ControlMode::Cubic;
  Env env(scenarios::satcom_static(), c);
  env.normalizer().update(std::vector<double>(kStateDim, 1.0));
  env.set_mode(EnvMode::Evaluation);
  const Normalizer frozen = env.normalizer();
  env.reset(1);
  StepResult res;
  do {
    res = env.step(0.0);
    CHECK(res.reward < 0.0);
  } while (!res.terminal && !res.truncated);
  CHECK(res.terminal);
  CHECK(env.network().receiver().delivered_bytes() == 600000);
  CHECK(std::isfinite(env.completion_time()));
  CHECK(env.completion_time() > 5.8);
  CHECK(env.normalizer() == frozen);
}

TEST_CASE("reward uses the window retransmissions and the scripted loss") {
  Env env(scenarios::uhf_static(0.03), training());
  env.reset(9);
  bool saw_retx = false;
  for (int i = 0; i < 200; ++i) {
    const StepResult res = env.step(0.5);
    const RewardInputs in{res.info.at("target_kb"), res.info.at("acked_kb"), res.info.at("retransmissions_window"),
                          res.info.at("loss_c")};
    CHECK(res.info.at("loss_c") == 0.03);
    CHECK(res.reward == doctest::Approx(-in.target_kb * (1 + in.retransmissions * 0.97) /
                                        (in.target_kb + in.acked_cumulative_kb)));
    saw_retx = saw_retx || in.retransmissions > 0;
  }
  CHECK(saw_retx);
}
