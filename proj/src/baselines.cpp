#include "tacnet/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace tacnet {

double cubic_window_segments(double c_scale, double w_max_segments, double k_s, double t_s) {
  const double d = t_s - k_s;
  return c_scale * d * d * d + w_max_segments;
}

double cubic_k(double c_scale, double w_max_segments, double beta) {
  return std::cbrt(w_max_segments * (1.0 - beta) / c_scale);
}

CubicController::CubicController(CubicParams params) {
  state_.c_scale = params.c_scale;
  state_.beta = params.beta;
  state_.ssthresh_bytes = 1e18;
}

namespace {

void start_epoch(CubicState& s, double now, double cwnd_bytes, double segment_bytes) {
  s.epoch_start_s = now;
  s.epoch_valid = true;
  if (cwnd_bytes < s.w_max_bytes) {
    s.k_s = std::cbrt((s.w_max_bytes - cwnd_bytes) / segment_bytes / s.c_scale);
  } else {
    s.w_max_bytes = cwnd_bytes;
    s.k_s = 0.0;
  }
}

}  // namespace

void CubicController::on_ack(Connection& conn, double now, std::int64_t newly_acked_bytes) {
  const double seg = conn.config().segment_bytes;
  double cwnd = static_cast<double>(conn.state().cwnd_bytes);
  if (state_.in_slow_start) {
    cwnd += static_cast<double>(newly_acked_bytes);
    if (cwnd >= state_.ssthresh_bytes) {
      cwnd = std::max(state_.ssthresh_bytes, static_cast<double>(conn.config().cwnd_min_bytes));
      state_.in_slow_start = false;
      start_epoch(state_, now, cwnd, seg);
    }
    conn.set_cwnd(cwnd);
    return;
  }
  if (!state_.epoch_valid) start_epoch(state_, now, cwnd, seg);
  const double w = cubic_window_segments(state_.c_scale, state_.w_max_bytes / seg, state_.k_s,
                                         now - state_.epoch_start_s);
  conn.set_cwnd(w * seg);
}

void CubicController::on_loss(Connection& conn, double now, LossKind kind, std::int64_t seq) {
  const double seg = conn.config().segment_bytes;
  const double cwnd = static_cast<double>(conn.state().cwnd_bytes);
  const double min_cwnd = static_cast<double>(conn.config().cwnd_min_bytes);
  if (kind == LossKind::Timeout) {
    if (seq >= state_.recovery_seq) {
      state_.w_max_bytes = cwnd;
      state_.ssthresh_bytes = std::max(state_.beta * cwnd, min_cwnd);
    }
    state_.in_slow_start = true;
    state_.epoch_valid = false;
    state_.recovery_seq = conn.state().next_seq;
    conn.set_cwnd(min_cwnd);
    return;
  }
  if (seq < state_.recovery_seq) return;  // same congestion event
  state_.w_max_bytes = cwnd;
  const double reduced = std::max(state_.beta * cwnd, min_cwnd);
  state_.ssthresh_bytes = reduced;
  state_.in_slow_start = false;
  state_.recovery_seq = conn.state().next_seq;
  state_.epoch_start_s = now;
  state_.epoch_valid = true;
  state_.k_s = cubic_k(state_.c_scale, state_.w_max_bytes / seg, state_.beta);
  conn.set_cwnd(reduced);
}

std::int64_t fixed_cwnd_policy(const Scenario& scenario, double now) {
  return std::llround(apply_transition(scenario.bottleneck, now).bdp_bytes());
}

double random_policy(Rng& rng) { return rng.uniform(-1.0, 1.0); }

IdealFairResult ideal_fair_time(const IdealFairInputs& inputs) {
  if (!inputs.scenario) throw Error("ideal_fair_time: no scenario");
  if (inputs.payload_bytes <= 0) throw Error("ideal_fair_time: payload must be > 0");
  if (inputs.n_adaptive_flows && *inputs.n_adaptive_flows < 1)
    throw Error("ideal_fair_time: at least one adaptive flow is required");
  const Scenario& sc = *inputs.scenario;
  sc.bottleneck.validate();

  const double setup_s = sc.bottleneck.entries.front().profile.nominal_rtt_s();
  const std::size_t last_phase = sc.bottleneck.entries.size() - 1;
  const double last_start = sc.bottleneck.phase_start(last_phase);
  const TrafficScript* last_script = sc.script_for_phase(last_phase);
  const double chunk = last_script && !last_script->empty() ? last_script->period_s : 1.0;

  double remaining_bits = static_cast<double>(inputs.payload_bytes) * 8.0;
  double a = 0.0;
  // After the final transition the capacity is periodic; one empty period
  // means the payload never completes.
  for (int iter = 0; iter < 10'000'000; ++iter) {
    const double b = a + chunk;
    std::vector<double> cuts = load_breakpoints(sc, a, b);
    cuts.insert(cuts.begin(), a);
    cuts.push_back(b);
    double chunk_bits = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double s = cuts[i];
      const double e = cuts[i + 1];
      if (e <= s) continue;
      const double mid = 0.5 * (s + e);
      const double rate = apply_transition(sc.bottleneck, mid).rate_bps;
      const int n = inputs.n_adaptive_flows ? *inputs.n_adaptive_flows : 1 + active_adaptive_flows(sc, mid);
      const double share = std::max(0.0, rate - offered_load(sc, mid)) / n;
      if (share <= 0.0) continue;
      const double bits = share * (e - s);
      chunk_bits += bits;
      if (bits >= remaining_bits) return {true, s + remaining_bits / share + setup_s};
      remaining_bits -= bits;
    }
    if (a >= last_start && chunk_bits <= 0.0) return {false, 0.0};
    a = b;
  }
  return {false, 0.0};
}

}  // namespace tacnet
