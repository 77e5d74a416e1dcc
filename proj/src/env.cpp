#include "tacnet/env.hpp"

#include <cmath>

namespace tacnet {

std::int64_t apply_action(Connection& conn, double gain) {
  if (!std::isfinite(gain)) throw Error("action must be finite");
  gain = std::clamp(gain, -1.0, 1.0);
  const double cwnd = static_cast<double>(conn.state().cwnd_bytes);
  return conn.set_cwnd(std::round(cwnd * (1.0 + gain)));
}

Env::Env(Scenario scenario, EnvConfig config)
    : scenario_(std::move(scenario)),
      config_(config),
      normalizer_(kStateDim, config.norm_decay, config.norm_epsilon, config.norm_clip) {
  scenario_.validate();
  if (config_.history < 1) throw Error("env: history must be >= 1");
  config_.transport.stats_window_s = config_.window_s;
  normalizer_.set_frozen(config_.mode == EnvMode::Evaluation);
}

void Env::set_mode(EnvMode mode) {
  config_.mode = mode;
  normalizer_.set_frozen(mode == EnvMode::Evaluation);
}

Network& Env::network() {
  if (!network_) throw Error("env: not reset");
  return *network_;
}

void Env::top_up_backlog() {
  // training flows are backlogged: keep more unsent data than any window
  Connection& conn = network_->sender();
  const std::int64_t want = 2 * config_.transport.cwnd_cap_bytes;
  if (conn.state().send_queue_bytes < want) conn.send_payload(want - conn.state().send_queue_bytes);
}

Observation Env::reset(std::uint64_t seed) {
  NetworkOptions opts;
  opts.transport = config_.transport;
  opts.background_traffic = config_.background_traffic;
  cubic_.reset();
  network_ = std::make_unique<Network>(scenario_, seed, opts);
  Connection& conn = network_->sender();
  Simulator& sim = network_->sim();

  if (config_.control == ControlMode::Cubic) {
    cubic_ = std::make_unique<CubicController>();
    conn.set_observer(cubic_.get());
  } else if (config_.control == ControlMode::Fixed) {
    conn.set_cwnd(static_cast<double>(fixed_cwnd_policy(scenario_, sim.now())));
  }

  conn.open();
  if (!sim.run_while([&] { return !conn.established(); }, config_.handshake_limit_s))
    throw Error("env: handshake did not complete");
  transfer_start_ = sim.now();

  if (config_.mode == EnvMode::Evaluation) {
    conn.send_payload(config_.payload_bytes);
  } else {
    top_up_backlog();
  }

  history_.assign(static_cast<std::size_t>(config_.history), std::vector<double>(kStateDim, 0.0));
  prev_last_.fill(0.0);
  steps_ = 0;
  done_ = false;
  conn.begin_window(sim.now());
  history_.back() = observe_window();
  return observation();
}

std::vector<double> Env::observe_window() {
  Connection& conn = network_->sender();
  Simulator& sim = network_->sim();
  // window boundaries come from the transport so consecutive windows abut
  sim.run_until(sim.now() + config_.window_s);
  const StatSnapshot snap = conn.collect_window_stats(sim.now());
  raw_state_ = state_row(snap, prev_last_, config_.ema_alpha);
  normalizer_.update(raw_state_);
  return normalizer_.normalize(raw_state_);
}

Observation Env::observation() const {
  Observation obs;
  obs.rows = config_.history;
  obs.cols = kStateDim;
  obs.values.reserve(static_cast<std::size_t>(obs.rows * obs.cols));
  for (const auto& r : history_) obs.values.insert(obs.values.end(), r.begin(), r.end());
  return obs;
}

StepResult Env::step(double action) {
  if (!network_) throw Error("env: step before reset");
  if (done_) throw Error("env: episode finished; reset required");
  Connection& conn = network_->sender();
  Simulator& sim = network_->sim();

  switch (config_.control) {
    case ControlMode::Agent: apply_action(conn, action); break;
    case ControlMode::Fixed: conn.set_cwnd(static_cast<double>(fixed_cwnd_policy(scenario_, sim.now()))); break;
    case ControlMode::Cubic: break;
  }
  if (config_.mode == EnvMode::Training) top_up_backlog();

  std::vector<double> row = observe_window();
  history_.erase(history_.begin());
  history_.push_back(std::move(row));
  ++steps_;

  const std::size_t retx_last = 2 * kStatsPerFeature;  // "last" of retransmissions_window
  RewardInputs in;
  in.target_kb = std::max(compute_target(scenario_, transfer_start_, sim.now()), 1.0);
  in.acked_cumulative_kb = conn.state().cumulative_acked_kb;
  in.retransmissions = raw_state_[retx_last];
  in.loss_c = network_->active_profile().loss_prob;

  StepResult res;
  res.reward = compute_reward(in);
  if (config_.mode == EnvMode::Training) {
    res.truncated = steps_ >= config_.episode_steps;
  } else {
    res.terminal = conn.all_acked();
    res.truncated = !res.terminal && steps_ >= config_.max_eval_steps;
  }
  done_ = res.truncated || res.terminal;
  res.observation = observation();
  res.info = {{"cwnd_bytes", static_cast<double>(conn.state().cwnd_bytes)},
              {"srtt_ms", conn.state().srtt_ms},
              {"retransmissions_window", in.retransmissions},
              {"retransmissions_total", static_cast<double>(conn.state().retransmissions)},
              {"acked_kb", in.acked_cumulative_kb},
              {"target_kb", in.target_kb},
              {"loss_c", in.loss_c},
              {"sim_time_s", sim.now()}};
  return res;
}

double Env::completion_time() const {
  if (!network_) return std::nan("");
  const double done_at = network_->sender().completion_time();
  return done_at - network_->sender().open_time();
}

}  // namespace tacnet
