#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tacnet/baselines.hpp"
#include "tacnet/features.hpp"
#include "tacnet/network.hpp"

namespace tacnet {

enum class EnvMode { Training, Evaluation };

/// Who drives the measured flow's window between decisions.
enum class ControlMode { Agent, Cubic, Fixed };

struct EnvConfig {
  double window_s = 0.1;
  int history = 10;
  double ema_alpha = 0.3;
  double norm_decay = 0.999;
  double norm_epsilon = 1e-8;
  double norm_clip = 10.0;
  int episode_steps = 200;
  std::int64_t payload_bytes = 600000;
  int max_eval_steps = 6000;
  double handshake_limit_s = 120.0;
  EnvMode mode = EnvMode::Training;
  ControlMode control = ControlMode::Agent;
  bool background_traffic = true;
  TransportConfig transport;
};

/// history x kStateDim, row-major; row history-1 is the newest window.
struct Observation {
  int rows = 0;
  int cols = kStateDim;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
  std::span<const double> row(int r) const {
    return {values.data() + static_cast<std::size_t>(r * cols), static_cast<std::size_t>(cols)};
  }
  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool truncated = false;
  bool terminal = false;
  std::map<std::string, double> info;
};

/// Congestion-window gain applied multiplicatively, then clamped by the
/// transport.
std::int64_t apply_action(Connection& conn, double gain);

/// Decision-window environment over one Network instance.
class Env {
 public:
  Env(Scenario scenario, EnvConfig config);

  Observation reset(std::uint64_t seed);
  StepResult step(double action);

  bool needs_reset() const { return !network_ || done_; }
  int steps() const { return steps_; }
  const EnvConfig& config() const { return config_; }
  const Scenario& scenario() const { return scenario_; }
  Network& network();
  const Normalizer& normalizer() const { return normalizer_; }
  Normalizer& normalizer() { return normalizer_; }
  void set_mode(EnvMode mode);

  /// Raw (unnormalized) state of the latest window.
  const std::vector<double>& raw_state() const { return raw_state_; }
  double transfer_start() const { return transfer_start_; }
  /// Seconds from connection open to the last payload byte acked, NaN
  /// until the evaluation payload completes.
  double completion_time() const;

 private:
  std::vector<double> observe_window();
  Observation observation() const;
  void top_up_backlog();

  Scenario scenario_;
  EnvConfig config_;
  Normalizer normalizer_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<CubicController> cubic_;
  std::vector<std::vector<double>> history_;
  std::vector<double> raw_state_;
  FeatureVector prev_last_{};
  double transfer_start_ = 0.0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace tacnet
