#pragma once

#include <cstdint>
#include <optional>

#include "tacnet/rng.hpp"
#include "tacnet/scenario.hpp"
#include "tacnet/transport.hpp"

namespace tacnet {

struct CubicParams {
  double c_scale = 0.4;  // segments / s^3
  double beta = 0.7;
};

struct CubicState {
  double w_max_bytes = 0.0;
  double epoch_start_s = 0.0;
  double k_s = 0.0;
  double ssthresh_bytes = 0.0;
  bool in_slow_start = true;
  bool epoch_valid = false;
  std::int64_t recovery_seq = -1;  // losses below this belong to the last reduction
  double c_scale = 0.4;
  double beta = 0.7;
};

/// Window of the cubic growth curve, in segments, `t_s` seconds after the
/// epoch start. Pure; used by the controller and by tests.
double cubic_window_segments(double c_scale, double w_max_segments, double k_s, double t_s);
/// Time to climb back to w_max after a reduction by beta.
double cubic_k(double c_scale, double w_max_segments, double beta);

/// Loss-based controller: slow start until ssthresh, then the cubic curve
/// anchored at the window of the last reduction. One reduction per round
/// trip; a timeout restarts slow start from the minimum window. Fast
/// convergence and the TCP-friendly region are disabled.
class CubicController : public CongestionObserver {
 public:
  explicit CubicController(CubicParams params = {});

  void on_ack(Connection& conn, double now, std::int64_t newly_acked_bytes) override;
  void on_loss(Connection& conn, double now, LossKind kind, std::int64_t seq) override;

  const CubicState& state() const { return state_; }

 private:
  CubicState state_;
};

/// Window matching the active profile's bandwidth-delay product.
std::int64_t fixed_cwnd_policy(const Scenario& scenario, double now);

/// Uniform action in [-1, 1].
double random_policy(Rng& rng);

struct IdealFairInputs {
  const Scenario* scenario = nullptr;
  std::int64_t payload_bytes = 600000;
  /// Adaptive flows sharing the residual capacity, the measured flow
  /// included. Unset: 1 + the scripted adaptive flows active at each instant.
  std::optional<int> n_adaptive_flows;
};

struct IdealFairResult {
  bool feasible = false;
  double seconds = 0.0;
};

/// Completion time of a flow that receives its fair share of the capacity
/// left by nonadaptive traffic, plus one nominal round trip for setup.
IdealFairResult ideal_fair_time(const IdealFairInputs& inputs);

}  // namespace tacnet
