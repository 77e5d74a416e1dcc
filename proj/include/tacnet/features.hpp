#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tacnet/scenario.hpp"
#include "tacnet/transport.hpp"

namespace tacnet {

inline constexpr int kStatsPerFeature = 7;
inline constexpr int kStateDim = kFeatureCount * kStatsPerFeature;  // 98

/// [last, mean, std (population), min, max, ema, last - prev_last].
/// EMA: first sample, then ema += alpha * (x - ema). An empty series
/// carries prev_last forward with zero spread and zero difference.
std::array<double, kStatsPerFeature> feature_stats(std::span<const double> series, double prev_last,
                                                   double ema_alpha = 0.3);

/// Flattens a window snapshot into one 98-wide state row; `prev_last` is
/// updated in place with this window's last values.
std::vector<double> state_row(const StatSnapshot& snapshot, FeatureVector& prev_last, double ema_alpha);

/// Per-dimension exponentially weighted mean and variance with bias
/// correction, so early estimates are not dragged towards zero.
class Normalizer {
 public:
  explicit Normalizer(std::size_t dim = kStateDim, double decay = 0.999, double epsilon = 1e-8,
                      double clip = 10.0);

  void update(std::span<const double> x);
  /// Clipped z-score against the current estimates.
  std::vector<double> normalize(std::span<const double> x) const;

  std::size_t dim() const { return first_.size(); }
  std::uint64_t count() const { return count_; }
  double mean(std::size_t i) const;
  double variance(std::size_t i) const;

  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  /// Raw accumulators, for checkpoints.
  const std::vector<double>& first_moment() const { return first_; }
  const std::vector<double>& second_moment() const { return second_; }
  double decay() const { return decay_; }
  double epsilon() const { return epsilon_; }
  double clip() const { return clip_; }
  void restore(std::vector<double> first, std::vector<double> second, std::uint64_t count);

  bool operator==(const Normalizer&) const = default;

 private:
  double decay_;
  double epsilon_;
  double clip_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::uint64_t count_ = 0;
  double weight_ = 0.0;  // 1 - decay^count
  bool frozen_ = false;
};

/// Kilobytes the measured flow could have delivered between t0 and t1:
/// the capacity left by nonadaptive background traffic, floored at 1 kb/s.
double compute_target(const Scenario& scenario, double t0, double t1);
inline double compute_target(const Scenario& scenario, double t_elapsed_s) {
  return compute_target(scenario, 0.0, t_elapsed_s);
}

struct RewardInputs {
  double target_kb = 1.0;
  double acked_cumulative_kb = 0.0;
  double retransmissions = 0.0;
  double loss_c = 0.0;
};

/// -target * (1 + r * (1 - loss_c)) / (target + acked). Strictly negative.
double compute_reward(const RewardInputs& in);

}  // namespace tacnet
