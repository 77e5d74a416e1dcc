#include "tacnet/features.hpp"

#include <algorithm>
#include <cmath>

namespace tacnet {

std::array<double, kStatsPerFeature> feature_stats(std::span<const double> series, double prev_last,
                                                   double ema_alpha) {
  if (series.empty()) return {prev_last, prev_last, 0.0, prev_last, prev_last, prev_last, 0.0};
  const double n = static_cast<double>(series.size());
  double sum = 0.0;
  double lo = series.front();
  double hi = series.front();
  double ema = series.front();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double x = series[i];
    sum += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    if (i > 0) ema += ema_alpha * (x - ema);
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : series) ss += (x - mean) * (x - mean);
  const double last = series.back();
  return {last, mean, std::sqrt(ss / n), lo, hi, ema, last - prev_last};
}

std::vector<double> state_row(const StatSnapshot& snapshot, FeatureVector& prev_last, double ema_alpha) {
  std::vector<double> row;
  row.reserve(kStateDim);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto stats = feature_stats(snapshot.series[f], prev_last[f], ema_alpha);
    row.insert(row.end(), stats.begin(), stats.end());
    prev_last[f] = stats[0];
  }
  return row;
}

Normalizer::Normalizer(std::size_t dim, double decay, double epsilon, double clip)
    : decay_(decay), epsilon_(epsilon), clip_(clip), first_(dim, 0.0), second_(dim, 0.0) {
  if (!(decay > 0.0 && decay < 1.0)) throw Error("normalizer decay must be in (0, 1)");
}

void Normalizer::update(std::span<const double> x) {
  if (frozen_) return;
  if (x.size() != first_.size()) throw Error("normalizer: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    first_[i] = decay_ * first_[i] + (1.0 - decay_) * x[i];
    second_[i] = decay_ * second_[i] + (1.0 - decay_) * x[i] * x[i];
  }
  ++count_;
  weight_ = 1.0 - std::pow(decay_, static_cast<double>(count_));
}

double Normalizer::mean(std::size_t i) const { return count_ == 0 ? 0.0 : first_[i] / weight_; }

double Normalizer::variance(std::size_t i) const {
  if (count_ == 0) return 1.0;
  const double m = mean(i);
  return std::max(0.0, second_[i] / weight_ - m * m);
}

std::vector<double> Normalizer::normalize(std::span<const double> x) const {
  if (x.size() != first_.size()) throw Error("normalizer: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean(i)) / std::sqrt(variance(i) + epsilon_);
    out[i] = std::isfinite(z) ? std::clamp(z, -clip_, clip_) : 0.0;
  }
  return out;
}

void Normalizer::restore(std::vector<double> first, std::vector<double> second, std::uint64_t count) {
  if (first.size() != first_.size() || second.size() != second_.size())
    throw Error("normalizer: restored dimension mismatch");
  first_ = std::move(first);
  second_ = std::move(second);
  count_ = count;
  weight_ = 1.0 - std::pow(decay_, static_cast<double>(count_));
}

double compute_target(const Scenario& scenario, double t0, double t1) {
  constexpr double kFloorBps = 1000.0;
  if (t1 <= t0) return 0.0;
  std::vector<double> cuts = load_breakpoints(scenario, t0, t1);
  cuts.insert(cuts.begin(), t0);
  cuts.push_back(t1);
  double bits = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double s = cuts[i];
    const double e = cuts[i + 1];
    if (e <= s) continue;
    const double mid = 0.5 * (s + e);
    const double rate = apply_transition(scenario.bottleneck, mid).rate_bps;
    bits += std::max(rate - offered_load(scenario, mid), kFloorBps) * (e - s);
  }
  return bits / 8.0 / 1000.0;
}

double compute_reward(const RewardInputs& in) {
  if (!(in.target_kb > 0.0)) throw Error("reward: target must be > 0");
  if (in.acked_cumulative_kb < 0.0 || in.retransmissions < 0.0) throw Error("reward: negative input");
  return -in.target_kb * (1.0 + in.retransmissions * (1.0 - in.loss_c)) / (in.target_kb + in.acked_cumulative_kb);
}

}  // namespace tacnet
