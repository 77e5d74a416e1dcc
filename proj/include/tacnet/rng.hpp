#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tacnet {

/// Seedable random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the variate helpers below are written
/// out so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  /// Independent stream derived from this stream's seed and a name. Deriving
  /// does not advance the parent.
  Rng substream(std::string_view name) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double mean);
  double gaussian(double mean = 0.0, double stddev = 1.0);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name);

}  // namespace tacnet
