#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tacnet/env.hpp"
#include "tacnet/nn.hpp"

namespace tacnet {

class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  std::int64_t total_steps = 500000;
  std::size_t buffer_capacity = 250000;
  int batch_size = 256;
  std::vector<int> hidden = {256, 256};
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double exploration_sigma = 0.1;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  int policy_delay = 2;
  std::int64_t warmup_steps = 1000;  // uniform random actions, no updates
  std::uint64_t seed = 0;

  void validate() const;
  /// Laptop-sized preset for quick end-to-end learning checks.
  static TrainConfig desk();
};

TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

/// Ring of transitions. Observations are kept in single precision; the next
/// observation is rebuilt from the stored one by dropping its oldest row
/// and appending the stored newest row.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int rows, int cols);

  void add(std::span<const double> obs, double action, double reward, std::span<const double> next_obs,
           bool terminal);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// Monotone insertion number of the item in slot i (for inspection).
  std::uint64_t id_at(std::size_t slot) const { return ids_[slot]; }
  std::uint64_t inserted() const { return inserted_; }

  struct Batch {
    Matrix obs;       // dim x B
    Matrix next_obs;  // dim x B
    Vector action;
    Vector reward;
    Vector not_terminal;
  };
  Batch sample(int batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  int rows_;
  int cols_;
  std::size_t dim_;
  std::vector<float> obs_;
  std::vector<float> next_row_;
  std::vector<double> action_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::uint64_t> ids_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
};

/// Deterministic actor with twin critics and target copies.
struct Agent {
  Mlp actor;
  Mlp critic1;
  Mlp critic2;
  Mlp actor_target;
  Mlp critic1_target;
  Mlp critic2_target;
  Normalizer normalizer;

  static Agent create(int obs_dim, const std::vector<int>& hidden, Rng& rng);
  bool operator==(const Agent&) const = default;
};

double select_action(const Mlp& actor, std::span<const double> obs, double sigma, Rng& rng);

struct TrainLogRow {
  std::int64_t step = 0;
  double episode_return = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

struct TrainResult {
  Agent agent;
  std::vector<TrainLogRow> log;
};

/// Runs config.total_steps environment steps. Truncated episodes bootstrap
/// from the target critics. `csv` (optional) receives one row per finished
/// episode as it happens.
TrainResult train(Env& env, const TrainConfig& config, std::ostream* csv = nullptr);

void write_train_log_header(std::ostream& os);
void write_train_log_row(std::ostream& os, const TrainLogRow& row);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Agent& agent, const std::filesystem::path& path);
Agent load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const Agent& agent);
Agent decode_checkpoint(const std::string& bytes);

}  // namespace tacnet
