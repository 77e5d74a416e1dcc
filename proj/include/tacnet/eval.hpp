#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tacnet/agent.hpp"
#include "tacnet/env.hpp"
#include "tacnet/metrics.hpp"

namespace tacnet {

struct EvalPlan {
  std::vector<std::string> policies = {"marlin", "cubic", "fixed", "random", "ideal"};
  std::string scenario = "tactical";
  std::int64_t payload_bytes = 600000;
  int repetitions = 400;
  int batch_size = 100;
  std::vector<double> losses = {0.0, 0.01, 0.02, 0.03};
  /// Policies evaluated only at `single_loss`.
  std::vector<std::string> single_loss_policies = {"random", "fixed"};
  double single_loss = 0.03;
  std::uint64_t seed = 1;
  int max_eval_steps = 6000;
  int threads = 1;

  void validate() const;
};

EvalPlan eval_plan_from_json(const std::string& text);

struct EpisodeOutcome {
  EpisodeReport report;
  double reward_sum = 0.0;
  int steps = 0;
};

/// Runs one evaluation episode of `policy` on `scenario` (loss already
/// applied). `agent` is required for "marlin".
EpisodeOutcome run_episode(const std::string& policy, const Scenario& scenario, std::int64_t payload_bytes,
                           std::uint64_t seed, const Agent* agent, int max_eval_steps = 6000);

/// Every (policy, loss, seed) episode of the plan, sorted by policy, loss
/// and seed. Episode seeds are plan.seed + i for i < batch_size, shared by
/// all policies and loss levels.
std::vector<EpisodeReport> run_eval(const EvalPlan& plan, const Agent* agent);

struct PublishedReference {
  std::string policy;
  std::optional<double> time_s;
  std::optional<double> retransmissions;
};
const std::vector<PublishedReference>& published_references();

/// Writes time_rti.csv and retransmissions.csv into `out_dir`.
void write_report(const std::vector<EpisodeReport>& episodes, const std::filesystem::path& out_dir,
                  double retx_loss = 0.03);

}  // namespace tacnet
