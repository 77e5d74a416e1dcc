#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tacnet/agent.hpp"
#include "tacnet/eval.hpp"
#include "tacnet/protocol.hpp"

namespace fs = std::filesystem;
using namespace tacnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;

struct UsageError : Error {
  using Error::Error;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Scenario load_scenario_arg(const std::string& name) {
  if (name.empty()) throw UsageError("--scenario is required");
  try {
    return scenarios::resolve(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_train(const std::string& scenario_name, const std::string& config_path, bool desk, std::optional<std::uint64_t> seed,
              const std::string& out_dir, const std::string& checkpoint) {
  TrainConfig cfg = desk ? TrainConfig::desk() : TrainConfig{};
  try {
    if (!config_path.empty()) cfg = train_config_from_json(read_file(config_path), cfg);
    if (seed) cfg.seed = *seed;
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Scenario scenario = load_scenario_arg(scenario_name);
  fs::create_directories(out_dir);
  const fs::path ckpt = checkpoint.empty() ? fs::path(out_dir) / "checkpoint.bin" : fs::path(checkpoint);
  const fs::path curve = fs::path(out_dir) / "learning_curve.csv";

  EnvConfig env_cfg;
  env_cfg.mode = EnvMode::Training;
  Env env(scenario, env_cfg);
  std::ofstream log(curve);
  write_train_log_header(log);
  try {
    const TrainResult res = train(env, cfg, &log);
    save_checkpoint(res.agent, ckpt);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitInfeasible;
  }
  std::cout << "checkpoint " << ckpt.string() << "\nlearning curve " << curve.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& plan_path, const std::string& scenario_name, const std::string& checkpoint,
             std::optional<std::uint64_t> seed, const std::string& out_dir) {
  EvalPlan plan;
  try {
    if (!plan_path.empty()) plan = eval_plan_from_json(read_file(plan_path));
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!scenario_name.empty()) plan.scenario = scenario_name;
  if (seed) plan.seed = *seed;
  std::optional<Agent> agent;
  if (!checkpoint.empty()) agent = load_checkpoint(checkpoint);
  const bool needs_agent = std::find(plan.policies.begin(), plan.policies.end(), "marlin") != plan.policies.end();
  if (needs_agent && !agent) throw UsageError("policy marlin requires --checkpoint");
  const auto episodes = run_eval(plan, agent ? &*agent : nullptr);
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "episodes.csv");
    write_episode_csv(os, episodes);
  }
  const auto summary = aggregate(episodes);
  {
    std::ofstream os(fs::path(out_dir) / "summary.csv");
    write_summary_csv(os, summary);
  }
  {
    std::ofstream os(fs::path(out_dir) / "summary.json");
    os << summary_json(summary);
  }
  write_summary_csv(std::cout, summary);
  return 0;
}

int cmd_ideal(const std::string& scenario_name, std::int64_t payload) {
  if (payload <= 0) throw UsageError("--payload must be > 0");
  const Scenario scenario = load_scenario_arg(scenario_name);
  const IdealFairResult r = ideal_fair_time({&scenario, payload, std::nullopt});
  if (!r.feasible) {
    std::cout << "infeasible\n";
    return kExitInfeasible;
  }
  std::cout << format_double(r.seconds) << "\n";
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(const std::string& scenario_name, const std::string& bind, int port) {
  ServerOptions opts;
  opts.scenario = load_scenario_arg(scenario_name.empty() ? "tactical" : scenario_name);
  opts.bind_address = bind;
  opts.port = port;
  Server server(opts);
  server.start();
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  std::cout << "listening on " << bind << ":" << server.port() << std::endl;
  server.run_async();
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  const fs::path in = fs::path(in_dir) / "episodes.csv";
  std::ifstream is(in);
  if (!is) throw UsageError("cannot read " + in.string());
  const auto episodes = read_episode_csv(is);
  const fs::path out = out_dir.empty() ? fs::path(in_dir) : fs::path(out_dir);
  write_report(episodes, out);
  std::cout << (out / "time_rti.csv").string() << "\n" << (out / "retransmissions.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-level tactical congestion-control simulator and trainer"};
  app.require_subcommand(1);

  std::string train_scenario = "desk", scenario, config, checkpoint, out = "results", bind = "127.0.0.1", in_dir;
  std::optional<std::uint64_t> seed;
  bool desk = false;
  std::int64_t payload = 600000;
  int port = 5555;

  auto* train = app.add_subcommand("train", "Train the agent");
  train->add_option("--scenario", train_scenario, "Scenario name or file")->capture_default_str();
  train->add_option("--config", config, "Training config (JSON)");
  train->add_flag("--desk-scale", desk, "Use the desk-scale preset");
  train->add_option("--seed", seed, "Seed");
  train->add_option("--out", out, "Output directory");
  train->add_option("--checkpoint", checkpoint, "Checkpoint path (default <out>/checkpoint.bin)");

  auto* eval = app.add_subcommand("eval", "Run an evaluation plan");
  eval->add_option("--config", config, "Evaluation plan (JSON)");
  eval->add_option("--scenario", scenario, "Override the plan's scenario");
  eval->add_option("--checkpoint", checkpoint, "Agent checkpoint (needed for marlin)");
  eval->add_option("--seed", seed, "Base seed");
  eval->add_option("--out", out, "Output directory");

  auto* ideal = app.add_subcommand("ideal", "Ideal fair-share completion time");
  ideal->add_option("--scenario", scenario, "Scenario name or file")->required();
  ideal->add_option("--payload", payload, "Payload bytes");

  auto* serve = app.add_subcommand("serve", "Serve the environment protocol");
  serve->add_option("--scenario", scenario, "Default scenario for new sessions");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "TCP port");

  auto* report = app.add_subcommand("report", "Build plot tables from eval output");
  report->add_option("results", in_dir, "Directory holding episodes.csv")->required();
  report->add_option("--out", out, "Output directory (default: the results directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_scenario, config, desk, seed, out, checkpoint);
    if (*eval) return cmd_eval(config, scenario, checkpoint, seed, out);
    if (*ideal) return cmd_ideal(scenario, payload);
    if (*serve) return cmd_serve(scenario, bind, port);
    if (*report) return cmd_report(in_dir, report->count("--out") ? out : std::string());
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
