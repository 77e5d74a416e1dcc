#include "tacnet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace tacnet {

void EvalPlan::validate() const {
  if (policies.empty()) throw Error("eval plan: no policies");
  for (const auto& p : policies)
    if (p != "marlin" && p != "cubic" && p != "fixed" && p != "random" && p != "ideal")
      throw Error("eval plan: unknown policy " + p);
  if (payload_bytes <= 0) throw Error("eval plan: payload must be > 0");
  if (batch_size <= 0 || losses.empty()) throw Error("eval plan: empty batch");
  if (repetitions != batch_size * static_cast<int>(losses.size()))
    throw Error("eval plan: repetitions must equal batch_size x number of loss levels");
  for (double l : losses)
    if (!(l >= 0.0 && l <= 1.0)) throw Error("eval plan: loss out of [0, 1]");
  if (threads < 1) throw Error("eval plan: threads must be >= 1");
}

EvalPlan eval_plan_from_json(const std::string& text) {
  EvalPlan p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.policies = j.value("policies", p.policies);
    p.scenario = j.value("scenario", p.scenario);
    p.payload_bytes = j.value("payload_bytes", p.payload_bytes);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.losses = j.value("losses", p.losses);
    p.repetitions = j.value("repetitions", p.batch_size * static_cast<int>(p.losses.size()));
    p.single_loss_policies = j.value("single_loss_policies", p.single_loss_policies);
    p.single_loss = j.value("single_loss", p.single_loss);
    p.seed = j.value("seed", p.seed);
    p.max_eval_steps = j.value("max_eval_steps", p.max_eval_steps);
    p.threads = j.value("threads", p.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("eval plan: ") + e.what());
  }
  p.validate();
  return p;
}

EpisodeOutcome run_episode(const std::string& policy, const Scenario& scenario, std::int64_t payload_bytes,
                           std::uint64_t seed, const Agent* agent, int max_eval_steps) {
  EpisodeOutcome out;
  EpisodeReport& rep = out.report;
  rep.policy = policy;
  rep.loss_c = scenario.bottleneck.entries.back().profile.loss_prob;
  rep.seed = seed;

  if (policy == "ideal") {
    const IdealFairResult r = ideal_fair_time({&scenario, payload_bytes, std::nullopt});
    rep.terminal = r.feasible;
    rep.completion_time_s = r.feasible ? r.seconds : std::nan("");
    return out;
  }

  EnvConfig cfg;
  cfg.mode = EnvMode::Evaluation;
  cfg.payload_bytes = payload_bytes;
  cfg.max_eval_steps = max_eval_steps;
  if (policy == "cubic") {
    cfg.control = ControlMode::Cubic;
  } else if (policy == "fixed") {
    cfg.control = ControlMode::Fixed;
  } else if (policy == "random" || policy == "marlin") {
    cfg.control = ControlMode::Agent;
  } else {
    throw Error("unknown policy " + policy);
  }
  if (policy == "marlin" && !agent) throw Error("policy marlin requires a checkpoint");

  Env env(scenario, cfg);
  if (policy == "marlin") {
    if (agent->normalizer.dim() != static_cast<std::size_t>(kStateDim))
      throw Error("checkpoint normalizer has the wrong dimension");
    env.normalizer() = agent->normalizer;
    env.normalizer().set_frozen(true);
  }
  Rng rng = Rng(seed).substream("policy");
  Observation obs = env.reset(seed);
  StepResult sr;
  do {
    double action = 0.0;
    if (policy == "random") action = random_policy(rng);
    if (policy == "marlin") action = select_action(agent->actor, obs.values, 0.0, rng);
    sr = env.step(action);
    obs = sr.observation;
    out.reward_sum += sr.reward;
    ++out.steps;
  } while (!sr.terminal && !sr.truncated);

  Connection& conn = env.network().sender();
  rep.terminal = sr.terminal;
  rep.completion_time_s = sr.terminal ? env.completion_time() : env.network().sim().now() - conn.open_time();
  rep.retransmissions = conn.state().retransmissions;
  const RtiInputs rti = split_rtt_by_link(conn.rtt_samples(), scenario.bottleneck);
  rep.rti = rti.per_link.empty() ? std::nan("") : compute_rti(rti);
  rep.rti_flagged = !rti.omitted.empty() || rti.below_nominal;
  return out;
}

std::vector<EpisodeReport> run_eval(const EvalPlan& plan, const Agent* agent) {
  plan.validate();
  const Scenario base = scenarios::resolve(plan.scenario);
  struct Job {
    std::string policy;
    double loss;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& p : plan.policies) {
    const bool single = std::find(plan.single_loss_policies.begin(), plan.single_loss_policies.end(), p) !=
                        plan.single_loss_policies.end();
    const std::vector<double> losses = single ? std::vector<double>{plan.single_loss} : plan.losses;
    for (double l : losses)
      for (int i = 0; i < plan.batch_size; ++i) jobs.push_back({p, l, plan.seed + static_cast<std::uint64_t>(i)});
  }
  if (std::find(plan.policies.begin(), plan.policies.end(), "marlin") != plan.policies.end() && !agent)
    throw Error("policy marlin requires a checkpoint");

  std::vector<EpisodeReport> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        const Job& j = jobs[i];
        out[i] = run_episode(j.policy, with_final_loss(base, j.loss), plan.payload_bytes, j.seed, agent,
                             plan.max_eval_steps)
                     .report;
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const int n = std::min<int>(plan.threads, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw Error(first_error);

  std::sort(out.begin(), out.end(), [](const EpisodeReport& a, const EpisodeReport& b) {
    return std::tie(a.policy, a.loss_c, a.seed) < std::tie(b.policy, b.loss_c, b.seed);
  });
  return out;
}

const std::vector<PublishedReference>& published_references() {
  static const std::vector<PublishedReference> refs = {
      {"marlin", 19.3, 12.22},
      {"cubic", 22.20, 53.1},
      {"fixed", 10.59, 141.93},
  };
  return refs;
}

namespace {

std::string ref_cell(const std::string& policy, bool time) {
  for (const auto& r : published_references()) {
    if (r.policy != policy) continue;
    const auto& v = time ? r.time_s : r.retransmissions;
    return v ? format_double(*v) : "";
  }
  return "";
}

}  // namespace

void write_report(const std::vector<EpisodeReport>& episodes, const std::filesystem::path& out_dir,
                  double retx_loss) {
  const auto rows = aggregate(episodes);
  std::filesystem::create_directories(out_dir);
  std::ofstream t(out_dir / "time_rti.csv");
  if (!t) throw Error("cannot write " + (out_dir / "time_rti.csv").string());
  t << "policy,loss_c,episodes,time_mean_s,time_std_s,rti_mean,rti_std,published_reference_time_s\n";
  for (const auto& r : rows) {
    t << r.policy << ',' << format_double(r.loss_c) << ',' << r.episodes << ',' << format_double(r.time_mean) << ','
      << format_double(r.time_std) << ',' << format_double(r.rti_mean) << ',' << format_double(r.rti_std) << ','
      << ref_cell(r.policy, true) << '\n';
  }
  std::ofstream x(out_dir / "retransmissions.csv");
  if (!x) throw Error("cannot write " + (out_dir / "retransmissions.csv").string());
  x << "policy,loss_c,episodes,retx_mean,retx_std,published_reference_retx\n";
  for (const auto& r : rows) {
    if (std::abs(r.loss_c - retx_loss) > 1e-12 || r.policy == "ideal") continue;
    x << r.policy << ',' << format_double(r.loss_c) << ',' << r.episodes << ',' << format_double(r.retx_mean) << ','
      << format_double(r.retx_std) << ',' << ref_cell(r.policy, false) << '\n';
  }
}

}  // namespace tacnet
