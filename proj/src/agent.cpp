#include "tacnet/agent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace tacnet {

void TrainConfig::validate() const {
  if (total_steps < 0) throw Error("train: total_steps must be >= 0");
  if (buffer_capacity == 0) throw Error("train: buffer_capacity must be > 0");
  if (batch_size <= 0) throw Error("train: batch_size must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("train: gamma must be in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("train: tau must be in (0, 1]");
  if (exploration_sigma < 0.0 || target_noise < 0.0 || target_noise_clip < 0.0)
    throw Error("train: noise scales must be >= 0");
  if (actor_lr < 0.0 || critic_lr < 0.0) throw Error("train: learning rates must be >= 0");
  if (policy_delay < 1) throw Error("train: policy_delay must be >= 1");
  if (hidden.empty()) throw Error("train: need at least one hidden layer");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.total_steps = 50000;
  c.buffer_capacity = 50000;
  c.batch_size = 64;
  c.hidden = {64, 64};
  c.actor_lr = 1e-3;
  c.critic_lr = 1e-3;
  c.warmup_steps = 2000;
  return c;
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw Error("train config: expected an object");
  if (j.value("preset", std::string()) == "desk") c = TrainConfig::desk();
  try {
    c.total_steps = j.value("total_steps", c.total_steps);
    c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.hidden = j.value("hidden", c.hidden);
    c.actor_lr = j.value("actor_lr", c.actor_lr);
    c.critic_lr = j.value("critic_lr", c.critic_lr);
    c.gamma = j.value("gamma", c.gamma);
    c.tau = j.value("tau", c.tau);
    c.exploration_sigma = j.value("exploration_sigma", c.exploration_sigma);
    c.target_noise = j.value("target_noise", c.target_noise);
    c.target_noise_clip = j.value("target_noise_clip", c.target_noise_clip);
    c.policy_delay = j.value("policy_delay", c.policy_delay);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int rows, int cols)
    : capacity_(capacity),
      rows_(rows),
      cols_(cols),
      dim_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)),
      obs_(capacity * dim_),
      next_row_(capacity * static_cast<std::size_t>(cols)),
      action_(capacity),
      reward_(capacity),
      terminal_(capacity),
      ids_(capacity) {
  if (capacity == 0 || rows <= 0 || cols <= 0) throw Error("replay buffer: bad shape");
}

void ReplayBuffer::add(std::span<const double> obs, double action, double reward, std::span<const double> next_obs,
                       bool terminal) {
  if (obs.size() != dim_ || next_obs.size() != dim_) throw Error("replay buffer: observation size mismatch");
  std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
  const std::size_t c = static_cast<std::size_t>(cols_);
  std::copy(next_obs.end() - static_cast<std::ptrdiff_t>(c), next_obs.end(),
            next_row_.begin() + static_cast<std::ptrdiff_t>(head_ * c));
  action_[head_] = action;
  reward_[head_] = reward;
  terminal_[head_] = terminal ? 1 : 0;
  ids_[head_] = inserted_++;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

ReplayBuffer::Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ == 0) throw Error("replay buffer: empty");
  const auto d = static_cast<Eigen::Index>(dim_);
  const std::size_t c = static_cast<std::size_t>(cols_);
  Batch b;
  b.obs.resize(d, batch_size);
  b.next_obs.resize(d, batch_size);
  b.action.resize(batch_size);
  b.reward.resize(batch_size);
  b.not_terminal.resize(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const std::size_t i = rng.below(size_);
    const float* o = obs_.data() + i * dim_;
    for (std::size_t j = 0; j < dim_; ++j) b.obs(static_cast<Eigen::Index>(j), k) = o[j];
    for (std::size_t j = 0; j + c < dim_; ++j) b.next_obs(static_cast<Eigen::Index>(j), k) = o[j + c];
    const float* nr = next_row_.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) b.next_obs(static_cast<Eigen::Index>(dim_ - c + j), k) = nr[j];
    b.action[k] = action_[i];
    b.reward[k] = reward_[i];
    b.not_terminal[k] = terminal_[i] ? 0.0 : 1.0;
  }
  return b;
}

Agent Agent::create(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> a{obs_dim};
  a.insert(a.end(), hidden.begin(), hidden.end());
  a.push_back(1);
  std::vector<int> q{obs_dim + 1};
  q.insert(q.end(), hidden.begin(), hidden.end());
  q.push_back(1);
  Agent ag;
  ag.actor = Mlp(a, true);
  ag.critic1 = Mlp(q, false);
  ag.critic2 = Mlp(q, false);
  ag.actor.init(rng);
  ag.critic1.init(rng);
  ag.critic2.init(rng);
  ag.actor_target = ag.actor;
  ag.critic1_target = ag.critic1;
  ag.critic2_target = ag.critic2;
  return ag;
}

double select_action(const Mlp& actor, std::span<const double> obs, double sigma, Rng& rng) {
  Eigen::Map<const Vector> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  double a = actor.predict(x)(0, 0);
  if (sigma > 0.0) a += rng.gaussian(0.0, sigma);
  return std::clamp(a, -1.0, 1.0);
}

namespace {

Matrix stack(const Matrix& obs, const Vector& action) {
  Matrix x(obs.rows() + 1, obs.cols());
  x.topRows(obs.rows()) = obs;
  x.row(obs.rows()) = action.transpose();
  return x;
}

}  // namespace

TrainResult train(Env& env, const TrainConfig& cfg, std::ostream* csv) {
  cfg.validate();
  if (env.config().mode != EnvMode::Training) throw Error("train: environment must be in training mode");
  const int rows = env.config().history;
  const int obs_dim = rows * kStateDim;

  Rng rng(cfg.seed);
  Rng init_rng = rng.substream("init");
  Rng act_rng = rng.substream("explore");
  Rng batch_rng = rng.substream("batch");
  Rng noise_rng = rng.substream("target-noise");

  TrainResult result;
  Agent& ag = result.agent;
  ag = Agent::create(obs_dim, cfg.hidden, init_rng);
  ag.normalizer = env.normalizer();
  if (cfg.total_steps == 0) return result;

  ReplayBuffer buffer(cfg.buffer_capacity, rows, kStateDim);
  Adam actor_opt(ag.actor.parameter_count(), cfg.actor_lr);
  Adam critic1_opt(ag.critic1.parameter_count(), cfg.critic_lr);
  Adam critic2_opt(ag.critic2.parameter_count(), cfg.critic_lr);
  Vector grad;

  std::int64_t episode = 0;
  Observation obs = env.reset(mix_seed(cfg.seed, "episode/" + std::to_string(episode)));
  double ep_return = 0.0;
  double ep_critic = 0.0;
  double ep_actor = 0.0;
  std::int64_t ep_critic_n = 0;
  std::int64_t ep_actor_n = 0;
  std::int64_t updates = 0;

  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    const double action = step <= cfg.warmup_steps ? act_rng.uniform(-1.0, 1.0)
                                                   : select_action(ag.actor, obs.values, cfg.exploration_sigma, act_rng);
    StepResult sr = env.step(action);
    buffer.add(obs.values, action, sr.reward, sr.observation.values, sr.terminal);
    ep_return += sr.reward;
    obs = std::move(sr.observation);

    if (step > cfg.warmup_steps) {
      const auto batch = buffer.sample(cfg.batch_size, batch_rng);
      const double n = static_cast<double>(cfg.batch_size);

      Vector next_a = ag.actor_target.predict(batch.next_obs).row(0).transpose();
      for (Eigen::Index k = 0; k < next_a.size(); ++k) {
        const double eps = std::clamp(noise_rng.gaussian(0.0, cfg.target_noise), -cfg.target_noise_clip,
                                      cfg.target_noise_clip);
        next_a[k] = std::clamp(next_a[k] + eps, -1.0, 1.0);
      }
      const Matrix next_x = stack(batch.next_obs, next_a);
      const Vector q1t = ag.critic1_target.predict(next_x).row(0).transpose();
      const Vector q2t = ag.critic2_target.predict(next_x).row(0).transpose();
      const Vector y = batch.reward + cfg.gamma * batch.not_terminal.cwiseProduct(q1t.cwiseMin(q2t));

      const Matrix x = stack(batch.obs, batch.action);
      double critic_loss = 0.0;
      for (auto [net, opt] : {std::pair{&ag.critic1, &critic1_opt}, std::pair{&ag.critic2, &critic2_opt}}) {
        const Vector q = net->forward(x).row(0).transpose();
        const Vector diff = q - y;
        critic_loss += diff.squaredNorm() / n;
        net->backward((2.0 / n) * diff.transpose(), grad, false);
        opt->step(net->params(), grad);
      }
      critic_loss *= 0.5;
      if (!std::isfinite(critic_loss)) throw DivergenceError("train: critic loss diverged at step " + std::to_string(step));
      ep_critic += critic_loss;
      ++ep_critic_n;

      if (++updates % cfg.policy_delay == 0) {
        const Matrix& a = ag.actor.forward(batch.obs);
        const Matrix xa = stack(batch.obs, a.row(0).transpose());
        const Vector q = ag.critic1.forward(xa).row(0).transpose();
        const double actor_loss = -q.mean();
        if (!std::isfinite(actor_loss)) throw DivergenceError("train: actor loss diverged at step " + std::to_string(step));
        Vector unused;
        const Matrix dx = ag.critic1.backward(Matrix::Constant(1, cfg.batch_size, -1.0 / n), unused);
        ag.actor.backward(dx.bottomRows(1), grad, false);
        actor_opt.step(ag.actor.params(), grad);
        ag.actor_target.soft_update(ag.actor, cfg.tau);
        ag.critic1_target.soft_update(ag.critic1, cfg.tau);
        ag.critic2_target.soft_update(ag.critic2, cfg.tau);
        ep_actor += actor_loss;
        ++ep_actor_n;
      }
    }

    if (sr.truncated || sr.terminal || step == cfg.total_steps) {
      TrainLogRow row{step, ep_return, ep_critic_n ? ep_critic / static_cast<double>(ep_critic_n) : 0.0,
                      ep_actor_n ? ep_actor / static_cast<double>(ep_actor_n) : 0.0};
      result.log.push_back(row);
      if (csv) write_train_log_row(*csv, row);
      ep_return = ep_critic = ep_actor = 0.0;
      ep_critic_n = ep_actor_n = 0;
      if (step < cfg.total_steps) obs = env.reset(mix_seed(cfg.seed, "episode/" + std::to_string(++episode)));
    }
  }
  ag.normalizer = env.normalizer();
  return result;
}

void write_train_log_header(std::ostream& os) { os << "step,episode_return,critic_loss,actor_loss\n"; }

void write_train_log_row(std::ostream& os, const TrainLogRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(row.step), row.episode_return,
                row.critic_loss, row.actor_loss);
  os << buf;
}

namespace {

constexpr char kMagic[8] = {'T', 'A', 'C', 'N', 'E', 'T', 'C', 'K'};

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(s_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return s_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw Error("checkpoint corrupt: truncated");
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

void put_net(Writer& w, const Mlp& net) {
  w.u32(static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) w.u32(static_cast<std::uint32_t>(s));
  w.u8(net.tanh_output() ? 1 : 0);
  w.u64(net.parameter_count());
  for (Eigen::Index i = 0; i < net.params().size(); ++i) w.f64(net.params()[i]);
}

Mlp get_net(Reader& r) {
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw Error("checkpoint corrupt: bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t s = r.u32();
    if (s == 0 || s > (1u << 20)) throw Error("checkpoint corrupt: bad layer size");
    sizes.push_back(static_cast<int>(s));
  }
  const bool tanh_out = r.u8() != 0;
  Mlp net(sizes, tanh_out);
  if (r.u64() != net.parameter_count()) throw Error("checkpoint corrupt: parameter count mismatch");
  r.need(net.parameter_count() * 8);
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()[i] = r.f64();
  return net;
}

}  // namespace

std::string encode_checkpoint(const Agent& a) {
  Writer w;
  w.out.append(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kFeatureSchemaVersion));
  for (const Mlp* net : {&a.actor, &a.critic1, &a.critic2, &a.actor_target, &a.critic1_target, &a.critic2_target})
    put_net(w, *net);
  const Normalizer& nz = a.normalizer;
  w.u64(nz.dim());
  w.f64(nz.decay());
  w.f64(nz.epsilon());
  w.f64(nz.clip());
  w.u64(nz.count());
  for (double v : nz.first_moment()) w.f64(v);
  for (double v : nz.second_moment()) w.f64(v);
  w.u64(fnv1a(w.out.data(), w.out.size()));
  return w.out;
}

Agent decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw Error("checkpoint corrupt: bad magic");
  Reader r(std::string_view(bytes).substr(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw Error("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                std::to_string(kCheckpointVersion));
  const std::uint32_t schema = r.u32();
  if (schema != static_cast<std::uint32_t>(kFeatureSchemaVersion))
    throw Error("checkpoint version mismatch: feature schema " + std::to_string(schema));
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[body + i])) << (8 * i);
  if (stored != fnv1a(bytes.data(), body)) throw Error("checkpoint corrupt: checksum mismatch");

  Agent a;
  a.actor = get_net(r);
  a.critic1 = get_net(r);
  a.critic2 = get_net(r);
  a.actor_target = get_net(r);
  a.critic1_target = get_net(r);
  a.critic2_target = get_net(r);
  const std::uint64_t dim = r.u64();
  if (dim == 0 || dim > (1u << 20)) throw Error("checkpoint corrupt: bad normalizer size");
  const double decay = r.f64();
  const double eps = r.f64();
  const double clip = r.f64();
  const std::uint64_t count = r.u64();
  r.need(dim * 16);
  std::vector<double> first(dim);
  std::vector<double> second(dim);
  for (auto& v : first) v = r.f64();
  for (auto& v : second) v = r.f64();
  a.normalizer = Normalizer(dim, decay, eps, clip);
  a.normalizer.restore(std::move(first), std::move(second), count);
  if (r.remaining() != 8) throw Error("checkpoint corrupt: trailing bytes");
  return a;
}

void save_checkpoint(const Agent& agent, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(agent);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write checkpoint " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("cannot write checkpoint " + path.string());
}

Agent load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace tacnet
