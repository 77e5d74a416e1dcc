#include "tacnet/protocol.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <json.hpp>

namespace tacnet {

using nlohmann::json;

namespace {

json parse_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw DecodeError("decode error at byte " + std::to_string(offset) + ": " + e.what(), offset);
  }
}

std::size_t key_offset(const std::string& line, const std::string& key) {
  const auto pos = line.find('"' + key + '"');
  return pos == std::string::npos ? 0 : pos;
}

}  // namespace

std::string encode(const EnvRequest& req) {
  json j;
  j["cmd"] = req.cmd;
  if (req.action) j["action"] = *req.action;
  if (req.seed) j["seed"] = *req.seed;
  if (req.scenario) j["scenario"] = *req.scenario;
  return j.dump();
}

std::string encode(const EnvResponse& resp) {
  json j;
  if (resp.error) {
    j["error"] = *resp.error;
    return j.dump();
  }
  j["obs"] = resp.obs;
  j["reward"] = resp.reward;
  j["truncated"] = resp.truncated;
  j["terminal"] = resp.terminal;
  j["info"] = resp.info;
  return j.dump();
}

EnvRequest decode_request(const std::string& line) {
  const json j = parse_line(line);
  if (!j.is_object()) throw DecodeError("decode error at byte 0: expected an object", 0);
  EnvRequest req;
  if (!j.contains("cmd") || !j["cmd"].is_string())
    throw DecodeError("decode error at byte 0: missing string field cmd", 0);
  req.cmd = j["cmd"].get<std::string>();
  if (req.cmd != "reset" && req.cmd != "step" && req.cmd != "configure" && req.cmd != "close")
    throw DecodeError("decode error at byte " + std::to_string(key_offset(line, "cmd")) + ": unknown cmd " + req.cmd,
                      key_offset(line, "cmd"));
  if (j.contains("action")) {
    if (!j["action"].is_number())
      throw DecodeError("decode error at byte " + std::to_string(key_offset(line, "action")) + ": action must be a number",
                        key_offset(line, "action"));
    req.action = j["action"].get<double>();
  }
  if (req.cmd == "step" && !req.action) throw DecodeError("decode error at byte 0: step requires action", 0);
  if (req.cmd != "step" && req.action)
    throw DecodeError("decode error at byte " + std::to_string(key_offset(line, "action")) + ": action only valid for step",
                      key_offset(line, "action"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw DecodeError("decode error at byte " + std::to_string(key_offset(line, "seed")) +
                            ": seed must be a non-negative integer",
                        key_offset(line, "seed"));
    req.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("scenario")) {
    if (!j["scenario"].is_string())
      throw DecodeError("decode error at byte " + std::to_string(key_offset(line, "scenario")) +
                            ": scenario must be a string",
                        key_offset(line, "scenario"));
    req.scenario = j["scenario"].get<std::string>();
  }
  return req;
}

EnvResponse decode_response(const std::string& line) {
  const json j = parse_line(line);
  if (!j.is_object()) throw DecodeError("decode error at byte 0: expected an object", 0);
  EnvResponse r;
  if (j.contains("error")) {
    r.error = j["error"].get<std::string>();
    return r;
  }
  try {
    r.obs = j.at("obs").get<std::vector<double>>();
    r.reward = j.at("reward").get<double>();
    r.truncated = j.at("truncated").get<bool>();
    r.terminal = j.at("terminal").get<bool>();
    r.info = j.at("info").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw DecodeError(std::string("decode error at byte 0: ") + e.what(), 0);
  }
  return r;
}

namespace {

const char* const kWireInfo[] = {"cwnd_bytes", "srtt_ms", "retransmissions_window", "sim_time_s"};

}  // namespace

EnvResponse to_response(const StepResult& step) {
  EnvResponse r;
  r.obs = step.observation.values;
  r.reward = step.reward;
  r.truncated = step.truncated;
  r.terminal = step.terminal;
  for (const char* k : kWireInfo) r.info[k] = step.info.at(k);
  return r;
}

EnvResponse to_response(const Observation& obs, Env& env) {
  EnvResponse r;
  r.obs = obs.values;
  const auto& st = env.network().sender().state();
  r.info = {{"cwnd_bytes", static_cast<double>(st.cwnd_bytes)},
            {"srtt_ms", st.srtt_ms},
            {"retransmissions_window", env.raw_state()[2 * kStatsPerFeature]},
            {"sim_time_s", env.network().sim().now()}};
  return r;
}

Session::Session(Scenario scenario, EnvConfig config) : scenario_(std::move(scenario)), config_(config) {}

EnvResponse Session::handle(const EnvRequest& req) {
  EnvResponse err;
  if (closed_) {
    err.error = "closed";
    return err;
  }
  try {
    if (req.cmd == "configure") {
      if (!req.scenario) {
        err.error = "configure requires scenario";
        return err;
      }
      scenario_ = scenarios::resolve(*req.scenario);
      env_.reset();
      reset_ = false;
      return EnvResponse{};
    }
    if (req.cmd == "close") {
      env_.reset();
      closed_ = true;
      return EnvResponse{};
    }
    if (req.cmd == "reset") {
      if (!env_) {
        // the normalizer persists across resets within a session
        env_ = std::make_unique<Env>(scenario_, config_);
      }
      const Observation obs = env_->reset(req.seed.value_or(0));
      reset_ = true;
      return to_response(obs, *env_);
    }
    if (req.cmd == "step") {
      if (!reset_ || !env_ || env_->needs_reset()) {
        err.error = "not_reset";
        return err;
      }
      if (!req.action || !std::isfinite(*req.action) || std::abs(*req.action) > 1.0) {
        err.error = "action must be a finite number in [-1, 1]";
        return err;
      }
      return to_response(env_->step(*req.action));
    }
    err.error = "unknown cmd " + req.cmd;
  } catch (const std::exception& e) {
    err.error = e.what();
  }
  return err;
}

std::string Session::handle_line(const std::string& line) {
  try {
    return encode(handle(decode_request(line)));
  } catch (const DecodeError& e) {
    EnvResponse r;
    r.error = e.what();
    return encode(r);
  } catch (const std::exception& e) {
    EnvResponse r;
    r.error = e.what();
    return encode(r);
  }
}

Server::Server(ServerOptions options) : options_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::start() {
  options_.scenario.validate();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("bind failure: bad address " + options_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("bind failure on " + options_.bind_address + ":" + std::to_string(options_.port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
}

void Server::run() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(clients_mu_);
    client_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { serve_client(fd); });
  }
}

void Server::run_async() {
  accept_thread_ = std::thread([this] { run(); });
}

void Server::stop() {
  running_ = false;
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard lock(clients_mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : clients_)
    if (t.joinable()) t.join();
  clients_.clear();
  client_fds_.clear();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

namespace {

bool write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

void Server::serve_client(int fd) {
  Session session(options_.scenario, options_.env);
  std::string buffer;
  char chunk[4096];
  while (!session.closed()) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!write_all(fd, session.handle_line(line) + "\n")) goto done;
      if (session.closed()) goto done;
    }
  }
done:
  std::lock_guard lock(clients_mu_);
  std::erase(client_fds_, fd);
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

}  // namespace tacnet
