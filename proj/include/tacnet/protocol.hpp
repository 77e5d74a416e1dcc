#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tacnet/env.hpp"

namespace tacnet {

class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset) : Error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct EnvRequest {
  std::string cmd;  // reset | step | configure | close
  std::optional<double> action;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario;
  bool operator==(const EnvRequest&) const = default;
};

struct EnvResponse {
  std::vector<double> obs;
  double reward = 0.0;
  bool truncated = false;
  bool terminal = false;
  std::map<std::string, double> info;
  std::optional<std::string> error;
  bool operator==(const EnvResponse&) const = default;
};

/// One JSON document per line, without the trailing newline.
std::string encode(const EnvRequest& req);
std::string encode(const EnvResponse& resp);
/// Throws DecodeError carrying the byte offset of the problem.
EnvRequest decode_request(const std::string& line);
EnvResponse decode_response(const std::string& line);

EnvResponse to_response(const StepResult& step);
EnvResponse to_response(const Observation& obs, Env& env);

/// Request handling for one connection; owns its environment.
class Session {
 public:
  Session(Scenario scenario, EnvConfig config);

  /// Processes one line and returns the response line. Never throws.
  std::string handle_line(const std::string& line);
  EnvResponse handle(const EnvRequest& req);
  bool closed() const { return closed_; }

 private:
  Scenario scenario_;
  EnvConfig config_;
  std::unique_ptr<Env> env_;
  bool reset_ = false;
  bool closed_ = false;
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  int port = 5555;  // 0 picks a free port
  Scenario scenario;
  EnvConfig env;
};

/// Newline-delimited JSON over TCP, one thread and one environment per
/// connection.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; throws on failure.
  void start();
  /// Accepts connections on a background thread.
  void run_async();
  /// Accepts connections on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void serve_client(int fd);

  ServerOptions options_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex clients_mu_;
  std::vector<std::thread> clients_;
  std::vector<int> client_fds_;
};

}  // namespace tacnet
