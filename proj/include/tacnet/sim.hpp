#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace tacnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimClock {
  double now_s = 0.0;
  std::uint64_t event_count = 0;
};

/// Single-threaded discrete-event engine. Events fire in (time, insertion
/// sequence) order, so runs are reproducible across platforms.
class Simulator {
 public:
  using Action = std::function<void()>;

  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  double now() const { return clock_.now_s; }
  const SimClock& clock() const { return clock_; }

  /// Schedules `action` at absolute time `at_s` (clamped to now).
  void schedule_at(double at_s, Action action);
  void schedule_in(double delay_s, Action action) { schedule_at(now() + delay_s, std::move(action)); }

  /// Processes every event with time <= t and leaves the clock at t.
  std::uint64_t run_until(double t);

  /// Processes events while `keep_going()` holds, up to time `limit_s`.
  /// Returns true if the predicate turned false before the limit.
  bool run_while(const std::function<bool()>& keep_going, double limit_s);

  std::size_t pending() const { return queue_.size(); }

  /// Called after every processed event; used by invariant checks.
  void set_post_event_hook(Action hook) { post_event_hook_ = std::move(hook); }

  /// Event trace. Disabled unless enabled; lines are appended verbatim.
  void enable_trace(bool on) { tracing_ = on; }
  bool tracing() const { return tracing_; }
  void trace(const std::string& line);
  const std::string& trace_text() const { return trace_; }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void fire_next();

  SimClock clock_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Action post_event_hook_;
  bool tracing_ = false;
  std::string trace_;
};

}  // namespace tacnet
