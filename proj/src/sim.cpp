#include "tacnet/sim.hpp"

#include <algorithm>

namespace tacnet {

void Simulator::schedule_at(double at_s, Action action) {
  queue_.push(Event{std::max(at_s, clock_.now_s), next_seq_++, std::move(action)});
}

void Simulator::fire_next() {
  // priority_queue::top is const; the action is moved out before pop.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  clock_.now_s = ev.time;
  ++clock_.event_count;
  ev.action();
  if (post_event_hook_) post_event_hook_();
}

std::uint64_t Simulator::run_until(double t) {
  if (t < clock_.now_s) throw Error("run_until: target time is in the past");
  std::uint64_t processed = 0;
  while (!queue_.empty() && queue_.top().time <= t) {
    fire_next();
    ++processed;
  }
  clock_.now_s = t;
  return processed;
}

bool Simulator::run_while(const std::function<bool()>& keep_going, double limit_s) {
  while (keep_going()) {
    if (queue_.empty() || queue_.top().time > limit_s) {
      clock_.now_s = std::max(clock_.now_s, limit_s);
      return false;
    }
    fire_next();
  }
  return true;
}

void Simulator::trace(const std::string& line) {
  if (!tracing_) return;
  trace_ += line;
  trace_ += '\n';
}

}  // namespace tacnet
