#include "vilas/clock.hpp"

#include <map>

namespace vilas {
namespace {

// Per-thread membership count for each virtual clock.
thread_local std::map<const VirtualClock*, int> t_membership;

}  // namespace

void VirtualClock::join() {
  std::lock_guard lk(mu_);
  ++t_membership[this];
  ++participants_;
}

void VirtualClock::leave() {
  std::lock_guard lk(mu_);
  auto it = t_membership.find(this);
  if (it == t_membership.end() || it->second == 0) return;
  --it->second;
  --participants_;
  maybe_advance_locked();
}

void VirtualClock::sleep_until(Micros t) {
  std::unique_lock lk(mu_);
  if (t <= now_) return;
  auto it = t_membership.find(this);
  const bool transient = it == t_membership.end() || it->second == 0;
  if (transient) ++participants_;
  waiting_.insert(t.count());
  maybe_advance_locked();
  cv_.wait(lk, [&] { return now_ >= t; });
  waiting_.erase(waiting_.find(t.count()));
  if (transient) --participants_;
  maybe_advance_locked();
}

void VirtualClock::advance(Micros d) {
  std::lock_guard lk(mu_);
  now_ += d;
  cv_.notify_all();
}

void VirtualClock::maybe_advance_locked() {
  if (participants_ <= 0 || waiting_.empty()) return;
  if (static_cast<int>(waiting_.size()) < participants_) return;
  const Micros next{*waiting_.begin()};
  if (next <= now_) return;
  now_ = next;
  cv_.notify_all();
}

}  // namespace vilas
