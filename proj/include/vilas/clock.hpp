#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <set>
#include <thread>

namespace vilas {

using Micros = std::chrono::microseconds;

inline double to_ms(Micros t) { return static_cast<double>(t.count()) / 1000.0; }
inline double to_seconds(Micros t) { return static_cast<double>(t.count()) / 1e6; }
inline Micros from_seconds(double s) {
  return Micros(static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5)));
}

/// Monotonic time source shared by loops and services.
///
/// Two implementations exist: RealClock follows the steady clock, and
/// VirtualClock is a conservative discrete-event clock that only advances
/// once every registered participant is asleep. Components take a Clock&
/// and never read std::chrono directly, which is what makes the
/// accelerated mode behave identically to wall-clock runs.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Micros now() const = 0;
  virtual void sleep_until(Micros t) = 0;
  void sleep_for(Micros d) { sleep_until(now() + d); }

  // Participation hooks; no-ops on the real clock.
  virtual void join() {}
  virtual void leave() {}
  virtual bool is_virtual() const { return false; }
};

class RealClock final : public Clock {
 public:
  RealClock() : epoch_(std::chrono::steady_clock::now()) {}

  Micros now() const override {
    return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - epoch_);
  }

  void sleep_until(Micros t) override {
    std::this_thread::sleep_until(epoch_ + t);
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

/// Discrete-event clock. Each periodic task joins as a participant; time
/// jumps to the earliest pending deadline when all participants sleep.
/// A thread that sleeps without having joined participates only for the
/// duration of that sleep (this is how injected server latency works).
class VirtualClock final : public Clock {
 public:
  Micros now() const override {
    std::lock_guard lk(mu_);
    return now_;
  }

  void sleep_until(Micros t) override;
  void join() override;
  void leave() override;
  bool is_virtual() const override { return true; }

  /// Moves time forward directly. Only valid with no participants.
  void advance(Micros d);

 private:
  void maybe_advance_locked();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  Micros now_{0};
  int participants_ = 0;
  std::multiset<std::int64_t> waiting_;
};

/// RAII registration of the current task with a clock.
class ClockParticipant {
 public:
  explicit ClockParticipant(Clock& clock) : clock_(clock) { clock_.join(); }
  ~ClockParticipant() { clock_.leave(); }
  ClockParticipant(const ClockParticipant&) = delete;
  ClockParticipant& operator=(const ClockParticipant&) = delete;

 private:
  Clock& clock_;
};

/// Temporarily withdraws a participant while it blocks on a remote party
/// that itself consumes clock time (a policy server injecting latency).
class ClockYield {
 public:
  explicit ClockYield(Clock& clock) : clock_(clock) { clock_.leave(); }
  ~ClockYield() { clock_.join(); }
  ClockYield(const ClockYield&) = delete;
  ClockYield& operator=(const ClockYield&) = delete;

 private:
  Clock& clock_;
};

}  // namespace vilas
