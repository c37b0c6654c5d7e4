#include <doctest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "vilas/clock.hpp"

using namespace vilas;

TEST_CASE("virtual clock advances only when every participant sleeps") {
  VirtualClock clock;
  std::vector<std::int64_t> a_times, b_times;
  auto worker = [&](Micros period, int n, std::vector<std::int64_t>& out) {
    ClockParticipant p(clock);
    Micros next{0};
    for (int i = 0; i < n; ++i) {
      next += period;
      clock.sleep_until(next);
      out.push_back(clock.now().count());
    }
  };
  // Both register before either starts sleeping.
  clock.join();
  std::thread a([&] { worker(Micros(12000), 25, a_times); });
  std::thread b([&] { worker(Micros(33333), 9, b_times); });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  clock.leave();
  a.join();
  b.join();
  REQUIRE(a_times.size() == 25);
  REQUIRE(b_times.size() == 9);
  for (int i = 0; i < 25; ++i) CHECK(a_times[i] == 12000 * (i + 1));
  for (int i = 0; i < 9; ++i) CHECK(b_times[i] == 33333 * (i + 1));
}

TEST_CASE("transient sleeper advances a clock whose participant yielded") {
  VirtualClock clock;
  ClockParticipant self(clock);
  clock.sleep_until(Micros(1000));
  CHECK(clock.now() == Micros(1000));
  {
    ClockYield yield(clock);
    std::thread server([&] { clock.sleep_for(Micros(73800)); });
    server.join();
  }
  CHECK(clock.now() == Micros(74800));
}

TEST_CASE("real clock sleeps roughly on schedule") {
  RealClock clock;
  const auto start = clock.now();
  clock.sleep_for(Micros(20000));
  const auto elapsed = clock.now() - start;
  CHECK(elapsed >= Micros(20000));
  CHECK(elapsed < Micros(200000));
}
