#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <utility>

namespace vilas {

/// Single-producer/single-consumer latest-value cell. A write overwrites any
/// unread value; readers always see the newest sample and its sequence
/// number.
template <typename T>
class LatestValue {
 public:
  struct Sample {
    T value;
    std::uint64_t seq;
  };

  void put(T value) {
    std::lock_guard lk(mu_);
    value_ = std::move(value);
    ++seq_;
  }

  std::optional<Sample> get() const {
    std::lock_guard lk(mu_);
    if (!value_) return std::nullopt;
    return Sample{*value_, seq_};
  }

  std::uint64_t seq() const {
    std::lock_guard lk(mu_);
    return seq_;
  }

 private:
  mutable std::mutex mu_;
  std::optional<T> value_;
  std::uint64_t seq_ = 0;
};

}  // namespace vilas
