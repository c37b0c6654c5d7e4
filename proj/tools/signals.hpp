#pragma once

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <functional>
#include <thread>

namespace vilas::cli {

/// Routes SIGINT/SIGTERM to a callback. Construct before any thread starts
/// so every thread inherits the blocked mask.
class SignalWatch {
 public:
  SignalWatch() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    sigaddset(&set_, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
  }

  ~SignalWatch() { disarm(); }

  SignalWatch(const SignalWatch&) = delete;
  SignalWatch& operator=(const SignalWatch&) = delete;

  /// Runs on_stop from a watcher thread when a stop signal arrives.
  void arm(std::function<void()> on_stop) {
    disarm();
    thread_ = std::thread([this, on_stop = std::move(on_stop)] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (sig == SIGUSR1) return;  // disarm wake-up
      received_ = true;
      on_stop();
    });
  }

  void disarm() {
    if (!thread_.joinable()) return;
    if (!received_) pthread_kill(thread_.native_handle(), SIGUSR1);
    thread_.join();
  }

  /// Blocks the calling thread until a stop signal arrives.
  void wait() {
    int sig = 0;
    do sigwait(&set_, &sig);
    while (sig == SIGUSR1);
    received_ = true;
  }

  bool received() const { return received_; }

 private:
  sigset_t set_;
  std::atomic<bool> received_{false};
  std::thread thread_;
};

}  // namespace vilas::cli
