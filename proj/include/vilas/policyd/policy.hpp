#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vilas/broker/protocol.hpp"
#include "vilas/sim/world.hpp"

namespace vilas::policyd {

using broker::Observation;
using sim::StateVector;

/// zeros | random | replay:<episode> | oracle
struct PolicySpec {
  std::string kind = "zeros";
  std::string episode;

  static PolicySpec parse(const std::string& text);
  std::string str() const { return episode.empty() ? kind : kind + ":" + episode; }
};

/// Privileged world access for the oracle.
using WorldProvider = std::function<sim::WorldState()>;

struct PolicyContext {
  int horizon = 50;
  double control_rate_hz = 20.0;
  sim::SimConfig config;
  WorldProvider world;
};

/// One policy instance belongs to one client session.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Exactly `horizon` rows.
  virtual std::vector<StateVector> act(const Observation& obs) = 0;
  virtual void reset(std::uint64_t seed) = 0;
};

class ZerosPolicy final : public Policy {
 public:
  explicit ZerosPolicy(int horizon) : horizon_(horizon) {}
  std::vector<StateVector> act(const Observation&) override;
  void reset(std::uint64_t) override {}

 private:
  int horizon_;
};

/// Random walk: each row moves every joint by U(-0.05, 0.05) rad from the
/// previous row, starting at the observed state, clamped to the limits.
class RandomPolicy final : public Policy {
 public:
  RandomPolicy(const PolicyContext& ctx, std::uint64_t seed);
  std::vector<StateVector> act(const Observation& obs) override;
  void reset(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  int horizon_;
  sim::ArmModel arm_;
  std::mt19937_64 rng_;
};

/// Replays recorded actions resampled to the control rate by zero-order
/// hold. Successive calls return successive slices; past the end the final
/// action repeats.
class ReplayPolicy final : public Policy {
 public:
  ReplayPolicy(std::vector<StateVector> actions, double record_rate_hz, const PolicyContext& ctx);
  static std::vector<StateVector> resample(const std::vector<StateVector>& actions, double record_rate_hz,
                                           double control_rate_hz);
  std::vector<StateVector> act(const Observation& obs) override;
  void reset(std::uint64_t) override { cursor_ = 0; }
  std::size_t length() const { return actions_.size(); }

 private:
  int horizon_;
  std::vector<StateVector> actions_;
  std::size_t cursor_ = 0;
};

/// Scripted grasper reading privileged world state. Each call replans from
/// the current world: nearest free object, move above, descend, close,
/// lift, carry over the box, open. The plan is rolled out in joint space at
/// 90% of the joint velocity limits. This is a test oracle for the
/// plumbing, not a learned policy.
class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const PolicyContext& ctx);
  std::vector<StateVector> act(const Observation& obs) override;
  void reset(std::uint64_t) override {}

  struct Keypose {
    sim::JointVector q{};
    double g = 0;
    int dwell = 0;  // rows to hold once reached
  };
  std::vector<Keypose> plan(const sim::WorldState& w) const;
  std::vector<StateVector> rollout(const sim::JointState& from, const std::vector<Keypose>& plan) const;
  StateVector park_pose() const;

 private:
  sim::JointVector ik(double x, double y, double z) const;

  PolicyContext ctx_;
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const PolicyContext& ctx, std::uint64_t seed);

}  // namespace vilas::policyd
