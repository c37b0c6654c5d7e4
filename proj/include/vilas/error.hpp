#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vilas {

enum class Errc {
  invalid_argument,
  limit_violation,
  non_finite,
  placement_infeasible,
  oversize,
  protocol,
  timeout,
  connection,
  remote,
  adapter,
  chunk_shape,
  observation_unavailable,
  policy_unavailable,
  calibration_unstable,
  integrity,
  io,
  mixed_rates,
  undefined_rate,
  empty_samples,
};

std::string_view errc_name(Errc code);

/// Exception carrying a machine-checkable error code. All library failures
/// are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vilas
