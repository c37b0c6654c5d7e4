#include "vilas/error.hpp"

namespace vilas {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::limit_violation: return "limit-violation";
    case Errc::non_finite: return "non-finite";
    case Errc::placement_infeasible: return "placement-infeasible";
    case Errc::oversize: return "oversize";
    case Errc::protocol: return "protocol";
    case Errc::timeout: return "timeout";
    case Errc::connection: return "connection";
    case Errc::remote: return "remote";
    case Errc::adapter: return "adapter";
    case Errc::chunk_shape: return "chunk-shape";
    case Errc::observation_unavailable: return "observation-unavailable";
    case Errc::policy_unavailable: return "policy-unavailable";
    case Errc::calibration_unstable: return "calibration-unstable";
    case Errc::integrity: return "integrity";
    case Errc::io: return "io";
    case Errc::mixed_rates: return "mixed-rates";
    case Errc::undefined_rate: return "undefined-rate";
    case Errc::empty_samples: return "empty-samples";
  }
  return "unknown";
}

}  // namespace vilas
