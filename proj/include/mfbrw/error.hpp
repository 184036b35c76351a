#pragma once

#include <stdexcept>
#include <string>

namespace mfbrw {

enum class Errc {
  invalid_argument,
  rank_mismatch,
  resource_limit,
  no_finite_solution,
  near_singular,
  bracket_failure,
  non_convergent,
  infeasible,
  root_out_of_range,
  route_mismatch,
  empty_set,
  zero_speed_off_critical,
  out_of_phase,
  dim_mismatch,
  config,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::rank_mismatch: return "RankMismatch";
    case Errc::resource_limit: return "ResourceLimit";
    case Errc::no_finite_solution: return "NoFiniteSolution";
    case Errc::near_singular: return "NearSingular";
    case Errc::bracket_failure: return "BracketFailure";
    case Errc::non_convergent: return "NonConvergent";
    case Errc::infeasible: return "Infeasible";
    case Errc::root_out_of_range: return "RootOutOfRange";
    case Errc::route_mismatch: return "RouteMismatch";
    case Errc::empty_set: return "EmptySet";
    case Errc::zero_speed_off_critical: return "ZeroSpeedOffCritical";
    case Errc::out_of_phase: return "OutOfPhase";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::config: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message names the violated condition and the offending values.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mfbrw
