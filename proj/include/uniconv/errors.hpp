#pragma once

#include <stdexcept>
#include <string>

namespace uniconv {

/// Failure categories surfaced by the toolkit.  Each maps onto a CLI exit
/// code; library users can switch on `code()` instead of parsing messages.
enum class errc {
  parse_error,          // malformed problem file (message carries line number)
  dimension_mismatch,   // inconsistent dimensions between sections or operands
  asymmetric_matrix,    // quadratic-form matrix not symmetric
  unknown_set_kind,     // set kind token not recognised
  invalid_parameter,    // out-of-range scalar (p <= 1, radius <= 0, ...)
  unsupported,          // operation not available for this configuration
  not_onto,             // derivative cannot be surjective (m > n)
  region_violation,     // argument outside the region a bound was computed on
  not_certified,        // convexity certificate required but absent/failed
  infeasible,           // no feasible point found in the constraint set
  verification_failure, // a posteriori check (saddle, midpoint, ...) failed
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::parse_error: return "parse_error";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::asymmetric_matrix: return "asymmetric_matrix";
    case errc::unknown_set_kind: return "unknown_set_kind";
    case errc::invalid_parameter: return "invalid_parameter";
    case errc::unsupported: return "unsupported";
    case errc::not_onto: return "not_onto";
    case errc::region_violation: return "region_violation";
    case errc::not_certified: return "not_certified";
    case errc::infeasible: return "infeasible";
    case errc::verification_failure: return "verification_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace uniconv
