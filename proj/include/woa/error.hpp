#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace woa {

// Every failure the library can raise. The CLI maps these onto exit codes.
enum class ErrorCode {
  invalid_spec,
  bound_out_of_range,
  unsupported_plan,
  below_support,
  degenerate_active_set,
  step_underflow,
  no_convergence,
  monotonicity_violation,
  horizon_unstable,
  out_of_range,
  not_ltd,
  mismatch,
  invalid_society,
  inapplicable,
  config_parse,
  io_failure,
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::bound_out_of_range: return "bound-out-of-range";
    case ErrorCode::unsupported_plan: return "unsupported-plan";
    case ErrorCode::below_support: return "below-support";
    case ErrorCode::degenerate_active_set: return "degenerate-active-set";
    case ErrorCode::step_underflow: return "step-underflow";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::monotonicity_violation: return "monotonicity-violation";
    case ErrorCode::horizon_unstable: return "horizon-unstable";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::not_ltd: return "not-ltd";
    case ErrorCode::mismatch: return "mismatch";
    case ErrorCode::invalid_society: return "invalid-society";
    case ErrorCode::inapplicable: return "inapplicable";
    case ErrorCode::config_parse: return "config-parse";
    case ErrorCode::io_failure: return "io-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace woa
