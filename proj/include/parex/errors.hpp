#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parex {

// Error codes cover every failure mode the library reports.  The code
// survives serialization over the store protocol, so remote clients can
// rethrow the same condition the server raised.
enum class Errc {
  malformed_range,
  inverted_bounds,
  non_positive_log_bound,
  point_space_mismatch,
  study_config_mismatch,
  unknown_trial,
  illegal_transition,
  non_finite_value,
  no_completed_trials,
  not_found,
  dimension_mismatch,
  multi_objective_unsupported,
  unknown_sampler,
  insufficient_data,
  unbound_metric_input,
  cycle_introduced,
  step_failed,
  step_timeout,
  monitor_unreachable,
  malformed_response,
  unknown_workflow,
  unknown_study,
  out_of_domain_source,
  shape_mismatch,
  payload_invalid,
  store_io,
  store_unavailable,
};

std::string_view errc_name(Errc code);
Errc errc_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace parex
