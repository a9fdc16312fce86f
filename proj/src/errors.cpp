#include "parex/errors.hpp"

#include <array>
#include <utility>

namespace parex {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 27> kNames{{
    {Errc::malformed_range, "MalformedRange"},
    {Errc::inverted_bounds, "InvertedBounds"},
    {Errc::non_positive_log_bound, "NonPositiveLogBound"},
    {Errc::point_space_mismatch, "PointSpaceMismatch"},
    {Errc::study_config_mismatch, "StudyConfigMismatch"},
    {Errc::unknown_trial, "UnknownTrial"},
    {Errc::illegal_transition, "IllegalTransition"},
    {Errc::non_finite_value, "NonFiniteValue"},
    {Errc::no_completed_trials, "NoCompletedTrials"},
    {Errc::not_found, "NotFound"},
    {Errc::dimension_mismatch, "DimensionMismatch"},
    {Errc::multi_objective_unsupported, "MultiObjectiveUnsupported"},
    {Errc::unknown_sampler, "UnknownSampler"},
    {Errc::insufficient_data, "InsufficientData"},
    {Errc::unbound_metric_input, "UnboundMetricInput"},
    {Errc::cycle_introduced, "CycleIntroduced"},
    {Errc::step_failed, "StepFailed"},
    {Errc::step_timeout, "Timeout"},
    {Errc::monitor_unreachable, "MonitorUnreachable"},
    {Errc::malformed_response, "MalformedResponse"},
    {Errc::unknown_workflow, "UnknownWorkflow"},
    {Errc::unknown_study, "UnknownStudy"},
    {Errc::out_of_domain_source, "OutOfDomainSource"},
    {Errc::shape_mismatch, "ShapeMismatch"},
    {Errc::payload_invalid, "PayloadInvalid"},
    {Errc::store_io, "StoreIo"},
    {Errc::store_unavailable, "StoreUnavailable"},
}};

}  // namespace

std::string_view errc_name(Errc code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UnknownError";
}

Errc errc_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return Errc::store_io;
}

}  // namespace parex
