#pragma once

#include <string>
#include <vector>

#include "parex/paramspace.hpp"
#include "parex/trialstore.hpp"

namespace parex {

struct Diagnostic {
  std::string path;  // location in the payload document, e.g. "workflow_options.x"
  std::string message;
};

class PayloadError : public Error {
 public:
  explicit PayloadError(std::vector<Diagnostic> diagnostics)
      : Error(Errc::payload_invalid, join(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<Diagnostic>& diagnostics);

  std::vector<Diagnostic> diagnostics_;
};

// Study options carried under "variational_options".
struct StudyOptions {
  std::string study_kind = "calibration";  // or "sensitivity"
  int num_studies = 1;
  int num_episodes = 0;
  std::vector<std::string> study_names;    // one shared name, or num_studies names
  std::vector<std::string> sampler_types;  // one per study
  std::vector<std::string> metrics;        // metric_to_optimize
  std::vector<Direction> directions;
  std::uint64_t seed = 0;
  ojson sampler_config = ojson::object();
  ojson fanova_config = ojson::object();

  bool shared_study() const { return study_names.size() == 1; }
};

struct Payload {
  std::string workflow_type;
  SearchSpace space;
  StudyOptions options;
  std::vector<std::string> warnings;  // unknown fields, coercions
};

// Parses and validates a payload document, aggregating every field-level
// problem into one PayloadError.  Defaults: num_studies=1,
// sampler_type="RandomSampler", metric_to_optimize=["identity"],
// directions=["minimize"] per metric, study_kind="calibration",
// study_name="<workflow>-study".  Unknown fields warn instead of failing.
Payload validate_payload(const ojson& document);

Payload load_payload_file(const std::string& path);

}  // namespace parex
