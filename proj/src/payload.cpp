#include "parex/payload.hpp"

#include <fstream>
#include <set>

#include "parex/samplers.hpp"

namespace parex {

std::string PayloadError::join(const std::vector<Diagnostic>& diagnostics) {
  std::string out = "payload validation failed";
  for (const auto& d : diagnostics) out += "\n  " + d.path + ": " + d.message;
  return out;
}

namespace {

const std::set<std::string> kTopLevelFields = {"workflow_type", "workflow_options",
                                               "variational_options"};
const std::set<std::string> kVariationalFields = {
    "study_kind",  "num_studies",        "num_episodes", "study_name",
    "sampler_type", "metric_to_optimize", "directions",  "seed",
    "sampler_config", "fanova_config"};

std::vector<std::string> string_or_list(const ojson& j) {
  if (j.is_string()) return {j.get<std::string>()};
  if (j.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : j) out.push_back(e.get<std::string>());
    return out;
  }
  throw Error(Errc::payload_invalid, "expected a string or a list of strings");
}

}  // namespace

Payload validate_payload(const ojson& document) {
  std::vector<Diagnostic> problems;
  Payload payload;

  if (!document.is_object()) {
    throw PayloadError(std::vector<Diagnostic>{{"$", "payload must be a JSON object"}});
  }

  for (const auto& [key, _] : document.items()) {
    if (kTopLevelFields.count(key) == 0)
      payload.warnings.push_back("unknown field '" + key + "' ignored");
  }

  if (!document.contains("workflow_type") || !document.at("workflow_type").is_string()) {
    problems.push_back({"workflow_type", "required string naming the workflow"});
  } else {
    payload.workflow_type = document.at("workflow_type").get<std::string>();
  }

  if (!document.contains("workflow_options") || !document.at("workflow_options").is_object()) {
    problems.push_back({"workflow_options", "required object of parameter ranges"});
  } else {
    for (const auto& [name, raw] : document.at("workflow_options").items()) {
      try {
        ParsedRange parsed = parse_range(name, raw);
        for (auto& w : parsed.warnings) payload.warnings.push_back(std::move(w));
        if (parsed.spec.has_value())
          payload.space.add(std::move(*parsed.spec));
        else
          payload.space.fix(name, std::move(*parsed.fixed_value));
      } catch (const Error& e) {
        problems.push_back({"workflow_options." + name, e.what()});
      }
    }
  }

  StudyOptions& opts = payload.options;
  const ojson vo = document.contains("variational_options")
                       ? document.at("variational_options")
                       : ojson::object();
  if (!vo.is_object()) {
    problems.push_back({"variational_options", "must be an object"});
    throw PayloadError(std::move(problems));
  }

  for (const auto& [key, _] : vo.items()) {
    if (kVariationalFields.count(key) == 0)
      payload.warnings.push_back("unknown field 'variational_options." + key + "' ignored");
  }

  const auto field = [&](const char* name) { return std::string("variational_options.") + name; };

  if (vo.contains("study_kind")) {
    const auto kind = vo.at("study_kind").is_string() ? vo.at("study_kind").get<std::string>() : "";
    if (kind != "calibration" && kind != "sensitivity")
      problems.push_back({field("study_kind"), "must be \"calibration\" or \"sensitivity\""});
    else
      opts.study_kind = kind;
  }

  if (vo.contains("num_studies")) {
    if (!vo.at("num_studies").is_number_integer() || vo.at("num_studies").get<int>() < 1)
      problems.push_back({field("num_studies"), "must be an integer >= 1"});
    else
      opts.num_studies = vo.at("num_studies").get<int>();
  }

  if (!vo.contains("num_episodes")) {
    problems.push_back({field("num_episodes"), "required integer >= 1"});
  } else if (!vo.at("num_episodes").is_number_integer() ||
             vo.at("num_episodes").get<int>() < 1) {
    problems.push_back({field("num_episodes"), "must be an integer >= 1"});
  } else {
    opts.num_episodes = vo.at("num_episodes").get<int>();
  }

  if (vo.contains("study_name")) {
    try {
      opts.study_names = string_or_list(vo.at("study_name"));
    } catch (const Error& e) {
      problems.push_back({field("study_name"), e.what()});
    }
  }
  if (opts.study_names.empty() && !payload.workflow_type.empty())
    opts.study_names = {payload.workflow_type + "-study"};
  if (opts.study_names.size() > 1 &&
      opts.study_names.size() != static_cast<std::size_t>(opts.num_studies)) {
    problems.push_back({field("study_name"),
                        "a study name list must have num_studies entries (" +
                            std::to_string(opts.num_studies) + ")"});
  }
  if (opts.study_names.size() > 1) {
    std::set<std::string> uniq(opts.study_names.begin(), opts.study_names.end());
    if (uniq.size() != opts.study_names.size())
      problems.push_back({field("study_name"), "study names must be distinct"});
  }

  if (vo.contains("sampler_type")) {
    try {
      opts.sampler_types = string_or_list(vo.at("sampler_type"));
    } catch (const Error& e) {
      problems.push_back({field("sampler_type"), e.what()});
    }
  }
  if (opts.sampler_types.empty()) opts.sampler_types = {"RandomSampler"};
  if (opts.sampler_types.size() > 1 &&
      opts.sampler_types.size() != static_cast<std::size_t>(opts.num_studies)) {
    problems.push_back({field("sampler_type"),
                        "a sampler list must have num_studies entries (" +
                            std::to_string(opts.num_studies) + ")"});
  }
  for (const auto& sampler : opts.sampler_types) {
    try {
      make_sampler(sampler);
    } catch (const Error& e) {
      problems.push_back({field("sampler_type"), e.what()});
    }
  }

  if (vo.contains("metric_to_optimize")) {
    try {
      opts.metrics = string_or_list(vo.at("metric_to_optimize"));
    } catch (const Error& e) {
      problems.push_back({field("metric_to_optimize"), e.what()});
    }
  }
  if (opts.metrics.empty()) opts.metrics = {"identity"};

  if (vo.contains("directions")) {
    try {
      for (const auto& name : string_or_list(vo.at("directions")))
        opts.directions.push_back(direction_from_name(name));
    } catch (const Error& e) {
      problems.push_back({field("directions"), e.what()});
    }
  }
  if (opts.directions.empty())
    opts.directions.assign(opts.metrics.size(), Direction::Minimize);
  if (opts.directions.size() != opts.metrics.size()) {
    problems.push_back({field("directions"),
                        "needs one direction per metric (" +
                            std::to_string(opts.metrics.size()) + ")"});
  }

  if (opts.metrics.size() > 1) {
    for (const auto& sampler : opts.sampler_types) {
      if (sampler == "TPESampler")
        problems.push_back({field("sampler_type"),
                            "TPESampler supports single-objective studies only"});
    }
  }

  if (vo.contains("seed")) {
    if (!vo.at("seed").is_number_integer())
      problems.push_back({field("seed"), "must be an integer"});
    else
      opts.seed = vo.at("seed").get<std::uint64_t>();
  }

  if (vo.contains("sampler_config")) {
    if (!vo.at("sampler_config").is_object())
      problems.push_back({field("sampler_config"), "must be an object"});
    else
      opts.sampler_config = vo.at("sampler_config");
  }
  if (vo.contains("fanova_config")) {
    if (!vo.at("fanova_config").is_object())
      problems.push_back({field("fanova_config"), "must be an object"});
    else
      opts.fanova_config = vo.at("fanova_config");
  }

  if (payload.space.dimension() == 0 && problems.empty())
    problems.push_back({"workflow_options", "at least one range dimension is required"});

  if (!problems.empty()) throw PayloadError(std::move(problems));
  return payload;
}

Payload load_payload_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PayloadError(std::vector<Diagnostic>{{path, "cannot open payload file"}});
  ojson document = ojson::parse(in, nullptr, false);
  if (document.is_discarded()) throw PayloadError(std::vector<Diagnostic>{{path, "payload is not valid JSON"}});
  return validate_payload(document);
}

}  // namespace parex
