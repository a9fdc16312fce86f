#pragma once

#include <json.hpp>

#include "parex/importance.hpp"
#include "parex/paramspace.hpp"
#include "parex/trialstore.hpp"

namespace parex {

// JSON encodings shared by the file log, the store protocol and the CLI
// exports.  ParamValues map to native JSON types (float/int/string), so the
// documents stay readable and the value tag survives round trips.

ojson value_to_json(const ParamValue& v);
ParamValue value_from_json(const ojson& j);

ojson params_to_json(const ParamMap& params);
ParamMap params_from_json(const ojson& j);

ojson space_to_json(const SearchSpace& space);
SearchSpace space_from_json(const ojson& j);

ojson trial_to_json(const Trial& t);
Trial trial_from_json(const ojson& j);

ojson report_to_json(const ImportanceReport& r);
ImportanceReport report_from_json(const ojson& j);

ojson snapshot_to_json(const ImportanceSnapshot& s);
ImportanceSnapshot snapshot_from_json(const ojson& j);

ojson study_to_json(const Study& s);
Study study_from_json(const ojson& j);

ojson directions_to_json(const std::vector<Direction>& d);
std::vector<Direction> directions_from_json(const ojson& j);

// Shortest round-trip decimal rendering; the fixed choice keeps CSV exports
// byte-stable across runs.
std::string format_double(double v);

}  // namespace parex
