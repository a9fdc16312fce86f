#include "parex/json_codec.hpp"

#include <charconv>

namespace parex {

ojson value_to_json(const ParamValue& v) {
  if (const auto* f = std::get_if<double>(&v)) return *f;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

ParamValue value_from_json(const ojson& j) {
  if (j.is_number_float()) return j.get<double>();
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(Errc::malformed_response, "parameter value must be number or string");
}

ojson params_to_json(const ParamMap& params) {
  ojson j = ojson::object();
  for (const auto& [name, value] : params) j[name] = value_to_json(value);
  return j;
}

ParamMap params_from_json(const ojson& j) {
  ParamMap params;
  for (const auto& [name, value] : j.items()) params.emplace(name, value_from_json(value));
  return params;
}

ojson space_to_json(const SearchSpace& space) {
  ojson specs = ojson::array();
  for (const auto& spec : space.specs()) {
    ojson s;
    s["name"] = spec.name;
    std::visit(
        [&](const auto& kind) {
          using K = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<K, ContinuousRange>) {
            s["kind"] = "continuous";
            s["lo"] = kind.lo;
            s["hi"] = kind.hi;
          } else if constexpr (std::is_same_v<K, DiscreteRange>) {
            s["kind"] = "discrete";
            s["lo"] = kind.lo;
            s["hi"] = kind.hi;
          } else if constexpr (std::is_same_v<K, LogRange>) {
            s["kind"] = "logarithmic";
            s["lo"] = kind.lo;
            s["hi"] = kind.hi;
          } else {
            s["kind"] = "categorical";
            s["choices"] = kind.choices;
          }
        },
        spec.kind);
    specs.push_back(std::move(s));
  }
  ojson fixed = ojson::object();
  for (const auto& [name, value] : space.fixed()) fixed[name] = value_to_json(value);
  return ojson{{"specs", std::move(specs)}, {"fixed", std::move(fixed)}};
}

SearchSpace space_from_json(const ojson& j) {
  SearchSpace space;
  for (const auto& s : j.at("specs")) {
    const auto kind = s.at("kind").get<std::string>();
    const auto name = s.at("name").get<std::string>();
    if (kind == "continuous") {
      space.add(ParamSpec::continuous(name, s.at("lo").get<double>(), s.at("hi").get<double>()));
    } else if (kind == "discrete") {
      space.add(ParamSpec::discrete(name, s.at("lo").get<std::int64_t>(),
                                    s.at("hi").get<std::int64_t>()));
    } else if (kind == "logarithmic") {
      space.add(ParamSpec::logarithmic(name, s.at("lo").get<double>(), s.at("hi").get<double>()));
    } else if (kind == "categorical") {
      space.add(ParamSpec::categorical(name, s.at("choices").get<std::vector<std::string>>()));
    } else {
      throw Error(Errc::malformed_response, "unknown spec kind '" + kind + "'");
    }
  }
  for (const auto& [name, value] : j.at("fixed").items())
    space.fix(name, value_from_json(value));
  return space;
}

ojson trial_to_json(const Trial& t) {
  ojson j;
  j["id"] = t.id;
  j["params"] = params_to_json(t.params);
  j["state"] = std::string(trial_state_name(t.state));
  j["values"] = t.values;
  j["agent"] = t.agent_id;
  j["created_at_ms"] = t.created_at_ms;
  j["finished_at_ms"] = t.finished_at_ms;
  j["attrs"] = t.user_attrs;
  return j;
}

Trial trial_from_json(const ojson& j) {
  Trial t;
  t.id = j.at("id").get<std::int64_t>();
  t.params = params_from_json(j.at("params"));
  t.state = trial_state_from_name(j.at("state").get<std::string>());
  t.values = j.at("values").get<std::vector<double>>();
  t.agent_id = j.at("agent").get<int>();
  t.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
  t.finished_at_ms = j.at("finished_at_ms").get<std::int64_t>();
  t.user_attrs = j.at("attrs").get<std::map<std::string, std::string>>();
  return t;
}

ojson report_to_json(const ImportanceReport& r) {
  ojson imp = ojson::object();
  for (const auto& [name, value] : r.entries) imp[name] = value;
  return ojson{{"trial_count", r.trial_count},
               {"objective_index", r.objective_index},
               {"degenerate", r.degenerate},
               {"importances", std::move(imp)}};
}

ImportanceReport report_from_json(const ojson& j) {
  ImportanceReport r;
  r.trial_count = j.at("trial_count").get<std::int64_t>();
  r.objective_index = j.at("objective_index").get<int>();
  r.degenerate = j.at("degenerate").get<bool>();
  for (const auto& [name, value] : j.at("importances").items())
    r.entries.emplace_back(name, value.get<double>());
  return r;
}

ojson snapshot_to_json(const ImportanceSnapshot& s) {
  ojson reports = ojson::array();
  for (const auto& r : s.reports) reports.push_back(report_to_json(r));
  return ojson{{"trial_count", s.trial_count}, {"reports", std::move(reports)}};
}

ImportanceSnapshot snapshot_from_json(const ojson& j) {
  ImportanceSnapshot s;
  s.trial_count = j.at("trial_count").get<std::int64_t>();
  for (const auto& r : j.at("reports")) s.reports.push_back(report_from_json(r));
  return s;
}

ojson directions_to_json(const std::vector<Direction>& d) {
  ojson j = ojson::array();
  for (const auto dir : d) j.push_back(std::string(direction_name(dir)));
  return j;
}

std::vector<Direction> directions_from_json(const ojson& j) {
  std::vector<Direction> out;
  for (const auto& e : j) out.push_back(direction_from_name(e.get<std::string>()));
  return out;
}

ojson study_to_json(const Study& s) {
  ojson snaps = ojson::array();
  for (const auto& snap : s.attr_snapshots) snaps.push_back(snapshot_to_json(snap));
  return ojson{{"name", s.name},
               {"space", space_to_json(s.space)},
               {"directions", directions_to_json(s.directions)},
               {"metrics", s.metric_names},
               {"samplers", s.sampler_assignments},
               {"snapshots", std::move(snaps)}};
}

Study study_from_json(const ojson& j) {
  Study s;
  s.name = j.at("name").get<std::string>();
  s.space = space_from_json(j.at("space"));
  s.directions = directions_from_json(j.at("directions"));
  s.metric_names = j.at("metrics").get<std::vector<std::string>>();
  s.sampler_assignments = j.at("samplers").get<std::vector<std::string>>();
  for (const auto& snap : j.at("snapshots")) s.attr_snapshots.push_back(snapshot_from_json(snap));
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace parex
