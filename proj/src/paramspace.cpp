#include "parex/paramspace.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace parex {

double numeric_value(const ParamValue& v) {
  if (const auto* f = std::get_if<double>(&v)) return *f;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw Error(Errc::point_space_mismatch, "categorical value has no numeric view");
}

std::string value_to_string(const ParamValue& v) {
  if (const auto* f = std::get_if<double>(&v)) {
    ojson j = *f;
    return j.dump();
  }
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

ParamSpec ParamSpec::continuous(std::string name, double lo, double hi) {
  if (!(lo < hi))
    throw Error(Errc::inverted_bounds, "continuous range for '" + name + "': lo >= hi");
  return {std::move(name), ContinuousRange{lo, hi}};
}

ParamSpec ParamSpec::discrete(std::string name, std::int64_t lo, std::int64_t hi) {
  if (!(lo < hi))
    throw Error(Errc::inverted_bounds, "discrete range for '" + name + "': lo >= hi");
  return {std::move(name), DiscreteRange{lo, hi}};
}

ParamSpec ParamSpec::logarithmic(std::string name, double lo, double hi) {
  if (lo <= 0.0)
    throw Error(Errc::non_positive_log_bound,
                "logarithmic range for '" + name + "': lo must be > 0");
  if (!(lo < hi))
    throw Error(Errc::inverted_bounds, "logarithmic range for '" + name + "': lo >= hi");
  return {std::move(name), LogRange{lo, hi}};
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
  if (choices.empty())
    throw Error(Errc::malformed_range, "categorical range for '" + name + "' is empty");
  std::set<std::string> uniq(choices.begin(), choices.end());
  if (uniq.size() != choices.size())
    throw Error(Errc::malformed_range,
                "categorical range for '" + name + "' has duplicate choices");
  return {std::move(name), CategoricalSet{std::move(choices)}};
}

bool contains(const ParamSpec& spec, const ParamValue& v) {
  return std::visit(
      [&](const auto& kind) -> bool {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, ContinuousRange> || std::is_same_v<K, LogRange>) {
          const auto* f = std::get_if<double>(&v);
          return f != nullptr && *f >= kind.lo && *f <= kind.hi;
        } else if constexpr (std::is_same_v<K, DiscreteRange>) {
          const auto* i = std::get_if<std::int64_t>(&v);
          return i != nullptr && *i >= kind.lo && *i <= kind.hi;
        } else {
          const auto* s = std::get_if<std::string>(&v);
          return s != nullptr &&
                 std::find(kind.choices.begin(), kind.choices.end(), *s) !=
                     kind.choices.end();
        }
      },
      spec.kind);
}

ParamValue sample(const ParamSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& kind) -> ParamValue {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, ContinuousRange>) {
          return rng.uniform(kind.lo, kind.hi);
        } else if constexpr (std::is_same_v<K, DiscreteRange>) {
          return rng.uniform_int(kind.lo, kind.hi);
        } else if constexpr (std::is_same_v<K, LogRange>) {
          return std::pow(10.0, rng.uniform(std::log10(kind.lo), std::log10(kind.hi)));
        } else {
          return kind.choices[rng.index(kind.choices.size())];
        }
      },
      spec.kind);
}

double encode_unit(const ParamSpec& spec, const ParamValue& v) {
  if (!contains(spec, v))
    throw Error(Errc::point_space_mismatch,
                "value for '" + spec.name + "' is outside its range");
  return std::visit(
      [&](const auto& kind) -> double {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, ContinuousRange>) {
          return (std::get<double>(v) - kind.lo) / (kind.hi - kind.lo);
        } else if constexpr (std::is_same_v<K, DiscreteRange>) {
          return static_cast<double>(std::get<std::int64_t>(v) - kind.lo) /
                 static_cast<double>(kind.hi - kind.lo);
        } else if constexpr (std::is_same_v<K, LogRange>) {
          return (std::log10(std::get<double>(v)) - std::log10(kind.lo)) /
                 (std::log10(kind.hi) - std::log10(kind.lo));
        } else {
          const auto k = kind.choices.size();
          if (k == 1) return 0.5;
          const auto it = std::find(kind.choices.begin(), kind.choices.end(),
                                    std::get<std::string>(v));
          return static_cast<double>(it - kind.choices.begin()) /
                 static_cast<double>(k - 1);
        }
      },
      spec.kind);
}

ParamValue decode_unit(const ParamSpec& spec, double u) {
  const double clamped = std::clamp(u, 0.0, 1.0);
  return std::visit(
      [&](const auto& kind) -> ParamValue {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, ContinuousRange>) {
          return std::clamp(kind.lo + clamped * (kind.hi - kind.lo), kind.lo, kind.hi);
        } else if constexpr (std::is_same_v<K, DiscreteRange>) {
          const auto offset =
              std::llround(clamped * static_cast<double>(kind.hi - kind.lo));
          return std::clamp<std::int64_t>(kind.lo + offset, kind.lo, kind.hi);
        } else if constexpr (std::is_same_v<K, LogRange>) {
          const double llo = std::log10(kind.lo);
          const double lhi = std::log10(kind.hi);
          const double v = std::pow(10.0, llo + clamped * (lhi - llo));
          return std::clamp(v, kind.lo, kind.hi);
        } else {
          const auto k = kind.choices.size();
          if (k == 1) return kind.choices.front();
          auto idx = static_cast<std::size_t>(
              std::llround(clamped * static_cast<double>(k - 1)));
          idx = std::min(idx, k - 1);
          return kind.choices[idx];
        }
      },
      spec.kind);
}

void SearchSpace::check_name_free(const std::string& name) const {
  if (find(name) != nullptr)
    throw Error(Errc::malformed_range, "duplicate parameter name '" + name + "'");
  for (const auto& [n, v] : fixed_) {
    if (n == name)
      throw Error(Errc::malformed_range, "duplicate parameter name '" + name + "'");
  }
}

void SearchSpace::add(ParamSpec spec) {
  check_name_free(spec.name);
  specs_.push_back(std::move(spec));
}

void SearchSpace::fix(const std::string& name, ParamValue value) {
  check_name_free(name);
  fixed_.emplace_back(name, std::move(value));
}

const ParamSpec* SearchSpace::find(std::string_view name) const {
  for (const auto& spec : specs_) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

void SearchSpace::check_point(const ParamMap& point) const {
  if (point.size() != specs_.size())
    throw Error(Errc::point_space_mismatch,
                "point has " + std::to_string(point.size()) + " dimensions, space has " +
                    std::to_string(specs_.size()));
  for (const auto& spec : specs_) {
    const auto it = point.find(spec.name);
    if (it == point.end())
      throw Error(Errc::point_space_mismatch, "point is missing dimension '" + spec.name + "'");
    if (!contains(spec, it->second))
      throw Error(Errc::point_space_mismatch,
                  "value for '" + spec.name + "' is outside its range");
  }
}

bool SearchSpace::conforms(const ParamMap& point) const {
  try {
    check_point(point);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<double> SearchSpace::to_unit_cube(const ParamMap& point) const {
  check_point(point);
  std::vector<double> u;
  u.reserve(specs_.size());
  for (const auto& spec : specs_) u.push_back(encode_unit(spec, point.at(spec.name)));
  return u;
}

ParamMap SearchSpace::from_unit_cube(std::span<const double> u) const {
  if (u.size() != specs_.size())
    throw Error(Errc::point_space_mismatch, "unit vector dimension mismatch");
  ParamMap point;
  for (std::size_t d = 0; d < specs_.size(); ++d)
    point.emplace(specs_[d].name, decode_unit(specs_[d], u[d]));
  return point;
}

ParamMap SearchSpace::with_fixed(const ParamMap& point) const {
  ParamMap merged = point;
  for (const auto& [name, value] : fixed_) merged.emplace(name, value);
  return merged;
}

namespace {

bool is_integral_number(const ojson& j) {
  return j.is_number_integer() || j.is_number_unsigned();
}

ParamValue scalar_value(const ojson& j) {
  if (is_integral_number(j)) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return std::string(j.get<bool>() ? "true" : "false");
  throw Error(Errc::malformed_range, "unsupported scalar type");
}

}  // namespace

ParsedRange parse_range(const std::string& name, const ojson& raw) {
  ParsedRange out;
  if (!raw.is_array()) {
    try {
      out.fixed_value = scalar_value(raw);
    } catch (const Error&) {
      throw Error(Errc::malformed_range,
                  "option '" + name + "' is neither a scalar nor a range list");
    }
    return out;
  }

  const auto& arr = raw;
  if (arr.empty())
    throw Error(Errc::malformed_range, "range for '" + name + "' is an empty list");

  const bool all_strings =
      std::all_of(arr.begin(), arr.end(), [](const ojson& e) { return e.is_string(); });
  if (all_strings) {
    std::vector<std::string> choices;
    for (const auto& e : arr) choices.push_back(e.get<std::string>());
    out.spec = ParamSpec::categorical(name, std::move(choices));
    return out;
  }

  const bool log_form = arr.size() == 3 && arr[2].is_string() &&
                        arr[2].get<std::string>() == "log";
  const std::size_t numeric_len = log_form ? 2 : arr.size();
  if (numeric_len != 2)
    throw Error(Errc::malformed_range,
                "range for '" + name + "' must have two bounds" +
                    (log_form ? "" : " (optionally followed by \"log\")"));
  for (std::size_t i = 0; i < 2; ++i) {
    if (!arr[i].is_number())
      throw Error(Errc::malformed_range,
                  "range for '" + name + "' mixes numeric and non-numeric entries");
  }

  if (log_form) {
    out.spec = ParamSpec::logarithmic(name, arr[0].get<double>(), arr[1].get<double>());
    return out;
  }

  const bool both_int = is_integral_number(arr[0]) && is_integral_number(arr[1]);
  if (both_int) {
    out.spec = ParamSpec::discrete(name, arr[0].get<std::int64_t>(),
                                   arr[1].get<std::int64_t>());
    return out;
  }

  if (is_integral_number(arr[0]) != is_integral_number(arr[1]))
    out.warnings.push_back("range for '" + name +
                           "' mixes int and float bounds; treated as continuous");
  out.spec = ParamSpec::continuous(name, arr[0].get<double>(), arr[1].get<double>());
  return out;
}

SearchSpace parse_workflow_options(const ojson& options,
                                   std::vector<std::string>* warnings) {
  if (!options.is_object())
    throw Error(Errc::malformed_range, "workflow options must be an object");
  SearchSpace space;
  for (const auto& [name, raw] : options.items()) {
    ParsedRange parsed = parse_range(name, raw);
    if (warnings != nullptr)
      warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
    if (parsed.spec.has_value())
      space.add(std::move(*parsed.spec));
    else
      space.fix(name, std::move(*parsed.fixed_value));
  }
  return space;
}

}  // namespace parex
