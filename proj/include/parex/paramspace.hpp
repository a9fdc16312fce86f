#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "parex/errors.hpp"
#include "parex/rng.hpp"

namespace parex {

using ojson = nlohmann::ordered_json;

struct ContinuousRange {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const ContinuousRange&) const = default;
};

struct DiscreteRange {
  std::int64_t lo = 0;
  std::int64_t hi = 1;
  bool operator==(const DiscreteRange&) const = default;
};

struct LogRange {
  double lo = 1e-3;
  double hi = 1.0;
  bool operator==(const LogRange&) const = default;
};

struct CategoricalSet {
  std::vector<std::string> choices;
  bool operator==(const CategoricalSet&) const = default;
};

// One sampled point component: float, integer, or category.
using ParamValue = std::variant<double, std::int64_t, std::string>;

// Points are keyed by parameter name; std::map keeps iteration deterministic.
using ParamMap = std::map<std::string, ParamValue>;

double numeric_value(const ParamValue& v);
std::string value_to_string(const ParamValue& v);

// One dimension of the search space.  Construct through the factories, which
// enforce the ordering constraints (lo < hi, positive log bounds, distinct
// non-empty categories).
struct ParamSpec {
  std::string name;
  std::variant<ContinuousRange, DiscreteRange, LogRange, CategoricalSet> kind;

  static ParamSpec continuous(std::string name, double lo, double hi);
  static ParamSpec discrete(std::string name, std::int64_t lo, std::int64_t hi);
  static ParamSpec logarithmic(std::string name, double lo, double hi);
  static ParamSpec categorical(std::string name, std::vector<std::string> choices);

  bool operator==(const ParamSpec&) const = default;
};

// True iff v is type-compatible with the spec and inside its bounds/choices.
bool contains(const ParamSpec& spec, const ParamValue& v);

// Uniform draw: uniform on [lo,hi] for continuous, uniform integer inclusive
// for discrete, log-uniform for logarithmic, uniform over choices.
ParamValue sample(const ParamSpec& spec, Rng& rng);

// Shared [0,1] encoding used by the TPE sampler, NSGA-II variation operators
// and the importance forest.  Logarithmic dimensions map affinely in log10;
// categorical dimensions map to index/(k-1), or 0.5 for a single choice.
double encode_unit(const ParamSpec& spec, const ParamValue& v);
ParamValue decode_unit(const ParamSpec& spec, double u);

// Ordered collection of range dimensions plus fixed (non-varied) options.
// Iteration order is declaration order; names are unique across both groups.
class SearchSpace {
 public:
  void add(ParamSpec spec);
  void fix(const std::string& name, ParamValue value);

  const std::vector<ParamSpec>& specs() const { return specs_; }
  const std::vector<std::pair<std::string, ParamValue>>& fixed() const {
    return fixed_;
  }

  std::size_t dimension() const { return specs_.size(); }
  const ParamSpec* find(std::string_view name) const;

  // Point must carry exactly the spec'd dimensions with in-range values.
  void check_point(const ParamMap& point) const;
  bool conforms(const ParamMap& point) const;

  std::vector<double> to_unit_cube(const ParamMap& point) const;
  ParamMap from_unit_cube(std::span<const double> u) const;

  // Sampled dims plus fixed options, as passed to workflow execution.
  ParamMap with_fixed(const ParamMap& point) const;

  bool operator==(const SearchSpace&) const = default;

 private:
  void check_name_free(const std::string& name) const;

  std::vector<ParamSpec> specs_;
  std::vector<std::pair<std::string, ParamValue>> fixed_;
};

// Result of parsing one entry of the options document: either a range spec
// or a fixed scalar, plus any coercion warnings.
struct ParsedRange {
  std::optional<ParamSpec> spec;
  std::optional<ParamValue> fixed_value;
  std::vector<std::string> warnings;
};

// Accepts the documented range forms:
//   continuous  [float1, float2]
//   discrete    [int1, int2]
//   logarithmic [float1, float2, "log"]
//   categorical ["cat1", "cat2", ...]
// Scalars are fixed values; anything else is MalformedRange.
ParsedRange parse_range(const std::string& name, const ojson& raw);

// Parses a whole options object in document order.
SearchSpace parse_workflow_options(const ojson& options,
                                   std::vector<std::string>* warnings = nullptr);

}  // namespace parex
