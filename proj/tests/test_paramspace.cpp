#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "parex/paramspace.hpp"

using namespace parex;

namespace {

ojson parse_json(const char* text) { return ojson::parse(text); }

}  // namespace

TEST_CASE("parse_range handles the four documented range forms") {
  auto continuous = parse_range("x", parse_json("[0.0, 10.0]"));
  REQUIRE(continuous.spec.has_value());
  CHECK(std::get<ContinuousRange>(continuous.spec->kind) == ContinuousRange{0.0, 10.0});

  auto discrete = parse_range("n", parse_json("[1, 5]"));
  REQUIRE(discrete.spec.has_value());
  CHECK(std::get<DiscreteRange>(discrete.spec->kind) == DiscreteRange{1, 5});

  auto logarithmic = parse_range("lr", parse_json("[0.001, 1.0, \"log\"]"));
  REQUIRE(logarithmic.spec.has_value());
  CHECK(std::get<LogRange>(logarithmic.spec->kind) == LogRange{0.001, 1.0});

  auto categorical = parse_range("mode", parse_json("[\"fast\", \"slow\"]"));
  REQUIRE(categorical.spec.has_value());
  CHECK(std::get<CategoricalSet>(categorical.spec->kind).choices ==
        std::vector<std::string>{"fast", "slow"});
}

TEST_CASE("parse_range treats scalars as fixed values") {
  auto fixed_float = parse_range("dt", parse_json("0.1"));
  CHECK_FALSE(fixed_float.spec.has_value());
  CHECK(std::get<double>(*fixed_float.fixed_value) == 0.1);

  auto fixed_int = parse_range("steps", parse_json("50"));
  CHECK(std::get<std::int64_t>(*fixed_int.fixed_value) == 50);

  auto fixed_str = parse_range("solver", parse_json("\"euler\""));
  CHECK(std::get<std::string>(*fixed_str.fixed_value) == "euler");
}

TEST_CASE("parse_range rejects malformed input") {
  try {
    parse_range("x", parse_json("[5.0, 1.0]"));
    FAIL("expected InvertedBounds");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::inverted_bounds);
  }

  try {
    parse_range("lr", parse_json("[0.0, 1.0, \"log\"]"));
    FAIL("expected NonPositiveLogBound");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_positive_log_bound);
  }

  for (const char* bad : {"[]", "[1.0]", "[1.0, 2.0, 3.0]", "[1, \"a\"]", "[true, false]",
                          "[[1,2],[3,4]]", "[1.0, 2.0, \"logg\"]"}) {
    try {
      parse_range("x", parse_json(bad));
      FAIL("expected MalformedRange for ", bad);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_range);
    }
  }
}

TEST_CASE("mixed int/float bounds promote to continuous with a warning") {
  auto mixed = parse_range("x", parse_json("[1, 2.5]"));
  REQUIRE(mixed.spec.has_value());
  CHECK(std::holds_alternative<ContinuousRange>(mixed.spec->kind));
  CHECK(mixed.warnings.size() == 1);
}

TEST_CASE("contains checks type compatibility and bounds") {
  const auto cont = ParamSpec::continuous("x", 0.0, 1.0);
  CHECK(contains(cont, ParamValue{0.5}));
  CHECK(contains(cont, ParamValue{0.0}));
  CHECK(contains(cont, ParamValue{1.0}));
  CHECK_FALSE(contains(cont, ParamValue{1.5}));
  CHECK_FALSE(contains(cont, ParamValue{std::int64_t{0}}));

  const auto disc = ParamSpec::discrete("n", 1, 3);
  CHECK(contains(disc, ParamValue{std::int64_t{2}}));
  CHECK_FALSE(contains(disc, ParamValue{std::int64_t{4}}));
  CHECK_FALSE(contains(disc, ParamValue{2.0}));

  const auto cat = ParamSpec::categorical("m", {"a", "b"});
  CHECK(contains(cat, ParamValue{std::string("a")}));
  CHECK_FALSE(contains(cat, ParamValue{std::string("c")}));
}

TEST_CASE("unit-cube encoding matches the hand values") {
  CHECK(encode_unit(ParamSpec::continuous("x", 0.0, 10.0), ParamValue{5.0}) ==
        doctest::Approx(0.5));
  CHECK(encode_unit(ParamSpec::logarithmic("x", 0.01, 1.0), ParamValue{0.1}) ==
        doctest::Approx(0.5));
  // (1 - 0) / (4 - 0), derived by hand
  CHECK(encode_unit(ParamSpec::discrete("n", 0, 4), ParamValue{std::int64_t{1}}) ==
        doctest::Approx(0.25));
  CHECK(encode_unit(ParamSpec::categorical("m", {"only"}), ParamValue{std::string("only")}) ==
        doctest::Approx(0.5));
  CHECK(encode_unit(ParamSpec::categorical("m", {"a", "b", "c"}),
                    ParamValue{std::string("b")}) == doctest::Approx(0.5));
}

TEST_CASE("unit-cube round trip is exact to 1e-12 for non-categorical dims") {
  SearchSpace space;
  space.add(ParamSpec::continuous("c", -3.0, 7.5));
  space.add(ParamSpec::logarithmic("l", 1e-4, 1e2));
  space.add(ParamSpec::discrete("d", -5, 9));

  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    ParamMap point;
    for (const auto& spec : space.specs()) point.emplace(spec.name, sample(spec, rng));
    const auto encoded = space.to_unit_cube(point);
    const auto decoded = space.from_unit_cube(encoded);
    CHECK(std::abs(std::get<double>(decoded.at("c")) - std::get<double>(point.at("c"))) <=
          1e-12 * std::max(1.0, std::abs(std::get<double>(point.at("c")))));
    CHECK(std::abs(std::get<double>(decoded.at("l")) - std::get<double>(point.at("l"))) <=
          1e-12 * std::abs(std::get<double>(point.at("l"))));
    CHECK(std::get<std::int64_t>(decoded.at("d")) == std::get<std::int64_t>(point.at("d")));
  }
}

TEST_CASE("seeded samples stay inside their spec for every kind") {
  const std::vector<ParamSpec> specs = {
      ParamSpec::continuous("c", -2.0, 4.0),
      ParamSpec::discrete("d", -3, 12),
      ParamSpec::logarithmic("l", 1e-3, 1e3),
      ParamSpec::categorical("k", {"a", "b", "c", "d"}),
  };
  Rng rng(99);
  for (const auto& spec : specs) {
    for (int i = 0; i < 10000; ++i) {
      CHECK(contains(spec, sample(spec, rng)));
    }
  }
}

TEST_CASE("logarithmic sampling is uniform in log space") {
  const auto spec = ParamSpec::logarithmic("l", 1e-3, 1e3);
  Rng rng(2024);
  int in_low_decades = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = std::get<double>(sample(spec, rng));
    if (v >= 1e-3 && v <= 1e-1) ++in_low_decades;
  }
  // [1e-3, 1e-1] spans 2 of the 6 decades.
  const double fraction = static_cast<double>(in_low_decades) / draws;
  CHECK(fraction == doctest::Approx(1.0 / 3.0).epsilon(0.06));
  CHECK(std::abs(fraction - 1.0 / 3.0) < 0.02);
}

TEST_CASE("log-uniform median approximates the geometric mean") {
  const auto spec = ParamSpec::logarithmic("l", 1e-3, 1e3);
  Rng rng(5);
  std::vector<double> values;
  values.reserve(100000);
  for (int i = 0; i < 100000; ++i) values.push_back(std::get<double>(sample(spec, rng)));
  std::sort(values.begin(), values.end());
  CHECK(values[values.size() / 2] == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("search space enforces unique names and declaration order") {
  SearchSpace space;
  space.add(ParamSpec::continuous("b", 0.0, 1.0));
  space.add(ParamSpec::continuous("a", 0.0, 1.0));
  space.fix("dt", ParamValue{0.1});
  CHECK(space.specs()[0].name == "b");
  CHECK(space.specs()[1].name == "a");

  CHECK_THROWS_AS(space.add(ParamSpec::continuous("a", 0.0, 2.0)), Error);
  CHECK_THROWS_AS(space.fix("b", ParamValue{1.0}), Error);
  CHECK_THROWS_AS(space.add(ParamSpec::continuous("dt", 0.0, 2.0)), Error);
}

TEST_CASE("check_point rejects missing and out-of-range dimensions") {
  SearchSpace space;
  space.add(ParamSpec::continuous("x", 0.0, 1.0));
  space.add(ParamSpec::discrete("n", 0, 5));

  ParamMap ok{{"x", 0.5}, {"n", std::int64_t{3}}};
  CHECK(space.conforms(ok));

  ParamMap missing{{"x", 0.5}};
  CHECK_FALSE(space.conforms(missing));

  ParamMap out_of_range{{"x", 1.5}, {"n", std::int64_t{3}}};
  CHECK_FALSE(space.conforms(out_of_range));

  ParamMap extra{{"x", 0.5}, {"n", std::int64_t{3}}, {"y", 0.1}};
  CHECK_FALSE(space.conforms(extra));
}

TEST_CASE("with_fixed merges fixed options into the sampled point") {
  SearchSpace space;
  space.add(ParamSpec::continuous("x", 0.0, 1.0));
  space.fix("dt", ParamValue{0.1});
  const auto merged = space.with_fixed(ParamMap{{"x", 0.5}});
  CHECK(merged.size() == 2);
  CHECK(std::get<double>(merged.at("dt")) == 0.1);
}

TEST_CASE("workflow options parse in document order") {
  const auto options = parse_json(R"({
    "source_x": [0.0, 100.0],
    "source_y": [0.0, 50.0],
    "duration": 50.0,
    "mode": ["a", "b"]
  })");
  std::vector<std::string> warnings;
  const auto space = parse_workflow_options(options, &warnings);
  CHECK(warnings.empty());
  REQUIRE(space.dimension() == 3);
  CHECK(space.specs()[0].name == "source_x");
  CHECK(space.specs()[1].name == "source_y");
  CHECK(space.specs()[2].name == "mode");
  REQUIRE(space.fixed().size() == 1);
  CHECK(space.fixed()[0].first == "duration");
}
