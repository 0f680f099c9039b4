#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "hrshift/config.hpp"
#include "hrshift/error.hpp"
#include "hrshift/io.hpp"

using namespace hrshift;

namespace {

nlohmann::json minimal(const std::string& scenario) {
  return {{"format", kConfigFormat}, {"scenario", scenario}, {"seed", 42}};
}

}  // namespace

TEST_SUITE("io_config") {
  TEST_CASE("number formatting round trips") {
    for (double v : {0.1, -3.25e-12, 1.0 / 3.0, 12345.678}) CHECK(parse_double(format_double(v)) == v);
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double(""), DataError);
  }

  TEST_CASE("CSV tables") {
    const auto dir = testing::temp_dir("csv");
    const CsvTable t{{"a", "b"}, {{"1", "x"}, {"2", "y"}}};
    write_csv(dir / "t.csv", t);
    const auto back = read_csv(dir / "t.csv", true);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK(to_csv_string(t) == "a,b\n1,x\n2,y\n");
    CHECK_THROWS(read_csv(dir / "missing.csv", true));
  }

  TEST_CASE("subject directories round trip") {
    const auto dir = testing::temp_dir("subject");
    SubjectRecord s;
    s.id = "sub-1";
    s.tr = 2.0;
    s.y = Eigen::VectorXd::LinSpaced(30, -1, 1);
    s.onsets = {OnsetSeries::from_onsets("neg", 30, {2, 9, 20}), OnsetSeries::from_onsets("pos", 30, {5, 14})};
    s.confounds = Eigen::MatrixXd::Random(30, 2);
    write_subject(dir / "sub-1", s);
    const auto r = read_subject(dir / "sub-1");
    CHECK(r.y == s.y);
    CHECK(r.tr == 2.0);
    REQUIRE(r.onsets.size() == 2);
    CHECK(r.onsets[0].condition() == "neg");
    CHECK(r.onsets[1].onsets() == std::vector<std::size_t>{5, 14});
    CHECK(r.confounds == s.confounds);
  }

  TEST_CASE("malformed inputs") {
    const auto dir = testing::temp_dir("bad");
    {
      std::ofstream(dir / "gap.csv") << "scan,value\n1,0.5\n3,0.1\n";
      std::ofstream(dir / "onsets.csv") << "condition,scan\na,40\n";
    }
    CHECK_THROWS_AS(read_time_series(dir / "gap.csv"), DataError);
    CHECK_THROWS_AS(read_onsets(dir / "onsets.csv", 30), DataError);
  }

  TEST_CASE("change point JSON") {
    ChangePointSet c;
    c.points["neg"] = {40};
    c.points["pos"] = {30, 90};
    CHECK(change_points_from_json(change_points_to_json(c)) == c);
    CHECK_THROWS(change_points_from_json(nlohmann::json{{"neg", {50, 40}}}));
  }

  TEST_CASE("config parsing") {
    const auto k = parse_config(minimal("known-cp"));
    CHECK(k.scenario == Scenario::known_cp);
    CHECK(k.seed == 42);
    CHECK(k.repetitions == 200);
    CHECK(k.effects.size() == 4);
    auto j = minimal("unknown-cp");
    j["full_scale"] = true;
    j["posi"] = {{"D", 100}};
    const auto u = parse_config(j);
    CHECK(u.repetitions == 1000);
    CHECK(u.posi.D == 100);
    CHECK(u.basis.kind == "canonical");

    CHECK_THROWS_AS(parse_config({{"scenario", "known-cp"}, {"seed", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"format", kConfigFormat}, {"scenario", "known-cp"}}), ConfigError);
    auto bad = minimal("known-cp");
    bad["colour"] = "red";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = minimal("known-cp");
    bad["alpha"] = 2.0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = minimal("known-cp");
    bad["subjects"] = "many";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = minimal("unknown-cp");
    bad["basis"] = {{"kind", "flobs-like"}};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }

  TEST_CASE("config serialisation round trips") {
    auto j = minimal("known-cp");
    j["snr"] = {2.0};
    const auto c = parse_config(j);
    const auto again = parse_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
    const auto dir = testing::temp_dir("config");
    write_json(dir / "c.json", to_json(c));
    CHECK(to_json(load_config(dir / "c.json")) == to_json(c));
    CHECK_THROWS_AS(load_config(dir / "none.json"), ConfigError);
  }
}
