#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hjlab/errors.hpp"
#include "hjlab/lab.hpp"

using namespace hjlab;
using nlohmann::json;

namespace {

const char* kSmall = R"({
  "name": "small",
  "N": [1],
  "grid": {"t": [0.1, 0.2], "h": [0.3, 0.5]},
  "point": {"t": 0.2, "h": 0.3}
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  ExperimentConfig c = parse_config(kSmall);
  CHECK(c.name == "small");
  CHECK(c.N_list == std::vector<int>{1});
  CHECK(c.t_values == std::vector<double>{0.1, 0.2});
  REQUIRE(c.h_grid.size() == 2);
  CHECK(c.h_grid[1](0, 0) == 0.5);
  CHECK(c.prior.D == 1);
  CHECK(c.tol.hopf_lax == 2e-5);

  ExperimentConfig m = parse_config(R"({"prior": {"D": 2, "rademacher": true}})");
  CHECK(m.interaction.D == 2);
  CHECK(m.interaction.gram.rows == 4);
}

TEST_CASE("config errors are reported as ConfigError") {
  CHECK_THROWS_AS(parse_config(R"({"nodez": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"t": [0.1], "k": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"interaction": {"p": 2, "A": [[1]], "gram": [[2]]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"interaction": {"p": 2, "A": [[1, 2], [3]]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"N": "two"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/hjlab.json"), Error);
}

TEST_CASE("resolved config round-trips") {
  ExperimentConfig c = parse_config(kSmall);
  const std::string once = config_to_json(c);
  CHECK(config_to_json(parse_config(once)) == once);
  CHECK(config_to_json(default_config("matrix")) == config_to_json(parse_config(config_to_json(default_config("matrix")))));
}

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("empty report emits a header-only CSV") {
  StudyReport r;
  r.study = "empty";
  r.columns = {"a", "b"};
  CHECK(report_csv(r) == "a,b\n");
  json j = json::parse(report_json(r));
  CHECK(j["rows"].empty());
  CHECK(j["passed"] == true);
  CHECK(j["version"].get<std::string>().rfind("hjlab ", 0) == 0);
}

TEST_CASE("criteria merge to the worst value") {
  StudyReport r;
  r.check("x", 1.0, 0.2, true);
  r.check("x", 1.0, 0.7, true);
  r.check("x", 1.0, 0.1, false, "bad");
  REQUIRE(r.criteria.size() == 1);
  CHECK(r.criteria[0].measured == 0.7);
  CHECK(r.criteria[0].checks == 3);
  CHECK_FALSE(r.passed());
  CHECK(r.criteria[0].detail == "bad");
}

TEST_CASE("CSV quoting and JSON values") {
  StudyReport r;
  r.study = "cells";
  r.columns = {"s", "d", "i", "b"};
  r.rows.push_back({std::string("a,\"b\""), 0.1, 7LL, true});
  CHECK(report_csv(r) == "s,d,i,b\n\"a,\"\"b\"\"\",0.10000000000000001,7,true\n");
  json j = json::parse(report_json(r));
  CHECK(j["rows"][0]["d"].get<double>() == 0.1);
  CHECK(j["rows"][0]["i"] == 7);
}

TEST_CASE("variational study is deterministic and writes both files") {
  ExperimentConfig c = parse_config(kSmall);
  StudyReport a = run_variational(c);
  StudyReport b = run_variational(c);
  CHECK(a.passed());
  CHECK(report_csv(a) == report_csv(b));
  CHECK(report_json(a) == report_json(b));
  // three formulas x (t = 0 plus two t values) x two h values
  CHECK(a.rows.size() == 18);

  const auto dir = std::filesystem::temp_directory_path() / "hjlab-test-lab";
  std::filesystem::remove_all(dir);
  emit(a, dir);
  CHECK(slurp(dir / "variational_grid.csv") == report_csv(a));
  json j = json::parse(slurp(dir / "variational_grid.json"));
  CHECK(j["study"] == "variational_grid");
  CHECK(j["rows"].size() == 18);
  std::filesystem::remove_all(dir);
}

TEST_CASE("convergence rows cover the grid") {
  ExperimentConfig c = parse_config(kSmall);
  StudyReport r = run_convergence(c);
  CHECK(r.rows.size() == 6);
  CHECK(r.passed());
}

TEST_CASE("studies refuse boundary points") {
  ExperimentConfig c = parse_config(R"({"N": [1], "point": {"t": 0.2, "h": 0.0}})");
  CHECK_THROWS_AS(run_identities(c), DomainError);
  CHECK_THROWS_AS(run_concentration(c), DomainError);
}

TEST_CASE("study names") {
  CHECK(parse_study("short-time") == Study::short_time);
  CHECK(parse_study("variational") == Study::variational_grid);
  CHECK(to_string(Study::mmse) == "mmse");
  CHECK_THROWS(parse_study("nope"));
}
