#include "doctest.h"
#include "json.hpp"

#include <cstdio>
#include <fstream>

#include "peelkit/criticality.hpp"
#include "peelkit/io.hpp"

using namespace peelkit;

TEST_CASE("rational weights round-trip exactly") {
  const auto a = parse_weight_config(R"({"weights": {"3": "1/3", "4": "2/14", "10": "7"}, "family": {"tag": "custom"}})");
  CHECK_FALSE(a.inexact);
  REQUIRE(a.q.is_exact());
  CHECK(a.q.exact_values().at(4) == mpq_class(1, 7));
  const auto text = dump_weight_config(a.q);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["weights"]["4"] == "1/7");
  CHECK(j["weights"]["10"] == "7");
  const auto b = parse_weight_config(text);
  CHECK(b.q.exact_values() == a.q.exact_values());
  CHECK(dump_weight_config(b.q) == text);
}

TEST_CASE("bare maps and decimals") {
  const auto a = parse_weight_config(R"({"4": "1/12"})");
  CHECK_FALSE(a.inexact);
  CHECK(a.q.q(4) == doctest::Approx(1.0 / 12.0));
  CHECK(a.q.family().kind == Family::Kind::custom);

  const auto d = parse_weight_config(R"({"3": "0.1", "4": 0.03})");
  CHECK(d.inexact);
  CHECK_FALSE(d.q.is_exact());
  CHECK(d.q.q(3) == 0.1);
  CHECK(d.q.q(4) == 0.03);
  // shortest decimals reproduce the same doubles
  const auto e = parse_weight_config(dump_weight_config(d.q));
  CHECK(e.q.q(3) == 0.1);
  CHECK(e.q.q(4) == 0.03);

  const auto t = preset_odd_angulation(1).q;
  const auto u = parse_weight_config(dump_weight_config(t));
  CHECK(u.q.q(3) == t.q(3));
  CHECK(u.q.family().kind == Family::Kind::odd_angulation);
}

TEST_CASE("family-tagged configs") {
  const auto g = parse_weight_config(R"({"weights": {}, "family": {"tag": "geometric", "H": 3}})");
  CHECK(g.q.family().kind == Family::Kind::geometric);
  CHECK(g.q.q(5) == preset_geometric(3.0).q.q(5));
  const auto j = nlohmann::json::parse(dump_weight_config(g.q));
  CHECK(j["family"]["H"] == 3.0);
  CHECK(j["weights"].empty());
  const auto q = parse_weight_config(R"({"family": {"tag": "two_p_angulation", "p": 3}})");
  CHECK(q.q.exact_values().at(6) == preset_two_p_angulation(3).q.exact_values().at(6));

  const std::string path = "io_test_config.json";
  {
    std::ofstream f(path);
    f << dump_weight_config(preset_two_p_angulation(2).q);
  }
  CHECK(load_weight_config(path).q.exact_values().at(4) == mpq_class(1, 12));
  std::remove(path.c_str());
}

TEST_CASE("malformed configs") {
  CHECK_THROWS_AS(parse_weight_config("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config("[1,2]"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"0": "1"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"x": "1"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"4": "1/0"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"4": true})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"weights": {}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"family": {"tag": "nope"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weight_config(R"({"family": {"tag": "geometric"}})"), std::invalid_argument);
  CHECK_THROWS_AS(load_weight_config("/nonexistent/w.json"), std::invalid_argument);
}

TEST_CASE("criticality report fields") {
  const auto q = preset_two_p_angulation(2).q;
  const auto cd = solve_boltzmann(q);
  const auto law = complete_nu(nu_from_q(q, cd.c_plus, cd.r), 256);
  const auto j = nlohmann::json::parse(criticality_report_json(cd, miermont_check(q, cd), &law));
  for (const char* k : {"c_plus", "c_minus", "r", "z_plus", "z_diamond", "margin", "classification", "residuals", "miermont"})
    CHECK(j.contains(k));
  CHECK(j["c_plus"].get<double>() == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  CHECK(j["classification"] == "regular_critical");
  CHECK(j["step_law"]["L_nu"].get<double>() == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
  const auto k = nlohmann::json::parse(criticality_report_json(cd, miermont_check(q, cd), nullptr));
  CHECK_FALSE(k.contains("step_law"));
}
