#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "weavesim/rng.hpp"
#include "weavesim/scenario.hpp"

using namespace weavesim;

TEST_CASE("rng streams are deterministic per (seed, label)") {
  auto a = make_rng_streams(42, {"arrivals", "hv_params"});
  auto b = make_rng_streams(42, {"arrivals", "hv_params"});
  for (int i = 0; i < 100; ++i) {
    CHECK(a.at("arrivals").next_u64() == b.at("arrivals").next_u64());
    CHECK(a.at("hv_params").uniform01() == b.at("hv_params").uniform01());
  }
}

TEST_CASE("rng streams differ across seeds and labels") {
  auto a = make_rng_streams(42, {"arrivals"});
  auto b = make_rng_streams(43, {"arrivals"});
  auto c = make_rng_streams(42, {"other"});
  bool seed_diff = false, label_diff = false;
  RngStream& s42 = a.at("arrivals");
  RngStream& s43 = b.at("arrivals");
  RngStream& so = c.at("other");
  std::uint64_t r42[8], r43[8], ro[8];
  for (int i = 0; i < 8; ++i) {
    r42[i] = s42.next_u64();
    r43[i] = s43.next_u64();
    ro[i] = so.next_u64();
  }
  for (int i = 0; i < 8; ++i) {
    seed_diff |= (r42[i] != r43[i]);
    label_diff |= (r42[i] != ro[i]);
  }
  CHECK(seed_diff);
  CHECK(label_diff);
}

TEST_CASE("duplicate rng labels are rejected") {
  CHECK_THROWS_AS(make_rng_streams(42, {"a", "a"}), std::invalid_argument);
}

TEST_CASE("rng uniform01 stays in [0,1) and normal has sane moments") {
  RngStream s(1, "moments");
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("default scenario mirrors the reference geometry") {
  Scenario s = parse_scenario("{}");
  CHECK(s.geometry.lanes == 3);
  CHECK(s.geometry.length_m == doctest::Approx(535.0));
  CHECK(s.geometry.cells_per_lane == 20);
  CHECK(s.geometry.total_cells() == 60);
  CHECK(s.demand.dt_s == doctest::Approx(0.2));
  CHECK(s.mpc.horizon == 16);
  CHECK(s.reward.q_max == doctest::Approx(1800.0));
  CHECK(s.controller.fixed_weights.effort == doctest::Approx(0.05));
  CHECK(s.controller.fixed_weights.exit_x == doctest::Approx(0.25));
  CHECK(s.controller.fixed_weights.exit_y == doctest::Approx(0.5));
  CHECK(s.controller.fixed_weights.vel == doctest::Approx(0.5));
  CHECK(s.controller.fixed_weights.acc == doctest::Approx(0.05));
}

TEST_CASE("scenario with explicit geometry yields 60 cells") {
  Scenario s = parse_scenario(
      R"({"lanes": 3, "length_m": 535.0, "cells_per_lane": 20})");
  CHECK(s.geometry.total_cells() == 60);
}

TEST_CASE("out-of-range penetration names the offending field") {
  try {
    parse_scenario(R"({"cav_penetration": 1.2})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cav_penetration") != std::string::npos);
  }
}

TEST_CASE("axle length identity l = l_f + l_r is enforced") {
  CHECK_NOTHROW(parse_scenario(
      R"({"axle_length_m": 2.8, "front_axle_to_cog_m": 1.2, "rear_axle_to_cog_m": 1.6})"));
  CHECK_THROWS_AS(
      parse_scenario(
          R"({"axle_length_m": 2.9, "front_axle_to_cog_m": 1.2, "rear_axle_to_cog_m": 1.6})"),
      ConfigError);
}

TEST_CASE("unknown keys are rejected") {
  try {
    parse_scenario(R"({"lanes": 3, "not_a_real_key": 1})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("not_a_real_key") != std::string::npos);
  }
}

TEST_CASE("scenario serialization round-trips to an equal scenario") {
  Scenario s = parse_scenario(R"({"lanes": 2, "length_m": 300.0, "cav_penetration": 0.6})");
  const std::string path = "roundtrip_scenario.json";
  save_scenario(s, path);
  Scenario t = load_scenario(path);
  CHECK(s == t);
  std::remove(path.c_str());
}

TEST_CASE("cell index is floor(px / cell_length)") {
  Scenario s = parse_scenario(R"({"length_m": 300.0, "cells_per_lane": 10})");
  const RoadGeometry& g = s.geometry;
  RngStream rng(5, "cells");
  for (int i = 0; i < 200; ++i) {
    const double px = rng.uniform(0.0, 299.999);
    CHECK(g.longitudinal_cell(px) == static_cast<int>(std::floor(px / 30.0)));
  }
  CHECK(g.cell_index(2, 299.0) == 2 * 10 + 9);
}

TEST_CASE("lane_of maps borders consistently") {
  Scenario s = parse_scenario("{}");
  const RoadGeometry& g = s.geometry;
  CHECK(g.lane_of(1.0) == 0);
  CHECK(g.lane_of(3.6) == 1);
  CHECK(g.lane_of(9.9) == 2);
  // Adjacent lanes share a border.
  for (int l = 0; l + 1 < g.lanes; ++l) {
    CHECK(g.lane_border_y[l][1] == doctest::Approx(g.lane_border_y[l + 1][0]));
  }
}

TEST_CASE("missing scenario file raises a config error") {
  CHECK_THROWS_AS(load_scenario("definitely_not_here.json"), ConfigError);
}
