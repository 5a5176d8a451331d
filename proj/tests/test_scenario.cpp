#include "returnmap/scenario.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace rmap;

TEST_CASE("scenario parsing is strict") {
  Json ok = Json::parse(R"({"model":"toy","params":{"eps":0.2},"seed":7})");
  Scenario sc = parse_scenario(ok);
  CHECK(sc.model == ScenarioModel::Toy);
  CHECK(sc.eps == 0.2);
  CHECK(sc.seed == 7);

  Json bad_top = Json::parse(R"({"model":"toy","surprise":1})");
  CHECK_THROWS_AS(parse_scenario(bad_top), Error);
  Json bad_nested = Json::parse(R"({"params":{"epsilon":0.2}})");
  CHECK_THROWS_AS(parse_scenario(bad_nested), Error);
  Json bad_model = Json::parse(R"({"model":"spherical"})");
  CHECK_THROWS_AS(parse_scenario(bad_model), Error);
  Json bad_window = Json::parse(R"({"sweep":{"t_window":"sideways"}})");
  CHECK_THROWS_AS(parse_scenario(bad_window), Error);
}

TEST_CASE("toy verification passes at the defaults") {
  Scenario sc;
  ToyVerifyResult res = run_toy_verify(sc);
  CHECK(res.all_pass);
  for (const auto& c : res.checks) CHECK(c.pass);
  Json rep = res.to_json();
  CHECK(rep["all_pass"].get<bool>());
}

TEST_CASE("toy verification rejects an out-of-range fold strength") {
  Scenario sc;
  sc.eps = 0.4;
  try {
    run_toy_verify(sc);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("single coefficient evaluation") {
  Scenario sc;
  sc.lc_psi = kPi / 3;
  Complex nu(std::cos(kPi / 3), std::sin(kPi / 3));
  sc.lc_coeffs[planar_pq_index(2, 0)] = nu;
  sc.lc_coeffs[planar_pq_index(0, 2)] = nu;
  sc.lc_coeffs[planar_pq_index(1, 1)] = -2.0 * nu;
  Json rep = run_lc(sc);
  CHECK(rep["lc"].get<double>() == Catch::Approx(-1.5).margin(1e-10));

  SECTION("all-zero coefficients give zero") {
    Scenario zero;
    zero.lc_psi = 1.0;
    CHECK(run_lc(zero)["lc"].get<double>() == 0.0);
  }
  SECTION("the quarter-turn resonance is refused") {
    Scenario res;
    res.lc_psi = kPi / 2;
    CHECK_THROWS_AS(run_lc(res), Error);
  }
}

TEST_CASE("sweep produces deterministic, byte-identical output") {
  Scenario sc;
  sc.ks = {6};
  sc.t_count = 3;
  NsScanResult a = run_ns_scan(sc, 1);
  NsScanResult b = run_ns_scan(sc, 1);
  CHECK(a.csv == b.csv);
  NsScanResult c = run_ns_scan(sc, 3);
  CHECK(a.csv == c.csv);

  CHECK(a.rows.size() == 3);
  for (const auto& row : a.rows) {
    CHECK(row.flags.empty());
    CHECK(row.verdict == "weakly_repelling");
    CHECK(row.lc < 0.0);
    CHECK(row.rho < 0.0);
  }
}

TEST_CASE("the full sweep stays weakly repelling") {
  Scenario sc;
  sc.ks = {6, 8, 10};
  sc.t_count = 20;
  NsScanResult res = run_ns_scan(sc, 4);
  REQUIRE(res.rows.size() == 60);
  for (const auto& row : res.rows) {
    INFO("k=" << row.k << " t=" << row.t);
    CHECK(row.flags.empty());
    CHECK(row.lc < 0.0);
    CHECK(row.rho < 0.0);  // the family satisfies the expanding condition
    CHECK(row.psi > 0.0);
    CHECK(row.psi < kPi / 2);
    CHECK(row.nu3 < 1.0);
  }
}

TEST_CASE("an empty grid produces a header-only table") {
  Scenario sc;
  sc.ks.clear();
  NsScanResult res = run_ns_scan(sc, 1);
  CHECK(res.rows.empty());
  CHECK(res.csv == sweep_csv_header() + "\n");

  Scenario sc2;
  sc2.omega_phases.clear();  // empty omega range
  NsScanResult res2 = run_ns_scan(sc2, 1);
  CHECK(res2.rows.empty());
  CHECK(res2.csv == sweep_csv_header() + "\n");
}

TEST_CASE("several omega phases sweep together") {
  Scenario sc;
  sc.ks = {6};
  sc.t_count = 2;
  sc.omega_phases = {1.5 * kPi, 1.5 * kPi - 0.3};
  NsScanResult res = run_ns_scan(sc, 1);
  REQUIRE(res.rows.size() == 4);
  CHECK(res.rows[0].omega != res.rows[2].omega);
  for (const auto& row : res.rows) {
    CHECK(row.flags.empty());
    CHECK(row.lc < 0.0);
  }
}

TEST_CASE("csv rows follow the documented column order") {
  CHECK(sweep_csv_header() ==
        "k,t,omega,mu,rho,psi,nu1_re,nu1_im,nu3,lc,verdict,e_k,E_quantity,flags");
  SweepRow row;
  row.k = 6;
  row.t = 0.5;
  row.verdict = "weakly_repelling";
  std::string line = sweep_csv_row(row);
  CHECK(line.substr(0, 2) == "6,");
  CHECK(line.find("weakly_repelling") != std::string::npos);
}

TEST_CASE("float formatting round-trips") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    double v = std::exp(rng.uniform(-20, 20)) * (rng.uniform() < 0.5 ? -1 : 1);
    double back = std::stod(format_double(v));
    CHECK(back == v);
  }
}

TEST_CASE("manifold run with the synthetic control") {
  Scenario sc;
  sc.model = ScenarioModel::NormalFormTest;
  sc.nf_lc = +1.0;  // attracting control: the threshold is never reached
  sc.seed_radius = 2e-3;
  sc.max_generations = 40;
  sc.stable_y = 0.05;
  ManifoldRunResult res = run_manifold(sc);
  CHECK_FALSE(res.summary["y_extent_reached"].get<bool>());
  CHECK(res.summary["min_stable_distance"].get<double>() > 0.01);
  std::string csv = cloud_csv(res.cloud);
  CHECK(csv.rfind("generation,Z,Y,W\n", 0) == 0);
}

TEST_CASE("implicit solve from the expression language") {
  Scenario sc;
  sc.implicit_spec = Json::parse(R"({
    "m": 1,
    "G": [0.5],
    "H": [[{"kind": "sin", "amp": 0.1, "y_coeffs": [1.0]}]],
    "tol": 1e-13
  })");
  Json rep = run_solve_implicit(sc);
  CHECK(rep["y"][0].get<double>() == Catch::Approx(0.5524796).margin(1e-6));

  SECTION("expanding terms are rejected") {
    Scenario bad;
    bad.implicit_spec = Json::parse(R"({
      "m": 1,
      "G": [0.0],
      "H": [[{"kind": "linear", "amp": 0.9, "y_coeffs": [1.0]}]]
    })");
    CHECK_THROWS_AS(run_solve_implicit(bad), Error);
  }
}
