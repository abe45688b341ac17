#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "meltpool/heat_source.hpp"

using namespace meltpool;

namespace {

BeamState reference_beam() {
  BeamState b;
  b.power = 300.0;
  b.absorptivity = 0.28;
  b.radius = 50e-6;
  b.depth = 100e-6;
  return b;
}

}  // namespace

TEST_CASE("volumetric flux center value and shape") {
  const BeamState b = reference_beam();
  const double center = volumetric_flux(b, 0, 0, 0);
  CHECK(center == doctest::Approx(2.139e14).scale(0.0).epsilon(1e-3));
  CHECK(volumetric_flux(b, b.radius, 0, 0) ==
        doctest::Approx(center * std::exp(-2.0)).scale(0.0).epsilon(1e-12));
  CHECK(volumetric_flux(b, 0, 0, 1.01 * b.depth) == 0.0);
  CHECK(volumetric_flux(b, 0, 0, b.depth) == doctest::Approx(center).scale(0.0));
}

TEST_CASE("power closure: flux integrates to eta*P") {
  const BeamState b = reference_beam();
  // midpoint rule over a lateral box of half-width 5 r_b and the full depth
  const int n = 400;
  const double half = 5.0 * b.radius;
  const double h = 2.0 * half / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = -half + (i + 0.5) * h;
      const double y = -half + (j + 0.5) * h;
      sum += volumetric_flux(b, x, y, 0.5 * b.depth) * h * h;
    }
  sum *= b.depth;  // flux is uniform through the depth
  CHECK(sum == doctest::Approx(b.absorptivity * b.power).scale(0.0).epsilon(1e-3));
}

TEST_CASE("beam law: floor, identity at RHF=1, monotonicity") {
  StochasticBeamLaw law{4.1e-7, 1e-9, 2e-7};
  const double P = 300.0, V = 1.23;
  const BeamState b = beam_from_law(law, P, V);
  CHECK(b.absorptivity == doctest::Approx(0.28).scale(0.0));  // tiny P2 hits the floor
  CHECK(b.depth == doctest::Approx(4.1e-7 * (P / V)).scale(0.0).epsilon(1e-12));
  CHECK(b.depth == doctest::Approx(1.0e-4).scale(0.0).epsilon(1e-3));  // P/V = 243.9 J/m
  CHECK(b.radius == doctest::Approx(2e-7 * (P / V)).scale(0.0).epsilon(1e-12));

  // monotone in P/V
  double prev_d = 0.0, prev_r = 0.0, prev_eta = 0.0;
  for (double e = 100.0; e <= 400.0; e += 25.0) {
    const BeamState s = beam_from_law({4.1e-7, 1.2e-3, 2e-7}, e, 1.0);
    CHECK(s.depth >= prev_d);
    CHECK(s.radius >= prev_r);
    CHECK(s.absorptivity >= prev_eta);
    prev_d = s.depth;
    prev_r = s.radius;
    prev_eta = s.absorptivity;
  }

  CHECK_THROWS_AS(beam_from_law({0.0, 1e-3, 2e-7}, P, V), std::invalid_argument);
}

TEST_CASE("RHF raw: empty predecessor set, limits, bounds") {
  PathGeometry geom;
  geom.track_length = 1e-3;
  ScanPath path = generate_path(geom, 1.0, 1e-5);
  RhfConfig cfg;
  CHECK(rhf_raw(path, 0, cfg) == 0.0);

  // the summand limit: a just-passed point at the same location contributes
  // ((R-0)/R)^2 * ((T-t)/T) -> 1 as t -> 0
  ScanPath two;
  two.points.push_back({0.0, 0.0, 0.0, 0.0, true});
  two.points.push_back({1e-9, 0.0, 0.0, 0.0, true});
  CHECK(rhf_raw(two, 1, cfg) == doctest::Approx(1.0).scale(0.0).epsilon(1e-5));

  for (std::size_t i = 0; i < path.points.size(); ++i)
    CHECK(rhf_raw(path, i, cfg) >= 0.0);
}

TEST_CASE("serpentine corner has normalized RHF > 1") {
  // Tracks longer than V*T so mid-track points see no adjacent-track heat,
  // while points just past a turn still feel the fresh neighboring pass.
  PathGeometry geom;
  geom.track_length = 2.5e-3;
  geom.n_tracks = 3;
  geom.hatch = 1e-4;
  geom.serpentine = true;
  ScanPath path = generate_path(geom, 1.0, 5e-6);
  const RhfConfig cfg = normalize_rhf(path, RhfConfig{});
  CHECK(cfg.rhf_c > 0.0);

  // scan the corner region at the start of the last track
  const std::size_t per_track = path.points.size() / 3;
  double corner_max = 0.0;
  for (std::size_t i = 2 * per_track; i < 2 * per_track + per_track / 4; ++i)
    corner_max = std::max(corner_max, rhf(path, i, cfg));
  CHECK(corner_max > 1.0);

  RhfConfig unset;
  CHECK_THROWS_AS(rhf(path, 1, unset), std::logic_error);
}

TEST_CASE("generate_path geometries") {
  SUBCASE("multi-layer z increments") {
    PathGeometry geom;
    geom.track_length = 5e-3;
    geom.n_layers = 10;
    geom.layer_thickness = 40e-6;
    const ScanPath path = generate_path(geom, 1.0, 1e-5);
    double z_min = 1e9, z_max = -1e9;
    for (const auto& p : path.points) {
      z_min = std::min(z_min, p.z);
      z_max = std::max(z_max, p.z);
    }
    CHECK(z_max - z_min == doctest::Approx(9 * 40e-6).scale(0.0));
    // t strictly increasing
    for (std::size_t i = 1; i < path.points.size(); ++i)
      CHECK(path.points[i].t > path.points[i - 1].t);
  }
  SUBCASE("single track has no dwell points") {
    PathGeometry geom;
    geom.track_length = 1e-3;
    const ScanPath path = generate_path(geom, 1.0, 1e-5);
    for (const auto& p : path.points) CHECK(p.laser_on);
  }
  SUBCASE("3x3 mm plane at 0.1 mm hatch has 30 tracks") {
    PathGeometry geom;
    geom.track_length = 3e-3;
    geom.hatch = 1e-4;
    geom.n_tracks = static_cast<int>(3e-3 / geom.hatch);
    CHECK(geom.n_tracks == 30);
    geom.serpentine = true;
    const ScanPath path = generate_path(geom, 1.0, 1e-5);
    double y_max = 0.0;
    for (const auto& p : path.points) y_max = std::max(y_max, p.y);
    CHECK(y_max == doctest::Approx(29 * 1e-4).scale(0.0));
  }
  SUBCASE("resolution warning when V*dt exceeds the beam radius") {
    PathGeometry geom;
    geom.track_length = 1e-3;
    CHECK(generate_path(geom, 1.0, 1e-4).resolution_warning);   // 100 um step
    CHECK(!generate_path(geom, 1.0, 1e-5).resolution_warning);  // 10 um step
  }
}

TEST_CASE("scan path CSV round-trip") {
  PathGeometry geom;
  geom.track_length = 5e-4;
  geom.n_tracks = 2;
  geom.serpentine = true;
  const ScanPath path = generate_path(geom, 1.2, 1e-5);
  const ScanPath back = ScanPath::from_csv(path.to_csv());
  REQUIRE(back.points.size() == path.points.size());
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    CHECK(back.points[i].t == path.points[i].t);
    CHECK(back.points[i].x == path.points[i].x);
    CHECK(back.points[i].y == path.points[i].y);
    CHECK(back.points[i].laser_on == path.points[i].laser_on);
  }
}
