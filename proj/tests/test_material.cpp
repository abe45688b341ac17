#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <limits>

#include "meltpool/material.hpp"

using namespace meltpool;

TEST_CASE("IN625 default property values") {
  const MaterialModel m = MaterialModel::load("IN625");
  CHECK(m.conductivity(1000.0, Phase::Solid) == doctest::Approx(20.8847).scale(0.0).epsilon(1e-12));
  CHECK(m.conductivity(1000.0, Phase::Liquid) == doctest::Approx(30.078).scale(0.0));
  CHECK(m.conductivity(300.0, Phase::Powder) == doctest::Approx(0.995).scale(0.0));
  CHECK(m.specific_heat(1000.0, Phase::Solid) == doctest::Approx(582.49).scale(0.0).epsilon(1e-12));
  CHECK(m.specific_heat(1000.0, Phase::Powder) == doctest::Approx(608.50).scale(0.0).epsilon(1e-12));
  CHECK(m.specific_heat(2000.0, Phase::Liquid) == doctest::Approx(709.25).scale(0.0));
  CHECK(m.solid_density == 8440.0);
  CHECK(m.liquid_density == 7640.0);
  CHECK(m.powder_density == 4330.0);
  CHECK(m.latent_heat == 290.0e3);
  CHECK(m.stefan_boltzmann == 5.67e-8);
  CHECK(m.T_solidus < m.T_liquidus);
}

TEST_CASE("liquid fraction ramp") {
  const MaterialModel m;
  CHECK(m.liquid_fraction(1563.0) == 0.0);
  CHECK(m.liquid_fraction(1623.0) == 1.0);
  CHECK(m.liquid_fraction(1593.0) == doctest::Approx(0.5).scale(0.0));
  CHECK(m.liquid_fraction(300.0) == 0.0);
  CHECK(m.liquid_fraction(3000.0) == 1.0);
  // non-decreasing and continuous across the branch points
  double prev = -1.0;
  for (double T = 1500.0; T <= 1700.0; T += 0.5) {
    const double fl = m.liquid_fraction(T);
    CHECK(fl >= prev);
    CHECK(fl >= 0.0);
    CHECK(fl <= 1.0);
    prev = fl;
  }
}

TEST_CASE("non-finite temperature rejected") {
  const MaterialModel m;
  CHECK_THROWS_AS(m.conductivity(std::numeric_limits<double>::quiet_NaN(), Phase::Solid),
                  std::invalid_argument);
  CHECK_THROWS_AS(m.specific_heat(std::numeric_limits<double>::infinity(), Phase::Solid),
                  std::invalid_argument);
}

TEST_CASE("blended property") {
  CHECK(blended_property(0.995, 20.0, 0.0) == doctest::Approx(0.995).scale(0.0));
  CHECK(blended_property(0.995, 20.0, 1.0) == doctest::Approx(20.0).scale(0.0));
  CHECK(blended_property(0.995, 20.0, 0.5) == doctest::Approx(10.4975).scale(0.0));
  CHECK_THROWS_AS(blended_property(1.0, 2.0, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(blended_property(1.0, 2.0, 1.01), std::invalid_argument);
}

TEST_CASE("JSON round-trip reproduces defaults bit-exactly") {
  const MaterialModel m = MaterialModel::load("IN625");
  const MaterialModel r = MaterialModel::from_json(m.to_json());
  CHECK(r.solid_density == m.solid_density);
  CHECK(r.cp_solid_poly.a == m.cp_solid_poly.a);
  CHECK(r.cp_solid_poly.b == m.cp_solid_poly.b);
  CHECK(r.k_solid_poly.a == m.k_solid_poly.a);
  CHECK(r.k_powder == m.k_powder);
  CHECK(r.latent_heat == m.latent_heat);
  CHECK(r.marangoni_coeff == m.marangoni_coeff);
  CHECK(r.stefan_boltzmann == m.stefan_boltzmann);
  CHECK(r.dendrite_spacing_c == m.dendrite_spacing_c);
  CHECK(r.darcy_epsilon_B == m.darcy_epsilon_B);
}

TEST_CASE("validate rejects broken models") {
  MaterialModel m;
  m.T_solidus = m.T_liquidus + 1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  MaterialModel m2;
  m2.solid_density = -1.0;
  CHECK_THROWS_AS(m2.validate(), std::invalid_argument);
}
