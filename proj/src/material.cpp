#include "meltpool/material.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace meltpool {

namespace {
void require_finite(double T) {
  if (!std::isfinite(T) || T <= 0.0)
    throw std::invalid_argument("temperature must be finite and positive");
}
}  // namespace

double MaterialModel::conductivity(double T, Phase state) const {
  require_finite(T);
  switch (state) {
    case Phase::Powder: return k_powder;
    case Phase::Solid: return k_solid_poly(T);
    case Phase::Liquid: return k_liquid;
  }
  throw std::invalid_argument("bad phase");
}

double MaterialModel::specific_heat(double T, Phase state) const {
  require_finite(T);
  switch (state) {
    case Phase::Powder: return cp_powder_poly(T);
    case Phase::Solid: return cp_solid_poly(T);
    case Phase::Liquid: return cp_liquid;
  }
  throw std::invalid_argument("bad phase");
}

double MaterialModel::liquid_fraction(double T) const {
  require_finite(T);
  if (T <= T_solidus) return 0.0;
  if (T >= T_liquidus) return 1.0;
  return (T - T_solidus) / (T_liquidus - T_solidus);
}

void MaterialModel::validate() const {
  if (!(T_solidus < T_liquidus))
    throw std::invalid_argument("T_solidus must be below T_liquidus");
  if (solid_density <= 0 || liquid_density <= 0 || powder_density <= 0)
    throw std::invalid_argument("densities must be positive");
  if (latent_heat <= 0) throw std::invalid_argument("latent_heat must be positive");
  if (k_liquid <= 0 || k_powder <= 0)
    throw std::invalid_argument("conductivities must be positive");
  if (cp_liquid <= 0) throw std::invalid_argument("cp_liquid must be positive");
}

double blended_property(double powder_value, double bulk_value, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("consolidation factor must lie in [0,1]");
  return powder_value + alpha * (bulk_value - powder_value);
}

std::string MaterialModel::to_json() const {
  nlohmann::json j;
  j["solid_density"] = solid_density;
  j["liquid_density"] = liquid_density;
  j["powder_density"] = powder_density;
  j["T_solidus"] = T_solidus;
  j["T_liquidus"] = T_liquidus;
  j["latent_heat"] = latent_heat;
  j["cp_solid_poly"] = {cp_solid_poly.a, cp_solid_poly.b};
  j["cp_liquid"] = cp_liquid;
  j["cp_powder_poly"] = {cp_powder_poly.a, cp_powder_poly.b};
  j["k_solid_poly"] = {k_solid_poly.a, k_solid_poly.b};
  j["k_liquid"] = k_liquid;
  j["k_powder"] = k_powder;
  j["viscosity"] = viscosity;
  j["thermal_expansion"] = thermal_expansion;
  j["surface_tension"] = surface_tension;
  j["marangoni_coeff"] = marangoni_coeff;
  j["emissivity"] = emissivity;
  j["convection_coeff"] = convection_coeff;
  j["T_ambient"] = T_ambient;
  j["T_reference"] = T_reference;
  j["T_preheat"] = T_preheat;
  j["stefan_boltzmann"] = stefan_boltzmann;
  j["gravity"] = gravity;
  j["dendrite_spacing_c"] = dendrite_spacing_c;
  j["darcy_epsilon_B"] = darcy_epsilon_B;
  return j.dump(2);
}

MaterialModel MaterialModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MaterialModel m;
  m.solid_density = j.at("solid_density");
  m.liquid_density = j.at("liquid_density");
  m.powder_density = j.at("powder_density");
  m.T_solidus = j.at("T_solidus");
  m.T_liquidus = j.at("T_liquidus");
  m.latent_heat = j.at("latent_heat");
  m.cp_solid_poly = {j.at("cp_solid_poly")[0], j.at("cp_solid_poly")[1]};
  m.cp_liquid = j.at("cp_liquid");
  m.cp_powder_poly = {j.at("cp_powder_poly")[0], j.at("cp_powder_poly")[1]};
  m.k_solid_poly = {j.at("k_solid_poly")[0], j.at("k_solid_poly")[1]};
  m.k_liquid = j.at("k_liquid");
  m.k_powder = j.at("k_powder");
  m.viscosity = j.at("viscosity");
  m.thermal_expansion = j.at("thermal_expansion");
  m.surface_tension = j.at("surface_tension");
  m.marangoni_coeff = j.at("marangoni_coeff");
  m.emissivity = j.at("emissivity");
  m.convection_coeff = j.at("convection_coeff");
  m.T_ambient = j.at("T_ambient");
  m.T_reference = j.at("T_reference");
  m.T_preheat = j.at("T_preheat");
  m.stefan_boltzmann = j.at("stefan_boltzmann");
  m.gravity = j.at("gravity");
  m.dendrite_spacing_c = j.at("dendrite_spacing_c");
  m.darcy_epsilon_B = j.at("darcy_epsilon_B");
  m.validate();
  return m;
}

MaterialModel MaterialModel::load(const std::string& name_or_path) {
  if (name_or_path == "IN625" || name_or_path.empty()) {
    MaterialModel m;
    m.validate();
    return m;
  }
  std::ifstream in(name_or_path);
  if (!in) throw std::invalid_argument("cannot open material file: " + name_or_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace meltpool
