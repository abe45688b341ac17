#pragma once

#include <stdexcept>
#include <string>

namespace meltpool {

/// Which material state a property is queried for.
enum class Phase { Powder, Solid, Liquid };

struct LinearPoly {
  double a = 0.0;  // slope per K
  double b = 0.0;  // constant term
  double operator()(double T) const { return a * T + b; }
};

/// IN625 thermophysical properties and process constants.
/// All values are SI (m, s, kg, K, W). Immutable after construction.
struct MaterialModel {
  double solid_density = 8440.0;       // kg/m^3
  double liquid_density = 7640.0;      // kg/m^3
  double powder_density = 4330.0;      // kg/m^3
  double T_solidus = 1563.0;           // K
  double T_liquidus = 1623.0;          // K
  double latent_heat = 290.0e3;        // J/kg
  LinearPoly cp_solid_poly{0.2441, 338.39};   // J/(kg K)
  double cp_liquid = 709.25;                  // J/(kg K)
  LinearPoly cp_powder_poly{0.2508, 357.70};  // J/(kg K)
  LinearPoly k_solid_poly{0.0163, 4.5847};    // W/(m K)
  double k_liquid = 30.078;            // W/(m K)
  double k_powder = 0.995;             // W/(m K)
  double viscosity = 7.0e-3;           // Pa s
  double thermal_expansion = 5.0e-5;   // 1/K
  double surface_tension = 1.8;        // N/m
  double marangoni_coeff = -3.8e-4;    // N/(m K)
  double emissivity = 0.4;
  double convection_coeff = 10.0;      // W/(m^2 K)
  double T_ambient = 295.0;            // K
  double T_reference = 295.0;          // K
  double T_preheat = 353.0;            // K
  double stefan_boltzmann = 5.67e-8;   // W/(m^2 K^4)
  double gravity = 9.8;                // m/s^2
  double dendrite_spacing_c = 1.0e-6;  // m
  double darcy_epsilon_B = 1.0e-6;

  double conductivity(double T, Phase state) const;
  double specific_heat(double T, Phase state) const;
  double liquid_fraction(double T) const;

  /// Checks the structural invariants; throws std::invalid_argument on violation.
  void validate() const;

  std::string to_json() const;
  static MaterialModel from_json(const std::string& text);

  /// Loads a material by name ("IN625") or from a JSON file path.
  static MaterialModel load(const std::string& name_or_path);
};

/// Linear powder/bulk blend by consolidation factor alpha in [0,1].
double blended_property(double powder_value, double bulk_value, double alpha);

}  // namespace meltpool
