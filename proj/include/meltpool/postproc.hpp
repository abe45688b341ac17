#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meltpool/solver.hpp"

namespace meltpool {

/// Top-surface heights on the (x, y) column grid; masked columns never melted.
struct HeightField {
  int nx = 0, ny = 0;
  double cell = 0.0;  // m
  std::vector<double> heights;     // m, size nx*ny
  std::vector<std::uint8_t> mask;  // 1 = valid column

  std::size_t idx(int i, int j) const { return std::size_t(j) * nx + i; }
};

/// Height per column = top face of the highest consolidated (alpha == 1) cell.
/// Columns that never reached T_liquidus anywhere are masked. Throws
/// std::runtime_error if no column ever melted.
HeightField top_surface(const ThermalState& state, const Domain& domain,
                        double T_liquidus);

struct SaResult {
  double mean = 0.0;  // m
  double std = 0.0;   // m, (n-1)-normalized across zones
  std::vector<double> zone_values;
  int zones_skipped = 0;
};

/// Zone-wise arithmetic mean height deviation about a least-squares plane.
/// Zones split the field along x; degenerate zones are skipped.
SaResult sa_roughness(const HeightField& field, int n_zones);

/// Axis-aligned region of cells, inclusive of lo, exclusive of hi (m).
struct Region {
  std::array<double, 3> lo{0, 0, 0};
  std::array<double, 3> hi{0, 0, 0};
};

/// Fraction of nominal-region cells that never reached T_liquidus.
double lof_porosity(const ThermalState& state, const Domain& domain,
                    const Region& nominal_build_region, double T_liquidus);

/// Volumetric energy density, J/m^3.
double ved(double P, double V, double beam_diameter, double layer_thickness);

/// Normalized energy density (dimensionless).
double ned(double eta, double P, double V, double hatch, double layer,
           double rho, double cp, double T_l, double T_0);

struct QualityReport {
  double Sa_mean = 0.0, Sa_std = 0.0;
  double porosity_mean = 0.0, porosity_std = 0.0;
  std::vector<double> sa_zones;
  std::vector<double> porosity_zones;
  double VED = 0.0;
  double NED = 0.0;

  std::string to_json() const;
};

}  // namespace meltpool
