#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace meltpool {

/// Instantaneous heat-source parameters.
struct BeamState {
  double power = 0.0;        // W
  double speed = 1.0;        // m/s
  double absorptivity = 0.28;
  double radius = 50e-6;     // m
  double depth = 100e-6;     // m
};

/// The (P1,P2,P3) laws mapping linear energy density e = P/V to (d, eta, r_b).
struct StochasticBeamLaw {
  double P1 = 0.0;  // s, depth per unit P/V
  double P2 = 0.0;  // absorptivity per unit P/V
  double P3 = 0.0;  // s, radius per unit P/V
};

constexpr double kMinAbsorptivity = 0.28;

struct PathPoint {
  double t = 0.0;  // s
  double x = 0.0, y = 0.0, z = 0.0;  // m
  bool laser_on = true;
};

struct ScanPath {
  std::vector<PathPoint> points;
  double dwell_between_layers = 5e-4;  // s
  double dt = 0.0;                     // spacing used at generation
  bool resolution_warning = false;     // set when V*dt exceeds beam radius

  std::string to_csv() const;
  static ScanPath from_csv(const std::string& text);
};

struct PathGeometry {
  double track_length = 5e-3;   // m
  int n_tracks = 1;
  double hatch = 1e-4;          // m
  int n_layers = 1;
  double layer_thickness = 40e-6;  // m
  bool serpentine = false;      // serpentine for multi-track, else unidirectional
  double z0 = 0.0;              // z of first layer's top surface
};

struct RhfConfig {
  double R = 2e-4;       // m
  double T_window = 2e-3;  // s
  double rhf_c = 0.0;    // normalization constant, 0 means unset
};

/// Volumetric flux of the cylindrical Gaussian source, W/m^3.
/// (x_b, y_b) are coordinates in the beam-attached frame; depth_below_top
/// is z_top - z. Zero beyond the source depth.
double volumetric_flux(const BeamState& beam, double x_b, double y_b,
                       double depth_below_top);

/// Raw (unnormalized) residual heat factor at path point i.
double rhf_raw(const ScanPath& path, std::size_t i, const RhfConfig& cfg);

/// Normalized RHF_i / RHF_c. Throws if cfg.rhf_c is unset.
double rhf(const ScanPath& path, std::size_t i, const RhfConfig& cfg);

/// Computes RHF_c as the raw RHF at the temporal midpoint of the middle track
/// and returns a config with it filled in.
RhfConfig normalize_rhf(const ScanPath& path, RhfConfig cfg);

/// Applies the parameter laws: d = P1*(P/V)*RHF^2, eta = max(P2*(P/V)*RHF^2, 0.28),
/// r_b = P3*(P/V)*RHF^2. Use rhf_normalized = 1 for single tracks.
BeamState beam_from_law(const StochasticBeamLaw& law, double P, double V,
                        double rhf_normalized = 1.0);

/// Builds a scan path: unidirectional across layers, serpentine across tracks.
/// Points are spaced by dt along each track; laser-off dwell points are
/// inserted between tracks/layers. The resolution_warning flag is set when
/// V*dt exceeds the expected beam radius.
ScanPath generate_path(const PathGeometry& geom, double V, double dt,
                       double expected_beam_radius = 50e-6);

}  // namespace meltpool
