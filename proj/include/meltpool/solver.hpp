#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "meltpool/heat_source.hpp"
#include "meltpool/material.hpp"
#include "meltpool/stats.hpp"

namespace meltpool {

/// Structured uniform voxel grid. Cell (i,j,k) has center
/// origin + dx*(i+1/2, j+1/2, k+1/2); k increases upward.
struct Domain {
  int nx = 0, ny = 0, nz = 0;
  double dx = 5e-6;  // m
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> powder_mask;  // 1 = cell starts as powder

  static Domain box(int nx, int ny, int nz, double dx,
                    std::array<double, 3> origin = {0, 0, 0});

  std::size_t n_cells() const { return std::size_t(nx) * ny * nz; }
  std::size_t idx(int i, int j, int k) const {
    return (std::size_t(k) * ny + j) * nx + i;
  }
  double x(int i) const { return origin[0] + (i + 0.5) * dx; }
  double y(int j) const { return origin[1] + (j + 0.5) * dx; }
  double z(int k) const { return origin[2] + (k + 0.5) * dx; }
  double z_top() const { return origin[2] + nz * dx; }

  /// Marks every cell whose center lies at or above the given height as powder.
  void set_powder_above(double z_threshold);
};

/// Grid fields of the transient thermal (and optional fluid) solution.
struct ThermalState {
  std::vector<double> T;        // K
  std::vector<double> H;        // volumetric enthalpy, J/m^3
  std::vector<double> fl;       // liquid fraction
  std::vector<double> alpha;    // consolidation, non-decreasing
  std::vector<double> T_peak;   // running max of T
  std::vector<double> u, v, w;  // m/s, fluid mode only
  double time = 0.0;
};

enum class SolverMode { Conduction, Fluid };

struct SolverConfig {
  SolverMode mode = SolverMode::Conduction;
  double dt_safety = 0.25;
  double max_temperature_cap = 1e5;  // K, divergence detector
  int snapshot_stride = 10;          // path points between trace records
  bool surface_losses = true;        // convection + radiation on the top face
  bool use_openmp = true;
  int projection_iters = 400;
  double projection_tol = 1e-3;      // max |div u| after projection, 1/s
  double initial_temperature = 0.0;  // 0 -> material preheat temperature
};

struct MeltPoolDims {
  double width = 0.0;   // m
  double depth = 0.0;   // m
  double cross_section_x = 0.0;
  bool melted = false;
  double time = 0.0;
};

/// Owns the mutable fields of one simulation instance. Single-threaded per
/// instance; the per-step cell loops may use OpenMP internally with results
/// bitwise independent of worker count.
class Simulation {
 public:
  Simulation(Domain domain, MaterialModel material, SolverConfig config);

  const Domain& domain() const { return domain_; }
  const MaterialModel& material() const { return material_; }
  const SolverConfig& config() const { return config_; }
  ThermalState& state() { return state_; }
  const ThermalState& state() const { return state_; }

  /// Largest explicit-stable conduction time step.
  double stable_dt() const;

  /// One explicit enthalpy update: conduction, volumetric source, top-surface
  /// losses; then temperature/phase recovery. Throws on temperature runaway.
  void step_energy(const BeamState& beam, double beam_x, double beam_y,
                   double dt, bool laser_on);

  /// Reduced fluid update (fluid mode): explicit advection-diffusion with
  /// implicit Darcy sink, buoyancy, Marangoni shear, then pressure projection.
  void step_fluid(double dt);

  double total_enthalpy() const;  // J

 private:
  Domain domain_;
  MaterialModel material_;
  SolverConfig config_;
  ThermalState state_;
  std::vector<double> k_cell_, H_new_;       // scratch
  std::vector<double> p_, p_new_, div_;      // projection scratch
  long step_index_ = 0;
};

/// Melt-pool dimensions from the T_peak >= T_liquidus envelope in the
/// cross-section plane nearest x, with linear sub-cell interpolation.
MeltPoolDims extract_meltpool_dims(const ThermalState& state, const Domain& domain,
                                   const MaterialModel& material,
                                   double cross_section_x);

struct TraceRow {
  double t = 0.0, x_beam = 0.0;
  double width = 0.0, depth = 0.0;
  double rhf = 1.0, eta = 0.0, r_b = 0.0, d = 0.0;
};

struct ScanResult {
  std::vector<TraceRow> trace;
  bool path_warning = false;
};

/// Advances the simulation along the scan path. `param_source` yields one
/// (P1,P2,P3) triple per path point; pass a constant function for
/// deterministic runs. RHF normalization is applied for multi-track paths
/// and fixed to 1 for single tracks unless forced.
ScanResult run_scan(Simulation& sim, const ScanPath& path, double P, double V,
                    const std::function<Vec3()>& param_source,
                    bool use_rhf = false);

std::string trace_to_csv(const std::vector<TraceRow>& trace);

/// Field snapshot: flat little-endian 64-bit floats plus a JSON sidecar.
void save_field(const std::string& path_base, const std::vector<double>& field,
                const Domain& domain, double time);

}  // namespace meltpool
