#pragma once

#include <vector>

#include "meltpool/heat_source.hpp"
#include "meltpool/material.hpp"
#include "meltpool/solver.hpp"

// Cell-local property evaluation and the per-step update kernels.
// The serial variants are the reference implementation; the OpenMP variants
// must produce bitwise identical fields (each cell is written independently
// from the previous step's arrays).

namespace meltpool::kernels {

/// Coefficients of the monotone per-cell enthalpy-temperature relation.
/// Sensible heat uses the (possibly powder-blended) linear cp polynomial up
/// to solidus, a constant mushy cp plus latent heat across the mushy range,
/// and the liquid cp above liquidus.
struct CellCoeffs {
  double rho;       // kg/m^3
  double a, b;      // cp = a*T + b below solidus
  double H1, H2;    // enthalpy at solidus / liquidus, J/m^3
  double cp_mushy;  // J/(kg K)
};

CellCoeffs cell_coeffs(const MaterialModel& m, bool powder, double alpha);
double enthalpy_from_temperature(const MaterialModel& m, const CellCoeffs& c, double T);
double temperature_from_enthalpy(const MaterialModel& m, const CellCoeffs& c, double H);
double cell_conductivity(const MaterialModel& m, bool powder, double alpha,
                         double T, double fl);

struct EnergyStepArgs {
  const Domain* domain = nullptr;
  const MaterialModel* mat = nullptr;
  BeamState beam;
  double beam_x = 0.0, beam_y = 0.0, beam_z = 0.0;
  bool laser_on = false;
  bool surface_losses = true;
  double dt = 0.0;
  // Optional velocity fields for enthalpy advection (fluid mode).
  const double* u = nullptr;
  const double* v = nullptr;
  const double* w = nullptr;
};

/// Fills per-cell conductivity.
void conductivity_field_serial(const ThermalState& s, const Domain& d,
                               const MaterialModel& m, std::vector<double>& k_cell);
void conductivity_field_omp(const ThermalState& s, const Domain& d,
                            const MaterialModel& m, std::vector<double>& k_cell);

/// Explicit enthalpy update into H_new (conduction + source + losses + advection).
void enthalpy_update_serial(const ThermalState& s, const EnergyStepArgs& args,
                            const std::vector<double>& k_cell,
                            std::vector<double>& H_new);
void enthalpy_update_omp(const ThermalState& s, const EnergyStepArgs& args,
                         const std::vector<double>& k_cell,
                         std::vector<double>& H_new);

/// Recovers T, fl, T_peak and consolidation from the updated enthalpy;
/// re-bases H when a cell's consolidation state advances.
void recover_fields_serial(ThermalState& s, const Domain& d, const MaterialModel& m);
void recover_fields_omp(ThermalState& s, const Domain& d, const MaterialModel& m);

}  // namespace meltpool::kernels
