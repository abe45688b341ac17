#include "meltpool/solver_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace meltpool::kernels {

CellCoeffs cell_coeffs(const MaterialModel& m, bool powder, double alpha) {
  CellCoeffs c;
  if (powder) {
    c.rho = blended_property(m.powder_density, m.solid_density, alpha);
    c.a = blended_property(m.cp_powder_poly.a, m.cp_solid_poly.a, alpha);
    c.b = blended_property(m.cp_powder_poly.b, m.cp_solid_poly.b, alpha);
  } else {
    c.rho = m.solid_density;
    c.a = m.cp_solid_poly.a;
    c.b = m.cp_solid_poly.b;
  }
  const double Tr = m.T_reference, Ts = m.T_solidus, Tl = m.T_liquidus;
  c.H1 = c.rho * (0.5 * c.a * (Ts * Ts - Tr * Tr) + c.b * (Ts - Tr));
  c.cp_mushy = 0.5 * ((c.a * Ts + c.b) + m.cp_liquid);
  c.H2 = c.H1 + c.rho * (c.cp_mushy * (Tl - Ts) + m.latent_heat);
  return c;
}

double enthalpy_from_temperature(const MaterialModel& m, const CellCoeffs& c, double T) {
  const double Tr = m.T_reference, Ts = m.T_solidus, Tl = m.T_liquidus;
  if (T <= Ts)
    return c.rho * (0.5 * c.a * (T * T - Tr * Tr) + c.b * (T - Tr));
  if (T < Tl)
    return c.H1 + c.rho * (c.cp_mushy + m.latent_heat / (Tl - Ts)) * (T - Ts);
  return c.H2 + c.rho * m.cp_liquid * (T - Tl);
}

double temperature_from_enthalpy(const MaterialModel& m, const CellCoeffs& c, double H) {
  const double Tr = m.T_reference, Ts = m.T_solidus, Tl = m.T_liquidus;
  if (H <= c.H1) {
    const double rhs = H / c.rho + 0.5 * c.a * Tr * Tr + c.b * Tr;
    if (c.a == 0.0) return rhs / c.b;
    // Positive root of a/2 T^2 + b T = rhs.
    return (-c.b + std::sqrt(c.b * c.b + 2.0 * c.a * rhs)) / c.a;
  }
  if (H < c.H2)
    return Ts + (H - c.H1) / (c.rho * (c.cp_mushy + m.latent_heat / (Tl - Ts)));
  return Tl + (H - c.H2) / (c.rho * m.cp_liquid);
}

double cell_conductivity(const MaterialModel& m, bool powder, double alpha,
                         double T, double fl) {
  const double k_bulk =
      fl >= 1.0 ? m.k_liquid
                : (1.0 - fl) * m.k_solid_poly(T) + fl * m.k_liquid;
  return powder ? blended_property(m.k_powder, k_bulk, alpha) : k_bulk;
}

namespace {

inline double cell_update_k(const ThermalState& s, const Domain& d,
                            const MaterialModel& m, std::size_t c) {
  const bool powder = !d.powder_mask.empty() && d.powder_mask[c];
  return cell_conductivity(m, powder, s.alpha[c], s.T[c], s.fl[c]);
}

inline double cell_update_H(const ThermalState& s, const EnergyStepArgs& args,
                            const std::vector<double>& k_cell, int i, int j, int k) {
  const Domain& d = *args.domain;
  const MaterialModel& m = *args.mat;
  const std::size_t c = d.idx(i, j, k);
  const double inv_dx2 = 1.0 / (d.dx * d.dx);
  const double Tc = s.T[c], kc = k_cell[c];

  double lap = 0.0;
  auto face = [&](std::size_t n) { lap += 0.5 * (kc + k_cell[n]) * (s.T[n] - Tc); };
  if (i > 0) face(c - 1);
  if (i + 1 < d.nx) face(c + 1);
  if (j > 0) face(c - d.nx);
  if (j + 1 < d.ny) face(c + d.nx);
  const std::size_t plane = std::size_t(d.nx) * d.ny;
  if (k > 0) face(c - plane);
  if (k + 1 < d.nz) face(c + plane);
  lap *= inv_dx2;

  double q = 0.0;
  if (args.laser_on) {
    const double xb = d.x(i) - args.beam_x;
    const double yb = d.y(j) - args.beam_y;
    // Skip cells far outside the Gaussian footprint.
    const double cutoff = 4.0 * args.beam.radius;
    if (xb * xb + yb * yb < cutoff * cutoff)
      q = volumetric_flux(args.beam, xb, yb, args.beam_z - d.z(k));
  }

  double loss = 0.0;
  if (args.surface_losses && k + 1 == d.nz) {
    const double T0 = m.T_ambient;
    loss = (m.convection_coeff * (Tc - T0) +
            m.stefan_boltzmann * m.emissivity *
                (Tc * Tc * Tc * Tc - T0 * T0 * T0 * T0)) /
           d.dx;
  }

  double adv = 0.0;
  if (args.u) {
    const double inv_dx = 1.0 / d.dx;
    auto upwind = [&](double vel, std::size_t lo, std::size_t hi, bool has_lo,
                      bool has_hi) {
      if (vel > 0.0 && has_lo) return vel * (s.H[c] - s.H[lo]) * inv_dx;
      if (vel < 0.0 && has_hi) return vel * (s.H[hi] - s.H[c]) * inv_dx;
      return 0.0;
    };
    adv += upwind(args.u[c], c - 1, c + 1, i > 0, i + 1 < d.nx);
    adv += upwind(args.v[c], c - d.nx, c + d.nx, j > 0, j + 1 < d.ny);
    adv += upwind(args.w[c], c - plane, c + plane, k > 0, k + 1 < d.nz);
  }

  return s.H[c] + args.dt * (lap + q - loss - adv);
}

inline void cell_recover(ThermalState& s, const Domain& d, const MaterialModel& m,
                         std::size_t c) {
  const bool powder = !d.powder_mask.empty() && d.powder_mask[c];
  CellCoeffs coeffs = cell_coeffs(m, powder, s.alpha[c]);
  double T = temperature_from_enthalpy(m, coeffs, s.H[c]);
  const double peak = std::max(s.T_peak[c], T);
  s.T_peak[c] = peak;
  if (powder) {
    const double a_new = std::clamp((peak - m.T_solidus) / (m.T_liquidus - m.T_solidus),
                                    0.0, 1.0);
    if (a_new > s.alpha[c]) {
      s.alpha[c] = a_new;
      // Consolidation changed the H(T) relation; re-base enthalpy at fixed T.
      coeffs = cell_coeffs(m, powder, a_new);
      s.H[c] = enthalpy_from_temperature(m, coeffs, T);
    }
  }
  s.T[c] = T;
  s.fl[c] = m.liquid_fraction(T);
}

}  // namespace

void conductivity_field_serial(const ThermalState& s, const Domain& d,
                               const MaterialModel& m, std::vector<double>& k_cell) {
  for (std::size_t c = 0; c < d.n_cells(); ++c) k_cell[c] = cell_update_k(s, d, m, c);
}

void conductivity_field_omp(const ThermalState& s, const Domain& d,
                            const MaterialModel& m, std::vector<double>& k_cell) {
  const std::ptrdiff_t n = d.n_cells();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) k_cell[c] = cell_update_k(s, d, m, c);
}

void enthalpy_update_serial(const ThermalState& s, const EnergyStepArgs& args,
                            const std::vector<double>& k_cell,
                            std::vector<double>& H_new) {
  const Domain& d = *args.domain;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i)
        H_new[d.idx(i, j, k)] = cell_update_H(s, args, k_cell, i, j, k);
}

void enthalpy_update_omp(const ThermalState& s, const EnergyStepArgs& args,
                         const std::vector<double>& k_cell,
                         std::vector<double>& H_new) {
  const Domain& d = *args.domain;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i)
        H_new[d.idx(i, j, k)] = cell_update_H(s, args, k_cell, i, j, k);
}

void recover_fields_serial(ThermalState& s, const Domain& d, const MaterialModel& m) {
  for (std::size_t c = 0; c < d.n_cells(); ++c) cell_recover(s, d, m, c);
}

void recover_fields_omp(ThermalState& s, const Domain& d, const MaterialModel& m) {
  const std::ptrdiff_t n = d.n_cells();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) cell_recover(s, d, m, c);
}

}  // namespace meltpool::kernels
