#include "meltpool/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "meltpool/solver_kernels.hpp"

namespace meltpool {

Domain Domain::box(int nx, int ny, int nz, double dx, std::array<double, 3> origin) {
  if (nx < 4 || ny < 4 || nz < 4)
    throw std::invalid_argument("domain needs at least 4 cells per direction");
  if (dx <= 0) throw std::invalid_argument("dx must be positive");
  Domain d;
  d.nx = nx;
  d.ny = ny;
  d.nz = nz;
  d.dx = dx;
  d.origin = origin;
  d.powder_mask.assign(d.n_cells(), 0);
  return d;
}

void Domain::set_powder_above(double z_threshold) {
  for (int k = 0; k < nz; ++k) {
    if (z(k) < z_threshold) continue;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) powder_mask[idx(i, j, k)] = 1;
  }
}

Simulation::Simulation(Domain domain, MaterialModel material, SolverConfig config)
    : domain_(std::move(domain)), material_(std::move(material)), config_(config) {
  material_.validate();
  if (!(config_.dt_safety > 0.0 && config_.dt_safety <= 0.5))
    throw std::invalid_argument("dt_safety must lie in (0, 0.5]");
  const std::size_t n = domain_.n_cells();
  const double T0 = config_.initial_temperature > 0.0 ? config_.initial_temperature
                                                      : material_.T_preheat;
  state_.T.assign(n, T0);
  state_.fl.assign(n, material_.liquid_fraction(T0));
  state_.T_peak.assign(n, T0);
  state_.alpha.resize(n);
  state_.H.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const bool powder = !domain_.powder_mask.empty() && domain_.powder_mask[c];
    state_.alpha[c] = powder ? 0.0 : 1.0;
    const auto coeffs = kernels::cell_coeffs(material_, powder, state_.alpha[c]);
    state_.H[c] = kernels::enthalpy_from_temperature(material_, coeffs, T0);
  }
  if (config_.mode == SolverMode::Fluid) {
    state_.u.assign(n, 0.0);
    state_.v.assign(n, 0.0);
    state_.w.assign(n, 0.0);
  }
  k_cell_.resize(n);
  H_new_.resize(n);
}

double Simulation::stable_dt() const {
  const double T0 = std::min(material_.T_ambient, material_.T_preheat);
  const double k_max =
      std::max(material_.k_liquid, material_.k_solid_poly(material_.T_liquidus));
  double rho_cp_min = material_.solid_density * material_.cp_solid_poly(T0);
  rho_cp_min = std::min(rho_cp_min,
                        material_.powder_density * material_.cp_powder_poly(T0));
  rho_cp_min = std::min(rho_cp_min, material_.solid_density * material_.cp_liquid);
  return config_.dt_safety * domain_.dx * domain_.dx * rho_cp_min / k_max;
}

void Simulation::step_energy(const BeamState& beam, double beam_x, double beam_y,
                             double dt, bool laser_on) {
  kernels::EnergyStepArgs args;
  args.domain = &domain_;
  args.mat = &material_;
  args.beam = beam;
  args.beam_x = beam_x;
  args.beam_y = beam_y;
  args.beam_z = domain_.z_top();
  args.laser_on = laser_on;
  args.surface_losses = config_.surface_losses;
  args.dt = dt;
  if (config_.mode == SolverMode::Fluid && !state_.u.empty()) {
    args.u = state_.u.data();
    args.v = state_.v.data();
    args.w = state_.w.data();
  }

  if (config_.use_openmp) {
    kernels::conductivity_field_omp(state_, domain_, material_, k_cell_);
    kernels::enthalpy_update_omp(state_, args, k_cell_, H_new_);
  } else {
    kernels::conductivity_field_serial(state_, domain_, material_, k_cell_);
    kernels::enthalpy_update_serial(state_, args, k_cell_, H_new_);
  }
  state_.H.swap(H_new_);
  if (config_.use_openmp)
    kernels::recover_fields_omp(state_, domain_, material_);
  else
    kernels::recover_fields_serial(state_, domain_, material_);

  ++step_index_;
  state_.time += dt;
  for (std::size_t c = 0; c < domain_.n_cells(); ++c) {
    if (!(state_.T[c] < config_.max_temperature_cap))
      throw std::runtime_error("temperature diverged at step " +
                               std::to_string(step_index_));
  }
}

void Simulation::step_fluid(double dt) {
  if (config_.mode != SolverMode::Fluid)
    throw std::logic_error("step_fluid requires fluid mode");
  const Domain& d = domain_;
  const MaterialModel& m = material_;
  const std::size_t n = d.n_cells();
  const std::size_t plane = std::size_t(d.nx) * d.ny;
  const double rho0 = m.liquid_density;
  const double nu = m.viscosity / rho0;
  const double inv_dx = 1.0 / d.dx, inv_dx2 = inv_dx * inv_dx;

  std::vector<double> u0 = state_.u, v0 = state_.v, w0 = state_.w;
  auto lap = [&](const std::vector<double>& f, std::size_t c, int i, int j, int k) {
    double s = 0.0;
    if (i > 0) s += f[c - 1] - f[c];
    if (i + 1 < d.nx) s += f[c + 1] - f[c];
    if (j > 0) s += f[c - d.nx] - f[c];
    if (j + 1 < d.ny) s += f[c + d.nx] - f[c];
    if (k > 0) s += f[c - plane] - f[c];
    if (k + 1 < d.nz) s += f[c + plane] - f[c];
    return s * inv_dx2;
  };
  auto upwind = [&](const std::vector<double>& f, double vel, std::size_t c,
                    std::size_t stride, bool has_lo, bool has_hi) {
    if (vel > 0.0 && has_lo) return vel * (f[c] - f[c - stride]) * inv_dx;
    if (vel < 0.0 && has_hi) return vel * (f[c + stride] - f[c]) * inv_dx;
    return 0.0;
  };

#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.nz; ++k) {
    for (int j = 0; j < d.ny; ++j) {
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.idx(i, j, k);
        const double fl = state_.fl[c];
        if (fl <= 0.0) {  // solid: no flow
          state_.u[c] = state_.v[c] = state_.w[c] = 0.0;
          continue;
        }
        auto advect = [&](const std::vector<double>& f) {
          return upwind(f, u0[c], c, 1, i > 0, i + 1 < d.nx) +
                 upwind(f, v0[c], c, d.nx, j > 0, j + 1 < d.ny) +
                 upwind(f, w0[c], c, plane, k > 0, k + 1 < d.nz);
        };
        double du = -advect(u0) + nu * lap(u0, c, i, j, k);
        double dv = -advect(v0) + nu * lap(v0, c, i, j, k);
        double dw = -advect(w0) + nu * lap(w0, c, i, j, k) +
                    m.gravity * m.thermal_expansion * (state_.T[c] - m.T_reference);

        // Marangoni shear on the top liquid surface (liquid cell with no
        // liquid above), applied as a body force over the cell height.
        const bool top_liquid =
            (k + 1 == d.nz) || state_.fl[c + plane] <= 0.0 ||
            (!d.powder_mask.empty() && d.powder_mask[c + plane] &&
             state_.alpha[c + plane] < 1.0);
        if (top_liquid) {
          double dTdx = 0.0, dTdy = 0.0;
          if (i > 0 && i + 1 < d.nx)
            dTdx = (state_.T[c + 1] - state_.T[c - 1]) * 0.5 * inv_dx;
          if (j > 0 && j + 1 < d.ny)
            dTdy = (state_.T[c + d.nx] - state_.T[c - d.nx]) * 0.5 * inv_dx;
          du += m.marangoni_coeff * dTdx / (rho0 * d.dx);
          dv += m.marangoni_coeff * dTdy / (rho0 * d.dx);
        }

        // Implicit Darcy sink in the mushy zone.
        const double one_m_fl = 1.0 - fl;
        const double A = 180.0 * m.viscosity * one_m_fl * one_m_fl /
                         (m.dendrite_spacing_c * m.dendrite_spacing_c *
                          (fl * fl * fl + m.darcy_epsilon_B));
        const double damp = 1.0 / (1.0 + dt * A / rho0);
        state_.u[c] = (u0[c] + dt * du) * damp;
        state_.v[c] = (v0[c] + dt * dv) * damp;
        state_.w[c] = (w0[c] + dt * dw) * damp;
      }
    }
  }

  // Pressure projection on liquid cells (Jacobi), enforcing discrete
  // divergence-free velocity.
  bool any_liquid = false;
  for (std::size_t c = 0; c < n; ++c)
    if (state_.fl[c] > 0.5) { any_liquid = true; break; }
  if (!any_liquid) return;

  if (p_.size() != n) {
    p_.assign(n, 0.0);
    p_new_.assign(n, 0.0);
    div_.assign(n, 0.0);
  }
  std::fill(p_.begin(), p_.end(), 0.0);
  auto divergence = [&](std::size_t c, int i, int j, int k) {
    double s = 0.0;
    s += ((i + 1 < d.nx ? state_.u[c + 1] : 0.0) - (i > 0 ? state_.u[c - 1] : 0.0));
    s += ((j + 1 < d.ny ? state_.v[c + d.nx] : 0.0) - (j > 0 ? state_.v[c - d.nx] : 0.0));
    s += ((k + 1 < d.nz ? state_.w[c + plane] : 0.0) - (k > 0 ? state_.w[c - plane] : 0.0));
    return s * 0.5 * inv_dx;
  };
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.idx(i, j, k);
        div_[c] = state_.fl[c] > 0.5 ? divergence(c, i, j, k) : 0.0;
      }

  const double scale = rho0 / dt * d.dx * d.dx;
  for (int it = 0; it < config_.projection_iters; ++it) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const std::size_t c = d.idx(i, j, k);
          if (state_.fl[c] <= 0.5) { p_new_[c] = 0.0; continue; }
          double sum = 0.0;
          int cnt = 0;
          auto nb = [&](std::size_t nc) { sum += p_[nc]; ++cnt; };
          if (i > 0) nb(c - 1);
          if (i + 1 < d.nx) nb(c + 1);
          if (j > 0) nb(c - d.nx);
          if (j + 1 < d.ny) nb(c + d.nx);
          if (k > 0) nb(c - plane);
          if (k + 1 < d.nz) nb(c + plane);
          p_new_[c] = cnt > 0 ? (sum - scale * div_[c]) / cnt : 0.0;
        }
    p_.swap(p_new_);
  }

#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.idx(i, j, k);
        if (state_.fl[c] <= 0.5) continue;
        const double coef = dt / rho0 * 0.5 * inv_dx;
        if (i > 0 && i + 1 < d.nx) state_.u[c] -= coef * (p_[c + 1] - p_[c - 1]);
        if (j > 0 && j + 1 < d.ny) state_.v[c] -= coef * (p_[c + d.nx] - p_[c - d.nx]);
        if (k > 0 && k + 1 < d.nz) state_.w[c] -= coef * (p_[c + plane] - p_[c - plane]);
      }

  double max_div = 0.0;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.idx(i, j, k);
        if (state_.fl[c] > 0.5)
          max_div = std::max(max_div, std::abs(divergence(c, i, j, k)));
      }
  if (max_div > config_.projection_tol &&
      max_div * dt > 0.01)  // tolerate slow drift at tiny steps
    throw std::runtime_error("fluid projection did not converge: max divergence " +
                             std::to_string(max_div));
}

double Simulation::total_enthalpy() const {
  const double cell_vol = domain_.dx * domain_.dx * domain_.dx;
  double sum = 0.0;
  for (double h : state_.H) sum += h;
  return sum * cell_vol;
}

MeltPoolDims extract_meltpool_dims(const ThermalState& state, const Domain& domain,
                                   const MaterialModel& material,
                                   double cross_section_x) {
  MeltPoolDims dims;
  dims.cross_section_x = cross_section_x;
  dims.time = state.time;
  const double Tl = material.T_liquidus;
  int i0 = static_cast<int>(std::floor((cross_section_x - domain.origin[0]) / domain.dx));
  i0 = std::clamp(i0, 0, domain.nx - 1);

  auto peak = [&](int j, int k) { return state.T_peak[domain.idx(i0, j, k)]; };

  // Width: melted extent along y at the top cell layer.
  const int k_top = domain.nz - 1;
  int j_lo = -1, j_hi = -1;
  for (int j = 0; j < domain.ny; ++j) {
    if (peak(j, k_top) >= Tl) {
      if (j_lo < 0) j_lo = j;
      j_hi = j;
    }
  }
  if (j_lo < 0) return dims;  // nothing melted in this plane
  dims.melted = true;

  double y_lo = domain.y(j_lo) - 0.5 * domain.dx;
  if (j_lo > 0) {
    const double t1 = peak(j_lo, k_top), t0 = peak(j_lo - 1, k_top);
    y_lo = domain.y(j_lo) - domain.dx * (t1 - Tl) / (t1 - t0);
  }
  double y_hi = domain.y(j_hi) + 0.5 * domain.dx;
  if (j_hi + 1 < domain.ny) {
    const double t1 = peak(j_hi, k_top), t0 = peak(j_hi + 1, k_top);
    y_hi = domain.y(j_hi) + domain.dx * (t1 - Tl) / (t1 - t0);
  }
  dims.width = y_hi - y_lo;

  // Depth: deepest melted cell in the plane, interpolated toward the cell below.
  int k_min = domain.nz;
  int j_at = -1;
  for (int j = 0; j < domain.ny; ++j)
    for (int k = 0; k < domain.nz; ++k)
      if (peak(j, k) >= Tl && k < k_min) {
        k_min = k;
        j_at = j;
      }
  double z_melt = domain.z(k_min) - 0.5 * domain.dx;
  if (k_min > 0) {
    const double t1 = peak(j_at, k_min), t0 = peak(j_at, k_min - 1);
    z_melt = domain.z(k_min) - domain.dx * (t1 - Tl) / (t1 - t0);
  }
  dims.depth = domain.z_top() - z_melt;
  return dims;
}

ScanResult run_scan(Simulation& sim, const ScanPath& path, double P, double V,
                    const std::function<Vec3()>& param_source, bool use_rhf) {
  if (path.points.empty()) throw std::invalid_argument("empty scan path");
  ScanResult result;
  result.path_warning = path.resolution_warning;

  RhfConfig rhf_cfg;
  if (use_rhf) rhf_cfg = normalize_rhf(path, rhf_cfg);

  const double dt_cap = sim.stable_dt();
  const int stride = std::max(1, sim.config().snapshot_stride);

  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const PathPoint& a = path.points[i - 1];
    const PathPoint& b = path.points[i];
    const double seg_dt = b.t - a.t;
    if (seg_dt <= 0.0) throw std::invalid_argument("path times must increase");

    const Vec3 params = param_source();
    const double rhf_i = use_rhf ? rhf(path, i, rhf_cfg) : 1.0;
    const BeamState beam =
        beam_from_law({params[0], params[1], params[2]}, P, V, rhf_i);

    const int n_sub = std::max(1, static_cast<int>(std::ceil(seg_dt / dt_cap)));
    const double dt = seg_dt / n_sub;
    for (int s = 0; s < n_sub; ++s) {
      const double f = (s + 0.5) / n_sub;
      const double bx = a.x + f * (b.x - a.x);
      const double by = a.y + f * (b.y - a.y);
      sim.step_energy(beam, bx, by, dt, b.laser_on);
      if (sim.config().mode == SolverMode::Fluid) sim.step_fluid(dt);
    }

    if (b.laser_on && (i % stride == 0 || i + 1 == path.points.size())) {
      const auto dims =
          extract_meltpool_dims(sim.state(), sim.domain(), sim.material(), b.x);
      TraceRow row;
      row.t = b.t;
      row.x_beam = b.x;
      row.width = dims.width;
      row.depth = dims.depth;
      row.rhf = rhf_i;
      row.eta = beam.absorptivity;
      row.r_b = beam.radius;
      row.d = beam.depth;
      result.trace.push_back(row);
    }
  }
  return result;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "t,x_beam,W,D,RHF,eta,r_b,d\n";
  for (const auto& r : trace)
    os << r.t << ',' << r.x_beam << ',' << r.width << ',' << r.depth << ','
       << r.rhf << ',' << r.eta << ',' << r.r_b << ',' << r.d << '\n';
  return os.str();
}

void save_field(const std::string& path_base, const std::vector<double>& field,
                const Domain& domain, double time) {
  {
    std::ofstream out(path_base + ".bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(field.data()),
              static_cast<std::streamsize>(field.size() * sizeof(double)));
  }
  nlohmann::json j;
  j["dims"] = {domain.nx, domain.ny, domain.nz};
  j["dx"] = domain.dx;
  j["origin"] = domain.origin;
  j["time"] = time;
  j["byte_order"] = "little-endian";
  j["dtype"] = "float64";
  std::ofstream side(path_base + ".json");
  side << j.dump(2) << '\n';
}

}  // namespace meltpool
