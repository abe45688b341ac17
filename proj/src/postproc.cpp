#include "meltpool/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace meltpool {

HeightField top_surface(const ThermalState& state, const Domain& domain,
                        double T_liquidus) {
  if (state.alpha.size() != domain.n_cells())
    throw std::invalid_argument("consolidation field not populated");
  HeightField f;
  f.nx = domain.nx;
  f.ny = domain.ny;
  f.cell = domain.dx;
  f.heights.assign(f.nx * f.ny, 0.0);
  f.mask.assign(f.nx * f.ny, 0);

  bool any = false;
  for (int j = 0; j < domain.ny; ++j) {
    for (int i = 0; i < domain.nx; ++i) {
      bool column_melted = false;
      for (int k = 0; k < domain.nz; ++k)
        if (state.T_peak[domain.idx(i, j, k)] >= T_liquidus) {
          column_melted = true;
          break;
        }
      if (!column_melted) continue;
      for (int k = domain.nz - 1; k >= 0; --k) {
        if (state.alpha[domain.idx(i, j, k)] >= 1.0) {
          f.heights[f.idx(i, j)] = domain.z(k) + 0.5 * domain.dx;
          f.mask[f.idx(i, j)] = 1;
          any = true;
          break;
        }
      }
    }
  }
  if (!any) throw std::runtime_error("no consolidated surface: domain never melted");
  return f;
}

SaResult sa_roughness(const HeightField& field, int n_zones) {
  if (n_zones < 1) throw std::invalid_argument("n_zones must be >= 1");
  SaResult out;
  for (int z = 0; z < n_zones; ++z) {
    const int i0 = z * field.nx / n_zones;
    const int i1 = (z + 1) * field.nx / n_zones;

    // Least-squares plane h = a x + b y + c via 3x3 normal equations.
    // Centered index coordinates keep the normal matrix well conditioned;
    // the residuals (and hence Sa) are unaffected by the reparametrization.
    const double ic = 0.5 * (i0 + i1 - 1), jc = 0.5 * (field.ny - 1);
    double Sxx = 0, Sxy = 0, Sx = 0, Syy = 0, Sy = 0, S1 = 0;
    double Sxh = 0, Syh = 0, Sh = 0;
    int count = 0;
    for (int j = 0; j < field.ny; ++j) {
      for (int i = i0; i < i1; ++i) {
        if (!field.mask[field.idx(i, j)]) continue;
        const double x = i - ic, y = j - jc;
        const double h = field.heights[field.idx(i, j)];
        Sxx += x * x; Sxy += x * y; Sx += x;
        Syy += y * y; Sy += y; S1 += 1.0;
        Sxh += x * h; Syh += y * h; Sh += h;
        ++count;
      }
    }
    if (count < 10) { ++out.zones_skipped; continue; }

    const double A[3][3] = {{Sxx, Sxy, Sx}, {Sxy, Syy, Sy}, {Sx, Sy, S1}};
    const double rhs[3] = {Sxh, Syh, Sh};
    // Cramer's rule; singular matrix = degenerate (collinear) zone.
    auto det3 = [](const double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double det = det3(A);
    const double scale = Sxx + Syy + S1;
    if (std::abs(det) < 1e-12 * scale * scale * scale) {
      ++out.zones_skipped;
      continue;
    }
    double coef[3];
    for (int c = 0; c < 3; ++c) {
      double M[3][3];
      for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) M[r][cc] = A[r][cc];
      for (int r = 0; r < 3; ++r) M[r][c] = rhs[r];
      coef[c] = det3(M) / det;
    }

    double sum_abs = 0.0;
    for (int j = 0; j < field.ny; ++j) {
      for (int i = i0; i < i1; ++i) {
        if (!field.mask[field.idx(i, j)]) continue;
        const double x = i - ic, y = j - jc;
        const double fit = coef[0] * x + coef[1] * y + coef[2];
        sum_abs += std::abs(field.heights[field.idx(i, j)] - fit);
      }
    }
    out.zone_values.push_back(sum_abs / count);
  }

  if (out.zone_values.empty())
    throw std::runtime_error("all roughness zones degenerate");
  const std::size_t n = out.zone_values.size();
  for (double v : out.zone_values) out.mean += v;
  out.mean /= static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : out.zone_values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return out;
}

double lof_porosity(const ThermalState& state, const Domain& domain,
                    const Region& region, double T_liquidus) {
  long total = 0, unmelted = 0;
  for (int k = 0; k < domain.nz; ++k) {
    const double z = domain.z(k);
    if (z < region.lo[2] || z >= region.hi[2]) continue;
    for (int j = 0; j < domain.ny; ++j) {
      const double y = domain.y(j);
      if (y < region.lo[1] || y >= region.hi[1]) continue;
      for (int i = 0; i < domain.nx; ++i) {
        const double x = domain.x(i);
        if (x < region.lo[0] || x >= region.hi[0]) continue;
        ++total;
        if (state.T_peak[domain.idx(i, j, k)] < T_liquidus) ++unmelted;
      }
    }
  }
  if (total == 0) throw std::invalid_argument("empty nominal region");
  return static_cast<double>(unmelted) / static_cast<double>(total);
}

double ved(double P, double V, double beam_diameter, double layer_thickness) {
  if (P <= 0 || V <= 0 || beam_diameter <= 0 || layer_thickness <= 0)
    throw std::invalid_argument("ved requires positive inputs");
  return P / (V * beam_diameter * layer_thickness);
}

double ned(double eta, double P, double V, double hatch, double layer, double rho,
           double cp, double T_l, double T_0) {
  if (eta <= 0 || P <= 0 || V <= 0 || hatch <= 0 || layer <= 0 || rho <= 0 ||
      cp <= 0 || T_l <= T_0)
    throw std::invalid_argument("ned requires positive inputs and T_l > T_0");
  return eta * P / (V * hatch * layer * rho * cp * (T_l - T_0));
}

std::string QualityReport::to_json() const {
  nlohmann::json j;
  j["Sa_mean"] = Sa_mean;
  j["Sa_std"] = Sa_std;
  j["porosity_mean"] = porosity_mean;
  j["porosity_std"] = porosity_std;
  j["sa_zones"] = sa_zones;
  j["porosity_zones"] = porosity_zones;
  j["VED"] = VED;
  j["NED"] = NED;
  return j.dump(2);
}

}  // namespace meltpool
