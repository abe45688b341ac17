#include "meltpool/heat_source.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace meltpool {

double volumetric_flux(const BeamState& beam, double x_b, double y_b,
                       double depth_below_top) {
  if (depth_below_top > beam.depth || depth_below_top < 0.0) return 0.0;
  const double r2 = beam.radius * beam.radius;
  const double peak = 2.0 * beam.power * beam.absorptivity /
                      (std::numbers::pi * r2 * beam.depth);
  return peak * std::exp(-2.0 * (x_b * x_b + y_b * y_b) / r2);
}

double rhf_raw(const ScanPath& path, std::size_t i, const RhfConfig& cfg) {
  if (i >= path.points.size()) throw std::out_of_range("path index");
  const PathPoint& pi = path.points[i];
  double sum = 0.0;
  // Only points inside the time window can contribute a positive summand;
  // older points admitted by the distance criterion have a clamped time factor.
  for (std::size_t k = i; k-- > 0;) {
    const PathPoint& pk = path.points[k];
    const double t_ik = pi.t - pk.t;
    if (t_ik >= cfg.T_window) break;
    if (!pk.laser_on) continue;
    const double d_ik = std::sqrt((pi.x - pk.x) * (pi.x - pk.x) +
                                  (pi.y - pk.y) * (pi.y - pk.y) +
                                  (pi.z - pk.z) * (pi.z - pk.z));
    const double fd = std::max((cfg.R - d_ik) / cfg.R, 0.0);
    const double ft = std::max((cfg.T_window - t_ik) / cfg.T_window, 0.0);
    sum += fd * fd * ft;
  }
  return sum;
}

double rhf(const ScanPath& path, std::size_t i, const RhfConfig& cfg) {
  if (cfg.rhf_c <= 0.0)
    throw std::logic_error("RHF normalization constant not set; call normalize_rhf first");
  return rhf_raw(path, i, cfg) / cfg.rhf_c;
}

namespace {
// Maximal runs of laser-on points.
std::vector<std::pair<std::size_t, std::size_t>> track_runs(const ScanPath& path) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  const auto& pts = path.points;
  std::size_t i = 0;
  while (i < pts.size()) {
    if (!pts[i].laser_on) { ++i; continue; }
    std::size_t j = i;
    while (j + 1 < pts.size() && pts[j + 1].laser_on) ++j;
    runs.emplace_back(i, j);
    i = j + 1;
  }
  return runs;
}
}  // namespace

RhfConfig normalize_rhf(const ScanPath& path, RhfConfig cfg) {
  auto runs = track_runs(path);
  if (runs.empty()) throw std::invalid_argument("path has no laser-on points");
  const auto [lo, hi] = runs[(runs.size() - 1) / 2];
  const std::size_t mid = (lo + hi) / 2;
  const double raw = rhf_raw(path, mid, cfg);
  cfg.rhf_c = raw > 0.0 ? raw : 1.0;
  return cfg;
}

BeamState beam_from_law(const StochasticBeamLaw& law, double P, double V,
                        double rhf_normalized) {
  if (law.P1 <= 0.0 || law.P2 <= 0.0 || law.P3 <= 0.0)
    throw std::invalid_argument("beam law parameters must be positive");
  if (V <= 0.0) throw std::invalid_argument("scan speed must be positive");
  const double e = P / V;
  const double r2 = rhf_normalized * rhf_normalized;
  BeamState b;
  b.power = P;
  b.speed = V;
  b.depth = law.P1 * e * r2;
  b.absorptivity = std::max(law.P2 * e * r2, kMinAbsorptivity);
  b.radius = law.P3 * e * r2;
  return b;
}

ScanPath generate_path(const PathGeometry& geom, double V, double dt,
                       double expected_beam_radius) {
  if (geom.track_length <= 0 || geom.hatch <= 0 || geom.layer_thickness <= 0 ||
      geom.n_tracks < 1 || geom.n_layers < 1)
    throw std::invalid_argument("path geometry dimensions must be positive");
  if (V <= 0 || dt <= 0) throw std::invalid_argument("V and dt must be positive");

  ScanPath path;
  path.dt = dt;
  path.resolution_warning = V * dt > expected_beam_radius;
  double t = 0.0;
  const int n_steps = std::max(1, static_cast<int>(std::lround(geom.track_length / (V * dt))));
  const int n_dwell = static_cast<int>(std::lround(path.dwell_between_layers / dt));
  const bool multi = geom.n_tracks > 1 || geom.n_layers > 1;

  for (int layer = 0; layer < geom.n_layers; ++layer) {
    const double z = geom.z0 + layer * geom.layer_thickness;
    for (int track = 0; track < geom.n_tracks; ++track) {
      const double y = track * geom.hatch;
      const bool reversed = geom.serpentine && (track % 2 == 1);
      for (int s = 0; s <= n_steps; ++s) {
        const double frac = static_cast<double>(s) / n_steps;
        const double x = (reversed ? 1.0 - frac : frac) * geom.track_length;
        path.points.push_back({t, x, y, z, true});
        t += dt;
      }
    }
    // dwell with the laser off between layers only; serpentine turns are
    // instantaneous
    if (multi && layer + 1 < geom.n_layers) {
      const double x_end = path.points.back().x;
      const double y_end = path.points.back().y;
      for (int s = 0; s < n_dwell; ++s) {
        path.points.push_back({t, x_end, y_end, z, false});
        t += dt;
      }
    }
  }
  return path;
}

std::string ScanPath::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,x,y,z,laser_on\n";
  for (const auto& p : points)
    os << p.t << ',' << p.x << ',' << p.y << ',' << p.z << ','
       << (p.laser_on ? 1 : 0) << '\n';
  return os.str();
}

ScanPath ScanPath::from_csv(const std::string& text) {
  ScanPath path;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    PathPoint p;
    int on = 1;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ls >> p.t >> p.x >> p.y >> p.z >> on;
    p.laser_on = on != 0;
    path.points.push_back(p);
  }
  if (path.points.size() >= 2)
    path.dt = path.points[1].t - path.points[0].t;
  return path;
}

}  // namespace meltpool
