#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "meltpool/solver.hpp"
#include "meltpool/solver_kernels.hpp"
#include "meltpool/stats.hpp"

using namespace meltpool;

namespace {

Simulation make_sim(SolverConfig cfg, int nx = 16, int ny = 12, int nz = 10,
                    double dx = 10e-6) {
  Domain d = Domain::box(nx, ny, nz, dx);
  return Simulation(std::move(d), MaterialModel::load("IN625"), cfg);
}

// Plants a localized hot spot by rewriting T and the matching enthalpy.
void set_hot_spot(Simulation& sim, double T_hot) {
  const Domain& d = sim.domain();
  auto& st = sim.state();
  const MaterialModel& m = sim.material();
  const int ic = d.nx / 2, jc = d.ny / 2, kc = d.nz - 1;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const double r2 = double(i - ic) * (i - ic) + double(j - jc) * (j - jc) +
                          double(k - kc) * (k - kc);
        if (r2 > 9.0) continue;
        const std::size_t n = d.idx(i, j, k);
        const bool powder = !d.powder_mask.empty() && d.powder_mask[n];
        const auto c = kernels::cell_coeffs(m, powder, st.alpha[n]);
        st.T[n] = T_hot;
        st.H[n] = kernels::enthalpy_from_temperature(m, c, T_hot);
      }
}

}  // namespace

TEST_CASE("laser off conserves total enthalpy") {
  SolverConfig cfg;
  cfg.surface_losses = false;
  Simulation sim = make_sim(cfg);
  set_hot_spot(sim, 2200.0);

  const double dt = sim.stable_dt();
  const BeamState beam{};
  double prev = sim.total_enthalpy();
  for (int s = 0; s < 50; ++s) {
    sim.step_energy(beam, 0.0, 0.0, dt, /*laser_on=*/false);
    const double cur = sim.total_enthalpy();
    CHECK(std::abs(cur - prev) <= 1e-8 * std::abs(prev));
    prev = cur;
  }
}

TEST_CASE("uniform initial field stays in equilibrium") {
  SolverConfig cfg;
  cfg.surface_losses = false;
  Simulation sim = make_sim(cfg);
  const double T0 = sim.state().T[0];
  const double dt = sim.stable_dt();
  for (int s = 0; s < 20; ++s) sim.step_energy(BeamState{}, 0.0, 0.0, dt, false);
  for (double T : sim.state().T) CHECK(std::abs(T - T0) < 1e-9);
}

TEST_CASE("surface losses cool a hot uniform field") {
  SolverConfig cfg;
  cfg.surface_losses = true;
  Simulation sim = make_sim(cfg);
  auto& st = sim.state();
  const MaterialModel& m = sim.material();
  const Domain& d = sim.domain();
  for (std::size_t n = 0; n < d.n_cells(); ++n) {
    const auto c = kernels::cell_coeffs(m, false, st.alpha[n]);
    st.T[n] = 1200.0;
    st.H[n] = kernels::enthalpy_from_temperature(m, c, 1200.0);
  }
  const double H0 = sim.total_enthalpy();
  const double dt = sim.stable_dt();
  for (int s = 0; s < 20; ++s) sim.step_energy(BeamState{}, 0.0, 0.0, dt, false);
  CHECK(sim.total_enthalpy() < H0);
}

TEST_CASE("serial and OpenMP kernels agree bitwise") {
  SolverConfig serial_cfg, omp_cfg;
  serial_cfg.use_openmp = false;
  omp_cfg.use_openmp = true;
  Simulation a = make_sim(serial_cfg), b = make_sim(omp_cfg);

  BeamState beam;
  beam.power = 200.0;
  beam.radius = 50e-6;
  beam.depth = 100e-6;
  const double dt = a.stable_dt();
  const double xc = a.domain().x(a.domain().nx / 2);
  const double yc = a.domain().y(a.domain().ny / 2);
  for (int s = 0; s < 40; ++s) {
    a.step_energy(beam, xc, yc, dt, true);
    b.step_energy(beam, xc, yc, dt, true);
  }
  for (std::size_t n = 0; n < a.domain().n_cells(); ++n) {
    CHECK(a.state().T[n] == b.state().T[n]);
    CHECK(a.state().H[n] == b.state().H[n]);
    CHECK(a.state().fl[n] == b.state().fl[n]);
    CHECK(a.state().alpha[n] == b.state().alpha[n]);
  }
}

TEST_CASE("melt pool dimensions from a synthetic peak field") {
  const double dx = 5e-6;
  Domain d = Domain::box(40, 40, 24, dx);
  MaterialModel m = MaterialModel::load("IN625");
  Simulation sim(d, m, SolverConfig{});
  auto& st = sim.state();

  // Hemispherical envelope: T_peak decays linearly from the center so the
  // T_liquidus contour is a hemisphere of radius R at the top surface.
  const double R_width = 50e-6, R_depth = 50e-6;
  const double xc = d.x(d.nx / 2), yc = d.y(d.ny / 2), zc = d.z_top();

  SUBCASE("hemisphere gives width 100 um and depth 50 um") {
    const double grad = 2.0e7;  // K/m
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const double r = std::sqrt((d.x(i) - xc) * (d.x(i) - xc) +
                                     (d.y(j) - yc) * (d.y(j) - yc) +
                                     (d.z(k) - zc) * (d.z(k) - zc));
          st.T_peak[d.idx(i, j, k)] = m.T_liquidus + grad * (R_width - r);
        }
    const MeltPoolDims dims = extract_meltpool_dims(st, d, m, xc);
    CHECK(dims.melted);
    CHECK(std::abs(dims.width - 2.0 * R_width) <= dx / 2);
    CHECK(std::abs(dims.depth - R_depth) <= dx / 2);
    CHECK(dims.cross_section_x == doctest::Approx(xc).scale(0.0).epsilon(1e-9));
  }

  SUBCASE("never molten field reports not melted") {
    std::fill(st.T_peak.begin(), st.T_peak.end(), m.T_liquidus - 1.0);
    const MeltPoolDims dims = extract_meltpool_dims(st, d, m, xc);
    CHECK_FALSE(dims.melted);
    CHECK(dims.width == 0.0);
    CHECK(dims.depth == 0.0);
  }
}

TEST_CASE("consolidation is monotone and follows melting") {
  SolverConfig cfg;
  Simulation sim = []() {
    Domain d = Domain::box(20, 16, 12, 10e-6);
    d.set_powder_above(d.z_top() - 4 * d.dx);
    return Simulation(std::move(d), MaterialModel::load("IN625"), SolverConfig{});
  }();

  BeamState beam;
  beam.power = 250.0;
  beam.radius = 50e-6;
  beam.depth = 100e-6;
  const double dt = sim.stable_dt();
  const double xc = sim.domain().x(sim.domain().nx / 2);
  const double yc = sim.domain().y(sim.domain().ny / 2);
  std::vector<double> alpha_prev = sim.state().alpha;
  bool consolidated = false;
  for (int s = 0; s < 200; ++s) {
    sim.step_energy(beam, xc, yc, dt, true);
    const auto& alpha = sim.state().alpha;
    for (std::size_t n = 0; n < alpha.size(); ++n) {
      CHECK(alpha[n] >= alpha_prev[n]);
      if (alpha[n] > alpha_prev[n]) consolidated = true;
    }
    alpha_prev = alpha;
  }
  CHECK(consolidated);
  // Every cell that melted must be fully consolidated.
  const auto& st = sim.state();
  for (std::size_t n = 0; n < st.T_peak.size(); ++n)
    if (st.T_peak[n] >= sim.material().T_liquidus) CHECK(st.alpha[n] == 1.0);
}

TEST_CASE("temperature runaway raises an error") {
  SolverConfig cfg;
  cfg.max_temperature_cap = 2000.0;
  Simulation sim = make_sim(cfg);
  BeamState beam;
  beam.power = 5000.0;
  beam.radius = 30e-6;
  beam.depth = 100e-6;
  const double dt = sim.stable_dt();
  const double xc = sim.domain().x(sim.domain().nx / 2);
  const double yc = sim.domain().y(sim.domain().ny / 2);
  CHECK_THROWS_AS(
      [&] {
        for (int s = 0; s < 2000; ++s) sim.step_energy(beam, xc, yc, dt, true);
      }(),
      std::runtime_error);
}

TEST_CASE("scan traces") {
  auto run_once = [](const std::function<Vec3()>& source) {
    Domain d = Domain::box(60, 20, 12, 10e-6);
    d.set_powder_above(d.z_top() - 4 * d.dx);
    SolverConfig cfg;
    cfg.snapshot_stride = 5;
    Simulation sim(std::move(d), MaterialModel::load("IN625"), cfg);
    PathGeometry geom;
    geom.track_length = 3e-4;
    geom.z0 = sim.domain().z_top();
    const double V = 1.0;
    ScanPath path = generate_path(geom, V, 1e-5);
    for (auto& p : path.points) {
      p.x += 1.5e-4;
      p.y += sim.domain().y(sim.domain().ny / 2);
    }
    return run_scan(sim, path, 250.0, V, source);
  };

  const Vec3 mean{4.17e-7, 1.167e-3, 2.08e-7};

  SUBCASE("zero-covariance sampling equals the deterministic run") {
    TriNormal dist;
    dist.mean = mean;
    Rng rng(7);
    const ScanResult det = run_once([&] { return mean; });
    const ScanResult sto = run_once([&] { return dist.sample(rng); });
    REQUIRE(det.trace.size() == sto.trace.size());
    REQUIRE(!det.trace.empty());
    for (std::size_t i = 0; i < det.trace.size(); ++i) {
      CHECK(det.trace[i].width == sto.trace[i].width);
      CHECK(det.trace[i].depth == sto.trace[i].depth);
      CHECK(det.trace[i].eta == sto.trace[i].eta);
    }
  }

  SUBCASE("same seed reproduces the trace bitwise") {
    TriNormal dist = TriNormal::from_moments(
        mean, {4e-16, 0, 0, 0, 4e-9, 0, 0, 0, 1e-16});
    auto stochastic = [&](std::uint64_t seed) {
      Rng rng(seed);
      return run_once([&] { return dist.sample(rng); });
    };
    const ScanResult a = stochastic(42), b = stochastic(42), c = stochastic(43);
    REQUIRE(a.trace.size() == b.trace.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(a.trace[i].width == b.trace[i].width);
      CHECK(a.trace[i].depth == b.trace[i].depth);
      if (i < c.trace.size() &&
          (a.trace[i].eta != c.trace[i].eta || a.trace[i].d != c.trace[i].d))
        differs = true;
    }
    CHECK(differs);
  }
}

TEST_CASE("fluid step") {
  SolverConfig cfg;
  cfg.mode = SolverMode::Fluid;
  cfg.surface_losses = false;

  SUBCASE("fully solid region stays at rest") {
    Simulation sim = make_sim(cfg);
    sim.step_fluid(1e-6);
    for (std::size_t n = 0; n < sim.domain().n_cells(); ++n) {
      CHECK(std::abs(sim.state().u[n]) < 1e-12);
      CHECK(std::abs(sim.state().v[n]) < 1e-12);
      CHECK(std::abs(sim.state().w[n]) < 1e-12);
    }
  }

  SUBCASE("uniform liquid at the reference temperature stays at rest") {
    Simulation sim = make_sim(cfg);
    auto& st = sim.state();
    const double T_ref = sim.material().T_reference;
    std::fill(st.T.begin(), st.T.end(), T_ref);
    std::fill(st.fl.begin(), st.fl.end(), 1.0);
    sim.step_fluid(1e-6);
    for (std::size_t n = 0; n < sim.domain().n_cells(); ++n) {
      CHECK(std::abs(sim.state().u[n]) < 1e-12);
      CHECK(std::abs(sim.state().w[n]) < 1e-12);
    }
  }

  SUBCASE("Marangoni shear drives top-surface flow away from a hot spot") {
    Simulation sim = make_sim(cfg, 20, 20, 8);
    const Domain& d = sim.domain();
    auto& st = sim.state();
    std::fill(st.fl.begin(), st.fl.end(), 1.0);
    const double xc = d.x(d.nx / 2), yc = d.y(d.ny / 2);
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const double r2 = (d.x(i) - xc) * (d.x(i) - xc) +
                            (d.y(j) - yc) * (d.y(j) - yc);
          st.T[d.idx(i, j, k)] = 2000.0 + 500.0 * std::exp(-r2 / (4e-9));
        }
    sim.step_fluid(1e-7);
    const int k_top = d.nz - 1, jc = d.ny / 2;
    // dgamma/dT < 0: surface tension pulls liquid from hot to cold, i.e.
    // outward from the spot. Right of center u > 0, left of center u < 0.
    CHECK(sim.state().u[d.idx(d.nx / 2 + 3, jc, k_top)] > 0.0);
    CHECK(sim.state().u[d.idx(d.nx / 2 - 3, jc, k_top)] < 0.0);
  }

  SUBCASE("unresolved divergence raises an error") {
    cfg.projection_iters = 0;
    cfg.projection_tol = 1e-9;
    Simulation sim = make_sim(cfg);
    const Domain& d = sim.domain();
    auto& st = sim.state();
    std::fill(st.fl.begin(), st.fl.end(), 1.0);
    std::fill(st.T.begin(), st.T.end(), sim.material().T_reference);
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i)
          st.u[d.idx(i, j, k)] = (i < d.nx / 2) ? -1.0 : 1.0;
    CHECK_THROWS_AS(sim.step_fluid(1e-3), std::runtime_error);
  }
}

TEST_CASE("stable time step scaling") {
  SolverConfig cfg;
  Simulation coarse = make_sim(cfg, 8, 8, 8, 20e-6);
  Simulation fine = make_sim(cfg, 8, 8, 8, 10e-6);
  CHECK(coarse.stable_dt() > 0.0);
  CHECK(coarse.stable_dt() == doctest::Approx(4.0 * fine.stable_dt()).scale(0.0).epsilon(1e-12));
}
