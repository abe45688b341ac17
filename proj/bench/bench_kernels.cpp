// Times the serial vs OpenMP energy-step kernels on a representative grid.
#include <chrono>
#include <cstdio>

#include "meltpool/material.hpp"
#include "meltpool/solver.hpp"

using namespace meltpool;

namespace {

double run(bool use_openmp, int steps) {
  Domain dom = Domain::box(80, 48, 32, 10e-6);
  dom.set_powder_above(28 * 10e-6);
  SolverConfig cfg;
  cfg.use_openmp = use_openmp;
  Simulation sim(dom, MaterialModel::load("IN625"), cfg);

  BeamState beam;
  beam.power = 300.0;
  beam.speed = 1.23;
  beam.absorptivity = 0.4;
  const double dt = sim.stable_dt();

  const auto t0 = std::chrono::steady_clock::now();
  double x = 150e-6;
  for (int s = 0; s < steps; ++s) {
    sim.step_energy(beam, x, 240e-6, dt, true);
    x += beam.speed * dt;
  }
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main() {
  const int warmup = 20, steps = 400;
  run(false, warmup);
  const double serial = run(false, steps);
  run(true, warmup);
  const double omp = run(true, steps);
  std::printf("energy step, %d iterations on 80x48x32:\n", steps);
  std::printf("  serial: %.3f s (%.2f ms/step)\n", serial, 1e3 * serial / steps);
  std::printf("  openmp: %.3f s (%.2f ms/step)\n", omp, 1e3 * omp / steps);
  std::printf("  speedup: %.2fx\n", serial / omp);
  return 0;
}
