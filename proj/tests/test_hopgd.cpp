#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "meltpool/hopgd.hpp"

using namespace meltpool;

namespace {

using Fn4 = std::function<double(double, double, double, double)>;

SampleGrid filled_grid(const std::array<AxisRange, 4>& ranges,
                       const std::array<int, 4>& levels, const Fn4& f) {
  SampleGrid g = design_grid(ranges, levels);
  g.width.assign(g.size(), 0.0);
  g.mask.assign(g.size(), 1);
  for (std::size_t i = 0; i < g.axes[0].size(); ++i)
    for (std::size_t j = 0; j < g.axes[1].size(); ++j)
      for (std::size_t k = 0; k < g.axes[2].size(); ++k)
        for (std::size_t l = 0; l < g.axes[3].size(); ++l)
          g.width[g.index(i, j, k, l)] =
              f(g.axes[0][i], g.axes[1][j], g.axes[2][k], g.axes[3][l]);
  return g;
}

const std::array<AxisRange, 4> kRanges{AxisRange{1.0, 3.0}, AxisRange{0.5, 2.0},
                                       AxisRange{0.1, 1.1}, AxisRange{2.0, 4.0}};

}  // namespace

TEST_CASE("design_grid") {
  const SampleGrid g = design_grid(kRanges, {5, 5, 5, 5});
  CHECK(g.size() == 625);
  for (int a = 0; a < 4; ++a) {
    CHECK(g.axes[a].front() == doctest::Approx(kRanges[a].lo).scale(0.0));
    CHECK(g.axes[a].back() == doctest::Approx(kRanges[a].hi).scale(0.0));
    for (std::size_t i = 1; i < g.axes[a].size(); ++i)
      CHECK(g.axes[a][i] > g.axes[a][i - 1]);
  }
  CHECK_THROWS_AS(design_grid(kRanges, {5, 1, 5, 5}), std::invalid_argument);
}

TEST_CASE("rank-1 function recovered with one mode") {
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5},
                                [](double e, double a, double b, double c) {
                                  return e * a * b * c;
                                });
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  CHECK(m.modes.size() == 1);
  CHECK(m.fit_residual < 1e-8);
  // node reproduction
  const double v = m.evaluate(grid.axes[0][2], grid.axes[1][3], grid.axes[2][1],
                              grid.axes[3][4]);
  CHECK(v == doctest::Approx(grid.width[grid.index(2, 3, 1, 4)]).scale(0.0).epsilon(1e-8));
}

TEST_CASE("rank-2 synthetic fits with two modes") {
  const auto f = [](double e, double a, double, double c) {
    return std::sin(e) * a + e * e * c;
  };
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5}, f);
  FitOptions opt;
  opt.tol = 1e-6;
  const SeparatedModel m = fit_hopgd(grid, grid.width, opt);
  CHECK(m.modes.size() <= 2);
  CHECK(m.fit_residual < 1e-6);
}

TEST_CASE("constant snapshots give a single constant mode") {
  const auto grid =
      filled_grid(kRanges, {5, 5, 5, 5}, [](double, double, double, double) {
        return 3.7;
      });
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  CHECK(m.modes.size() == 1);
  CHECK(m.evaluate(1.5, 1.0, 0.5, 3.0) == doctest::Approx(3.7).scale(0.0).epsilon(1e-10));
}

TEST_CASE("midpoint query exact on multilinear data") {
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5},
                                [](double e, double a, double b, double c) {
                                  return (2 * e + 1) * (a + 3) * (b + 1) * c;
                                });
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  const double e = 0.5 * (grid.axes[0][1] + grid.axes[0][2]);
  // linear in e between nodes with other axes at nodes
  const double expect = (2 * e + 1) * (grid.axes[1][2] + 3) *
                        (grid.axes[2][2] + 1) * grid.axes[3][2];
  CHECK(m.evaluate(e, grid.axes[1][2], grid.axes[2][2], grid.axes[3][2]) ==
        doctest::Approx(expect).scale(0.0).epsilon(1e-7));
}

TEST_CASE("held-out node error below 1% on the rank-2 synthetic") {
  const auto f = [](double e, double a, double, double c) {
    return 5.0 + std::sin(e) * a + e * e * c;
  };
  SampleGrid grid = filled_grid(kRanges, {5, 5, 5, 5}, f);
  const std::size_t hold = grid.index(2, 2, 2, 2);
  const double truth = grid.width[hold];
  grid.mask[hold] = 0;
  grid.width[hold] = 0.0;
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  const double v = m.evaluate(grid.axes[0][2], grid.axes[1][2], grid.axes[2][2],
                              grid.axes[3][2]);
  CHECK(std::abs(v - truth) / std::abs(truth) < 0.01);
}

TEST_CASE("residual non-increasing in mode count") {
  const auto f = [](double e, double a, double b, double c) {
    return std::sin(e) * a + std::cos(b) * c + e * b;
  };
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5}, f);
  double prev = 1e300;
  for (int mm = 1; mm <= 4; ++mm) {
    FitOptions opt;
    opt.max_modes = mm;
    opt.tol = 0.0;  // force exactly mm modes
    const SeparatedModel m = fit_hopgd(grid, grid.width, opt);
    CHECK(m.fit_residual <= prev + 1e-12);
    prev = m.fit_residual;
  }
}

TEST_CASE("extrapolation flag and clamping") {
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5},
                                [](double e, double a, double b, double c) {
                                  return e + a + b + c;
                                });
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  bool flag = false;
  const double inside = m.evaluate(2.0, 1.0, 0.5, 3.0, &flag);
  CHECK(!flag);
  CHECK(inside == doctest::Approx(6.5).scale(0.0).epsilon(1e-8));
  const double clamped = m.evaluate(99.0, 1.0, 0.5, 3.0, &flag);
  CHECK(flag);
  CHECK(clamped == doctest::Approx(m.evaluate(3.0, 1.0, 0.5, 3.0)).scale(0.0).epsilon(1e-12));
}

TEST_CASE("refinement targets the anisotropic axis") {
  // varies strongly (nonlinearly) only along axis 1
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5},
                                [](double, double a, double, double) {
                                  return std::exp(3.0 * a);
                                });
  const Refinement r = suggest_refinement(grid, grid.width);
  CHECK(r.axis == 1);
  CHECK(r.position > kRanges[1].lo);
  CHECK(r.position < kRanges[1].hi);
}

TEST_CASE("JSON round-trip") {
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5},
                                [](double e, double a, double b, double c) {
                                  return e * a + b * c;
                                });
  SeparatedModel m = fit_hopgd(grid, grid.width);
  m.provenance = "test";
  const SeparatedModel r = SeparatedModel::from_json(m.to_json());
  CHECK(r.modes.size() == m.modes.size());
  CHECK(r.fit_residual == m.fit_residual);
  CHECK(r.provenance == "test");
  CHECK(r.evaluate(2.0, 1.0, 0.5, 3.0) ==
        doctest::Approx(m.evaluate(2.0, 1.0, 0.5, 3.0)).scale(0.0).epsilon(1e-14));
}

TEST_CASE("5^4 fit completes quickly") {
  const auto f = [](double e, double a, double b, double c) {
    return std::sin(e) * a + std::cos(b) * c + e * b * c;
  };
  const auto grid = filled_grid(kRanges, {5, 5, 5, 5}, f);
  const auto t0 = std::chrono::steady_clock::now();
  const SeparatedModel m = fit_hopgd(grid, grid.width);
  const auto dt = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - t0).count();
  CHECK(m.fit_residual < 1e-4);
  CHECK(dt < 10.0);
}
