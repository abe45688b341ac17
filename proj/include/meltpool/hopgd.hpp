#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace meltpool {

/// Snapshot tensor over the four surrogate axes (e, P1, P2, P3).
struct SampleGrid {
  std::array<std::vector<double>, 4> axes;  // strictly increasing nodes
  std::vector<double> width;   // m, dense tensor in row-major axis order
  std::vector<double> depth;   // m
  std::vector<std::uint8_t> mask;  // 1 = snapshot present

  std::size_t size() const {
    return axes[0].size() * axes[1].size() * axes[2].size() * axes[3].size();
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return ((i * axes[1].size() + j) * axes[2].size() + k) * axes[3].size() + l;
  }
};

struct AxisRange {
  double lo = 0.0, hi = 1.0;
};

/// Full tensor grid with uniform nodes per axis (nodes only; snapshots unset).
SampleGrid design_grid(const std::array<AxisRange, 4>& ranges,
                       const std::array<int, 4>& levels);

/// One-round refinement suggestion: the axis interval with the largest
/// leave-node-out linear-interpolation error, to be bisected by the caller.
struct Refinement {
  int axis = -1;
  double position = 0.0;  // midpoint of the chosen interval
};
Refinement suggest_refinement(const SampleGrid& grid, const std::vector<double>& values);

/// Separated surrogate: sum of products of per-axis 1D mode tables.
struct SeparatedModel {
  struct Mode {
    std::array<std::vector<double>, 4> tables;
  };
  std::array<std::vector<double>, 4> axes;
  std::vector<Mode> modes;
  double fit_residual = 0.0;  // relative L2 over unmasked snapshots
  std::string provenance;     // config hash / seed string

  /// Piecewise-linear evaluation; queries outside the axis range are clamped
  /// and flagged through `extrapolated` when given.
  double evaluate(double e, double p1, double p2, double p3,
                  bool* extrapolated = nullptr) const;

  std::string to_json() const;
  static SeparatedModel from_json(const std::string& text);
};

struct FitOptions {
  double tol = 1e-8;
  int max_modes = 10;
  int max_sweeps = 20000;
  double sweep_tol = 1e-8;
};

/// Greedy mode enrichment with alternating least-squares sweeps; after each
/// enrichment all modes are jointly refined. Residual is non-increasing in
/// the mode count. Throws on non-convergence of a mode's fixed point.
SeparatedModel fit_hopgd(const SampleGrid& grid, const std::vector<double>& values,
                         const FitOptions& opts = {});

}  // namespace meltpool
