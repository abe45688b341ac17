#pragma once

#include <array>
#include <string>
#include <vector>

#include "meltpool/hopgd.hpp"
#include "meltpool/stats.hpp"

namespace meltpool {

/// One single-track experiment: process setting plus measured melt-pool stats.
struct ExperimentCase {
  std::string id;
  double P = 0.0;           // W
  double V = 0.0;           // m/s
  double width_mean = 0.0;  // m
  double width_std = 0.0;   // m
  double depth_mean = 0.0;  // m
  double depth_std = 0.0;   // m
  int n_width = 0;
  int n_depth = 0;

  double energy_density() const { return P / V; }  // J/m
};

/// The 11-case AFRL single-track benchmark set.
std::vector<ExperimentCase> builtin_afrl();

/// Loads cases from CSV with header
/// id,P_W,V_mm_s,width_mean_um,width_std_um,depth_mean_um,depth_std_um,n_width,n_depth
std::vector<ExperimentCase> cases_from_csv(const std::string& text);

/// Calibration unknowns: mean vector and Cholesky factor of the (P1,P2,P3)
/// distribution.
struct HyperParams {
  Vec3 mu{0.0, 0.0, 0.0};
  std::array<double, 6> L{0, 0, 0, 0, 0, 0};  // L00,L10,L11,L20,L21,L22

  TriNormal distribution() const;
  std::string to_json() const;
  static HyperParams from_json(const std::string& text);
};

/// Width and depth surrogates fitted on the same axes.
struct SurrogatePair {
  SeparatedModel width;
  SeparatedModel depth;
};

struct PropagateResult {
  KdeModel f_Ws;
  KdeModel f_Ds;
  double extrapolation_fraction = 0.0;
};

/// Monte-Carlo push-forward of one hyperparameter candidate through the
/// width/depth surrogates at the case energy density, summarized as KDEs.
PropagateResult propagate(const HyperParams& hyper, const SurrogatePair& surrogate,
                          const ExperimentCase& ex, int n_mc, Rng& rng);

/// Total KLD between experimental normals and propagated KDEs, summed over
/// width and depth for all cases.
double objective(const HyperParams& hyper, const SurrogatePair& surrogate,
                 const std::vector<ExperimentCase>& cases, int n_mc,
                 std::uint64_t seed,
                 std::vector<std::array<double, 2>>* per_case = nullptr);

struct CalibrateConfig {
  int n_mc = 1000;
  std::uint64_t seed = 1;
  int max_evals = 2000;
  double simplex_tol = 1e-6;
  int restarts = 3;
};

struct CalibrationResult {
  HyperParams hyper;
  double objective_value = 0.0;
  std::vector<std::array<double, 2>> per_case_kld;  // (width, depth) per case
  int iterations = 0;
  bool converged = false;

  std::string to_json() const;
};

CalibrationResult calibrate(const HyperParams& init, const SurrogatePair& surrogate,
                            const std::vector<ExperimentCase>& cases,
                            const CalibrateConfig& config);

/// Order-of-magnitude starting point for the beam-law coefficients.
HyperParams default_initial_guess();

}  // namespace meltpool
