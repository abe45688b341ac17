#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace meltpool {

using Vec3 = std::array<double, 3>;

/// Deterministic RNG. Normal variates are produced by an explicit
/// Box-Muller transform so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() {
    // 53-bit uniform in [0,1)
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Silverman's rule-of-thumb bandwidth with type-7 quantiles.
/// Falls back to 1e-3*(max-min) (or 1e-12 for all-equal samples) when the
/// spread estimate is zero.
double silverman_bandwidth(const std::vector<double>& samples);

/// Gaussian-kernel KDE of a 1D sample set.
struct KdeModel {
  std::vector<double> samples;
  double bandwidth = 0.0;

  static KdeModel fit(std::vector<double> samples);  // Silverman bandwidth
  double pdf(double x) const;
  /// Evaluates pdf on every grid node. Exact sum per node.
  std::vector<double> pdf_on_grid(const std::vector<double>& grid) const;

  std::string to_json() const;
  static KdeModel from_json(const std::string& text);
};

/// Uniform evaluation grid padded by 5 bandwidths around the union support.
std::vector<double> kld_grid(double lo, double hi, double pad, std::size_t n = 2001);

/// Trapezoid KLD(p||q) on a common grid. q is clamped below at 1e-12 and
/// nodes with p < 1e-15 are dropped.
double kld(const std::vector<double>& p, const std::vector<double>& q,
           const std::vector<double>& grid);

/// Trivariate normal stored via the Cholesky factor of its covariance.
struct TriNormal {
  Vec3 mean{};
  // Lower-triangular L with Sigma = L L^T; row-major storage of the 6
  // nonzero entries: L00, L10, L11, L20, L21, L22.
  std::array<double, 6> chol{};

  static TriNormal from_moments(const Vec3& mean, const std::array<double, 9>& cov);
  std::array<double, 9> covariance() const;

  double pdf(const Vec3& x) const;
  double log_pdf(const Vec3& x) const;
  /// mu + L z, components kept above 1e-12 of their mean by resampling
  /// (at most 100 tries).
  Vec3 sample(Rng& rng) const;
};

/// Metropolis-Hastings chain over R^3.
struct Chain {
  std::vector<Vec3> states;   // post burn-in
  double acceptance_rate = 0.0;
  Vec3 proposal_scale{};
  std::uint64_t seed = 0;

  std::string to_csv() const;
};

/// Random-walk Metropolis with per-axis Gaussian proposals. The first 20%
/// of steps are burn-in: discarded, with multiplicative scale adaptation
/// toward 0.3 acceptance; the scale is frozen afterwards.
Chain mh_chain(const std::function<double(const Vec3&)>& log_target,
               const Vec3& init, std::size_t n_steps, Vec3 proposal_scale,
               std::uint64_t seed);

double normal_pdf(double x, double mu, double sigma);

}  // namespace meltpool
