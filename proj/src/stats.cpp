#include "meltpool/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace meltpool {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double quantile_type7(std::vector<double> sorted, double p) {
  const double h = (sorted.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}
}  // namespace

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do { u1 = uniform(); } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double silverman_bandwidth(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("bandwidth needs at least 2 samples");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1));

  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_type7(sorted, 0.75) - quantile_type7(sorted, 0.25);

  double spread = std::min(sd, iqr / 1.35);
  if (spread <= 0.0) {
    const double range = sorted.back() - sorted.front();
    spread = range > 0.0 ? 1e-3 * range : 1e-12;
  }
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeModel KdeModel::fit(std::vector<double> samples) {
  KdeModel m;
  m.bandwidth = silverman_bandwidth(samples);
  m.samples = std::move(samples);
  return m;
}

double KdeModel::pdf(double x) const {
  if (samples.empty() || bandwidth <= 0.0)
    throw std::logic_error("KDE model not fitted");
  double sum = 0.0;
  for (double s : samples) {
    const double u = (x - s) / bandwidth;
    sum += std::exp(-0.5 * u * u);
  }
  return kInvSqrt2Pi * sum / (samples.size() * bandwidth);
}

std::vector<double> KdeModel::pdf_on_grid(const std::vector<double>& grid) const {
  std::vector<double> out(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(grid.size()); ++i)
    out[i] = pdf(grid[i]);
  return out;
}

std::string KdeModel::to_json() const {
  nlohmann::json j;
  j["samples"] = samples;
  j["bandwidth"] = bandwidth;
  return j.dump(2);
}

KdeModel KdeModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  KdeModel m;
  m.samples = j.at("samples").get<std::vector<double>>();
  m.bandwidth = j.at("bandwidth");
  return m;
}

std::vector<double> kld_grid(double lo, double hi, double pad, std::size_t n) {
  if (!(hi >= lo) || n < 2) throw std::invalid_argument("bad KLD grid bounds");
  std::vector<double> g(n);
  const double a = lo - pad, b = hi + pad;
  for (std::size_t i = 0; i < n; ++i)
    g[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  return g;
}

double kld(const std::vector<double>& p, const std::vector<double>& q,
           const std::vector<double>& grid) {
  if (p.size() != grid.size() || q.size() != grid.size())
    throw std::invalid_argument("KLD inputs must share one grid");
  auto integrand = [&](std::size_t i) {
    if (p[i] < 1e-15) return 0.0;
    return p[i] * std::log(p[i] / std::max(q[i], 1e-12));
  };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    sum += 0.5 * (integrand(i) + integrand(i + 1)) * (grid[i + 1] - grid[i]);
  return sum;
}

TriNormal TriNormal::from_moments(const Vec3& mean, const std::array<double, 9>& cov) {
  TriNormal m;
  m.mean = mean;
  // Cholesky of the 3x3 SPD covariance (row-major).
  double L[3][3] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = cov[3 * i + j];
      for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (s <= 0.0) throw std::invalid_argument("covariance not positive definite");
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  m.chol = {L[0][0], L[1][0], L[1][1], L[2][0], L[2][1], L[2][2]};
  return m;
}

std::array<double, 9> TriNormal::covariance() const {
  const double L[3][3] = {{chol[0], 0, 0}, {chol[1], chol[2], 0}, {chol[3], chol[4], chol[5]}};
  std::array<double, 9> cov{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) cov[3 * i + j] += L[i][k] * L[j][k];
  return cov;
}

double TriNormal::log_pdf(const Vec3& x) const {
  const double l00 = chol[0], l10 = chol[1], l11 = chol[2];
  const double l20 = chol[3], l21 = chol[4], l22 = chol[5];
  if (l00 <= 0.0 || l11 <= 0.0 || l22 <= 0.0)
    throw std::invalid_argument("Cholesky diagonal must be positive");
  // Solve L z = x - mu by forward substitution; quadratic form is |z|^2.
  const double d0 = x[0] - mean[0], d1 = x[1] - mean[1], d2 = x[2] - mean[2];
  const double z0 = d0 / l00;
  const double z1 = (d1 - l10 * z0) / l11;
  const double z2 = (d2 - l20 * z0 - l21 * z1) / l22;
  const double quad = z0 * z0 + z1 * z1 + z2 * z2;
  const double log_det_half = std::log(l00) + std::log(l11) + std::log(l22);
  return -1.5 * std::log(2.0 * std::numbers::pi) - log_det_half - 0.5 * quad;
}

double TriNormal::pdf(const Vec3& x) const { return std::exp(log_pdf(x)); }

Vec3 TriNormal::sample(Rng& rng) const {
  for (int tries = 0; tries < 100; ++tries) {
    const double z0 = rng.normal(), z1 = rng.normal(), z2 = rng.normal();
    Vec3 x;
    x[0] = mean[0] + chol[0] * z0;
    x[1] = mean[1] + chol[1] * z0 + chol[2] * z1;
    x[2] = mean[2] + chol[3] * z0 + chol[4] * z1 + chol[5] * z2;
    bool ok = true;
    for (int i = 0; i < 3; ++i)
      if (x[i] < 1e-12 * std::abs(mean[i])) ok = false;
    if (ok) return x;
  }
  throw std::runtime_error("TriNormal sampling degenerate: 100 rejected draws");
}

Chain mh_chain(const std::function<double(const Vec3&)>& log_target,
               const Vec3& init, std::size_t n_steps, Vec3 proposal_scale,
               std::uint64_t seed) {
  double lp = log_target(init);
  if (!std::isfinite(lp))
    throw std::invalid_argument("log target not finite at chain start");

  Rng rng(seed);
  Chain chain;
  chain.seed = seed;
  const std::size_t burn_in = n_steps / 5;
  chain.states.reserve(n_steps - burn_in);

  Vec3 x = init;
  std::size_t accepted_post = 0, window_accepted = 0, window_len = 0;
  for (std::size_t step = 0; step < n_steps; ++step) {
    Vec3 y;
    for (int i = 0; i < 3; ++i) y[i] = x[i] + proposal_scale[i] * rng.normal();
    const double lp_y = log_target(y);
    if (std::isnan(lp_y))
      throw std::runtime_error("log target returned NaN at step " + std::to_string(step));
    bool accept = false;
    if (lp_y >= lp) {
      accept = true;
    } else {
      accept = rng.uniform() < std::exp(lp_y - lp);
    }
    if (accept) { x = y; lp = lp_y; }

    if (step < burn_in) {
      // Adapt toward 0.3 acceptance during burn-in; frozen afterwards.
      window_accepted += accept ? 1 : 0;
      if (++window_len == 100) {
        const double rate = window_accepted / 100.0;
        const double factor = std::exp(0.5 * (rate - 0.3));
        for (int i = 0; i < 3; ++i) proposal_scale[i] *= factor;
        window_accepted = 0;
        window_len = 0;
      }
    } else {
      accepted_post += accept ? 1 : 0;
      chain.states.push_back(x);
    }
  }
  chain.acceptance_rate =
      chain.states.empty() ? 0.0
                           : static_cast<double>(accepted_post) / chain.states.size();
  chain.proposal_scale = proposal_scale;
  return chain;
}

std::string Chain::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "P1,P2,P3\n";
  for (const auto& s : states) os << s[0] << ',' << s[1] << ',' << s[2] << '\n';
  return os.str();
}

double normal_pdf(double x, double mu, double sigma) {
  const double u = (x - mu) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * u * u);
}

}  // namespace meltpool
