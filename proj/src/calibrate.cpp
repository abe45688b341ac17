#include "meltpool/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace meltpool {

namespace {

constexpr double kUm = 1e-6;

ExperimentCase make_case(const char* id, double P, double V_mm_s, double wm,
                         double ws, double dm, double ds) {
  ExperimentCase c;
  c.id = id;
  c.P = P;
  c.V = V_mm_s * 1e-3;
  c.width_mean = wm * kUm;
  c.width_std = ws * kUm;
  c.depth_mean = dm * kUm;
  c.depth_std = ds * kUm;
  c.n_width = 50;
  c.n_depth = 4;
  return c;
}

}  // namespace

std::vector<ExperimentCase> builtin_afrl() {
  return {
      make_case("A1", 300, 1230, 111.9, 10.9, 113.3, 13.4),
      make_case("A2", 300, 1230, 111.3, 12.1, 118.2, 19.9),
      make_case("A3", 290, 953, 125.5, 10.0, 140.0, 12.8),
      make_case("A4", 370, 1230, 118.9, 10.4, 142.1, 17.4),
      make_case("A5", 225, 1230, 99.9, 13.3, 85.3, 13.6),
      make_case("A6", 290, 1588, 100.1, 13.8, 89.3, 19.9),
      make_case("A7", 241, 990, 109.4, 10.5, 103.8, 13.2),
      make_case("A8", 349, 1430, 113.4, 11.3, 118.5, 18.2),
      make_case("A9", 300, 1230, 112.2, 11.8, 115.5, 30.6),
      make_case("A10", 349, 1058, 127.3, 9.4, 147.1, 19.4),
      make_case("A11", 241, 1529, 90.8, 13.4, 76.4, 22.1),
  };
}

std::vector<ExperimentCase> cases_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty case CSV");
  std::vector<ExperimentCase> cases;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 9)
      throw std::invalid_argument("case CSV row needs 9 columns: " + line);
    ExperimentCase c = make_case(fields[0].c_str(), std::stod(fields[1]),
                                 std::stod(fields[2]), std::stod(fields[3]),
                                 std::stod(fields[4]), std::stod(fields[5]),
                                 std::stod(fields[6]));
    c.n_width = std::stoi(fields[7]);
    c.n_depth = std::stoi(fields[8]);
    if (c.P <= 0 || c.V <= 0 || c.width_std < 0 || c.depth_std < 0)
      throw std::invalid_argument("invalid case values: " + line);
    cases.push_back(std::move(c));
  }
  return cases;
}

TriNormal HyperParams::distribution() const {
  TriNormal n;
  n.mean = mu;
  n.chol = L;
  return n;
}

std::string HyperParams::to_json() const {
  nlohmann::json j;
  j["mu"] = mu;
  j["L"] = L;
  return j.dump(2);
}

HyperParams HyperParams::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  HyperParams h;
  h.mu = j.at("mu").get<Vec3>();
  h.L = j.at("L").get<std::array<double, 6>>();
  return h;
}

PropagateResult propagate(const HyperParams& hyper, const SurrogatePair& surrogate,
                          const ExperimentCase& ex, int n_mc, Rng& rng) {
  if (n_mc < 1000) throw std::invalid_argument("propagate needs n_mc >= 1000");
  const TriNormal dist = hyper.distribution();
  const double e = ex.energy_density();

  std::vector<double> widths(n_mc), depths(n_mc);
  int flagged = 0;
  for (int s = 0; s < n_mc; ++s) {
    const Vec3 p = dist.sample(rng);
    bool ex_w = false, ex_d = false;
    widths[s] = surrogate.width.evaluate(e, p[0], p[1], p[2], &ex_w);
    depths[s] = surrogate.depth.evaluate(e, p[0], p[1], p[2], &ex_d);
    if (ex_w || ex_d) ++flagged;
  }
  PropagateResult out;
  out.extrapolation_fraction = static_cast<double>(flagged) / n_mc;
  if (out.extrapolation_fraction > 0.01)
    throw std::runtime_error(
        "surrogate range coverage: " +
        std::to_string(100.0 * out.extrapolation_fraction) +
        "% of samples extrapolate for case " + ex.id);
  out.f_Ws = KdeModel::fit(std::move(widths));
  out.f_Ds = KdeModel::fit(std::move(depths));
  return out;
}

namespace {

double case_kld(const KdeModel& sim, double exp_mean, double exp_std) {
  const auto [s_lo, s_hi] =
      std::minmax_element(sim.samples.begin(), sim.samples.end());
  const double lo = std::min(exp_mean - 5.0 * exp_std, *s_lo);
  const double hi = std::max(exp_mean + 5.0 * exp_std, *s_hi);
  const auto grid = kld_grid(lo, hi, 5.0 * sim.bandwidth);
  std::vector<double> p(grid.size()), q = sim.pdf_on_grid(grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    p[i] = normal_pdf(grid[i], exp_mean, exp_std);
  return kld(p, q, grid);
}

}  // namespace

double objective(const HyperParams& hyper, const SurrogatePair& surrogate,
                 const std::vector<ExperimentCase>& cases, int n_mc,
                 std::uint64_t seed,
                 std::vector<std::array<double, 2>>* per_case) {
  if (cases.empty()) throw std::invalid_argument("objective needs cases");
  if (per_case) per_case->clear();
  double total = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    // one private stream per case: common random numbers across candidates
    Rng rng(seed * 0x9e3779b97f4a7c15ull + i + 1);
    const auto prop = propagate(hyper, surrogate, cases[i], n_mc, rng);
    const double kw = case_kld(prop.f_Ws, cases[i].width_mean, cases[i].width_std);
    const double kd = case_kld(prop.f_Ds, cases[i].depth_mean, cases[i].depth_std);
    if (per_case) per_case->push_back({kw, kd});
    total += kw + kd;
  }
  return total;
}

namespace {

// Optimizer parameterization: (mu1, mu2, mu3, log L00, log L11, log L22,
// L10, L20, L21). Keeps Sigma positive definite at every iterate.
using Vec9 = std::array<double, 9>;

Vec9 pack(const HyperParams& h) {
  return {h.mu[0],          h.mu[1],          h.mu[2],
          std::log(h.L[0]), std::log(h.L[2]), std::log(h.L[5]),
          h.L[1],           h.L[3],           h.L[4]};
}

HyperParams unpack(const Vec9& x) {
  HyperParams h;
  h.mu = {x[0], x[1], x[2]};
  h.L = {std::exp(x[3]), x[6], std::exp(x[4]), x[7], x[8], std::exp(x[5])};
  return h;
}

struct NmResult {
  Vec9 x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

NmResult nelder_mead(const std::function<double(const Vec9&)>& f, const Vec9& x0,
                     const Vec9& step, double tol, int max_evals) {
  constexpr int n = 9;
  std::vector<Vec9> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1][i] += step[i];
  int evals = 0;
  for (int i = 0; i <= n; ++i) {
    fs[i] = f(xs[i]);
    ++evals;
  }
  std::array<int, n + 1> order{};

  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Vec9> xs2(n + 1);
    std::vector<double> fs2(n + 1);
    for (int i = 0; i <= n; ++i) {
      xs2[i] = xs[order[i]];
      fs2[i] = fs[order[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  bool converged = false;
  while (evals < max_evals) {
    sort_simplex();
    double size = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int d = 0; d < n; ++d) size = std::max(size, std::abs(xs[i][d] - xs[0][d]));
    if (size < tol) {
      converged = true;
      break;
    }

    Vec9 centroid{};
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < n; ++d) centroid[d] += xs[i][d] / n;

    auto along = [&](double t) {
      Vec9 x;
      for (int d = 0; d < n; ++d) x[d] = centroid[d] + t * (xs[n][d] - centroid[d]);
      return x;
    };

    const Vec9 xr = along(-1.0);
    const double fr = f(xr); ++evals;
    if (fr < fs[0]) {
      const Vec9 xe = along(-2.0);
      const double fe = f(xe); ++evals;
      if (fe < fr) { xs[n] = xe; fs[n] = fe; }
      else { xs[n] = xr; fs[n] = fr; }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const Vec9 xc = along(fr < fs[n] ? -0.5 : 0.5);
      const double fc = f(xc); ++evals;
      if (fc < std::min(fr, fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {  // shrink toward best
        for (int i = 1; i <= n; ++i) {
          for (int d = 0; d < n; ++d) xs[i][d] = xs[0][d] + 0.5 * (xs[i][d] - xs[0][d]);
          fs[i] = f(xs[i]);
          ++evals;
        }
      }
    }
  }
  sort_simplex();
  return {xs[0], fs[0], evals, converged};
}

}  // namespace

HyperParams default_initial_guess() {
  // d ~ 100 um and r_b ~ 50 um at mid-range e ~ 240 J/m; eta at the floor.
  HyperParams h;
  h.mu = {4.17e-7, 1.167e-3, 2.08e-7};
  h.L = {0.05 * h.mu[0], 0.0, 0.05 * h.mu[1], 0.0, 0.0, 0.05 * h.mu[2]};
  return h;
}

CalibrationResult calibrate(const HyperParams& init, const SurrogatePair& surrogate,
                            const std::vector<ExperimentCase>& cases,
                            const CalibrateConfig& config) {
  const auto eval = [&](const Vec9& x) {
    try {
      return objective(unpack(x), surrogate, cases, config.n_mc, config.seed);
    } catch (const std::runtime_error&) {
      return 1e30;  // range-coverage violation: reject the candidate
    }
  };

  const Vec9 x0 = pack(init);
  const double f0 = objective(init, surrogate, cases, config.n_mc, config.seed);
  if (!std::isfinite(f0))
    throw std::invalid_argument("objective not finite at initial guess");

  NmResult best{x0, f0, 0, false};
  bool improved = false;
  Rng restart_rng(config.seed ^ 0xc2b2ae3d27d4eb4full);
  const int restarts = std::max(1, config.restarts);
  for (int r = 0; r < restarts; ++r) {
    Vec9 start = x0;
    if (r > 0) {
      // Perturb in natural units: means multiplicatively, log-diagonals and
      // off-diagonals additively on their own scales.
      for (int d = 0; d < 3; ++d) start[d] *= 1.0 + 0.1 * restart_rng.normal();
      for (int d = 3; d < 6; ++d) start[d] += 0.1 * restart_rng.normal();
      const double off_scale[3] = {std::exp(0.5 * (start[3] + start[4])),
                                   std::exp(0.5 * (start[3] + start[5])),
                                   std::exp(0.5 * (start[4] + start[5]))};
      for (int d = 6; d < 9; ++d)
        start[d] += 0.1 * off_scale[d - 6] * restart_rng.normal();
    }
    // Initial simplex steps, also in natural units. A relative step on the
    // log coordinates would jump several octaves in L and land outside the
    // surrogate range.
    Vec9 step;
    for (int d = 0; d < 3; ++d) step[d] = 0.1 * std::abs(start[d]);
    for (int d = 3; d < 6; ++d) step[d] = 0.25;
    step[6] = 0.25 * std::exp(0.5 * (start[3] + start[4]));
    step[7] = 0.25 * std::exp(0.5 * (start[3] + start[5]));
    step[8] = 0.25 * std::exp(0.5 * (start[4] + start[5]));
    const auto res = nelder_mead(eval, start, step, config.simplex_tol,
                                 config.max_evals / restarts);
    best.evals += res.evals;
    if (res.f < best.f - 1e-12) improved = true;
    if (res.f <= best.f) {
      best.x = res.x;
      best.f = res.f;
      best.converged = res.converged;
    }
  }
  (void)improved;

  CalibrationResult out;
  out.hyper = unpack(best.x);
  out.iterations = best.evals;
  out.converged = best.converged;
  out.objective_value =
      objective(out.hyper, surrogate, cases, config.n_mc, config.seed,
                &out.per_case_kld);
  return out;
}

std::string CalibrationResult::to_json() const {
  nlohmann::json j;
  j["hyper"] = nlohmann::json::parse(hyper.to_json());
  j["objective_value"] = objective_value;
  j["per_case_kld"] = per_case_kld;
  j["iterations"] = iterations;
  j["converged"] = converged;
  return j.dump(2);
}

}  // namespace meltpool
