#include "meltpool/hopgd.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace meltpool {

SampleGrid design_grid(const std::array<AxisRange, 4>& ranges,
                       const std::array<int, 4>& levels) {
  SampleGrid g;
  for (int a = 0; a < 4; ++a) {
    if (levels[a] < 2) throw std::invalid_argument("need at least 2 nodes per axis");
    if (!(ranges[a].hi > ranges[a].lo))
      throw std::invalid_argument("axis range must have positive extent");
    g.axes[a].resize(levels[a]);
    for (int i = 0; i < levels[a]; ++i)
      g.axes[a][i] = ranges[a].lo +
                     (ranges[a].hi - ranges[a].lo) * i / (levels[a] - 1);
  }
  g.width.assign(g.size(), 0.0);
  g.depth.assign(g.size(), 0.0);
  g.mask.assign(g.size(), 0);
  return g;
}

namespace {

struct GridShape {
  std::array<std::size_t, 4> n;
  std::array<std::size_t, 4> stride;
};

GridShape shape_of(const SampleGrid& g) {
  GridShape s;
  for (int a = 0; a < 4; ++a) s.n[a] = g.axes[a].size();
  s.stride[3] = 1;
  s.stride[2] = s.n[3];
  s.stride[1] = s.n[2] * s.n[3];
  s.stride[0] = s.n[1] * s.n[2] * s.n[3];
  return s;
}

// Decomposes flat index into per-axis indices.
inline std::array<std::size_t, 4> unravel(std::size_t idx, const GridShape& s) {
  std::array<std::size_t, 4> c;
  c[0] = idx / s.stride[0];
  idx -= c[0] * s.stride[0];
  c[1] = idx / s.stride[1];
  idx -= c[1] * s.stride[1];
  c[2] = idx / s.stride[2];
  c[3] = idx - c[2] * s.stride[2];
  return c;
}

double masked_norm(const std::vector<double>& v, const std::vector<std::uint8_t>& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) s += v[i] * v[i];
  return std::sqrt(s);
}

// Least-squares update of the 1D table on `axis` holding the other three
// tables of the mode fixed, fitted against the masked residual tensor.
void update_axis(int axis, const std::vector<double>& resid,
                 const std::vector<std::uint8_t>& mask, const GridShape& s,
                 std::array<std::vector<double>, 4>& tables) {
  std::vector<double> num(s.n[axis], 0.0), den(s.n[axis], 0.0);
  for (std::size_t idx = 0; idx < resid.size(); ++idx) {
    if (!mask[idx]) continue;
    const auto c = unravel(idx, s);
    double other = 1.0;
    for (int a = 0; a < 4; ++a)
      if (a != axis) other *= tables[a][c[a]];
    num[c[axis]] += resid[idx] * other;
    den[c[axis]] += other * other;
  }
  for (std::size_t i = 0; i < s.n[axis]; ++i)
    tables[axis][i] = den[i] > 0.0 ? num[i] / den[i] : 0.0;
}

// Joint least-squares update of all modes' tables along one axis: per node a
// small M x M normal system couples the modes, which lets the sweep escape
// the one-mode-at-a-time stationary points.
void joint_update_axis(int axis, const std::vector<double>& values,
                       const std::vector<std::uint8_t>& mask, const GridShape& s,
                       std::vector<SeparatedModel::Mode>& modes) {
  const std::size_t M = modes.size();
  const std::size_t n = s.n[axis];
  std::vector<double> G(n * M * M, 0.0), b(n * M, 0.0), o(M);
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (!mask[idx]) continue;
    const auto c = unravel(idx, s);
    for (std::size_t m = 0; m < M; ++m) {
      double prod = 1.0;
      for (int a = 0; a < 4; ++a)
        if (a != axis) prod *= modes[m].tables[a][c[a]];
      o[m] = prod;
    }
    const std::size_t i = c[axis];
    for (std::size_t m = 0; m < M; ++m) {
      b[i * M + m] += values[idx] * o[m];
      for (std::size_t q = 0; q < M; ++q) G[(i * M + m) * M + q] += o[m] * o[q];
    }
  }
  std::vector<double> A(M * M), rhs(M);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(G.begin() + i * M * M, G.begin() + (i + 1) * M * M, A.begin());
    std::copy(b.begin() + i * M, b.begin() + (i + 1) * M, rhs.begin());
    // Gaussian elimination with partial pivoting; skip the node if singular.
    bool ok = true;
    for (std::size_t col = 0; col < M && ok; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < M; ++r)
        if (std::abs(A[r * M + col]) > std::abs(A[piv * M + col])) piv = r;
      if (std::abs(A[piv * M + col]) < 1e-300) { ok = false; break; }
      if (piv != col) {
        for (std::size_t cc = 0; cc < M; ++cc) std::swap(A[col * M + cc], A[piv * M + cc]);
        std::swap(rhs[col], rhs[piv]);
      }
      for (std::size_t r = col + 1; r < M; ++r) {
        const double f = A[r * M + col] / A[col * M + col];
        for (std::size_t cc = col; cc < M; ++cc) A[r * M + cc] -= f * A[col * M + cc];
        rhs[r] -= f * rhs[col];
      }
    }
    if (!ok) continue;
    for (std::size_t r = M; r-- > 0;) {
      double v = rhs[r];
      for (std::size_t cc = r + 1; cc < M; ++cc) v -= A[r * M + cc] * rhs[cc];
      rhs[r] = v / A[r * M + r];
    }
    for (std::size_t m = 0; m < M; ++m) modes[m].tables[axis][i] = rhs[m];
  }
}

// Mode value at a grid point.
inline double mode_value(const SeparatedModel::Mode& m,
                         const std::array<std::size_t, 4>& c) {
  return m.tables[0][c[0]] * m.tables[1][c[1]] * m.tables[2][c[2]] * m.tables[3][c[3]];
}

std::vector<double> model_residual(const std::vector<double>& values,
                                   const std::vector<std::uint8_t>& mask,
                                   const GridShape& s,
                                   const std::vector<SeparatedModel::Mode>& modes) {
  std::vector<double> r(values.size(), 0.0);
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (!mask[idx]) continue;
    const auto c = unravel(idx, s);
    double v = values[idx];
    for (const auto& m : modes) v -= mode_value(m, c);
    r[idx] = v;
  }
  return r;
}

// Pull scale into the first table so the others stay O(1).
void rebalance(SeparatedModel::Mode& m) {
  for (int a = 1; a < 4; ++a) {
    double norm = 0.0;
    for (double v : m.tables[a]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (double& v : m.tables[a]) v /= norm;
    for (double& v : m.tables[0]) v *= norm;
  }
}

double mode_norm(const SeparatedModel::Mode& m) {
  double p = 1.0;
  for (int a = 0; a < 4; ++a) {
    double s = 0.0;
    for (double v : m.tables[a]) s += v * v;
    p *= s;
  }
  return std::sqrt(p);
}

}  // namespace

SeparatedModel fit_hopgd(const SampleGrid& grid, const std::vector<double>& values,
                         const FitOptions& opts) {
  if (values.size() != grid.size())
    throw std::invalid_argument("snapshot tensor size mismatch");
  const GridShape s = shape_of(grid);

  SeparatedModel model;
  model.axes = grid.axes;
  const double norm = masked_norm(values, grid.mask);
  if (norm == 0.0) {
    // All-zero data: one zero mode.
    SeparatedModel::Mode m;
    for (int a = 0; a < 4; ++a) m.tables[a].assign(s.n[a], a == 0 ? 0.0 : 1.0);
    model.modes.push_back(m);
    model.fit_residual = 0.0;
    return model;
  }

  std::vector<double> resid = model_residual(values, grid.mask, s, model.modes);
  double rel = masked_norm(resid, grid.mask) / norm;

  while (rel > opts.tol && static_cast<int>(model.modes.size()) < opts.max_modes) {
    SeparatedModel::Mode mode;
    for (int a = 0; a < 4; ++a) mode.tables[a].assign(s.n[a], 1.0);

    double prev = 0.0;
    bool converged = false;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      for (int a = 0; a < 4; ++a) update_axis(a, resid, grid.mask, s, mode.tables);
      rebalance(mode);
      const double cur = mode_norm(mode);
      if (std::abs(cur - prev) <= opts.sweep_tol * std::max(cur, 1.0)) {
        converged = true;
        break;
      }
      prev = cur;
    }
    if (!converged)
      throw std::runtime_error("HOPGD mode fixed point did not converge; residual " +
                               std::to_string(rel));
    model.modes.push_back(mode);

    // Joint refinement of all modes against the full data.
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      for (int a = 0; a < 4; ++a)
        joint_update_axis(a, values, grid.mask, s, model.modes);
      for (auto& m : model.modes) rebalance(m);
      const auto r = model_residual(values, grid.mask, s, model.modes);
      const double next = masked_norm(r, grid.mask) / norm;
      const bool stalled = rel - next < 1e-13 * rel + 1e-18;
      rel = next;
      if (next <= opts.tol || stalled) break;
    }
    resid = model_residual(values, grid.mask, s, model.modes);
    rel = masked_norm(resid, grid.mask) / norm;
  }
  model.fit_residual = rel;
  return model;
}

namespace {
// Linear interpolation on a sorted node table; clamps outside the range.
double interp1(const std::vector<double>& nodes, const std::vector<double>& table,
               double x, bool* extrapolated) {
  if (x <= nodes.front()) {
    if (x < nodes.front() && extrapolated) *extrapolated = true;
    return table.front();
  }
  if (x >= nodes.back()) {
    if (x > nodes.back() && extrapolated) *extrapolated = true;
    return table.back();
  }
  std::size_t hi = 1;
  while (nodes[hi] < x) ++hi;
  const double w = (x - nodes[hi - 1]) / (nodes[hi] - nodes[hi - 1]);
  return table[hi - 1] + w * (table[hi] - table[hi - 1]);
}
}  // namespace

double SeparatedModel::evaluate(double e, double p1, double p2, double p3,
                                bool* extrapolated) const {
  const double q[4] = {e, p1, p2, p3};
  double sum = 0.0;
  for (const auto& m : modes) {
    double prod = 1.0;
    for (int a = 0; a < 4; ++a)
      prod *= interp1(axes[a], m.tables[a], q[a], extrapolated);
    sum += prod;
  }
  return sum;
}

Refinement suggest_refinement(const SampleGrid& grid, const std::vector<double>& values) {
  const GridShape s = shape_of(grid);
  Refinement best;
  double best_err = 0.0;
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (!grid.mask[idx]) continue;
    const auto c = unravel(idx, s);
    for (int a = 0; a < 4; ++a) {
      if (c[a] == 0 || c[a] + 1 >= s.n[a]) continue;
      const std::size_t lo = idx - s.stride[a], hi = idx + s.stride[a];
      if (!grid.mask[lo] || !grid.mask[hi]) continue;
      const double x0 = grid.axes[a][c[a] - 1], x1 = grid.axes[a][c[a]],
                   x2 = grid.axes[a][c[a] + 1];
      const double w = (x1 - x0) / (x2 - x0);
      const double lin = values[lo] + w * (values[hi] - values[lo]);
      const double err = std::abs(values[idx] - lin);
      if (err > best_err) {
        best_err = err;
        best.axis = a;
        // Bisect the wider neighbor interval.
        best.position = (x1 - x0) >= (x2 - x1) ? 0.5 * (x0 + x1) : 0.5 * (x1 + x2);
      }
    }
  }
  return best;
}

std::string SeparatedModel::to_json() const {
  nlohmann::json j;
  for (int a = 0; a < 4; ++a) j["axes"].push_back(axes[a]);
  for (const auto& m : modes) {
    nlohmann::json jm;
    for (int a = 0; a < 4; ++a) jm.push_back(m.tables[a]);
    j["modes"].push_back(jm);
  }
  j["fit_residual"] = fit_residual;
  j["provenance"] = provenance;
  return j.dump(2);
}

SeparatedModel SeparatedModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SeparatedModel m;
  for (int a = 0; a < 4; ++a) m.axes[a] = j.at("axes")[a].get<std::vector<double>>();
  for (const auto& jm : j.at("modes")) {
    Mode mode;
    for (int a = 0; a < 4; ++a) mode.tables[a] = jm[a].get<std::vector<double>>();
    m.modes.push_back(std::move(mode));
  }
  m.fit_residual = j.at("fit_residual");
  m.provenance = j.value("provenance", "");
  return m;
}

}  // namespace meltpool
