#include "meltpool/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "meltpool/stats.hpp"

namespace meltpool {

std::vector<double> MinMax::normalize(const std::vector<double>& x) const {
  if (x.size() != lo.size()) throw std::invalid_argument("normalize: bad length");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double span = hi[i] - lo[i];
    out[i] = span > 0.0 ? (x[i] - lo[i]) / span : 0.0;
  }
  return out;
}

std::vector<double> MinMax::denormalize(const std::vector<double>& x) const {
  if (x.size() != lo.size()) throw std::invalid_argument("denormalize: bad length");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = lo[i] + x[i] * (hi[i] - lo[i]);
  return out;
}

WindowedDataset build_dataset(const std::vector<std::vector<ControlSample>>& traces,
                              int k) {
  if (k < 1) throw std::invalid_argument("window must be >= 1");
  WindowedDataset ds;
  ds.k = k;
  const int dim_in = 2 * k + 2;

  std::vector<std::vector<double>> raw_in, raw_tg;
  for (const auto& trace : traces) {
    if (static_cast<int>(trace.size()) < k + 1) {
      ++ds.traces_skipped;
      continue;
    }
    for (std::size_t i = 0; i < trace.size(); ++i) {
      std::vector<double> row;
      row.reserve(dim_in);
      // k past observations, most recent first; the pre-history is padded by
      // repeating the initial observation.
      for (int p = 1; p <= k; ++p) {
        const std::size_t j = i >= static_cast<std::size_t>(p) ? i - p : 0;
        row.push_back(trace[j].W);
        row.push_back(trace[j].D);
      }
      // expected dims = realized outcome of the command being learned
      row.push_back(trace[i].W);
      row.push_back(trace[i].D);
      raw_in.push_back(std::move(row));
      raw_tg.push_back({trace[i].ned, trace[i].r_b, trace[i].d});
    }
  }
  if (raw_in.empty()) throw std::invalid_argument("no usable traces");

  const std::size_t n = raw_in.size();
  ds.n_train = static_cast<std::size_t>(0.7 * n);
  ds.n_val = static_cast<std::size_t>(0.2 * n);
  if (ds.n_train == 0) ds.n_train = n;
  ds.n_test = n - ds.n_train - ds.n_val;

  auto fit_norm = [&](const std::vector<std::vector<double>>& rows,
                      std::size_t dim) {
    MinMax m;
    m.lo.assign(dim, 1e300);
    m.hi.assign(dim, -1e300);
    for (std::size_t r = 0; r < ds.n_train; ++r)
      for (std::size_t c = 0; c < dim; ++c) {
        m.lo[c] = std::min(m.lo[c], rows[r][c]);
        m.hi[c] = std::max(m.hi[c], rows[r][c]);
      }
    return m;
  };
  ds.input_norm = fit_norm(raw_in, dim_in);
  ds.target_norm = fit_norm(raw_tg, 3);

  ds.inputs.reserve(n);
  ds.targets.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    ds.inputs.push_back(ds.input_norm.normalize(raw_in[r]));
    ds.targets.push_back(ds.target_norm.normalize(raw_tg[r]));
  }
  return ds;
}

MlpSpec MlpSpec::init(int n_in, int n_out, const std::vector<int>& hidden,
                      std::uint64_t seed) {
  MlpSpec s;
  s.n_in = n_in;
  s.n_out = n_out;
  s.hidden = hidden;
  Rng rng(seed);
  std::vector<int> dims{n_in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_out);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double scale = std::sqrt(2.0 / fan_in);  // He init for rectifiers
    std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
    for (auto& v : w) v = scale * rng.normal();
    s.weights.push_back(std::move(w));
    s.biases.emplace_back(fan_out, 0.0);
  }
  return s;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Forward pass keeping pre-activations unneeded: activations suffice for
// ReLU/sigmoid backprop.
std::vector<std::vector<double>> forward_acts(const MlpSpec& s,
                                              const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != s.n_in)
    throw std::invalid_argument("forward: input dimension mismatch");
  std::vector<std::vector<double>> acts{input};
  for (std::size_t l = 0; l < s.weights.size(); ++l) {
    const auto& prev = acts.back();
    const std::size_t n_out = s.biases[l].size();
    std::vector<double> a(n_out);
    const bool last = l + 1 == s.weights.size();
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = s.biases[l][o];
      const double* wr = s.weights[l].data() + o * prev.size();
      for (std::size_t i = 0; i < prev.size(); ++i) z += wr[i] * prev[i];
      a[o] = last ? sigmoid(z) : std::max(0.0, z);
    }
    acts.push_back(std::move(a));
  }
  return acts;
}

}  // namespace

std::vector<double> MlpSpec::forward(const std::vector<double>& input) const {
  return forward_acts(*this, input).back();
}

double backprop(const MlpSpec& spec, const std::vector<double>& input,
                const std::vector<double>& target,
                std::vector<std::vector<double>>& grad_w,
                std::vector<std::vector<double>>& grad_b) {
  const auto acts = forward_acts(spec, input);
  const auto& out = acts.back();
  if (target.size() != out.size())
    throw std::invalid_argument("backprop: target dimension mismatch");

  double loss = 0.0;
  std::vector<double> delta(out.size());
  for (std::size_t o = 0; o < out.size(); ++o) {
    const double err = out[o] - target[o];
    loss += 0.5 * err * err;
    delta[o] = err * out[o] * (1.0 - out[o]);  // sigmoid derivative
  }

  for (int l = static_cast<int>(spec.weights.size()) - 1; l >= 0; --l) {
    const auto& prev = acts[l];
    auto& gw = grad_w[l];
    auto& gb = grad_b[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      gb[o] += delta[o];
      double* gr = gw.data() + o * prev.size();
      for (std::size_t i = 0; i < prev.size(); ++i) gr[i] += delta[o] * prev[i];
    }
    if (l == 0) break;
    std::vector<double> delta_prev(prev.size(), 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const double* wr = spec.weights[l].data() + o * prev.size();
      for (std::size_t i = 0; i < prev.size(); ++i)
        delta_prev[i] += wr[i] * delta[o];
    }
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (prev[i] <= 0.0) delta_prev[i] = 0.0;  // rectifier gate
    delta.swap(delta_prev);
  }
  return loss;
}

namespace {

double split_loss(const MlpSpec& s, const WindowedDataset& d, std::size_t begin,
                  std::size_t count) {
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t r = begin; r < begin + count; ++r) {
    const auto out = s.forward(d.inputs[r]);
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double e = out[o] - d.targets[r][o];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TrainResult train(const WindowedDataset& data, MlpSpec spec,
                  const TrainConfig& config) {
  if (data.n_train == 0) throw std::invalid_argument("empty train split");
  if (config.learning_rate <= 0 || config.epochs <= 0 || config.batch <= 0)
    throw std::invalid_argument("train config values must be positive");

  auto zeros_like = [&](const std::vector<std::vector<double>>& v) {
    std::vector<std::vector<double>> z;
    for (const auto& x : v) z.emplace_back(x.size(), 0.0);
    return z;
  };
  auto gw = zeros_like(spec.weights), gb = zeros_like(spec.biases);
  auto mw = zeros_like(spec.weights), mb = zeros_like(spec.biases);
  auto vw = zeros_like(spec.weights), vb = zeros_like(spec.biases);

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;

  TrainResult result;
  result.model = spec;
  double best_val = 1e300;

  std::vector<std::size_t> order(data.n_train);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed + 1);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our deterministic stream
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * i);
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < data.n_train;
         start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end =
          std::min(data.n_train, start + static_cast<std::size_t>(config.batch));
      for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
      for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t r = start; r < end; ++r)
        backprop(spec, data.inputs[order[r]], data.targets[order[r]], gw, gb);

      ++t;
      const double corr =
          std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
      auto adam = [&](std::vector<std::vector<double>>& w,
                      std::vector<std::vector<double>>& g,
                      std::vector<std::vector<double>>& m,
                      std::vector<std::vector<double>>& v) {
        for (std::size_t l = 0; l < w.size(); ++l)
          for (std::size_t i = 0; i < w[l].size(); ++i) {
            m[l][i] = b1 * m[l][i] + (1 - b1) * g[l][i];
            v[l][i] = b2 * v[l][i] + (1 - b2) * g[l][i] * g[l][i];
            w[l][i] -= config.learning_rate * corr * m[l][i] /
                       (std::sqrt(v[l][i]) + eps);
          }
      };
      adam(spec.weights, gw, mw, vw);
      adam(spec.biases, gb, mb, vb);
    }

    const double tr = split_loss(spec, data, 0, data.n_train);
    const double va = data.n_val > 0 ? split_loss(spec, data, data.n_train, data.n_val)
                                     : tr;
    if (!std::isfinite(tr) || !std::isfinite(va))
      throw std::runtime_error("training loss not finite at epoch " +
                               std::to_string(epoch));
    result.train_loss.push_back(tr);
    result.val_loss.push_back(va);
    if (va < best_val) {
      best_val = va;
      result.model = spec;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::string TrainResult::loss_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train,val\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e)
    os << e << ',' << train_loss[e] << ',' << val_loss[e] << '\n';
  return os.str();
}

EvalResult evaluate(const MlpSpec& model, const WindowedDataset& data) {
  EvalResult out;
  const std::size_t begin = data.n_train + data.n_val;
  for (std::size_t r = begin; r < begin + data.n_test; ++r) {
    const auto pred = data.target_norm.denormalize(model.forward(data.inputs[r]));
    const auto truth = data.target_norm.denormalize(data.targets[r]);
    double num = 0.0, den = 0.0;
    bool zero = false;
    for (std::size_t o = 0; o < pred.size(); ++o) {
      if (truth[o] == 0.0) zero = true;
      num += (pred[o] - truth[o]) * (pred[o] - truth[o]);
      den += truth[o] * truth[o];
    }
    if (zero || den == 0.0) {
      ++out.excluded;
      continue;
    }
    out.rel_errors.push_back(std::sqrt(num) / std::sqrt(den));
  }
  if (!out.rel_errors.empty()) {
    for (double e : out.rel_errors) {
      out.mean += e;
      out.max = std::max(out.max, e);
    }
    out.mean /= static_cast<double>(out.rel_errors.size());
  }
  return out;
}

ClosedLoopResult closed_loop(const MlpSpec& model, const WindowedDataset& meta,
                             const Plant& plant,
                             const std::vector<std::array<double, 2>>& targets,
                             const ProcessConstants& pc) {
  if (targets.empty()) throw std::invalid_argument("empty target profile");
  const int k = meta.k;
  ClosedLoopResult result;

  std::vector<std::array<double, 2>> history;  // realized (W, D)
  for (std::size_t step = 0; step < targets.size(); ++step) {
    std::vector<double> raw(2 * k + 2);
    for (int p = 1; p <= k; ++p) {
      std::array<double, 2> obs;
      if (history.empty())
        obs = targets.front();  // cold start: no realized data yet
      else if (history.size() >= static_cast<std::size_t>(p))
        obs = history[history.size() - p];
      else
        obs = history.front();
      raw[2 * (p - 1)] = obs[0];
      raw[2 * (p - 1) + 1] = obs[1];
    }
    raw[2 * k] = targets[step][0];
    raw[2 * k + 1] = targets[step][1];

    const auto cmd =
        meta.target_norm.denormalize(model.forward(meta.input_norm.normalize(raw)));
    const double ned = cmd[0], r_b = cmd[1], d = cmd[2];
    const double eta_P =
        ned * pc.V * pc.hatch * pc.layer * pc.rho * pc.cp * (pc.T_l - pc.T_0);

    std::array<double, 2> realized;
    try {
      realized = plant(eta_P, r_b, d);
    } catch (const std::exception& e) {
      throw std::runtime_error("plant diverged at step " + std::to_string(step) +
                               ": " + e.what());
    }
    history.push_back(realized);

    ClosedLoopStep s;
    s.target_W = targets[step][0];
    s.target_D = targets[step][1];
    s.W = realized[0];
    s.D = realized[1];
    s.ned = ned;
    s.r_b = r_b;
    s.d = d;
    const double ar_target = s.target_W / s.target_D;
    const double ar = s.W / s.D;
    s.aspect_discrepancy = std::abs(ar - ar_target) / ar_target;
    result.max_aspect_discrepancy =
        std::max(result.max_aspect_discrepancy, s.aspect_discrepancy);
    result.steps.push_back(s);
  }
  return result;
}

std::string ClosedLoopResult::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,target_W,target_D,W,D,NED,r_b,d,aspect_discrepancy\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    os << i << ',' << s.target_W << ',' << s.target_D << ',' << s.W << ','
       << s.D << ',' << s.ned << ',' << s.r_b << ',' << s.d << ','
       << s.aspect_discrepancy << '\n';
  }
  return os.str();
}

std::array<double, 2> LagPlant::steady(double eta_P, double r_b, double d) const {
  if (eta_P <= 0 || r_b <= 0 || d <= 0)
    throw std::invalid_argument("plant commands must be positive");
  // eta_P = V * A * rho * h_melt; half-elliptic cross-section with
  // semi-axes W/2 (surface) and D (depth), aspect W/(2D) = r_b/d.
  const double area = eta_P / (pc.V * pc.rho * melt_enthalpy);
  const double D_ss = std::sqrt(2.0 * area * d / (3.14159265358979323846 * r_b));
  const double W_ss = 2.0 * r_b * D_ss / d;
  return {W_ss, D_ss};
}

std::array<double, 2> LagPlant::step(double eta_P, double r_b, double d) {
  const auto ss = steady(eta_P, r_b, d);
  if (W == 0.0 && D == 0.0) {
    W = ss[0];
    D = ss[1];
  } else {
    W += lag * (ss[0] - W);
    D += lag * (ss[1] - D);
  }
  if (!std::isfinite(W) || !std::isfinite(D))
    throw std::runtime_error("plant state not finite");
  return {W, D};
}

std::vector<std::vector<ControlSample>> demo_traces(const LagPlant& plant_proto,
                                                    const CommandRanges& ranges,
                                                    int n_traces, int trace_len,
                                                    std::uint64_t seed) {
  std::vector<std::vector<ControlSample>> traces;
  Rng rng(seed);
  const double denom =
      plant_proto.pc.V * plant_proto.pc.hatch * plant_proto.pc.layer *
      plant_proto.pc.rho * plant_proto.pc.cp * (plant_proto.pc.T_l - plant_proto.pc.T_0);

  auto walk = [&](const std::array<double, 2>& r, double& x) {
    x += 0.08 * (r[1] - r[0]) * rng.normal();
    x = std::clamp(x, r[0], r[1]);
  };

  for (int tr = 0; tr < n_traces; ++tr) {
    LagPlant plant = plant_proto;
    double ned = ranges.ned[0] + (ranges.ned[1] - ranges.ned[0]) * rng.uniform();
    double r_b = ranges.r_b[0] + (ranges.r_b[1] - ranges.r_b[0]) * rng.uniform();
    double d = ranges.d[0] + (ranges.d[1] - ranges.d[0]) * rng.uniform();
    std::vector<ControlSample> trace;
    trace.reserve(trace_len);
    for (int s = 0; s < trace_len; ++s) {
      walk(ranges.ned, ned);
      walk(ranges.r_b, r_b);
      walk(ranges.d, d);
      const auto dims = plant.step(ned * denom, r_b, d);
      ControlSample sample;
      sample.W = dims[0];
      sample.D = dims[1];
      sample.ned = ned;
      sample.r_b = r_b;
      sample.d = d;
      trace.push_back(sample);
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::string MlpSpec::to_json() const {
  nlohmann::json j;
  j["n_in"] = n_in;
  j["n_out"] = n_out;
  j["hidden"] = hidden;
  j["weights"] = weights;
  j["biases"] = biases;
  return j.dump();
}

MlpSpec MlpSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MlpSpec s;
  s.n_in = j.at("n_in").get<int>();
  s.n_out = j.at("n_out").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  s.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return s;
}

}  // namespace meltpool
