#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace meltpool {

/// One step of a control trace: realized dims plus the command that made them.
struct ControlSample {
  double W = 0.0, D = 0.0;            // m
  double ned = 0.0, r_b = 0.0, d = 0.0;  // command
};

/// Per-feature min-max normalizer.
struct MinMax {
  std::vector<double> lo, hi;

  std::vector<double> normalize(const std::vector<double>& x) const;
  std::vector<double> denormalize(const std::vector<double>& x) const;
};

struct WindowedDataset {
  int k = 6;
  std::vector<std::vector<double>> inputs;   // rows of length 2k+2, normalized
  std::vector<std::vector<double>> targets;  // rows of length 3, normalized
  MinMax input_norm, target_norm;
  std::size_t n_train = 0, n_val = 0, n_test = 0;  // contiguous: train|val|test
  int traces_skipped = 0;
};

/// Sliding-window dataset from control traces; 70/20/10 split, normalizers
/// from the train split only. Traces shorter than k+1 are skipped.
WindowedDataset build_dataset(const std::vector<std::vector<ControlSample>>& traces,
                              int k = 6);

/// Feed-forward net: rectifier hidden layers, logistic outputs.
struct MlpSpec {
  int n_in = 14, n_out = 3;
  std::vector<int> hidden{64, 64, 64};
  // weights[l] has shape (n_l_out, n_l_in) row-major; biases[l] length n_l_out
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpSpec init(int n_in, int n_out, const std::vector<int>& hidden,
                      std::uint64_t seed);
  std::vector<double> forward(const std::vector<double>& input) const;

  std::string to_json() const;
  static MlpSpec from_json(const std::string& text);
};

/// Gradient of 0.5*||forward(input) - target||^2 w.r.t. all weights/biases,
/// laid out to match MlpSpec storage. Returns the loss.
double backprop(const MlpSpec& spec, const std::vector<double>& input,
                const std::vector<double>& target,
                std::vector<std::vector<double>>& grad_w,
                std::vector<std::vector<double>>& grad_b);

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 2450;
  int batch = 64;
  std::uint64_t seed = 0;
};

struct TrainResult {
  MlpSpec model;  // best-validation weights
  std::vector<double> train_loss, val_loss;  // per epoch, mean squared error
  int best_epoch = 0;

  std::string loss_csv() const;
};

/// Adam minimization of the summed squared error. Deterministic per seed.
TrainResult train(const WindowedDataset& data, MlpSpec spec,
                  const TrainConfig& config);

struct EvalResult {
  std::vector<double> rel_errors;  // per test row, denormalized
  double mean = 0.0, max = 0.0;
  int excluded = 0;  // rows with a zero ground-truth component
};

EvalResult evaluate(const MlpSpec& model, const WindowedDataset& data);

/// Plant abstraction for the closed loop: absorbed power + beam geometry in,
/// realized (W, D) out. May throw to signal divergence.
using Plant = std::function<std::array<double, 2>(double eta_P, double r_b, double d)>;

struct ClosedLoopStep {
  double target_W = 0.0, target_D = 0.0;
  double W = 0.0, D = 0.0;
  double ned = 0.0, r_b = 0.0, d = 0.0;
  double aspect_discrepancy = 0.0;  // |(W/D) - (W*/D*)| / (W*/D*)
};

struct ProcessConstants {
  double V = 0.0, hatch = 0.0, layer = 0.0;
  double rho = 0.0, cp = 0.0, T_l = 0.0, T_0 = 0.0;
};

struct ClosedLoopResult {
  std::vector<ClosedLoopStep> steps;
  double max_aspect_discrepancy = 0.0;

  std::string to_csv() const;
};

/// Runs the trained net against the plant over a target (W*, D*) profile.
/// History starts padded with the first realized observation.
ClosedLoopResult closed_loop(const MlpSpec& model, const WindowedDataset& dataset_meta,
                             const Plant& plant,
                             const std::vector<std::array<double, 2>>& targets,
                             const ProcessConstants& pc);

/// First-order-lag melt-pool response used as the demo plant: an energy
/// balance sets the melted cross-section area, the source geometry (r_b, d)
/// sets its aspect ratio, and the pool relaxes toward that steady state.
struct LagPlant {
  ProcessConstants pc;
  double melt_enthalpy = 0.0;  // J/kg to bring material to liquidus
  double lag = 0.35;           // per-step relaxation fraction
  double W = 0.0, D = 0.0;     // realized state; 0 = cold

  std::array<double, 2> steady(double eta_P, double r_b, double d) const;
  std::array<double, 2> step(double eta_P, double r_b, double d);
};

struct CommandRanges {
  std::array<double, 2> ned{1.0, 4.0};
  std::array<double, 2> r_b{40e-6, 70e-6};
  std::array<double, 2> d{60e-6, 120e-6};
};

/// Smooth random command walks driven through the plant; one trace per walk.
std::vector<std::vector<ControlSample>> demo_traces(const LagPlant& plant_proto,
                                                    const CommandRanges& ranges,
                                                    int n_traces, int trace_len,
                                                    std::uint64_t seed);

}  // namespace meltpool
