#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "meltpool/calibrate.hpp"
#include "meltpool/control.hpp"
#include "meltpool/heat_source.hpp"
#include "meltpool/hopgd.hpp"
#include "meltpool/material.hpp"
#include "meltpool/postproc.hpp"
#include "meltpool/run_config.hpp"
#include "meltpool/solver.hpp"
#include "meltpool/stats.hpp"

namespace fs = std::filesystem;
using namespace meltpool;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string stamp(const RunConfig& cfg, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "# config_hash=%016llx seed=%llu\n",
                static_cast<unsigned long long>(cfg.hash),
                static_cast<unsigned long long>(seed));
  return buf;
}

json load_json_file(const std::string& path) {
  return json::parse(read_file(path));
}

double get_or(const json& j, const char* key, double def) {
  return j.contains(key) ? j[key].get<double>() : def;
}

HyperParams hyper_from_json(const json& j) {
  HyperParams h = default_initial_guess();
  if (j.contains("hyper")) {
    const auto& hj = j["hyper"];
    if (hj.contains("mu")) h.mu = hj["mu"].get<Vec3>();
    if (hj.contains("L")) h.L = hj["L"].get<std::array<double, 6>>();
  }
  return h;
}

struct TrackSetup {
  Domain domain;
  ScanPath path;
};

/// Single track along x, centered, with lateral/depth margins and one
/// powder layer on top.
TrackSetup single_track_setup(double V, double dx, double track_len,
                              double layer = 40e-6) {
  const double margin = 140e-6, depth_sub = 160e-6;
  const int nx = std::max(4, static_cast<int>(std::lround((track_len + 2 * margin) / dx)));
  const int ny = std::max(4, static_cast<int>(std::lround(2 * margin / dx)));
  const int nz = std::max(4, static_cast<int>(std::lround((depth_sub + layer) / dx)));
  Domain dom = Domain::box(nx, ny, nz, dx, {0, 0, 0});
  dom.set_powder_above(depth_sub);

  PathGeometry geom;
  geom.track_length = track_len;
  geom.n_tracks = 1;
  geom.z0 = dom.z_top();
  const double dt = 25e-6 / V;  // ~ half a beam radius per point
  ScanPath path = generate_path(geom, V, dt);
  // shift the generated track to the domain interior
  for (auto& p : path.points) {
    p.x += margin;
    p.y += margin;
  }
  return {std::move(dom), std::move(path)};
}

struct TrackDims {
  double width = 0.0, depth = 0.0;
  std::vector<TraceRow> trace;
};

TrackDims run_single_track(double P, double V, const Vec3& params, double dx,
                           double track_len, const MaterialModel& mat,
                           bool use_openmp) {
  auto setup = single_track_setup(V, dx, track_len);
  SolverConfig sc;
  sc.use_openmp = use_openmp;
  Simulation sim(setup.domain, mat, sc);
  auto result = run_scan(sim, setup.path, P, V, [&] { return params; });
  const double x_mid = setup.path.points.front().x + 0.5 * track_len;
  const auto dims =
      extract_meltpool_dims(sim.state(), setup.domain, mat, x_mid);
  return {dims.width, dims.depth, std::move(result.trace)};
}

int cmd_simulate(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const MaterialModel mat = MaterialModel::load(
      j.contains("material") ? j["material"].get<std::string>() : "IN625");
  const double P = j["P_W"].get<double>();
  const double V = j["V_mm_s"].get<double>() * 1e-3;
  const double dx = get_or(j, "dx_um", 10.0) * 1e-6;
  const double track_len = get_or(j, "track_length_um", 300.0) * 1e-6;
  const bool openmp = get_or(j, "use_openmp", 1.0) != 0.0;

  const HyperParams hyper = hyper_from_json(j);
  const bool stochastic =
      hyper.L != std::array<double, 6>{0, 0, 0, 0, 0, 0};

  auto setup = single_track_setup(V, dx, track_len);
  SolverConfig sc;
  sc.use_openmp = openmp;
  Simulation sim(setup.domain, mat, sc);

  Rng rng(seed);
  const TriNormal dist = hyper.distribution();
  auto params = [&]() -> Vec3 {
    return stochastic ? dist.sample(rng) : hyper.mu;
  };
  const auto result = run_scan(sim, setup.path, P, V, params);

  const double x_mid = setup.path.points.front().x + 0.5 * track_len;
  const auto dims = extract_meltpool_dims(sim.state(), setup.domain, mat, x_mid);

  write_file(out_dir + "/trace.csv", stamp(cfg, seed) + trace_to_csv(result.trace));
  json report;
  report["config_hash"] = cfg.hash;
  report["seed"] = seed;
  report["width_m"] = dims.width;
  report["depth_m"] = dims.depth;
  report["melted"] = dims.melted;
  report["path_resolution_warning"] = result.path_warning;
  write_file(out_dir + "/report.json", report.dump(2) + "\n");
  return 0;
}

int cmd_build_surrogate(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const MaterialModel mat = MaterialModel::load(
      j.contains("material") ? j["material"].get<std::string>() : "IN625");
  const double V = get_or(j, "V_mm_s", 1230.0) * 1e-3;
  const double dx = get_or(j, "dx_um", 10.0) * 1e-6;
  const double track_len = get_or(j, "track_length_um", 250.0) * 1e-6;
  const bool openmp = get_or(j, "use_openmp", 1.0) != 0.0;
  const int levels = static_cast<int>(get_or(j, "levels", 5.0));

  auto range = [&](const char* key, double lo, double hi) {
    AxisRange r{lo, hi};
    if (j.contains(key)) {
      r.lo = j[key][0].get<double>();
      r.hi = j[key][1].get<double>();
    }
    return r;
  };
  const std::array<AxisRange, 4> ranges{
      range("e_range", 150.0, 305.0), range("p1_range", 2e-7, 7e-7),
      range("p2_range", 8e-4, 1.6e-3), range("p3_range", 1e-7, 4e-7)};

  SampleGrid grid = design_grid(ranges, {levels, levels, levels, levels});
  grid.width.assign(grid.size(), 0.0);
  grid.depth.assign(grid.size(), 0.0);
  grid.mask.assign(grid.size(), 1);

  for (std::size_t i = 0; i < grid.axes[0].size(); ++i)
    for (std::size_t jj = 0; jj < grid.axes[1].size(); ++jj)
      for (std::size_t k = 0; k < grid.axes[2].size(); ++k)
        for (std::size_t l = 0; l < grid.axes[3].size(); ++l) {
          const double e = grid.axes[0][i];
          const Vec3 params{grid.axes[1][jj], grid.axes[2][k], grid.axes[3][l]};
          const auto dims =
              run_single_track(e * V, V, params, dx, track_len, mat, openmp);
          const std::size_t c = grid.index(i, jj, k, l);
          grid.width[c] = dims.width;
          grid.depth[c] = dims.depth;
        }

  FitOptions fo;
  fo.tol = get_or(j, "fit_tol", 1e-4);
  fo.max_modes = static_cast<int>(get_or(j, "max_modes", 8.0));
  SeparatedModel wm = fit_hopgd(grid, grid.width, fo);
  SeparatedModel dm = fit_hopgd(grid, grid.depth, fo);
  char prov[64];
  std::snprintf(prov, sizeof(prov), "config_hash=%016llx seed=%llu",
                static_cast<unsigned long long>(cfg.hash),
                static_cast<unsigned long long>(seed));
  wm.provenance = prov;
  dm.provenance = prov;

  json out;
  out["config_hash"] = cfg.hash;
  out["seed"] = seed;
  out["width"] = json::parse(wm.to_json());
  out["depth"] = json::parse(dm.to_json());
  write_file(out_dir + "/surrogate.json", out.dump() + "\n");
  return 0;
}

SurrogatePair load_surrogate(const std::string& path) {
  const json j = load_json_file(path);
  SurrogatePair s;
  s.width = SeparatedModel::from_json(j.at("width").dump());
  s.depth = SeparatedModel::from_json(j.at("depth").dump());
  return s;
}

int cmd_calibrate(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const SurrogatePair surrogate = load_surrogate(j["surrogate"].get<std::string>());
  const std::vector<ExperimentCase> cases =
      j.contains("cases") ? cases_from_csv(read_file(j["cases"].get<std::string>()))
                          : builtin_afrl();

  CalibrateConfig cc;
  cc.seed = seed;
  cc.n_mc = static_cast<int>(get_or(j, "n_mc", 1000.0));
  cc.max_evals = static_cast<int>(get_or(j, "max_evals", 2000.0));
  cc.restarts = static_cast<int>(get_or(j, "restarts", 3.0));

  HyperParams init = hyper_from_json(j);
  const auto result = calibrate(init, surrogate, cases, cc);

  json out = json::parse(result.to_json());
  out["config_hash"] = cfg.hash;
  out["seed"] = seed;
  write_file(out_dir + "/calibration.json", out.dump(2) + "\n");
  return 0;
}

int cmd_sample(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  HyperParams hyper;
  if (j["hyper"].is_string())
    hyper = HyperParams::from_json(
        load_json_file(j["hyper"].get<std::string>())["hyper"].dump());
  else
    hyper = hyper_from_json(j);

  const TriNormal target = hyper.distribution();
  const auto n_steps = static_cast<std::size_t>(get_or(j, "n_steps", 50000.0));
  Vec3 scale;
  for (int d = 0; d < 3; ++d) scale[d] = 0.5 * target.chol[d == 0 ? 0 : d == 1 ? 2 : 5];
  const auto chain = mh_chain([&](const Vec3& x) { return target.log_pdf(x); },
                              hyper.mu, n_steps, scale, seed);
  write_file(out_dir + "/chain.csv", stamp(cfg, seed) + chain.to_csv());

  json report;
  report["config_hash"] = cfg.hash;
  report["seed"] = seed;
  report["acceptance_rate"] = chain.acceptance_rate;
  report["n_samples"] = chain.states.size();
  write_file(out_dir + "/chain_report.json", report.dump(2) + "\n");
  return 0;
}

int cmd_predict(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const MaterialModel mat = MaterialModel::load(
      j.contains("material") ? j["material"].get<std::string>() : "IN625");
  const double P = j["P_W"].get<double>();
  const double V = j["V_mm_s"].get<double>() * 1e-3;
  const double dx = get_or(j, "dx_um", 10.0) * 1e-6;
  const double track_len = get_or(j, "track_length_um", 200.0) * 1e-6;
  const double hatch = get_or(j, "hatch_um", 100.0) * 1e-6;
  const int n_tracks = static_cast<int>(get_or(j, "n_tracks", 3.0));
  const double layer = get_or(j, "layer_um", 40.0) * 1e-6;
  const double beam_diam = get_or(j, "beam_diameter_um", 62.5) * 1e-6;
  const bool openmp = get_or(j, "use_openmp", 1.0) != 0.0;
  const int n_zones = static_cast<int>(get_or(j, "n_zones", 10.0));

  const double margin = 140e-6, depth_sub = 160e-6;
  const int nx = std::max(4, static_cast<int>(std::lround((track_len + 2 * margin) / dx)));
  const int ny = std::max(
      4, static_cast<int>(std::lround(((n_tracks - 1) * hatch + 2 * margin) / dx)));
  const int nz = std::max(4, static_cast<int>(std::lround((depth_sub + layer) / dx)));
  Domain dom = Domain::box(nx, ny, nz, dx, {0, 0, 0});
  dom.set_powder_above(depth_sub);

  PathGeometry geom;
  geom.track_length = track_len;
  geom.n_tracks = n_tracks;
  geom.hatch = hatch;
  geom.serpentine = true;
  geom.z0 = dom.z_top();
  ScanPath path = generate_path(geom, V, 25e-6 / V);
  for (auto& p : path.points) {
    p.x += margin;
    p.y += margin;
  }

  SolverConfig sc;
  sc.use_openmp = openmp;
  Simulation sim(dom, mat, sc);

  const HyperParams hyper = hyper_from_json(j);
  const bool stochastic = hyper.L != std::array<double, 6>{0, 0, 0, 0, 0, 0};
  Rng rng(seed);
  const TriNormal dist = hyper.distribution();
  const auto result = run_scan(
      sim, path, P, V,
      [&]() -> Vec3 { return stochastic ? dist.sample(rng) : hyper.mu; },
      n_tracks > 1);

  const auto surface = top_surface(sim.state(), dom, mat.T_liquidus);
  const auto sa = sa_roughness(surface, n_zones);

  Region nominal;
  nominal.lo = {margin, margin, depth_sub - layer};
  nominal.hi = {margin + track_len, margin + (n_tracks - 1) * hatch, depth_sub};
  if (n_tracks == 1) nominal.hi[1] = margin + dx;

  QualityReport report;
  report.Sa_mean = sa.mean;
  report.Sa_std = sa.std;
  report.sa_zones = sa.zone_values;
  // porosity per zone along x, then aggregate
  for (int z = 0; z < n_zones; ++z) {
    Region r = nominal;
    r.lo[0] = nominal.lo[0] + z * (nominal.hi[0] - nominal.lo[0]) / n_zones;
    r.hi[0] = nominal.lo[0] + (z + 1) * (nominal.hi[0] - nominal.lo[0]) / n_zones;
    report.porosity_zones.push_back(
        lof_porosity(sim.state(), dom, r, mat.T_liquidus));
  }
  for (double p : report.porosity_zones) report.porosity_mean += p;
  report.porosity_mean /= report.porosity_zones.size();
  if (report.porosity_zones.size() > 1) {
    double ss = 0.0;
    for (double p : report.porosity_zones)
      ss += (p - report.porosity_mean) * (p - report.porosity_mean);
    report.porosity_std = std::sqrt(ss / (report.porosity_zones.size() - 1));
  }
  report.VED = ved(P, V, beam_diam, layer);
  const double eta =
      std::max(hyper.mu[1] * (P / V), kMinAbsorptivity);
  report.NED = ned(eta, P, V, hatch, layer, mat.solid_density,
                   mat.cp_liquid, mat.T_liquidus, mat.T_preheat);

  json out = json::parse(report.to_json());
  out["config_hash"] = cfg.hash;
  out["seed"] = seed;
  write_file(out_dir + "/quality.json", out.dump(2) + "\n");

  std::ostringstream hf;
  hf << stamp(cfg, seed) << "i,j,x,y,height,valid\n";
  hf.precision(17);
  for (int jj = 0; jj < surface.ny; ++jj)
    for (int i = 0; i < surface.nx; ++i)
      hf << i << ',' << jj << ',' << i * surface.cell << ',' << jj * surface.cell
         << ',' << surface.heights[surface.idx(i, jj)] << ','
         << int(surface.mask[surface.idx(i, jj)]) << '\n';
  write_file(out_dir + "/heights.csv", hf.str());
  write_file(out_dir + "/trace.csv", stamp(cfg, seed) + trace_to_csv(result.trace));
  return 0;
}

ProcessConstants default_pc(const MaterialModel& mat, double V, double hatch,
                            double layer) {
  ProcessConstants pc;
  pc.V = V;
  pc.hatch = hatch;
  pc.layer = layer;
  pc.rho = mat.solid_density;
  pc.cp = mat.cp_liquid;
  pc.T_l = mat.T_liquidus;
  pc.T_0 = mat.T_preheat;
  return pc;
}

LagPlant make_plant(const MaterialModel& mat, const ProcessConstants& pc) {
  LagPlant plant;
  plant.pc = pc;
  const double Tm = 0.5 * (mat.T_solidus + mat.T_liquidus);
  plant.melt_enthalpy =
      mat.cp_solid_poly(0.5 * (pc.T_0 + Tm)) * (Tm - pc.T_0) + mat.latent_heat;
  return plant;
}

int cmd_train_control(const RunConfig& cfg, const json& j) {
  const auto seed = j["seed"].get<std::uint64_t>();
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const MaterialModel mat = MaterialModel::load("IN625");
  const double V = get_or(j, "V_mm_s", 1230.0) * 1e-3;
  const double hatch = get_or(j, "hatch_um", 100.0) * 1e-6;
  const double layer = get_or(j, "layer_um", 40.0) * 1e-6;
  const ProcessConstants pc = default_pc(mat, V, hatch, layer);

  const int n_traces = static_cast<int>(get_or(j, "n_traces", 40.0));
  const int trace_len = static_cast<int>(get_or(j, "trace_len", 120.0));
  const int k = static_cast<int>(get_or(j, "window", 6.0));

  const auto traces =
      demo_traces(make_plant(mat, pc), CommandRanges{}, n_traces, trace_len, seed);
  const auto dataset = build_dataset(traces, k);

  TrainConfig tc;
  tc.learning_rate = get_or(j, "learning_rate", 1e-4);
  tc.epochs = static_cast<int>(get_or(j, "epochs", 2450.0));
  tc.batch = static_cast<int>(get_or(j, "batch", 64.0));
  tc.seed = seed;

  MlpSpec spec = MlpSpec::init(2 * k + 2, 3, {64, 64, 64}, seed);
  const auto trained = train(dataset, spec, tc);
  const auto eval = evaluate(trained.model, dataset);

  json out;
  out["config_hash"] = cfg.hash;
  out["seed"] = seed;
  out["k"] = k;
  out["model"] = json::parse(trained.model.to_json());
  out["input_norm"] = {{"lo", dataset.input_norm.lo}, {"hi", dataset.input_norm.hi}};
  out["target_norm"] = {{"lo", dataset.target_norm.lo},
                        {"hi", dataset.target_norm.hi}};
  out["pc"] = {{"V", pc.V},   {"hatch", pc.hatch}, {"layer", pc.layer},
               {"rho", pc.rho}, {"cp", pc.cp},     {"T_l", pc.T_l},
               {"T_0", pc.T_0}};
  out["best_epoch"] = trained.best_epoch;
  out["test_mean_rel_error"] = eval.mean;
  out["test_max_rel_error"] = eval.max;
  write_file(out_dir + "/control_model.json", out.dump() + "\n");
  write_file(out_dir + "/loss.csv", stamp(cfg, seed) + trained.loss_csv());
  return 0;
}

int cmd_control(const RunConfig& cfg, const json& j) {
  const std::string out_dir = j["output_dir"].get<std::string>();
  fs::create_directories(out_dir);

  const json mj = load_json_file(j["model"].get<std::string>());
  MlpSpec model = MlpSpec::from_json(mj.at("model").dump());
  WindowedDataset meta;
  meta.k = mj.at("k").get<int>();
  meta.input_norm.lo = mj["input_norm"]["lo"].get<std::vector<double>>();
  meta.input_norm.hi = mj["input_norm"]["hi"].get<std::vector<double>>();
  meta.target_norm.lo = mj["target_norm"]["lo"].get<std::vector<double>>();
  meta.target_norm.hi = mj["target_norm"]["hi"].get<std::vector<double>>();
  ProcessConstants pc;
  pc.V = mj["pc"]["V"].get<double>();
  pc.hatch = mj["pc"]["hatch"].get<double>();
  pc.layer = mj["pc"]["layer"].get<double>();
  pc.rho = mj["pc"]["rho"].get<double>();
  pc.cp = mj["pc"]["cp"].get<double>();
  pc.T_l = mj["pc"]["T_l"].get<double>();
  pc.T_0 = mj["pc"]["T_0"].get<double>();

  const int n_steps = static_cast<int>(get_or(j, "n_steps", 100.0));
  const double W_target = get_or(j, "target_W_um", 120.0) * 1e-6;
  const double D_lo = get_or(j, "target_D_lo_um", 60.0) * 1e-6;
  const double D_hi = get_or(j, "target_D_hi_um", 110.0) * 1e-6;

  std::vector<std::array<double, 2>> targets;
  for (int s = 0; s < n_steps; ++s) {
    // sigmoid depth profile, fixed width target
    const double u = 10.0 * (static_cast<double>(s) / n_steps - 0.5);
    const double D = D_lo + (D_hi - D_lo) / (1.0 + std::exp(-u));
    targets.push_back({W_target, D});
  }

  const MaterialModel mat = MaterialModel::load("IN625");
  LagPlant plant = make_plant(mat, pc);
  const auto result = closed_loop(
      model, meta,
      [&](double eta_P, double r_b, double d) { return plant.step(eta_P, r_b, d); },
      targets, pc);

  write_file(out_dir + "/control_trace.csv", stamp(cfg, 0) + result.to_csv());
  json report;
  report["config_hash"] = cfg.hash;
  report["max_aspect_discrepancy"] = result.max_aspect_discrepancy;
  write_file(out_dir + "/control_report.json", report.dump(2) + "\n");
  return 0;
}

int cmd_validate(const std::string& command, const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  const RunConfig cfg = load_config(command, text);
  for (const auto& w : cfg.warnings) std::cout << "warning: " << w << "\n";
  for (const auto& e : cfg.errors) std::cout << "error: " << e << "\n";
  return cfg.ok() ? 0 : kExitConfig;
}

int dispatch(const std::string& command, const std::string& config_path) {
  std::string text;
  try {
    text = read_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  const RunConfig cfg = load_config(command, text);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  if (!cfg.ok()) {
    for (const auto& e : cfg.errors) std::cerr << "error: " << e << "\n";
    return kExitConfig;
  }
  const json j = json::parse(text);
  try {
    if (command == "simulate") return cmd_simulate(cfg, j);
    if (command == "build-surrogate") return cmd_build_surrogate(cfg, j);
    if (command == "calibrate") return cmd_calibrate(cfg, j);
    if (command == "sample") return cmd_sample(cfg, j);
    if (command == "predict") return cmd_predict(cfg, j);
    if (command == "train-control") return cmd_train_control(cfg, j);
    if (command == "control") return cmd_control(cfg, j);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melt-pool digital twin pipeline"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {
      "simulate", "build-surrogate", "calibrate", "sample",
      "predict",  "train-control",   "control"};
  std::string config_path;
  std::string picked;
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", config_path, "JSON config file")->required();
    sub->callback([&picked, name] { picked = name; });
  }
  std::string validate_command = "simulate";
  auto* val = app.add_subcommand("validate", "validate a config without running");
  val->add_option("--command", validate_command, "command the config is for");
  val->add_option("config", config_path, "JSON config file")->required();
  val->callback([&picked] { picked = "validate"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    // unknown command / usage problems -> 1, per contract
    return rc == 0 ? 0 : 1;
  }

  if (picked == "validate") return cmd_validate(validate_command, config_path);
  return dispatch(picked, config_path);
}
