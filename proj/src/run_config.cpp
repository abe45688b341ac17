#include "meltpool/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace meltpool {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

namespace {

const char* kStochasticCommands[] = {"simulate", "build-surrogate", "calibrate",
                                     "sample", "predict", "train-control"};

bool is_stochastic(const std::string& cmd) {
  for (const char* c : kStochasticCommands)
    if (cmd == c) return true;
  return false;
}

}  // namespace

RunConfig load_config(const std::string& command, const std::string& json_text) {
  RunConfig cfg;
  cfg.command = command;
  cfg.json_text = json_text;
  cfg.hash = fnv1a(json_text);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    cfg.errors.push_back(std::string("JSON parse error: ") + e.what());
    return cfg;
  }
  if (!j.is_object()) {
    cfg.errors.push_back("config root must be a JSON object");
    return cfg;
  }

  if (is_stochastic(command) && !j.contains("seed"))
    cfg.errors.push_back("missing required field: seed (stochastic command)");
  if (j.contains("seed") && !j["seed"].is_number_unsigned())
    cfg.errors.push_back("seed must be a non-negative integer");

  if (!j.contains("output_dir"))
    cfg.errors.push_back("missing required field: output_dir");

  // Velocities come in mm/s (the common tabulated unit); a value that also
  // parses as a plausible mm/s number but was given in m/s trips this.
  if (j.contains("V_mm_s")) {
    const double v = j["V_mm_s"].get<double>();
    if (v <= 0) cfg.errors.push_back("V_mm_s must be positive");
    if (v < 10.0)
      cfg.warnings.push_back("V_mm_s=" + std::to_string(v) +
                             " looks like m/s; expected mm/s (e.g. 1230)");
  }
  if (j.contains("V_m_s")) {
    const double v = j["V_m_s"].get<double>();
    if (v > 100.0)
      cfg.warnings.push_back("V_m_s=" + std::to_string(v) +
                             " exceeds 100 m/s; did you mean mm/s?");
  }
  if (j.contains("P_W") && j["P_W"].get<double>() <= 0)
    cfg.errors.push_back("P_W must be positive");

  if (command == "simulate" || command == "predict") {
    for (const char* f : {"P_W", "V_mm_s"})
      if (!j.contains(f))
        cfg.errors.push_back(std::string("missing required field: ") + f);
  }
  if (command == "build-surrogate") {
    if (!j.contains("e_range"))
      cfg.errors.push_back("missing required field: e_range");
  }
  if (command == "calibrate") {
    if (!j.contains("surrogate") || !j["surrogate"].is_string())
      cfg.errors.push_back("missing required field: surrogate (model JSON path)");
  }
  if (command == "sample" && !j.contains("hyper"))
    cfg.errors.push_back("missing required field: hyper");
  if (command == "control" && !j.contains("model"))
    cfg.errors.push_back("missing required field: model");

  for (const char* f : {"surrogate", "model", "cases"}) {
    if (j.contains(f) && j[f].is_string()) {
      std::ifstream probe(j[f].get<std::string>());
      if (!probe)
        cfg.errors.push_back(std::string("referenced file not readable: ") +
                             j[f].get<std::string>());
    }
  }
  return cfg;
}

}  // namespace meltpool
