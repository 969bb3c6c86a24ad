#include "plmpc/config.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace plmpc {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_scalar(const std::string& raw) {
  std::string t = trim(raw);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = std::stod(t, &used);
  if (used != t.size()) throw std::invalid_argument("config: bad number '" + raw + "'");
  return v;
}

}  // namespace

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: malformed section at line " +
                                 std::to_string(line_no));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: missing '=' at line " + std::to_string(line_no));
    cfg.sections_[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_scalar(get_string(section, key, ""));
}

int ConfigFile::get_int(const std::string& section, const std::string& key,
                        int fallback) const {
  if (!has(section, key)) return fallback;
  return static_cast<int>(parse_scalar(get_string(section, key, "")));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_string(section, key, "");
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw std::runtime_error("config: bad boolean '" + v + "' for " + section + "." + key);
}

Eigen::VectorXd ConfigFile::get_vector(const std::string& section, const std::string& key,
                                       const Eigen::VectorXd& fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_string(section, key, "");
  std::vector<double> values;
  std::istringstream in(v);
  std::string token;
  while (std::getline(in, token, ',')) values.push_back(parse_scalar(token));
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

UsvParams usv_params_from(const ConfigFile& cfg) {
  UsvParams p;
  p.m11 = cfg.get_double("vehicle", "m11", p.m11);
  p.m22 = cfg.get_double("vehicle", "m22", p.m22);
  p.m33 = cfg.get_double("vehicle", "m33", p.m33);
  p.d11 = cfg.get_double("vehicle", "d11", p.d11);
  p.d22 = cfg.get_double("vehicle", "d22", p.d22);
  p.d33 = cfg.get_double("vehicle", "d33", p.d33);
  p.lever_arm = cfg.get_double("vehicle", "lever_arm", p.lever_arm);
  p.dt = cfg.get_double("vehicle", "dt", p.dt);
  p.validate();
  return p;
}

void apply_ocp_config(const ConfigFile& cfg, OcpSpec& spec) {
  if (cfg.has("ocp", "q_diag"))
    spec.Q = cfg.get_vector("ocp", "q_diag", {}).asDiagonal();
  if (cfg.has("ocp", "r_diag"))
    spec.R = cfg.get_vector("ocp", "r_diag", {}).asDiagonal();
  if (cfg.has("ocp", "p_diag"))
    spec.P = cfg.get_vector("ocp", "p_diag", {}).asDiagonal();
  spec.horizon = cfg.get_int("ocp", "horizon", spec.horizon);
  if (cfg.has("ocp", "state_lower") || cfg.has("ocp", "state_upper")) {
    Eigen::VectorXd lo = cfg.get_vector(
        "ocp", "state_lower",
        Eigen::VectorXd::Constant(spec.state_dim(),
                                  -std::numeric_limits<double>::infinity()));
    Eigen::VectorXd hi = cfg.get_vector(
        "ocp", "state_upper",
        Eigen::VectorXd::Constant(spec.state_dim(),
                                  std::numeric_limits<double>::infinity()));
    append_box_rows(lo, hi, spec.g_rows, spec.g_rhs);
  }
  spec.u_min = cfg.get_vector("ocp", "u_min", spec.u_min);
  spec.u_max = cfg.get_vector("ocp", "u_max", spec.u_max);
  spec.alpha = cfg.get_double("ocp", "alpha", spec.alpha);
  spec.gamma0 = cfg.get_double("ocp", "gamma0", spec.gamma0);
  spec.terminal_constraint =
      cfg.get_bool("ocp", "terminal_constraint", spec.terminal_constraint);
  spec.validate();
}

void apply_solver_config(const ConfigFile& cfg, SolverConfig& solver) {
  solver.max_iterations = cfg.get_int("solver", "max_iterations", solver.max_iterations);
  solver.kkt_tolerance = cfg.get_double("solver", "kkt_tolerance", solver.kkt_tolerance);
  solver.constraint_tolerance =
      cfg.get_double("solver", "constraint_tolerance", solver.constraint_tolerance);
  solver.merit_penalty = cfg.get_double("solver", "merit_penalty", solver.merit_penalty);
  solver.backtrack_factor =
      cfg.get_double("solver", "backtrack_factor", solver.backtrack_factor);
  solver.min_step = cfg.get_double("solver", "min_step", solver.min_step);
  solver.warm_start = cfg.get_bool("solver", "warm_start", solver.warm_start);
  solver.validate();
}

void apply_train_config(const ConfigFile& cfg, TrainConfig& train) {
  train.learning_rate = cfg.get_double("train", "learning_rate", train.learning_rate);
  std::string opt = cfg.get_string(
      "train", "optimizer",
      train.optimizer == TrainConfig::Optimizer::kAdam ? "adam" : "sgd");
  if (opt == "adam") train.optimizer = TrainConfig::Optimizer::kAdam;
  else if (opt == "sgd") train.optimizer = TrainConfig::Optimizer::kSgd;
  else throw std::runtime_error("config: unknown optimizer '" + opt + "'");
  train.batch_size = cfg.get_int("train", "batch_size", train.batch_size);
  train.grad_norm_tolerance =
      cfg.get_double("train", "grad_norm_tolerance", train.grad_norm_tolerance);
  train.max_inner_steps = cfg.get_int("train", "max_inner_steps", train.max_inner_steps);
  train.dual_step0 = cfg.get_double("train", "dual_step0", train.dual_step0);
  train.outer_iterations =
      cfg.get_int("train", "outer_iterations", train.outer_iterations);
  train.seed = static_cast<std::uint64_t>(
      cfg.get_double("train", "seed", static_cast<double>(train.seed)));
  train.validate();
}

void apply_sampler_config(const ConfigFile& cfg, DataGenConfig& gen) {
  gen.sampler.tau = cfg.get_double("sampler", "tau", gen.sampler.tau);
  gen.sampler.discount = cfg.get_double("sampler", "gamma", gen.sampler.discount);
  gen.sampler.period = cfg.get_int("sampler", "K", gen.sampler.period);
  gen.num_trajectories = cfg.get_int("sampler", "count", gen.num_trajectories);
  gen.traj_len = cfg.get_int("sampler", "traj_len", gen.traj_len);
  gen.seed = static_cast<std::uint64_t>(
      cfg.get_double("sampler", "seed", static_cast<double>(gen.seed)));
  gen.sampler.lower = cfg.get_vector("sampler", "lower", gen.sampler.lower);
  gen.sampler.upper = cfg.get_vector("sampler", "upper", gen.sampler.upper);
  gen.sampler.validate();
}

void apply_guard_config(const ConfigFile& cfg, GuardConfig& guard) {
  if (cfg.has("guard", "mu0")) guard.mu0 = cfg.get_vector("guard", "mu0", guard.mu0);
  guard.growth = cfg.get_double("guard", "growth", guard.growth);
  guard.grad_tolerance = cfg.get_double("guard", "xi", guard.grad_tolerance);
  guard.constraint_tolerance =
      cfg.get_double("guard", "constraint_tolerance", guard.constraint_tolerance);
  guard.max_outer_iterations =
      cfg.get_int("guard", "max_outer_iterations", guard.max_outer_iterations);
  guard.validate();
}

void apply_runtime_config(const ConfigFile& cfg, RuntimeConfig& runtime) {
  runtime.gamma0 = cfg.get_double("runtime", "gamma0", runtime.gamma0);
  runtime.trace = cfg.get_bool("runtime", "trace", runtime.trace);
}

}  // namespace plmpc
