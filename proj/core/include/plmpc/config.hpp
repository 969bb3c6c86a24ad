#pragma once

#include <map>
#include <string>

#include <Eigen/Core>

#include "plmpc/dataset.hpp"
#include "plmpc/guard.hpp"
#include "plmpc/ocp.hpp"
#include "plmpc/solver.hpp"
#include "plmpc/trainer.hpp"
#include "plmpc/usv_model.hpp"

namespace plmpc {

/// Sectioned key=value text configuration. Lines starting with '#' or ';'
/// are comments; values may be scalars, booleans, or comma-separated lists
/// ("inf"/"-inf" allowed).
class ConfigFile {
 public:
  static ConfigFile load(const std::string& path);
  static ConfigFile parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  Eigen::VectorXd get_vector(const std::string& section, const std::string& key,
                             const Eigen::VectorXd& fallback) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Section [vehicle].
UsvParams usv_params_from(const ConfigFile& cfg);

/// Section [ocp]: overrides weights, horizon, boxes, terminal settings on a
/// preset spec. Keys: q_diag, r_diag, p_diag, horizon, state_lower,
/// state_upper, u_min, u_max, alpha, gamma0, terminal_constraint.
void apply_ocp_config(const ConfigFile& cfg, OcpSpec& spec);

/// Section [solver].
void apply_solver_config(const ConfigFile& cfg, SolverConfig& solver);

/// Section [train].
void apply_train_config(const ConfigFile& cfg, TrainConfig& train);

/// Section [sampler]: tau, gamma, K, count (H), traj_len (L).
void apply_sampler_config(const ConfigFile& cfg, DataGenConfig& gen);

/// Section [guard].
void apply_guard_config(const ConfigFile& cfg, GuardConfig& guard);

/// Section [runtime].
struct RuntimeConfig {
  double gamma0 = 0.9;               ///< inner-region factor override
  bool trace = false;                ///< stream per-step info
};
void apply_runtime_config(const ConfigFile& cfg, RuntimeConfig& runtime);

}  // namespace plmpc
