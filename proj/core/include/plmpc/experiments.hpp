#pragma once

#include <memory>
#include <string>
#include <vector>

#include "plmpc/controller.hpp"
#include "plmpc/dataset.hpp"
#include "plmpc/guard.hpp"
#include "plmpc/ocp.hpp"
#include "plmpc/policy.hpp"
#include "plmpc/solver.hpp"
#include "plmpc/terminal.hpp"
#include "plmpc/trainer.hpp"
#include "plmpc/usv_model.hpp"

namespace plmpc {

/// Point-stabilization problem: Q = diag(10,10,20,0.1,0.1,0.1),
/// R = diag(0.01,0.2), P = Q, N = 15, the identified state and input boxes,
/// and an LQR terminal law with a Monte-Carlo calibrated level.
struct StabilizationSetup {
  std::shared_ptr<UsvModel> model;
  OcpSpec spec;
  TerminalLaw law;
  Eigen::VectorXd input_scale;  ///< state conditioning for the policy network
};

StabilizationSetup make_stabilization_setup(int horizon = 15,
                                            const UsvParams& params = {},
                                            bool calibrate = true);

/// Steady body velocities under a constant input: the root of the velocity
/// subsystem found by Newton iteration.
Eigen::VectorXd steady_velocities(const UsvModel& model, const Eigen::VectorXd& u_ref);

/// Time-invariant error dynamics about the cruising condition:
/// f_e(e, u_e) = f(x_c + e, u_ref + u_e) - f(x_c, u_ref), where x_c carries
/// the steady velocities at zero pose. f_e(0, 0) = 0 by construction.
class ErrorDynamicsModel final : public DynamicsModel {
 public:
  ErrorDynamicsModel(UsvParams params, Eigen::VectorXd u_ref);

  int state_dim() const override { return 6; }
  int input_dim() const override { return 2; }
  Eigen::VectorXd step(const Eigen::VectorXd& e, const Eigen::VectorXd& ue) const override;
  void jacobians(const Eigen::VectorXd& e, const Eigen::VectorXd& ue,
                 Eigen::MatrixXd& A, Eigen::MatrixXd& B) const override;

  const Eigen::VectorXd& reference_input() const { return u_ref_; }
  const Eigen::VectorXd& cruise_state() const { return x_c_; }

 private:
  UsvModel base_;
  Eigen::VectorXd u_ref_;
  Eigen::VectorXd x_c_;
  Eigen::VectorXd x_c_next_;
};

/// Trajectory-tracking problem reformulated on error coordinates:
/// Q = diag(10,10,0.1,1,1,1), R = diag(0.01,0.01), P = Q. Input and velocity
/// boxes are the identified ones shifted by the reference; position errors
/// get a generous box. The OCP, the policy, and the terminal law all operate
/// on the canonical (reference-frame) error state.
struct TrackingSetup {
  UsvParams params;
  std::shared_ptr<UsvModel> plant;
  std::shared_ptr<ErrorDynamicsModel> error_model;
  Eigen::VectorXd u_ref;  ///< [F_d, M_d]
  Eigen::VectorXd nu_ss;  ///< steady body velocities under u_ref
  OcpSpec spec;           ///< error-state OCP
  TerminalLaw law;
  Eigen::VectorXd input_scale;
};

TrackingSetup make_tracking_setup(double f_d = 17.5, double m_d = 1.0,
                                  int horizon = 15, const UsvParams& params = {},
                                  bool calibrate = true);

/// Reference generated by iterating the plant model under the constant
/// reference input; satisfies x_d(k+1) = f(x_d(k), u_ref) bit exactly.
struct ReferenceTrajectory {
  Eigen::VectorXd u_ref;
  Eigen::MatrixXd states;  ///< n x (steps + 1)
};

ReferenceTrajectory make_reference(const UsvModel& model, const Eigen::VectorXd& x_d0,
                                   const Eigen::VectorXd& u_ref, int steps);

double wrap_angle(double a);  ///< into (-pi, pi]

/// Error state in the reference frame: position error rotated by -psi_d,
/// heading error wrapped, velocity error raw.
Eigen::VectorXd canonical_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_d);

/// Uniform controller interface for paired comparisons.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual Eigen::VectorXd act(const Eigen::VectorXd& x, StepInfo& info) = 0;
  virtual const char* name() const = 0;
};

/// Receding-horizon NMPC with shift-and-append warm starting.
std::unique_ptr<Actor> make_nmpc_actor(const OcpSpec& spec, const DynamicsModel& model,
                                       const SolverConfig& cfg, const TerminalLaw* law);

/// Learned controller (terminal switch + network + guard).
std::unique_ptr<Actor> make_plmpc_actor(std::shared_ptr<PlmpcController> controller,
                                        const DynamicsModel& model);

struct RunRecord {
  Eigen::VectorXd state;      ///< absolute plant state
  Eigen::VectorXd reference;  ///< reference state (tracking runs)
  Eigen::VectorXd error;      ///< metrics channel: state, or raw x - x_d
  Eigen::VectorXd input;      ///< applied input
  int branch = -1;            ///< StepBranch, -1 for NMPC
  double latency_s = 0.0;
  double stage_cost = 0.0;
  double violation_before = 0.0;
  double violation_after = 0.0;
};

struct RunReport {
  std::vector<RunRecord> records;
  Eigen::VectorXd final_state;
  Eigen::VectorXd rms;      ///< per channel of `error`; heading wrapped
  double total_cost = 0.0;
  double mean_latency_s = 0.0;
  double p95_latency_s = 0.0;
  double guard_rate = 0.0;  ///< guarded steps / total steps
};

/// Closed loop toward the origin; metrics on the state itself.
RunReport run_point_stabilization(Actor& actor, const OcpSpec& metrics_spec,
                                  const DynamicsModel& plant,
                                  const Eigen::VectorXd& x0, int steps);

/// Closed loop about the reference circle; the actor sees canonical errors,
/// the applied input is u_ref + u_e saturated to the identified box, and
/// metrics are computed on the raw n-frame error.
RunReport run_tracking(Actor& actor, const TrackingSetup& setup,
                       const Eigen::VectorXd& x0_abs, int steps);

/// First step index with ||(x, y)|| below the radius; -1 if never.
int first_step_within(const RunReport& report, double radius);

/// Deterministic trajectory CSV (no timing columns) and a separate per-step
/// trace CSV that carries latencies.
void write_trajectory_csv(const std::string& path, const RunReport& report);
void write_trace_csv(const std::string& path, const RunReport& report);

/// Per-epoch training statistics.
void write_train_report_csv(const std::string& path, const TrainReport& report);

/// Numeric CSV reader (header row skipped); used by tests and tooling.
Eigen::MatrixXd read_numeric_csv(const std::string& path);

/// Dataset generation followed by a small training run; shared by the latency
/// benchmark and tooling.
PolicyModel quick_train_policy(const OcpSpec& spec, const DynamicsModel& model,
                               const TerminalLaw& law,
                               const Eigen::VectorXd& input_scale,
                               const DataGenConfig& gen_cfg,
                               const SolverConfig& solver_cfg,
                               const TrainConfig& train_cfg);

struct BenchRow {
  int horizon = 0;
  double nmpc_mean_s = 0.0;
  double nmpc_p95_s = 0.0;
  double plmpc_mean_s = 0.0;
  double plmpc_p95_s = 0.0;
};

/// Paired one-step timings on identical feasible states: cold NMPC solves
/// against the deployed learned-controller step, per horizon.
std::vector<BenchRow> bench_latency(const std::vector<int>& horizons, int trials,
                                    std::uint64_t seed,
                                    const UsvParams& params = {});

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

struct EvalSettings {
  double delta = 0.01;
  double c = 2.0;
  double epsilon = 0.05;       ///< loss threshold of the probability bound
  double bound_samples = -1.0; ///< M for the bound; sample count when <= 0
  double violation_tolerance = 1e-6;
};

struct EvalReport {
  double r_emp = 0.0;
  double median_rel_subopt = 0.0;
  double mean_rel_subopt = 0.0;
  double violation_fraction_before = 0.0;
  double violation_fraction_after = 0.0;
  double bound = 0.0;
  long clamped_losses = 0;
  long guard_failures = 0;
  std::vector<double> histogram_edges;   ///< log10-spaced loss bin edges
  std::vector<long> histogram_counts;
};

EvalReport evaluate_policy(const std::vector<TrainingSample>& samples,
                           const PolicyModel& policy, const OcpSpec& spec,
                           const DynamicsModel& model, const GuardConfig& guard,
                           const EvalSettings& settings = {});

void write_eval_csv(const std::string& path, const EvalReport& report);

}  // namespace plmpc
