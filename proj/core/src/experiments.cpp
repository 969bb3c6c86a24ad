#include "plmpc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "plmpc/parallel.hpp"

namespace plmpc {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd make_vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

void format_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

double percentile95(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(values.size()))) - 1;
  return values[std::min(idx, values.size() - 1)];
}

void finalize_report(RunReport& report, int angle_index) {
  const std::size_t n_rec = report.records.size();
  if (n_rec == 0) return;
  const Eigen::Index dim = report.records.front().error.size();
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  std::vector<double> latencies;
  latencies.reserve(n_rec);
  long guarded = 0;
  double total_cost = 0.0;
  for (const auto& rec : report.records) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      double e = rec.error[i];
      if (i == angle_index) e = wrap_angle(e);
      sum_sq[i] += e * e;
    }
    latencies.push_back(rec.latency_s);
    total_cost += rec.stage_cost;
    if (rec.branch == static_cast<int>(StepBranch::kPolicyGuarded)) ++guarded;
  }
  report.rms = (sum_sq / static_cast<double>(n_rec)).cwiseSqrt();
  report.total_cost = total_cost;
  report.mean_latency_s =
      std::accumulate(latencies.begin(), latencies.end(), 0.0) /
      static_cast<double>(n_rec);
  report.p95_latency_s = percentile95(latencies);
  report.guard_rate = static_cast<double>(guarded) / static_cast<double>(n_rec);
}

}  // namespace

StabilizationSetup make_stabilization_setup(int horizon, const UsvParams& params,
                                            bool calibrate) {
  StabilizationSetup setup;
  setup.model = std::make_shared<UsvModel>(params);

  OcpSpec spec;
  spec.Q = make_vector({10, 10, 20, 0.1, 0.1, 0.1}).asDiagonal();
  spec.R = make_vector({0.01, 0.2}).asDiagonal();
  spec.P = spec.Q;
  spec.horizon = horizon;
  const double inf = std::numeric_limits<double>::infinity();
  append_box_rows(make_vector({-70, -70, -inf, -1, -1, -0.2}),
                  make_vector({70, 70, inf, 2, 1, 0.2}), spec.g_rows, spec.g_rhs);
  spec.u_min = make_vector({-19.6, -5});
  spec.u_max = make_vector({39.2, 5});
  spec.gamma0 = 0.9;
  spec.terminal_constraint = false;

  // The at-rest linearization has an uncontrollable integrator (y is driven
  // only by the unactuated sway), so the exact Riccati equation has no
  // stabilizing solution; a small damping factor makes it well posed. The
  // decrease condition then certifies only at the acceptance tolerance, not
  // exactly; see validate_terminal.
  try {
    setup.law = make_lqr_terminal_law(*setup.model, spec.Q, spec.R);
  } catch (const std::runtime_error&) {
    setup.law = make_lqr_terminal_law(*setup.model, spec.Q, spec.R, 1e-3);
  }
  spec.terminal_shape = setup.law.weight;
  spec.alpha = 1.0;
  // Exact-zero residuals are below the roundoff floor of the quadratic
  // forms; the certificate targets a 1e-9 absolute residual, ten times
  // tighter than the acceptance tolerance.
  if (calibrate)
    calibrate_terminal_level(spec, setup.law, *setup.model, 20000, 0x7e51a11cULL,
                             1e-9);
  spec.validate();
  setup.spec = std::move(spec);
  setup.input_scale = make_vector({70, 70, kPi, 2, 1, 0.2});
  return setup;
}

Eigen::VectorXd steady_velocities(const UsvModel& model, const Eigen::VectorXd& u_ref) {
  const UsvParams& p = model.params();
  const double F = u_ref[kInputF], M = u_ref[kInputM];
  Eigen::Vector3d nu(F / p.d11, 0.0, M / p.d33);
  for (int it = 0; it < 100; ++it) {
    double u = nu[0], v = nu[1], r = nu[2];
    Eigen::Vector3d resid((p.m22 * v * r - p.d11 * u + F) / p.m11,
                          (-p.m11 * u * r - p.d22 * v) / p.m22,
                          ((p.m11 - p.m22) * u * v - p.d33 * r + M) / p.m33);
    if (resid.cwiseAbs().maxCoeff() < 1e-15) break;
    Eigen::Matrix3d J;
    J << -p.d11 / p.m11, p.m22 * r / p.m11, p.m22 * v / p.m11,
         -p.m11 * r / p.m22, -p.d22 / p.m22, -p.m11 * u / p.m22,
         (p.m11 - p.m22) * v / p.m33, (p.m11 - p.m22) * u / p.m33, -p.d33 / p.m33;
    nu -= J.partialPivLu().solve(resid);
  }
  return nu;
}

ErrorDynamicsModel::ErrorDynamicsModel(UsvParams params, Eigen::VectorXd u_ref)
    : base_(params), u_ref_(std::move(u_ref)) {
  x_c_ = Eigen::VectorXd::Zero(6);
  x_c_.tail(3) = steady_velocities(base_, u_ref_);
  x_c_next_ = base_.step(x_c_, u_ref_);
}

Eigen::VectorXd ErrorDynamicsModel::step(const Eigen::VectorXd& e,
                                         const Eigen::VectorXd& ue) const {
  return base_.step(x_c_ + e, u_ref_ + ue) - x_c_next_;
}

void ErrorDynamicsModel::jacobians(const Eigen::VectorXd& e, const Eigen::VectorXd& ue,
                                   Eigen::MatrixXd& A, Eigen::MatrixXd& B) const {
  base_.jacobians(x_c_ + e, u_ref_ + ue, A, B);
}

TrackingSetup make_tracking_setup(double f_d, double m_d, int horizon,
                                  const UsvParams& params, bool calibrate) {
  TrackingSetup setup;
  setup.params = params;
  setup.plant = std::make_shared<UsvModel>(params);
  setup.u_ref = make_vector({f_d, m_d});
  setup.error_model = std::make_shared<ErrorDynamicsModel>(params, setup.u_ref);
  setup.nu_ss = setup.error_model->cruise_state().tail(3);

  OcpSpec spec;
  spec.Q = make_vector({10, 10, 0.1, 1, 1, 1}).asDiagonal();
  spec.R = make_vector({0.01, 0.01}).asDiagonal();
  spec.P = spec.Q;
  spec.horizon = horizon;
  const double inf = std::numeric_limits<double>::infinity();
  // Velocity error bounds are the identified ones shifted by the cruise
  // velocities (exact); position errors get a generous box well inside the
  // arena.
  Eigen::VectorXd lo = make_vector({-10, -10, -inf, -1 - setup.nu_ss[0],
                                    -1 - setup.nu_ss[1], -0.2 - setup.nu_ss[2]});
  Eigen::VectorXd hi = make_vector({10, 10, inf, 2 - setup.nu_ss[0],
                                    1 - setup.nu_ss[1], 0.2 - setup.nu_ss[2]});
  append_box_rows(lo, hi, spec.g_rows, spec.g_rhs);
  spec.u_min = make_vector({-19.6 - f_d, -5 - m_d});
  spec.u_max = make_vector({39.2 - f_d, 5 - m_d});
  spec.gamma0 = 0.9;
  spec.terminal_constraint = false;

  // On the cruise linearization heading couples into the cross-track error,
  // so the exact Riccati solve goes through.
  try {
    setup.law = make_lqr_terminal_law(*setup.error_model, spec.Q, spec.R);
  } catch (const std::runtime_error&) {
    setup.law = make_lqr_terminal_law(*setup.error_model, spec.Q, spec.R, 1e-3);
  }
  spec.terminal_shape = setup.law.weight;
  spec.alpha = 1.0;
  if (calibrate)
    calibrate_terminal_level(spec, setup.law, *setup.error_model, 20000,
                             0x7e51a11cULL, 1e-9);
  spec.validate();
  setup.spec = std::move(spec);
  setup.input_scale = make_vector({3, 3, 0.5, 1, 1, 0.2});
  return setup;
}

ReferenceTrajectory make_reference(const UsvModel& model, const Eigen::VectorXd& x_d0,
                                   const Eigen::VectorXd& u_ref, int steps) {
  ReferenceTrajectory ref;
  ref.u_ref = u_ref;
  ref.states.resize(model.state_dim(), steps + 1);
  ref.states.col(0) = x_d0;
  for (int k = 0; k < steps; ++k)
    ref.states.col(k + 1) = model.step(ref.states.col(k), u_ref);
  return ref;
}

double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w <= 0.0) w += 2.0 * kPi;
  return w - kPi;
}

Eigen::VectorXd canonical_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_d) {
  Eigen::VectorXd e(6);
  const double c = std::cos(x_d[kStatePsi]), s = std::sin(x_d[kStatePsi]);
  const double dx = x[kStateX] - x_d[kStateX], dy = x[kStateY] - x_d[kStateY];
  e[kStateX] = c * dx + s * dy;
  e[kStateY] = -s * dx + c * dy;
  e[kStatePsi] = wrap_angle(x[kStatePsi] - x_d[kStatePsi]);
  e.tail(3) = x.tail(3) - x_d.tail(3);
  return e;
}

namespace {

class NmpcActor final : public Actor {
 public:
  NmpcActor(OcpSpec spec, const DynamicsModel& model, SolverConfig cfg,
            const TerminalLaw* law)
      : spec_(std::move(spec)), model_(model), cfg_(cfg) {
    if (law) law_ = *law;
  }

  Eigen::VectorXd act(const Eigen::VectorXd& x, StepInfo& info) override {
    SolveResult res = solve_ocp(x, spec_, model_, cfg_,
                                cfg_.warm_start && warm_ ? &*warm_ : nullptr);
    if (res.status != SolveStatus::kOptimal)
      throw SolverFailure(step_, res.status,
                          "nmpc actor: solve failed at step " + std::to_string(step_));
    info.latency_s = res.wall_time_s;
    info.violation_before = res.max_violation;
    info.violation_after = res.max_violation;

    Eigen::MatrixXd predicted = rollout(x, res.control, model_);
    ControlSequence shifted(spec_.horizon, spec_.input_dim());
    for (int i = 0; i + 1 < spec_.horizon; ++i)
      shifted.set_input(i, res.control.input(i + 1));
    if (law_)
      shifted.set_input(spec_.horizon - 1,
                        terminal_law_input(predicted.col(spec_.horizon), *law_,
                                           spec_.u_min, spec_.u_max));
    else if (spec_.horizon > 1)
      shifted.set_input(spec_.horizon - 1, res.control.input(spec_.horizon - 1));
    warm_ = std::move(shifted);
    ++step_;
    return res.control.input(0).cwiseMax(spec_.u_min).cwiseMin(spec_.u_max);
  }

  const char* name() const override { return "nmpc"; }

 private:
  OcpSpec spec_;
  const DynamicsModel& model_;
  SolverConfig cfg_;
  std::optional<TerminalLaw> law_;
  std::optional<ControlSequence> warm_;
  int step_ = 0;
};

class PlmpcActor final : public Actor {
 public:
  PlmpcActor(std::shared_ptr<PlmpcController> controller, const DynamicsModel& model)
      : controller_(std::move(controller)), model_(model) {}

  Eigen::VectorXd act(const Eigen::VectorXd& x, StepInfo& info) override {
    return controller_->act(x, model_, &info);
  }

  const char* name() const override { return "plmpc"; }

 private:
  std::shared_ptr<PlmpcController> controller_;
  const DynamicsModel& model_;
};

}  // namespace

std::unique_ptr<Actor> make_nmpc_actor(const OcpSpec& spec, const DynamicsModel& model,
                                       const SolverConfig& cfg, const TerminalLaw* law) {
  return std::make_unique<NmpcActor>(spec, model, cfg, law);
}

std::unique_ptr<Actor> make_plmpc_actor(std::shared_ptr<PlmpcController> controller,
                                        const DynamicsModel& model) {
  return std::make_unique<PlmpcActor>(std::move(controller), model);
}

RunReport run_point_stabilization(Actor& actor, const OcpSpec& metrics_spec,
                                  const DynamicsModel& plant,
                                  const Eigen::VectorXd& x0, int steps) {
  if (steps < 1)
    throw std::invalid_argument("run_point_stabilization: steps must be >= 1");
  RunReport report;
  report.records.reserve(steps);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    RunRecord rec;
    rec.state = x;
    rec.error = x;
    StepInfo info;
    rec.input = actor.act(x, info);
    rec.branch = std::string(actor.name()) == "nmpc"
                     ? -1
                     : static_cast<int>(info.branch);
    rec.latency_s = info.latency_s;
    rec.violation_before = info.violation_before;
    rec.violation_after = info.violation_after;
    rec.stage_cost = stage_cost(x, rec.input, metrics_spec);
    x = plant.step(x, rec.input);
    report.records.push_back(std::move(rec));
  }
  report.final_state = x;
  finalize_report(report, kStatePsi);
  return report;
}

RunReport run_tracking(Actor& actor, const TrackingSetup& setup,
                       const Eigen::VectorXd& x0_abs, int steps) {
  if (steps < 1) throw std::invalid_argument("run_tracking: steps must be >= 1");
  Eigen::VectorXd x_d0 = setup.error_model->cruise_state();
  ReferenceTrajectory ref = make_reference(*setup.plant, x_d0, setup.u_ref, steps);

  RunReport report;
  report.records.reserve(steps);
  Eigen::VectorXd x = x0_abs;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd x_d = ref.states.col(k);
    Eigen::VectorXd e = canonical_error(x, x_d);
    StepInfo info;
    Eigen::VectorXd ue = actor.act(e, info);
    ue = ue.cwiseMax(setup.spec.u_min).cwiseMin(setup.spec.u_max);
    Eigen::VectorXd u = setup.u_ref + ue;

    RunRecord rec;
    rec.state = x;
    rec.reference = x_d;
    rec.error = x - x_d;  // raw n-frame error for metrics
    rec.input = u;
    rec.branch = std::string(actor.name()) == "nmpc"
                     ? -1
                     : static_cast<int>(info.branch);
    rec.latency_s = info.latency_s;
    rec.violation_before = info.violation_before;
    rec.violation_after = info.violation_after;
    rec.stage_cost = stage_cost(e, ue, setup.spec);
    x = setup.plant->step(x, u);
    report.records.push_back(std::move(rec));
  }
  report.final_state = x;
  finalize_report(report, kStatePsi);
  return report;
}

int first_step_within(const RunReport& report, double radius) {
  for (std::size_t k = 0; k < report.records.size(); ++k) {
    const Eigen::VectorXd& x = report.records[k].state;
    if (std::hypot(x[kStateX], x[kStateY]) < radius) return static_cast<int>(k);
  }
  return -1;
}

void write_trajectory_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const bool tracking =
      !report.records.empty() && report.records.front().reference.size() > 0;
  out << "step";
  const Eigen::Index n = report.records.empty() ? 0 : report.records.front().state.size();
  const Eigen::Index m = report.records.empty() ? 0 : report.records.front().input.size();
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  if (tracking)
    for (Eigen::Index i = 0; i < n; ++i) out << ",xd" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",branch,stage_cost,violation_before,violation_after\n";
  for (std::size_t k = 0; k < report.records.size(); ++k) {
    const RunRecord& rec = report.records[k];
    out << k;
    for (Eigen::Index i = 0; i < n; ++i) {
      out << ",";
      format_value(out, rec.state[i]);
    }
    if (tracking)
      for (Eigen::Index i = 0; i < n; ++i) {
        out << ",";
        format_value(out, rec.reference[i]);
      }
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ",";
      format_value(out, rec.input[i]);
    }
    out << "," << rec.branch << ",";
    format_value(out, rec.stage_cost);
    out << ",";
    format_value(out, rec.violation_before);
    out << ",";
    format_value(out, rec.violation_after);
    out << "\n";
  }
}

void write_trace_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "step,branch,latency_s,violation_before,violation_after\n";
  for (std::size_t k = 0; k < report.records.size(); ++k) {
    const RunRecord& rec = report.records[k];
    out << k << "," << rec.branch << ",";
    format_value(out, rec.latency_s);
    out << ",";
    format_value(out, rec.violation_before);
    out << ",";
    format_value(out, rec.violation_after);
    out << "\n";
  }
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,empirical_error,violation_mass,grad_norm,wall_time_s\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ",";
    format_value(out, e.empirical_error);
    out << ",";
    format_value(out, e.violation_mass);
    out << ",";
    format_value(out, e.grad_norm);
    out << ",";
    format_value(out, e.wall_time_s);
    out << "\n";
  }
}

Eigen::MatrixXd read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string token;
    while (std::getline(ls, token, ',')) row.push_back(std::stod(token));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

PolicyModel quick_train_policy(const OcpSpec& spec, const DynamicsModel& model,
                               const TerminalLaw& law,
                               const Eigen::VectorXd& input_scale,
                               const DataGenConfig& gen_cfg,
                               const SolverConfig& solver_cfg,
                               const TrainConfig& train_cfg) {
  std::vector<TrainingSample> samples =
      generate_dataset(gen_cfg, spec, model, solver_cfg, &law);
  DataBuffer buffer(train_cfg.seed ^ 0x854f9d2bULL);
  buffer.add_all(std::move(samples));
  PolicyModel policy = make_policy(spec, input_scale, train_cfg.seed ^ 0x2545f491ULL);
  train(buffer, policy, spec, model, train_cfg);
  return policy;
}

std::vector<BenchRow> bench_latency(const std::vector<int>& horizons, int trials,
                                    std::uint64_t seed, const UsvParams& params) {
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
  };

  for (int N : horizons) {
    StabilizationSetup setup = make_stabilization_setup(N, params);
    SolverConfig solver_cfg;
    TrainConfig train_cfg;
    train_cfg.optimizer = TrainConfig::Optimizer::kAdam;
    train_cfg.learning_rate = 1e-3;
    train_cfg.batch_size = 64;
    train_cfg.max_inner_steps = 150;
    train_cfg.outer_iterations = 2;
    train_cfg.seed = seed + static_cast<std::uint64_t>(N);

    DataGenConfig gen_cfg;
    gen_cfg.num_trajectories = 30;
    gen_cfg.traj_len = 20;
    gen_cfg.seed = seed + 13 * static_cast<std::uint64_t>(N);
    gen_cfg.sampler.tau = 5.0;
    gen_cfg.sampler.lower = make_vector({-65, -65, -kPi, 0, 0, 0});
    gen_cfg.sampler.upper = make_vector({65, 65, kPi, 0, 0, 0});

    PolicyModel policy = quick_train_policy(setup.spec, *setup.model, setup.law,
                                            setup.input_scale, gen_cfg, solver_cfg,
                                            train_cfg);
    auto controller = std::make_shared<PlmpcController>(policy, setup.spec, setup.law,
                                                        GuardConfig{});

    std::vector<double> nmpc_times, plmpc_times;
    nmpc_times.reserve(trials);
    plmpc_times.reserve(trials);
    for (int t = 0; t < trials; ++t) {
      Eigen::VectorXd x(6);
      x << uniform(-65, 65), uniform(-65, 65), uniform(-kPi, kPi), 0, 0, 0;

      SolveResult res = solve_ocp(x, setup.spec, *setup.model, solver_cfg, nullptr);
      nmpc_times.push_back(res.wall_time_s);

      StepInfo info;
      controller->act(x, *setup.model, &info);
      plmpc_times.push_back(info.latency_s);
    }

    BenchRow row;
    row.horizon = N;
    row.nmpc_mean_s = std::accumulate(nmpc_times.begin(), nmpc_times.end(), 0.0) /
                      std::max<std::size_t>(1, nmpc_times.size());
    row.nmpc_p95_s = percentile95(nmpc_times);
    row.plmpc_mean_s = std::accumulate(plmpc_times.begin(), plmpc_times.end(), 0.0) /
                       std::max<std::size_t>(1, plmpc_times.size());
    row.plmpc_p95_s = percentile95(plmpc_times);
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "horizon,nmpc_mean_s,nmpc_p95_s,plmpc_mean_s,plmpc_p95_s\n";
  for (const auto& r : rows) {
    out << r.horizon << ",";
    format_value(out, r.nmpc_mean_s);
    out << ",";
    format_value(out, r.nmpc_p95_s);
    out << ",";
    format_value(out, r.plmpc_mean_s);
    out << ",";
    format_value(out, r.plmpc_p95_s);
    out << "\n";
  }
}

EvalReport evaluate_policy(const std::vector<TrainingSample>& samples,
                           const PolicyModel& policy, const OcpSpec& spec,
                           const DynamicsModel& model, const GuardConfig& guard,
                           const EvalSettings& settings) {
  if (samples.empty()) throw std::invalid_argument("evaluate_policy: empty set");
  const std::size_t M = samples.size();
  constexpr int kChunks = 16;

  std::vector<double> losses(M), rels(M);
  std::vector<int> viol_before(M, 0), viol_after(M, 0);
  std::vector<long> chunk_clamped(kChunks, 0), chunk_guard_fail(kChunks, 0);
  const double clamp_floor = -1e-5;

  parallel_chunks(M, kChunks, [&](int c, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const TrainingSample& s = samples[k];
      ControlSequence U = policy.eval(s.state);
      double loss = cost(s.state, U, spec, model) - s.optimal_cost;
      if (loss < 0.0 && loss >= clamp_floor) {
        loss = 0.0;
        ++chunk_clamped[c];
      }
      losses[k] = loss;
      rels[k] = loss / std::max(s.optimal_cost, 1.0);

      Eigen::VectorXd g = constraints(s.state, U, spec, model);
      double vb = g.maxCoeff();
      double va = vb;
      if (vb > settings.violation_tolerance) {
        viol_before[k] = 1;
        try {
          GuardReport rep;
          project_feasible(s.state, U, spec, model, guard, &rep);
          va = rep.final_violation;
        } catch (const GuardFailure& f) {
          va = f.final_violation;
          ++chunk_guard_fail[c];
        }
      }
      if (va > settings.violation_tolerance) viol_after[k] = 1;
    }
  });

  EvalReport report;
  for (int c = 0; c < kChunks; ++c) {
    report.clamped_losses += chunk_clamped[c];
    report.guard_failures += chunk_guard_fail[c];
  }
  report.r_emp = std::accumulate(losses.begin(), losses.end(), 0.0) /
                 static_cast<double>(M);
  report.mean_rel_subopt = std::accumulate(rels.begin(), rels.end(), 0.0) /
                           static_cast<double>(M);
  {
    std::vector<double> sorted = rels;
    std::sort(sorted.begin(), sorted.end());
    report.median_rel_subopt =
        M % 2 == 1 ? sorted[M / 2] : 0.5 * (sorted[M / 2 - 1] + sorted[M / 2]);
  }
  report.violation_fraction_before =
      std::accumulate(viol_before.begin(), viol_before.end(), 0) /
      static_cast<double>(M);
  report.violation_fraction_after =
      std::accumulate(viol_after.begin(), viol_after.end(), 0) /
      static_cast<double>(M);

  report.histogram_edges = {1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4};
  report.histogram_counts.assign(report.histogram_edges.size() + 1, 0);
  for (double loss : losses) {
    std::size_t bin = 0;
    while (bin < report.histogram_edges.size() && loss > report.histogram_edges[bin])
      ++bin;
    ++report.histogram_counts[bin];
  }

  BoundInputs bound;
  bound.empirical_error = std::max(0.0, report.r_emp);
  bound.sample_count =
      settings.bound_samples > 0 ? settings.bound_samples : static_cast<double>(M);
  bound.delta = settings.delta;
  bound.c = settings.c;
  bound.epsilon = settings.epsilon;
  report.bound = stability_bound(bound);
  return report;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "metric,value\n";
  auto emit = [&](const char* key, double value) {
    out << key << ",";
    format_value(out, value);
    out << "\n";
  };
  emit("r_emp", report.r_emp);
  emit("median_rel_subopt", report.median_rel_subopt);
  emit("mean_rel_subopt", report.mean_rel_subopt);
  emit("violation_fraction_before", report.violation_fraction_before);
  emit("violation_fraction_after", report.violation_fraction_after);
  emit("bound", report.bound);
  emit("clamped_losses", static_cast<double>(report.clamped_losses));
  emit("guard_failures", static_cast<double>(report.guard_failures));
  for (std::size_t b = 0; b < report.histogram_counts.size(); ++b) {
    out << "hist_bin_" << b << "," << report.histogram_counts[b] << "\n";
  }
}

}  // namespace plmpc
