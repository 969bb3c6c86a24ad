// Command-line front end: data generation, training, evaluation, closed-loop
// simulation, latency benchmarking, and terminal-set validation.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plmpc/config.hpp"
#include "plmpc/experiments.hpp"

namespace {

using namespace plmpc;

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out;
};

ConfigFile load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty()) return ConfigFile::parse("");
  return ConfigFile::load(opts.config_path);
}

Eigen::VectorXd parse_state(const std::string& text) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) values.push_back(std::stod(token));
  if (values.size() != 6)
    throw std::runtime_error("expected 6 comma-separated state entries");
  Eigen::VectorXd x(6);
  for (int i = 0; i < 6; ++i) x[i] = values[i];
  return x;
}

SamplerConfig default_sampler_box() {
  SamplerConfig sampler;
  sampler.lower = Eigen::VectorXd::Zero(6);
  sampler.upper = Eigen::VectorXd::Zero(6);
  sampler.lower << -70, -70, -3.14159265358979323846, 0, 0, 0;
  sampler.upper << 70, 70, 3.14159265358979323846, 0, 0, 0;
  return sampler;
}

SamplerConfig tracking_sampler_box() {
  SamplerConfig sampler;
  sampler.tau = 0.4;
  sampler.lower = Eigen::VectorXd::Zero(6);
  sampler.upper = Eigen::VectorXd::Zero(6);
  sampler.lower << -3, -3, -0.5, 0, 0, 0;
  sampler.upper << 3, 3, 0.5, 0, 0, 0;
  return sampler;
}

int cmd_gen_data(const GlobalOptions& global, int count, int traj_len, double tau,
                 double gamma, int period, bool track) {
  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);
  SolverConfig solver_cfg;
  apply_solver_config(cfg, solver_cfg);

  DataGenConfig gen;
  gen.sampler = track ? tracking_sampler_box() : default_sampler_box();
  gen.num_trajectories = count;
  gen.traj_len = traj_len;
  gen.seed = global.seed;
  if (tau > 0) gen.sampler.tau = tau;
  if (gamma > 0) gen.sampler.discount = gamma;
  if (period > 0) gen.sampler.period = period;
  apply_sampler_config(cfg, gen);

  const OcpSpec* spec = nullptr;
  const DynamicsModel* model = nullptr;
  StabilizationSetup stab;
  TrackingSetup trackset;
  if (track) {
    trackset = make_tracking_setup(17.5, 1.0, 15, params);
    apply_ocp_config(cfg, trackset.spec);
    spec = &trackset.spec;
    model = trackset.error_model.get();
  } else {
    stab = make_stabilization_setup(15, params);
    apply_ocp_config(cfg, stab.spec);
    spec = &stab.spec;
    model = stab.model.get();
  }

  std::vector<TrainingSample> samples =
      generate_dataset(gen, *spec, *model,
                       solver_cfg, track ? &trackset.law : &stab.law);

  DatasetHeader header;
  header.state_dim = spec->state_dim();
  header.input_dim = spec->input_dim();
  header.horizon = spec->horizon;
  header.count = samples.size();
  header.seed = gen.seed;
  header.model_hash = model_hash(*model);
  header.spec_hash = spec_hash(*spec);
  write_dataset(global.out, header, samples);
  std::cout << "wrote " << samples.size() << " records to " << global.out << "\n";
  return 0;
}

int cmd_train(const GlobalOptions& global, const std::string& data_path, bool track) {
  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);

  auto [header, samples] = read_dataset(data_path);
  DataBuffer buffer(global.seed ^ 0x854f9d2bULL);
  buffer.add_all(std::move(samples));

  TrainConfig train_cfg;
  train_cfg.optimizer = TrainConfig::Optimizer::kAdam;
  train_cfg.seed = global.seed;
  apply_train_config(cfg, train_cfg);

  PolicyModel policy;
  TrainReport report;
  if (track) {
    TrackingSetup setup = make_tracking_setup(17.5, 1.0, header.horizon, params);
    apply_ocp_config(cfg, setup.spec);
    policy = make_policy(setup.spec, setup.input_scale, train_cfg.seed ^ 0x2545f491ULL);
    report = train(buffer, policy, setup.spec, *setup.error_model, train_cfg);
  } else {
    StabilizationSetup setup = make_stabilization_setup(header.horizon, params);
    apply_ocp_config(cfg, setup.spec);
    policy = make_policy(setup.spec, setup.input_scale, train_cfg.seed ^ 0x2545f491ULL);
    report = train(buffer, policy, setup.spec, *setup.model, train_cfg);
  }
  if (report.aborted) {
    std::cerr << "training aborted: " << report.abort_reason << "\n";
    return 1;
  }

  std::map<std::string, std::string> metadata;
  metadata["dataset_hash"] = header.spec_hash;
  metadata["training_steps"] = std::to_string(report.inner_steps);
  if (!report.epochs.empty())
    metadata["final_empirical_error"] =
        encode_double(report.epochs.back().empirical_error);
  save_policy(policy, global.out, metadata);
  write_train_report_csv(global.out + ".train.csv", report);

  std::cout << "trained policy saved to " << global.out << "\n";
  for (const auto& e : report.epochs)
    std::printf("epoch %d  empirical_error %.6g  violation_mass %.6g  grad %.3g\n",
                e.epoch, e.empirical_error, e.violation_mass, e.grad_norm);
  return 0;
}

int cmd_eval(const GlobalOptions& global, const std::string& data_path,
             const std::string& checkpoint, double bound_m, bool track) {
  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);
  auto [header, samples] = read_dataset(data_path);
  PolicyModel policy = load_policy(checkpoint);

  GuardConfig guard;
  apply_guard_config(cfg, guard);
  EvalSettings settings;
  settings.bound_samples = bound_m;

  EvalReport report;
  if (track) {
    TrackingSetup setup = make_tracking_setup(17.5, 1.0, header.horizon, params);
    report = evaluate_policy(samples, policy, setup.spec, *setup.error_model, guard,
                             settings);
  } else {
    StabilizationSetup setup = make_stabilization_setup(header.horizon, params);
    report = evaluate_policy(samples, policy, setup.spec, *setup.model, guard,
                             settings);
  }
  if (!global.out.empty()) write_eval_csv(global.out, report);

  std::printf("samples              %zu\n", samples.size());
  std::printf("empirical error      %.6g\n", report.r_emp);
  std::printf("median rel subopt    %.4f\n", report.median_rel_subopt);
  std::printf("violations before    %.4f\n", report.violation_fraction_before);
  std::printf("violations after     %.4f\n", report.violation_fraction_after);
  std::printf("probability bound    %.6g\n", report.bound);
  return 0;
}

int cmd_simulate(const GlobalOptions& global, const std::string& mode,
                 const std::string& controller, const std::string& checkpoint,
                 const std::string& x0_text, int steps, const std::string& trace) {
  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);
  SolverConfig solver_cfg;
  apply_solver_config(cfg, solver_cfg);
  GuardConfig guard;
  apply_guard_config(cfg, guard);

  RunReport report;
  if (mode == "point") {
    StabilizationSetup setup = make_stabilization_setup(15, params);
    apply_ocp_config(cfg, setup.spec);
    Eigen::VectorXd x0 = x0_text.empty() ? parse_state("-64,-64,0,0,0,0")
                                         : parse_state(x0_text);
    std::unique_ptr<Actor> actor;
    std::shared_ptr<PlmpcController> ctl;
    if (controller == "nmpc") {
      actor = make_nmpc_actor(setup.spec, *setup.model, solver_cfg, &setup.law);
    } else {
      ctl = std::make_shared<PlmpcController>(load_policy(checkpoint), setup.spec,
                                              setup.law, guard);
      actor = make_plmpc_actor(ctl, *setup.model);
    }
    report = run_point_stabilization(*actor, setup.spec, *setup.model, x0, steps);
  } else if (mode == "track") {
    TrackingSetup setup = make_tracking_setup(17.5, 1.0, 15, params);
    apply_ocp_config(cfg, setup.spec);
    Eigen::VectorXd x0 = setup.error_model->cruise_state();
    if (!x0_text.empty()) x0 = parse_state(x0_text);
    std::unique_ptr<Actor> actor;
    std::shared_ptr<PlmpcController> ctl;
    if (controller == "nmpc") {
      actor = make_nmpc_actor(setup.spec, *setup.error_model, solver_cfg, &setup.law);
    } else {
      ctl = std::make_shared<PlmpcController>(load_policy(checkpoint), setup.spec,
                                              setup.law, guard);
      actor = make_plmpc_actor(ctl, *setup.error_model);
    }
    report = run_tracking(*actor, setup, x0, steps);
  } else {
    std::cerr << "unknown mode " << mode << "\n";
    return 1;
  }

  if (!global.out.empty()) write_trajectory_csv(global.out, report);
  if (!trace.empty()) write_trace_csv(trace, report);

  std::printf("steps          %zu\n", report.records.size());
  std::printf("total cost     %.6g\n", report.total_cost);
  std::printf("mean latency   %.3g ms\n", 1e3 * report.mean_latency_s);
  std::printf("p95 latency    %.3g ms\n", 1e3 * report.p95_latency_s);
  std::printf("guard rate     %.4f\n", report.guard_rate);
  std::printf("rms            ");
  for (Eigen::Index i = 0; i < report.rms.size(); ++i)
    std::printf("%.4g ", report.rms[i]);
  std::printf("\n");
  int settle = first_step_within(report, 0.5);
  if (settle >= 0) std::printf("reached 0.5 m ball at step %d\n", settle);
  return 0;
}

int cmd_bench(const GlobalOptions& global, const std::string& horizons_text,
              int trials) {
  std::vector<int> horizons;
  std::istringstream in(horizons_text);
  std::string token;
  while (std::getline(in, token, ',')) horizons.push_back(std::stoi(token));

  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);
  std::vector<BenchRow> rows = bench_latency(horizons, trials, global.seed, params);
  if (!global.out.empty()) write_bench_csv(global.out, rows);

  std::printf("%8s %14s %14s %14s %14s\n", "N", "nmpc mean", "nmpc p95",
              "plmpc mean", "plmpc p95");
  for (const auto& r : rows)
    std::printf("%8d %12.3f ms %12.3f ms %12.3f ms %12.3f ms\n", r.horizon,
                1e3 * r.nmpc_mean_s, 1e3 * r.nmpc_p95_s, 1e3 * r.plmpc_mean_s,
                1e3 * r.plmpc_p95_s);
  return 0;
}

int cmd_validate_terminal(const GlobalOptions& global, int samples, bool track) {
  ConfigFile cfg = load_config(global);
  UsvParams params = usv_params_from(cfg);

  OcpSpec spec;
  TerminalLaw law;
  const DynamicsModel* model = nullptr;
  StabilizationSetup stab;
  TrackingSetup trackset;
  if (track) {
    trackset = make_tracking_setup(17.5, 1.0, 15, params);
    spec = trackset.spec;
    law = trackset.law;
    model = trackset.error_model.get();
  } else {
    stab = make_stabilization_setup(15, params);
    spec = stab.spec;
    law = stab.law;
    model = stab.model.get();
  }
  apply_ocp_config(cfg, spec);

  TerminalValidation rep = validate_terminal(spec, law, *model, samples, global.seed);
  std::printf("alpha                  %.8g\n", spec.alpha);
  std::printf("samples                %d\n", rep.samples);
  std::printf("max violation          %.3e\n", rep.max_violation);
  std::printf("fraction ok            %.6f\n", rep.fraction_ok);
  std::printf("largest passing alpha  %.8g\n", rep.largest_passing_alpha);
  return rep.fraction_ok == 1.0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-learning NMPC toolkit for surface-vessel motion control"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "configuration file");
  app.add_option("--seed", global.seed, "global seed");
  app.add_option("--out", global.out, "output path");

  auto* gen = app.add_subcommand("gen-data", "generate an expert dataset");
  int count = 500, traj_len = 100, period = -1;
  double tau = -1, gamma = -1;
  bool gen_track = false;
  gen->add_option("--count", count, "number of trajectories (H)");
  gen->add_option("--traj-len", traj_len, "steps per trajectory (L)");
  gen->add_option("--tau", tau, "sampler base distance");
  gen->add_option("--gamma", gamma, "sampler discount");
  gen->add_option("--K", period, "sampler shrink period");
  gen->add_flag("--track", gen_track, "error-state dataset for tracking");

  auto* tr = app.add_subcommand("train", "train a policy on a dataset");
  std::string data_path;
  bool train_track = false;
  tr->add_option("--data", data_path, "dataset path")->required();
  tr->add_flag("--track", train_track, "tracking checkpoint");

  auto* ev = app.add_subcommand("eval", "evaluate a policy on a dataset");
  std::string eval_data, eval_ckpt;
  double bound_m = -1;
  bool eval_track = false;
  ev->add_option("--data", eval_data, "dataset path")->required();
  ev->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  ev->add_option("--bound-M", bound_m, "sample count M used in the bound");
  ev->add_flag("--track", eval_track, "tracking evaluation");

  auto* sim = app.add_subcommand("simulate", "closed-loop simulation");
  std::string mode = "point", controller = "nmpc", ckpt, x0_text, trace;
  int steps = 600;
  sim->add_option("--mode", mode, "point|track")
      ->check(CLI::IsMember({"point", "track"}));
  sim->add_option("--controller", controller, "nmpc|plmpc")
      ->check(CLI::IsMember({"nmpc", "plmpc"}));
  sim->add_option("--checkpoint", ckpt, "policy checkpoint (plmpc)");
  sim->add_option("--x0", x0_text, "initial state, comma separated");
  sim->add_option("--steps", steps, "closed-loop steps");
  sim->add_option("--trace", trace, "per-step trace CSV (includes latencies)");

  auto* bench = app.add_subcommand("bench", "paired one-step latency benchmark");
  std::string horizons = "5,10,15,20,25";
  int trials = 50;
  bench->add_option("--horizons", horizons, "comma-separated horizon list");
  bench->add_option("--trials", trials, "paired timings per horizon");

  auto* vt = app.add_subcommand("validate-terminal", "Monte-Carlo terminal check");
  int vt_samples = 10000;
  bool vt_track = false;
  vt->add_option("--samples", vt_samples, "sample count");
  vt->add_flag("--track", vt_track, "validate the tracking terminal law");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(global, count, traj_len, tau, gamma, period, gen_track);
    if (tr->parsed()) return cmd_train(global, data_path, train_track);
    if (ev->parsed()) return cmd_eval(global, eval_data, eval_ckpt, bound_m, eval_track);
    if (sim->parsed()) return cmd_simulate(global, mode, controller, ckpt, x0_text, steps, trace);
    if (bench->parsed()) return cmd_bench(global, horizons, trials);
    if (vt->parsed()) return cmd_validate_terminal(global, vt_samples, vt_track);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
