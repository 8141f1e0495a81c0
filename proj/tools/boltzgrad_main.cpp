// boltzgrad command-line driver: experiment sweeps, relaxation runs,
// calibration, and single gradient evaluations.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "boltzgrad/experiment.hpp"
#include "boltzgrad/forward.hpp"
#include "boltzgrad/reduce.hpp"
#include "boltzgrad/verify.hpp"

namespace {

using namespace boltzgrad;

// One bundle of simulation flags per subcommand; values are layered as
// defaults < config file < explicit flags.
struct SimFlags {
  std::string config_path;
  std::int64_t n = 10000;
  int m_steps = 20;
  double dt = 0.1;
  double kappa = 0.0;
  double beta = 1.0;
  double epsilon = 10.0;
  double sigma_v = 0.0;
  std::uint64_t seed = 12345;
  std::string algorithm = "separable";
  double tx0 = 1.0, ty0 = 1.0, tz0 = 0.5;
  int threads = 0;

  CLI::Option* o_n = nullptr;
  CLI::Option* o_m = nullptr;
  CLI::Option* o_dt = nullptr;
  CLI::Option* o_kappa = nullptr;
  CLI::Option* o_beta = nullptr;
  CLI::Option* o_eps = nullptr;
  CLI::Option* o_sigv = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_alg = nullptr;
  CLI::Option* o_tx = nullptr;
  CLI::Option* o_ty = nullptr;
  CLI::Option* o_tz = nullptr;
  CLI::Option* o_threads = nullptr;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--config", f.config_path, "flat key=value configuration file");
  f.o_n = cmd->add_option("--n", f.n, "number of particles (even)");
  f.o_m = cmd->add_option("--m-steps", f.m_steps, "number of time steps");
  f.o_dt = cmd->add_option("--dt", f.dt, "time step");
  f.o_kappa = cmd->add_option("--kappa", f.kappa, "angular exponent");
  f.o_beta = cmd->add_option("--beta", f.beta, "velocity exponent");
  f.o_eps = cmd->add_option("--epsilon", f.epsilon, "collision-rate scale");
  f.o_sigv = cmd->add_option("--sigma-v", f.sigma_v, "velocity-part bound (default 10^beta)");
  f.o_seed = cmd->add_option("--seed", f.seed, "random seed");
  f.o_alg = cmd->add_option("--algorithm", f.algorithm, "separable|general");
  f.o_tx = cmd->add_option("--tx0", f.tx0, "initial temperature, x");
  f.o_ty = cmd->add_option("--ty0", f.ty0, "initial temperature, y");
  f.o_tz = cmd->add_option("--tz0", f.tz0, "initial temperature, z");
  f.o_threads = cmd->add_option("--threads", f.threads,
                                "worker threads (default: BOLTZGRAD_THREADS or OpenMP)");
}

SimConfig build_config(const SimFlags& f) {
  SimConfig cfg;
  bool sigma_v_explicit = false;
  if (!f.config_path.empty()) {
    const auto kv = read_config_file(f.config_path);
    apply_config(kv, cfg);
    sigma_v_explicit = kv.count("sigma_v") > 0;
  }
  double kappa = cfg.kernel.kappa, beta = cfg.kernel.beta, eps = cfg.kernel.epsilon;
  double sigv = sigma_v_explicit ? cfg.kernel.sigma_v : 0.0;
  if (f.o_n->count()) cfg.n_particles = f.n;
  if (f.o_m->count()) cfg.n_steps = f.m_steps;
  if (f.o_dt->count()) cfg.dt = f.dt;
  if (f.o_seed->count()) cfg.seed = f.seed;
  if (f.o_kappa->count()) kappa = f.kappa;
  if (f.o_beta->count()) beta = f.beta;
  if (f.o_eps->count()) eps = f.epsilon;
  if (f.o_sigv->count()) sigv = f.sigma_v;
  if (f.o_alg->count()) {
    if (f.algorithm == "separable")
      cfg.algorithm = Algorithm::Separable;
    else if (f.algorithm == "general")
      cfg.algorithm = Algorithm::General;
    else
      throw CLI::ValidationError("--algorithm must be separable or general");
  }
  if (f.o_tx->count()) cfg.initial_temperatures[0] = f.tx0;
  if (f.o_ty->count()) cfg.initial_temperatures[1] = f.ty0;
  if (f.o_tz->count()) cfg.initial_temperatures[2] = f.tz0;
  cfg.kernel = make_kernel_spec(kappa, beta, eps, sigv);

  int threads = f.threads;
  if (!f.o_threads->count()) {
    if (const char* env = std::getenv("BOLTZGRAD_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) set_thread_count(threads);
  validate(cfg);
  return cfg;
}

// "axis=v1,v2,..." with axis one of n, m, kappa.
void parse_sweep(const std::string& text, ExperimentPlan& plan) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw CLI::ValidationError("--sweep expects axis=v1,v2,... (axis: n, m, kappa)");
  const std::string axis = text.substr(0, eq);
  if (axis == "n")
    plan.axis = SweepAxis::N;
  else if (axis == "m")
    plan.axis = SweepAxis::M;
  else if (axis == "kappa")
    plan.axis = SweepAxis::Kappa;
  else
    throw CLI::ValidationError("unknown sweep axis: " + axis);
  plan.values.clear();
  std::string rest = text.substr(eq + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto comma = rest.find(',', pos);
    const std::string tok = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!tok.empty()) plan.values.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (plan.values.empty()) throw CLI::ValidationError("--sweep has no values");
}

std::array<double, 3> parse_triple(const std::string& text, const char* what) {
  std::array<double, 3> out{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (tok.empty()) throw CLI::ValidationError(std::string(what) + " expects a,b,c");
    out[static_cast<std::size_t>(i)] = std::stod(tok);
    if (comma == std::string::npos && i < 2)
      throw CLI::ValidationError(std::string(what) + " expects a,b,c");
    pos = comma + 1;
  }
  return out;
}

void warn_violations(std::int64_t count) {
  if (count > 0)
    std::cerr << "warning: " << count
              << " collision pair(s) exceeded the kernel bound; consider a larger --sigma-v\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle Boltzmann solver with adjoint gradients"};
  app.require_subcommand(1);

  // experiment ------------------------------------------------------------
  auto* exp = app.add_subcommand("experiment", "sweep + gradient comparison CSVs");
  SimFlags exp_flags;
  add_sim_flags(exp, exp_flags);
  std::string sweep_text;
  int runs = 100;
  double delta_m = 0.1;
  std::vector<std::string> objective_names;
  std::string out_prefix = "experiment";
  bool ablate = false, no_timestamp = false;
  exp->add_option("--sweep", sweep_text, "axis=v1,v2,... (axis: n, m, kappa)");
  exp->add_option("--runs", runs, "replicates per sweep value");
  exp->add_option("--delta-m", delta_m, "finite-difference step");
  exp->add_option("--objective", objective_names, "objective (repeatable): Tx, Ty, Tz");
  exp->add_option("--out", out_prefix, "output file prefix");
  exp->add_flag("--ablate-btilde", ablate, "drop the angular term from the adjoint Jacobian");
  exp->add_flag("--no-timestamp", no_timestamp,
                "omit the timestamp header and wall-time columns (byte-reproducible output)");

  // relax -----------------------------------------------------------------
  auto* relax = app.add_subcommand("relax", "per-step component temperatures CSV");
  SimFlags relax_flags;
  add_sim_flags(relax, relax_flags);
  std::string relax_out = "relaxation.csv";
  bool relax_no_ts = false;
  relax->add_option("--out", relax_out, "output CSV path");
  relax->add_flag("--no-timestamp", relax_no_ts, "omit the timestamp header");

  // calibrate ---------------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate", "gradient descent on target moments");
  SimFlags cal_flags;
  add_sim_flags(cal, cal_flags);
  std::string targets_text = "1,1,1";
  CalibrationOptions cal_opts;
  cal->add_option("--targets", targets_text, "target moments Tx,Ty,Tz");
  cal->add_option("--step-size", cal_opts.step_size, "descent step size");
  cal->add_option("--iterations", cal_opts.iterations, "iteration count");
  cal->add_option("--out", cal_opts.out_path, "trajectory CSV path");
  bool cal_no_ts = false;
  cal->add_flag("--no-timestamp", cal_no_ts, "omit the timestamp header");

  // gradient ----------------------------------------------------------------
  auto* grad = app.add_subcommand("gradient", "one adjoint gradient evaluation");
  SimFlags grad_flags;
  add_sim_flags(grad, grad_flags);
  std::string grad_obj = "Ty";
  bool with_fd = false, grad_ablate = false;
  double grad_delta = 0.1;
  grad->add_option("--objective", grad_obj, "objective: Tx, Ty, Tz, energy");
  grad->add_flag("--with-fd", with_fd, "also compute the central finite difference");
  grad->add_option("--delta-m", grad_delta, "finite-difference step");
  grad->add_flag("--ablate-btilde", grad_ablate, "drop the angular term");

  CLI11_PARSE(app, argc, argv);

  try {
    if (exp->parsed()) {
      ExperimentPlan plan;
      plan.base = build_config(exp_flags);
      plan.m_s = runs;
      plan.delta_m = delta_m;
      plan.out_prefix = out_prefix;
      plan.ablate_btilde = ablate;
      plan.timestamp = !no_timestamp;
      plan.sigma_v_override = exp_flags.o_sigv->count() ? exp_flags.sigma_v : 0.0;
      if (!sweep_text.empty())
        parse_sweep(sweep_text, plan);
      else
        plan.values = {static_cast<double>(plan.base.n_particles)};
      plan.objectives.clear();
      if (objective_names.empty()) objective_names.push_back("Ty");
      for (const auto& name : objective_names)
        plan.objectives.push_back(objective_from_name(name));
      const auto files = run_experiment(plan);
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
    } else if (relax->parsed()) {
      const SimConfig cfg = build_config(relax_flags);
      std::cout << "wrote " << run_relaxation(cfg, relax_out, !relax_no_ts) << "\n";
    } else if (cal->parsed()) {
      const SimConfig cfg = build_config(cal_flags);
      cal_opts.targets = parse_triple(targets_text, "--targets");
      cal_opts.timestamp = !cal_no_ts;
      const auto res = calibrate(cfg, cal_opts);
      std::cout << "wrote " << cal_opts.out_path << "\n";
      std::cout << "final m = (" << format_double(res.final_m[0]) << ", "
                << format_double(res.final_m[1]) << ", " << format_double(res.final_m[2])
                << "), loss = " << format_double(res.final_loss) << ", iterations = "
                << res.iterations_run << "\n";
      if (res.diverged) {
        std::cerr << res.message << "\n";
        return 2;
      }
    } else if (grad->parsed()) {
      const SimConfig cfg = build_config(grad_flags);
      const Objective obj = objective_from_name(grad_obj);
      const auto fwd = run_forward(cfg);
      const auto res =
          adjoint_gradient(fwd, cfg, obj, grad_ablate ? BTildeMode::Off : BTildeMode::Auto);
      warn_violations(res.bound_violations);
      std::cout << "objective " << objective_name(obj) << " = "
                << format_double(objective_value(fwd.final_ensemble, obj)) << "\n";
      const char* params[3] = {"Tx0", "Ty0", "Tz0"};
      for (int p = 0; p < 3; ++p)
        std::cout << "dJ/d" << params[p] << " (adjoint) = "
                  << format_double(res.grad[static_cast<std::size_t>(p)]) << "\n";
      if (with_fd) {
        const auto fd = fd_gradient(cfg, obj, grad_delta);
        for (int p = 0; p < 3; ++p)
          std::cout << "dJ/d" << params[p] << " (fd)      = "
                    << format_double(fd[static_cast<std::size_t>(p)]) << "\n";
      }
      std::cout << "forward " << format_double(res.wall_seconds_forward) << " s, adjoint "
                << format_double(res.wall_seconds_adjoint) << " s\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
