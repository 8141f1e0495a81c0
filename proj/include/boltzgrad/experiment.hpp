#pragma once

#include <map>
#include <string>
#include <vector>

#include "boltzgrad/ensemble.hpp"
#include "boltzgrad/verify.hpp"

namespace boltzgrad {

enum class SweepAxis { N, M, Kappa };

struct ExperimentPlan {
  SimConfig base;
  SweepAxis axis = SweepAxis::N;
  std::vector<double> values;  // axis values; N and M values must be integral
  int m_s = 100;
  std::vector<Objective> objectives{Objective::Ty};
  std::string out_prefix = "experiment";
  bool ablate_btilde = false;
  double delta_m = 0.1;
  double sigma_v_override = 0.0;  // 0 = derive Sigma_v from beta
  bool timestamp = true;          // timestamp header + wall-time columns
};

// One CSV per objective, one row per (sweep value, parameter). Returns the
// written paths.
std::vector<std::string> run_experiment(const ExperimentPlan& plan);

// Per-step component temperatures and total second moment; columns
// t,Tx,Ty,Tz,energy.
std::string run_relaxation(const SimConfig& cfg, const std::string& out_path,
                           bool timestamp = true);

struct CalibrationOptions {
  std::array<double, 3> targets{1.0, 1.0, 1.0};
  double step_size = 0.5;
  int iterations = 20;
  std::string out_path = "calibration.csv";
  bool timestamp = true;
};

struct CalibrationResult {
  std::array<double, 3> final_m{};
  double final_loss = 0.0;
  int iterations_run = 0;
  bool diverged = false;
  std::string message;
};

// Gradient descent on 1/2 sum_l (T_l(T) - target_l)^2 using the adjoint
// gradient matrix; emits per-iteration parameters and loss. Halts with a
// diagnostic after five consecutive loss increases.
CalibrationResult calibrate(const SimConfig& cfg, const CalibrationOptions& opts);

// Flat key=value configuration text ('#' comments). Unknown keys are an
// error; values follow the CLI flag syntax.
std::map<std::string, std::string> read_config_file(const std::string& path);
void apply_config(const std::map<std::string, std::string>& kv, SimConfig& cfg);

// Shortest round-trip decimal formatting.
std::string format_double(double v);

}  // namespace boltzgrad
