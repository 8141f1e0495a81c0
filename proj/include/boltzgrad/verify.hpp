#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "boltzgrad/adjoint.hpp"
#include "boltzgrad/ensemble.hpp"

namespace boltzgrad {

enum class Method { Adjoint, FiniteDifference };

// One forward run, objective at final time.
double simulate_objective(const SimConfig& cfg, Objective o);

// Central finite difference on an arbitrary map of the initial temperatures;
// the simulator-backed overloads bind J to a forward run under a fixed seed
// (common random numbers).
double fd_component_custom(const std::function<double(const std::array<double, 3>&)>& j_of_m,
                           std::array<double, 3> m, int param, double delta_m);

double fd_gradient_component(const SimConfig& cfg, Objective o, int param, double delta_m);
std::array<double, 3> fd_gradient(const SimConfig& cfg, Objective o, double delta_m);

// [objective l][parameter p] gradient entries.
struct GradientMatrix {
  std::array<std::array<double, 3>, 3> g{};
};

// One forward run + three backward passes (objectives Tx, Ty, Tz).
GradientMatrix adjoint_gradient_matrix(const SimConfig& cfg, BTildeMode mode,
                                       GradientResult* meta = nullptr);

// Six forward runs (all objectives share them).
GradientMatrix fd_gradient_matrix(const SimConfig& cfg, double delta_m);

struct MatrixStatistics {
  GradientMatrix mean;
  GradientMatrix std_of_mean;  // sample std / sqrt(m_s)
  GradientMatrix per_run_std;  // sample std of the raw per-run gradients
  std::vector<GradientMatrix> per_run;
  int m_s = 0;
  double mean_forward_seconds = 0.0;
  double mean_adjoint_seconds = 0.0;
  std::int64_t bound_violations = 0;
  std::int64_t eta_guard_hits = 0;
};

// m_s independent replicates with seed = base_seed + r * seed_stride;
// replicates run in parallel, results ordered by run index.
MatrixStatistics batch_gradient_matrices(const SimConfig& cfg, Method method, int m_s,
                                         std::uint64_t base_seed, BTildeMode mode,
                                         double delta_m, std::uint64_t seed_stride = 1);

struct RunStatistics {
  std::array<double, 3> mean{};
  std::array<double, 3> std_of_mean{};
  std::array<double, 3> per_run_std{};
  int m_s = 0;
  std::vector<std::array<double, 3>> per_run;
};

RunStatistics batch_statistics(const SimConfig& cfg, Method method, Objective o, int m_s,
                               std::uint64_t base_seed, BTildeMode mode = BTildeMode::Auto,
                               double delta_m = 0.1, std::uint64_t seed_stride = 1);

// Componentwise |mean_a - mean_b|.
std::array<double, 3> gradient_error(const RunStatistics& a, const RunStatistics& b);

}  // namespace boltzgrad
