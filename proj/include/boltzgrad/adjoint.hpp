#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "boltzgrad/ensemble.hpp"
#include "boltzgrad/forward.hpp"
#include "boltzgrad/records.hpp"

namespace boltzgrad {

// Whether the adjoint Jacobian carries the angular correction term. Auto
// resolves to on for angle-dependent kernels (kappa > 0) and off otherwise;
// On/Off force it either way (ablation studies).
enum class BTildeMode { Auto, On, Off };

bool use_btilde_for(const KernelSpec& ks, BTildeMode mode);

// Influence vectors gamma_i^k plus the cached final-time observable values
// consumed by the score terms.
struct AdjointState {
  std::vector<Vec3> gammas;
  std::vector<double> phi_final;
  std::int32_t step_index = 0;
  double rho = 1.0;
};

struct AdjointDiagnostics {
  std::int64_t eta_guard_hits = 0;  // rejection scores zeroed at the bound boundary
};

// gamma_i^M = (rho/N) phi'(v_i^M), with phi(v_i^M) cached.
AdjointState final_gamma(const VelocityEnsemble& final_ensemble, Objective objective);

// Score contribution of one logged pair; the partner entry is the exact
// negation. Degenerate pairs (|u| below tolerance) contribute zero.
std::pair<Vec3, Vec3> eta_term(const PairEvent& ev, double phi_i, double phi_i1,
                               const KernelSpec& ks, Algorithm alg, double rho,
                               std::int64_t n, std::int64_t* guard_hits = nullptr);

// One backward step k+1 -> k: untouched particles copy, real pairs apply the
// transpose-Jacobian action plus eta, rejected pairs apply identity plus the
// rejection-branch eta.
void adjoint_step(AdjointState& state, const CollisionStepRecord& record,
                  const KernelSpec& ks, Algorithm alg, bool use_btilde,
                  AdjointDiagnostics& diag);

// d v_i^0 / d T0_p = normals_i^p / (2 sqrt(T0_p)) e_p.
std::vector<Vec3> pathwise_initial_derivative(const std::vector<Vec3>& normals, int param,
                                              const SimConfig& cfg);

struct GradientResult {
  std::array<double, 3> grad{};  // d J / d (Tx0, Ty0, Tz0)
  Objective objective = Objective::Ty;
  std::uint64_t seed = 0;
  double wall_seconds_forward = 0.0;
  double wall_seconds_adjoint = 0.0;
  std::int64_t bound_violations = 0;
  std::int64_t eta_guard_hits = 0;
};

// grad_p = sum_i (d v_i^0 / d m_p) . gamma_i^0.
GradientResult assemble_gradient(const AdjointState& state0,
                                 const std::array<std::vector<Vec3>, 3>& initial_derivatives);

// Full backward pass over a forward result (stored records, or
// checkpoint-and-replay when only snapshots were kept) and gradient assembly.
GradientResult adjoint_gradient(const ForwardResult& fwd, const SimConfig& cfg,
                                Objective objective, BTildeMode mode = BTildeMode::Auto);

namespace ref {
// Sequential reference for the OpenMP adjoint kernels.
GradientResult adjoint_gradient(const ForwardResult& fwd, const SimConfig& cfg,
                                Objective objective, BTildeMode mode = BTildeMode::Auto);
}  // namespace ref

}  // namespace boltzgrad
