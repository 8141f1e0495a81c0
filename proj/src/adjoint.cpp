#include "boltzgrad/adjoint.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "boltzgrad/collision_geometry.hpp"
#include "boltzgrad/reduce.hpp"

namespace boltzgrad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

bool use_btilde_for(const KernelSpec& ks, BTildeMode mode) {
  switch (mode) {
    case BTildeMode::On: return true;
    case BTildeMode::Off: return false;
    default: return ks.kappa > 0.0;
  }
}

AdjointState final_gamma(const VelocityEnsemble& ens, Objective objective) {
  const auto n = static_cast<std::int64_t>(ens.v.size());
  AdjointState st;
  st.gammas.resize(static_cast<std::size_t>(n));
  st.phi_final.resize(static_cast<std::size_t>(n));
  st.step_index = ens.step_index;
  st.rho = ens.rho;
  const double scale = ens.rho / static_cast<double>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3& v = ens.v[static_cast<std::size_t>(i)];
    st.phi_final[static_cast<std::size_t>(i)] = phi_of(objective, v);
    st.gammas[static_cast<std::size_t>(i)] = phi_prime(objective, v) * scale;
  }
  return st;
}

std::pair<Vec3, Vec3> eta_term(const PairEvent& ev, double phi_i, double phi_i1,
                               const KernelSpec& ks, Algorithm alg, double rho,
                               std::int64_t n, std::int64_t* guard_hits) {
  // Degenerate pairs were treated as non-colliding; their score is zero.
  if (ev.u_norm < kTolU) return {Vec3{}, Vec3{}};
  if (ks.beta == 0.0) return {Vec3{}, Vec3{}};
  const double weight = rho / static_cast<double>(n) * (phi_i + phi_i1);
  const Vec3 u = ev.alpha * ev.u_norm;
  Vec3 eta;
  if (ev.outcome == Outcome::Real) {
    // d/dv log q at fixed scattering angle is the velocity score for both
    // algorithms; sigma's own velocity dependence is carried by the D action.
    eta = grad_log_q_velocity(u, ks.beta) * weight;
  } else {
    // Rejection branch: -d/dv log(bound - q) at fixed scattering angle, with
    // (bound, q) the pair used in the acceptance test.
    const double bound = alg == Algorithm::Separable ? ks.sigma_v : ks.sigma_total;
    const double denom = bound - ev.q;
    if (denom <= 1e-12 * bound) {
      if (guard_hits != nullptr) ++*guard_hits;
      return {Vec3{}, Vec3{}};
    }
    eta = u * (-weight * ks.beta * ev.q / (ev.u_norm * ev.u_norm * denom));
  }
  return {eta, -eta};
}

void adjoint_step(AdjointState& st, const CollisionStepRecord& rec, const KernelSpec& ks,
                  Algorithm alg, bool use_btilde, AdjointDiagnostics& diag) {
  if (rec.step + 1 != st.step_index)
    throw std::runtime_error("adjoint_step: record/state step mismatch");
  const auto n = static_cast<std::int64_t>(st.gammas.size());
  const auto npairs = static_cast<std::int64_t>(rec.events.size());
  std::int64_t guard = 0;
#pragma omp parallel for schedule(static) reduction(+ : guard)
  for (std::int64_t l = 0; l < npairs; ++l) {
    const PairEvent& ev = rec.events[static_cast<std::size_t>(l)];
    Vec3& gi = st.gammas[ev.i];
    Vec3& gi1 = st.gammas[ev.i1];
    Vec3 ti = gi, ti1 = gi1;
    if (ev.outcome == Outcome::Real) {
      auto [a, b] = adjoint_D_action(frame_of(ev), gi, gi1, use_btilde);
      ti = a;
      ti1 = b;
    }
    auto [ei, ei1] =
        eta_term(ev, st.phi_final[ev.i], st.phi_final[ev.i1], ks, alg, st.rho, n, &guard);
    gi = ti + ei;
    gi1 = ti1 + ei1;
  }
  diag.eta_guard_hits += guard;
  st.step_index -= 1;
}

std::vector<Vec3> pathwise_initial_derivative(const std::vector<Vec3>& normals, int param,
                                              const SimConfig& cfg) {
  if (param < 0 || param > 2) throw std::invalid_argument("parameter index out of range");
  const auto n = static_cast<std::int64_t>(normals.size());
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  const double scale = 0.5 / std::sqrt(cfg.initial_temperatures[static_cast<std::size_t>(param)]);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    Vec3 d{};
    d[param] = normals[static_cast<std::size_t>(i)][param] * scale;
    out[static_cast<std::size_t>(i)] = d;
  }
  return out;
}

GradientResult assemble_gradient(const AdjointState& state0,
                                 const std::array<std::vector<Vec3>, 3>& initial_derivatives) {
  const auto n = static_cast<std::int64_t>(state0.gammas.size());
  GradientResult out;
  for (int p = 0; p < 3; ++p) {
    const auto& dv = initial_derivatives[static_cast<std::size_t>(p)];
    if (dv.size() != state0.gammas.size())
      throw std::invalid_argument("assemble_gradient: size mismatch");
    out.grad[static_cast<std::size_t>(p)] = det_sum<double>(n, [&](std::int64_t i) {
      return dot(dv[static_cast<std::size_t>(i)], state0.gammas[static_cast<std::size_t>(i)]);
    });
  }
  return out;
}

namespace {

template <bool Parallel>
void adjoint_step_dispatch(AdjointState& st, const CollisionStepRecord& rec,
                           const KernelSpec& ks, Algorithm alg, bool use_btilde,
                           AdjointDiagnostics& diag);

template <>
void adjoint_step_dispatch<true>(AdjointState& st, const CollisionStepRecord& rec,
                                 const KernelSpec& ks, Algorithm alg, bool use_btilde,
                                 AdjointDiagnostics& diag) {
  adjoint_step(st, rec, ks, alg, use_btilde, diag);
}

// Serial reference: same update rule, plain loop.
template <>
void adjoint_step_dispatch<false>(AdjointState& st, const CollisionStepRecord& rec,
                                  const KernelSpec& ks, Algorithm alg, bool use_btilde,
                                  AdjointDiagnostics& diag) {
  if (rec.step + 1 != st.step_index)
    throw std::runtime_error("adjoint_step: record/state step mismatch");
  const auto n = static_cast<std::int64_t>(st.gammas.size());
  for (const PairEvent& ev : rec.events) {
    Vec3& gi = st.gammas[ev.i];
    Vec3& gi1 = st.gammas[ev.i1];
    Vec3 ti = gi, ti1 = gi1;
    if (ev.outcome == Outcome::Real) {
      auto [a, b] = adjoint_D_action(frame_of(ev), gi, gi1, use_btilde);
      ti = a;
      ti1 = b;
    }
    auto [ei, ei1] = eta_term(ev, st.phi_final[ev.i], st.phi_final[ev.i1], ks, alg, st.rho, n,
                              &diag.eta_guard_hits);
    gi = ti + ei;
    gi1 = ti1 + ei1;
  }
  st.step_index -= 1;
}

template <bool Parallel>
GradientResult adjoint_gradient_impl(const ForwardResult& fwd, const SimConfig& cfg,
                                     Objective objective, BTildeMode mode) {
  const auto t0 = Clock::now();
  const bool bt = use_btilde_for(cfg.kernel, mode);
  AdjointState st = final_gamma(fwd.final_ensemble, objective);
  AdjointDiagnostics ad;
  const std::int32_t m = cfg.n_steps;

  if (static_cast<std::int32_t>(fwd.records.size()) == m) {
    for (std::int32_t k = m - 1; k >= 0; --k)
      adjoint_step_dispatch<Parallel>(st, fwd.records[static_cast<std::size_t>(k)], cfg.kernel,
                                      cfg.algorithm, bt, ad);
  } else if (!fwd.checkpoints.empty() && fwd.checkpoint_stride > 0) {
    // Checkpoint-and-replay: regenerate each window's records by re-running
    // the forward steps from the last snapshot (identical streams), then
    // consume them backwards.
    const std::int32_t stride = fwd.checkpoint_stride;
    for (auto w = static_cast<std::int32_t>(fwd.checkpoints.size()) - 1; w >= 0; --w) {
      const std::int32_t k0 = w * stride;
      const std::int32_t k1 = k0 + stride < m ? k0 + stride : m;
      VelocityEnsemble ens = fwd.checkpoints[static_cast<std::size_t>(w)];
      StepDiagnostics scratch;  // already counted in the recorded forward pass
      std::vector<CollisionStepRecord> recs;
      recs.reserve(static_cast<std::size_t>(k1 - k0));
      for (std::int32_t k = k0; k < k1; ++k)
        recs.push_back(cfg.algorithm == Algorithm::Separable
                           ? step_separable(ens, cfg, scratch)
                           : step_general(ens, cfg, scratch));
      for (std::int32_t k = k1 - 1; k >= k0; --k)
        adjoint_step_dispatch<Parallel>(st, recs[static_cast<std::size_t>(k - k0)], cfg.kernel,
                                        cfg.algorithm, bt, ad);
    }
  } else if (m > 0) {
    throw std::invalid_argument(
        "adjoint_gradient: forward run kept neither records nor checkpoints");
  }

  std::array<std::vector<Vec3>, 3> dv;
  for (int p = 0; p < 3; ++p)
    dv[static_cast<std::size_t>(p)] = pathwise_initial_derivative(fwd.initial_normals, p, cfg);
  GradientResult out = assemble_gradient(st, dv);
  out.objective = objective;
  out.seed = cfg.seed;
  out.wall_seconds_forward = fwd.wall_seconds;
  out.wall_seconds_adjoint = seconds_since(t0);
  out.bound_violations = fwd.diagnostics.bound_violations;
  out.eta_guard_hits = ad.eta_guard_hits;
  return out;
}

}  // namespace

GradientResult adjoint_gradient(const ForwardResult& fwd, const SimConfig& cfg,
                                Objective objective, BTildeMode mode) {
  return adjoint_gradient_impl<true>(fwd, cfg, objective, mode);
}

namespace ref {

GradientResult adjoint_gradient(const ForwardResult& fwd, const SimConfig& cfg,
                                Objective objective, BTildeMode mode) {
  return adjoint_gradient_impl<false>(fwd, cfg, objective, mode);
}

}  // namespace ref

}  // namespace boltzgrad
