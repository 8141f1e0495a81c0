#include "boltzgrad/forward.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "boltzgrad/collision_geometry.hpp"

namespace boltzgrad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Handles one virtual pair of the separable algorithm; writes the event and,
// on acceptance, the post-collision velocities. Pure function of the pair's
// pre-step velocities and its (seed, step, slot) streams.
inline void handle_pair_separable(VelocityEnsemble& ens, const SimConfig& cfg, std::int32_t k,
                                  std::int64_t slot, std::uint32_t i, std::uint32_t i1,
                                  PairEvent& ev, std::int64_t& violations,
                                  std::int64_t& reals) {
  const KernelSpec& ks = cfg.kernel;
  ev.i = i;
  ev.i1 = i1;
  Vec3& vi = ens.v[i];
  Vec3& vi1 = ens.v[i1];
  const Vec3 u = vi - vi1;
  const double un = norm(u);
  ev.u_norm = un;
  if (un < kTolU) {
    ev.outcome = Outcome::VirtualOnly;
    return;
  }
  ev.alpha = u / un;
  const double qv = std::pow(un, ks.beta);
  ev.q = qv;
  if (qv > ks.sigma_v) ++violations;
  RandomStream accept(cfg.seed, static_cast<std::uint32_t>(k),
                      static_cast<std::uint32_t>(slot), StreamTag::Accept);
  if (accept.uniform() <= qv / ks.sigma_v) {
    RandomStream ts(cfg.seed, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(slot),
                    StreamTag::Theta);
    RandomStream ps(cfg.seed, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(slot),
                    StreamTag::Phi);
    ev.theta = sample_theta(ks, ts.uniform());
    ev.phi = kTwoPi * ps.uniform();
    ev.sigma = sigma_from_angles(u, ev.theta, ev.phi);
    ev.outcome = Outcome::Real;
    auto [vp, v1p] = post_collision(vi, vi1, ev.sigma);
    vi = vp;
    vi1 = v1p;
    ++reals;
  } else {
    ev.outcome = Outcome::VirtualOnly;
  }
}

inline void handle_pair_general(VelocityEnsemble& ens, const SimConfig& cfg, std::int32_t k,
                                std::int64_t slot, std::uint32_t i, std::uint32_t i1,
                                PairEvent& ev, std::int64_t& violations, std::int64_t& reals) {
  const KernelSpec& ks = cfg.kernel;
  ev.i = i;
  ev.i1 = i1;
  Vec3& vi = ens.v[i];
  Vec3& vi1 = ens.v[i1];
  const Vec3 u = vi - vi1;
  const double un = norm(u);
  ev.u_norm = un;
  if (un < kTolU) {
    ev.outcome = Outcome::VirtualOnly;
    return;
  }
  ev.alpha = u / un;
  RandomStream ss(cfg.seed, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(slot),
                  StreamTag::SigmaSphere);
  const double z = 2.0 * ss.uniform() - 1.0;
  const double azimuth = kTwoPi * ss.uniform();
  const double r = std::sqrt(1.0 - z * z > 0.0 ? 1.0 - z * z : 0.0);
  ev.sigma = {r * std::cos(azimuth), r * std::sin(azimuth), z};
  const auto [theta, phi] = angles_from_sigma(u, ev.sigma);
  ev.theta = theta;
  ev.phi = phi;
  const double q = eval_kernel(u, ev.sigma, ks);
  ev.q = q;
  if (q > ks.sigma_total) ++violations;
  RandomStream accept(cfg.seed, static_cast<std::uint32_t>(k),
                      static_cast<std::uint32_t>(slot), StreamTag::Accept);
  if (accept.uniform() <= q / ks.sigma_total) {
    ev.outcome = Outcome::Real;
    auto [vp, v1p] = post_collision(vi, vi1, ev.sigma);
    vi = vp;
    vi1 = v1p;
    ++reals;
  } else {
    ev.outcome = Outcome::VirtualOnly;
  }
}

template <bool Parallel>
CollisionStepRecord step_impl(VelocityEnsemble& ens, const SimConfig& cfg,
                              StepDiagnostics& diag) {
  const std::int32_t k = ens.step_index;
  const auto n = static_cast<std::int64_t>(ens.v.size());
  const std::int64_t nc = virtual_pair_count(cfg);
  RandomStream shuffle(cfg.seed, static_cast<std::uint32_t>(k), 0, StreamTag::PairShuffle);
  const auto pairs = select_pairs(n, nc, shuffle);

  CollisionStepRecord rec;
  rec.step = k;
  rec.events.resize(static_cast<std::size_t>(nc));
  std::int64_t violations = 0;
  std::int64_t reals = 0;
  const bool separable = cfg.algorithm == Algorithm::Separable;

  if constexpr (Parallel) {
#pragma omp parallel for schedule(static) reduction(+ : violations, reals)
    for (std::int64_t l = 0; l < nc; ++l) {
      const auto [i, i1] = pairs[static_cast<std::size_t>(l)];
      if (separable)
        handle_pair_separable(ens, cfg, k, l, i, i1, rec.events[static_cast<std::size_t>(l)],
                              violations, reals);
      else
        handle_pair_general(ens, cfg, k, l, i, i1, rec.events[static_cast<std::size_t>(l)],
                            violations, reals);
    }
  } else {
    for (std::int64_t l = 0; l < nc; ++l) {
      const auto [i, i1] = pairs[static_cast<std::size_t>(l)];
      if (separable)
        handle_pair_separable(ens, cfg, k, l, i, i1, rec.events[static_cast<std::size_t>(l)],
                              violations, reals);
      else
        handle_pair_general(ens, cfg, k, l, i, i1, rec.events[static_cast<std::size_t>(l)],
                            violations, reals);
    }
  }
  diag.bound_violations += violations;
  diag.real_collisions += reals;
  ens.step_index = k + 1;
  return rec;
}

template <bool Parallel>
ForwardResult run_forward_impl(const SimConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  ForwardResult out;
  auto init = init_ensemble(cfg);
  out.initial_normals = std::move(init.normals);
  VelocityEnsemble ens = std::move(init.ensemble);

  const std::int32_t m = cfg.n_steps;
  if (cfg.record_policy == RecordPolicy::Checkpoint && m > 0) {
    out.checkpoint_stride = static_cast<std::int32_t>(
        std::ceil(std::sqrt(static_cast<double>(m))));
  }
  for (std::int32_t k = 0; k < m; ++k) {
    if (out.checkpoint_stride > 0 && k % out.checkpoint_stride == 0)
      out.checkpoints.push_back(ens);
    CollisionStepRecord rec = step_impl<Parallel>(ens, cfg, out.diagnostics);
    if (cfg.record_policy == RecordPolicy::All) out.records.push_back(std::move(rec));
  }
  out.final_ensemble = std::move(ens);
  out.wall_seconds = seconds_since(t0);
  return out;
}

}  // namespace

std::vector<std::pair<std::uint32_t, std::uint32_t>> select_pairs(std::int64_t n,
                                                                  std::int64_t n_c,
                                                                  RandomStream& stream) {
  if (2 * n_c > n) throw std::invalid_argument("collision count exceeds ensemble");
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::int64_t j = 0; j < 2 * n_c; ++j) {
    const std::int64_t r = j + static_cast<std::int64_t>(stream.bounded(
                                   static_cast<std::uint64_t>(n - j)));
    std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(r)]);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(static_cast<std::size_t>(n_c));
  for (std::int64_t l = 0; l < n_c; ++l)
    pairs[static_cast<std::size_t>(l)] = {perm[static_cast<std::size_t>(2 * l)],
                                          perm[static_cast<std::size_t>(2 * l + 1)]};
  return pairs;
}

CollisionStepRecord step_separable(VelocityEnsemble& ens, const SimConfig& cfg,
                                   StepDiagnostics& diag) {
  if (cfg.algorithm != Algorithm::Separable)
    throw std::invalid_argument("step_separable requires the separable algorithm");
  return step_impl<true>(ens, cfg, diag);
}

CollisionStepRecord step_general(VelocityEnsemble& ens, const SimConfig& cfg,
                                 StepDiagnostics& diag) {
  if (cfg.algorithm != Algorithm::General)
    throw std::invalid_argument("step_general requires the general algorithm");
  return step_impl<true>(ens, cfg, diag);
}

ForwardResult run_forward(const SimConfig& cfg) { return run_forward_impl<true>(cfg); }

namespace ref {

CollisionStepRecord step_separable(VelocityEnsemble& ens, const SimConfig& cfg,
                                   StepDiagnostics& diag) {
  if (cfg.algorithm != Algorithm::Separable)
    throw std::invalid_argument("step_separable requires the separable algorithm");
  return step_impl<false>(ens, cfg, diag);
}

CollisionStepRecord step_general(VelocityEnsemble& ens, const SimConfig& cfg,
                                 StepDiagnostics& diag) {
  if (cfg.algorithm != Algorithm::General)
    throw std::invalid_argument("step_general requires the general algorithm");
  return step_impl<false>(ens, cfg, diag);
}

ForwardResult run_forward(const SimConfig& cfg) { return run_forward_impl<false>(cfg); }

}  // namespace ref

}  // namespace boltzgrad
