#include "boltzgrad/adjoint.hpp"

#include <cmath>

#include "boltzgrad/collision_geometry.hpp"
#include "boltzgrad/reduce.hpp"
#include "boltzgrad/forward.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace boltzgrad;
using oracles::Pair6;

namespace {

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

bool close_vec(const Vec3& a, const Vec3& b, double tol) {
  return close_rel(a.x, b.x, tol) && close_rel(a.y, b.y, tol) && close_rel(a.z, b.z, tol);
}

VelocityEnsemble make_pair_ensemble(const Vec3& v, const Vec3& v1, std::int32_t step) {
  VelocityEnsemble ens;
  ens.v = {v, v1};
  ens.rho = 1.0;
  ens.step_index = step;
  return ens;
}

// Expected influence at step 0 for a single always-virtual pair: the
// outcome-probability-weighted combination of the two forced-outcome adjoint
// passes. Its value must equal the gradient of the closed-form conditional
// expectation of the objective.
std::array<Vec3, 2> expected_gamma(const Vec3& v, const Vec3& v1, const PairEvent& real_ev,
                                   const PairEvent& virt_ev, double r, const KernelSpec& ks,
                                   Algorithm alg, bool use_btilde, Objective obj) {
  AdjointDiagnostics diag;

  auto [vr, v1r] = post_collision(v, v1, real_ev.sigma);
  AdjointState st_real = final_gamma(make_pair_ensemble(vr, v1r, 1), obj);
  CollisionStepRecord rec_real{0, {real_ev}};
  adjoint_step(st_real, rec_real, ks, alg, use_btilde, diag);

  AdjointState st_virt = final_gamma(make_pair_ensemble(v, v1, 1), obj);
  CollisionStepRecord rec_virt{0, {virt_ev}};
  adjoint_step(st_virt, rec_virt, ks, alg, use_btilde, diag);

  return {st_real.gammas[0] * r + st_virt.gammas[0] * (1 - r),
          st_real.gammas[1] * r + st_virt.gammas[1] * (1 - r)};
}

}  // namespace

TEST_CASE("final_gamma examples") {
  VelocityEnsemble ens = make_pair_ensemble({1, 2, 3}, {0, 0, 0}, 0);
  const AdjointState st = final_gamma(ens, Objective::Ty);
  CHECK(close_vec(st.gammas[0], {0, 2, 0}, 1e-15));
  CHECK(st.phi_final[0] == doctest::Approx(4.0));
  CHECK(st.gammas[1] == Vec3{0, 0, 0});

  const AdjointState se = final_gamma(ens, Objective::Energy);
  CHECK(close_vec(se.gammas[0], Vec3{1, 2, 3} * (2.0 / 2.0), 1e-15));

  // FD of (rho/N) sum phi against the assembled gamma.
  oracles::RandomInputs rng(3);
  const Vec3 v = rng.vec();
  VelocityEnsemble e2 = make_pair_ensemble(v, rng.vec(), 0);
  const AdjointState sx = final_gamma(e2, Objective::Tx);
  const Vec3 fd = oracles::fd_grad(
      [&](const Vec3& w) { return 0.5 * (phi_of(Objective::Tx, w) + phi_of(Objective::Tx, e2.v[1])); },
      v);
  CHECK(close_vec(sx.gammas[0], fd, 1e-8));
}

TEST_CASE("eta_term values and antisymmetry") {
  const KernelSpec ks = make_kernel_spec(0.0, 1.0, 10.0);
  PairEvent ev;
  ev.i = 0;
  ev.i1 = 1;
  ev.outcome = Outcome::Real;
  ev.alpha = {1, 0, 0};
  ev.u_norm = 2.0;
  ev.q = 2.0;

  // (rho/N)(phi_i + phi_i1) * beta u/|u|^2 with phi sum 3, N = 1000.
  auto [ei, ei1] = eta_term(ev, 1.0, 2.0, ks, Algorithm::Separable, 1.0, 1000);
  CHECK(close_vec(ei, {0.0015, 0, 0}, 1e-14));
  CHECK(close_vec(ei1, {-0.0015, 0, 0}, 1e-14));

  // Constant kernel: zero score everywhere.
  const KernelSpec maxwell = make_kernel_spec(0.0, 0.0, 10.0);
  auto [mi, mi1] = eta_term(ev, 1.0, 2.0, maxwell, Algorithm::Separable, 1.0, 1000);
  CHECK(mi == Vec3{0, 0, 0});
  CHECK(mi1 == Vec3{0, 0, 0});

  // Degenerate pair: treated as non-colliding.
  PairEvent degen = ev;
  degen.u_norm = 0.0;
  degen.alpha = {0, 0, 0};
  auto [di, di1] = eta_term(degen, 5.0, 5.0, ks, Algorithm::Separable, 1.0, 1000);
  CHECK(di == Vec3{0, 0, 0});
  CHECK(di1 == Vec3{0, 0, 0});

  // Rejected pair matches the rejection score helper.
  PairEvent rej = ev;
  rej.outcome = Outcome::VirtualOnly;
  auto [ri, ri1] = eta_term(rej, 1.0, 2.0, ks, Algorithm::Separable, 1.0, 1000);
  const Vec3 expect = grad_log_rejection(ev.alpha * ev.u_norm, nullptr, ks, true) * (3.0 / 1000.0);
  CHECK(close_vec(ri, expect, 1e-13));
  CHECK(ri + ri1 == Vec3{0, 0, 0});

  oracles::RandomInputs rng(9);
  for (int i = 0; i < 100; ++i) {
    PairEvent e;
    e.outcome = i % 2 == 0 ? Outcome::Real : Outcome::VirtualOnly;
    e.alpha = rng.unit_vec_off_axis(0.0);
    e.u_norm = rng.uniform(0.2, 5.0);
    e.q = std::pow(e.u_norm, ks.beta);
    auto [a, b] = eta_term(e, rng.uniform(), rng.uniform(), ks, Algorithm::Separable, 1.0, 100);
    CHECK(a + b == Vec3{0, 0, 0});  // exact negation by construction
  }
}

TEST_CASE("adjoint_step identity flow and bookkeeping") {
  const KernelSpec maxwell = make_kernel_spec(0.0, 0.0, 10.0);
  AdjointState st;
  st.gammas = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {0, -1, -2}};
  st.phi_final = {1, 2, 3, 4};
  st.step_index = 5;
  st.rho = 1.0;
  const AdjointState before = st;

  // All pairs virtual with a constant kernel: D = I and eta = 0.
  CollisionStepRecord rec;
  rec.step = 4;
  PairEvent ev;
  ev.i = 0;
  ev.i1 = 2;
  ev.outcome = Outcome::VirtualOnly;
  ev.alpha = {1, 0, 0};
  ev.u_norm = 1.0;
  ev.q = 1.0;
  rec.events.push_back(ev);
  AdjointDiagnostics diag;
  adjoint_step(st, rec, maxwell, Algorithm::Separable, false, diag);
  CHECK(st.gammas == before.gammas);
  CHECK(st.step_index == 4);

  // Wrong step index is rejected.
  CollisionStepRecord bad;
  bad.step = 7;
  CHECK_THROWS_AS(adjoint_step(st, bad, maxwell, Algorithm::Separable, false, diag),
                  std::runtime_error);

  // Maxwell real collision: recursion is the plain B action of the next
  // gammas, no score term.
  CollisionStepRecord recr;
  recr.step = 3;
  PairEvent evr;
  evr.i = 1;
  evr.i1 = 3;
  evr.outcome = Outcome::Real;
  evr.alpha = {0, 1, 0};
  evr.sigma = {1, 0, 0};
  evr.u_norm = 2.0;
  evr.q = 1.0;
  recr.events.push_back(evr);
  const Vec3 g1 = st.gammas[1], g3 = st.gammas[3];
  adjoint_step(st, recr, maxwell, Algorithm::Separable, false, diag);
  auto [b1, b3] = b_action(evr.sigma, evr.alpha, g1, g3);
  CHECK(st.gammas[1] == b1);
  CHECK(st.gammas[3] == b3);
}

TEST_CASE("single-pair influence matches the conditional-expectation gradient") {
  // One always-selected pair, one step. The closed-form conditional
  // expectation over the acceptance draw (scattering angles held fixed) is
  // differentiated by finite differences; the adjoint's outcome-weighted
  // influence must match it. This pins D (with the angular term) and both
  // eta branches together.
  const Vec3 v{0.6, 0.1, -0.2};
  const Vec3 v1{-0.4, 0.3, 0.5};
  const double theta = 0.9, phi = 2.3;

  SUBCASE("separable path, kappa=1 beta=1") {
    const KernelSpec ks = make_kernel_spec(1.0, 1.0, 10.0);
    const Vec3 u = v - v1;
    const double un = norm(u);
    const double r = std::pow(un, ks.beta) / ks.sigma_v;

    PairEvent real_ev;
    real_ev.i = 0;
    real_ev.i1 = 1;
    real_ev.outcome = Outcome::Real;
    real_ev.alpha = u / un;
    real_ev.u_norm = un;
    real_ev.theta = theta;
    real_ev.phi = phi;
    real_ev.sigma = sigma_from_angles(u, theta, phi);
    real_ev.q = std::pow(un, ks.beta);

    PairEvent virt_ev = real_ev;
    virt_ev.outcome = Outcome::VirtualOnly;
    virt_ev.sigma = {};
    virt_ev.theta = 0;
    virt_ev.phi = 0;

    for (const Objective obj : {Objective::Ty, Objective::Energy}) {
      const auto exp_gamma =
          expected_gamma(v, v1, real_ev, virt_ev, r, ks, Algorithm::Separable, true, obj);
      const auto j0 = [&](const Pair6& x) {
        const Vec3 uu = x[0] - x[1];
        const double rr = std::min(std::pow(norm(uu), ks.beta) / ks.sigma_v, 1.0);
        auto [a, b] = post_collision(x[0], x[1], sigma_from_angles(uu, theta, phi));
        const double phi_real = 0.5 * (phi_of(obj, a) + phi_of(obj, b));
        const double phi_virt = 0.5 * (phi_of(obj, x[0]) + phi_of(obj, x[1]));
        return rr * phi_real + (1 - rr) * phi_virt;
      };
      for (int comp = 0; comp < 6; ++comp) {
        Pair6 hi{v, v1}, lo{v, v1};
        hi[comp / 3][comp % 3] += oracles::kFdStep;
        lo[comp / 3][comp % 3] -= oracles::kFdStep;
        const double fd = (j0(hi) - j0(lo)) / (2 * oracles::kFdStep);
        CHECK(close_rel(exp_gamma[comp / 3][comp % 3], fd, 1e-6));
      }
    }
  }

  SUBCASE("general path, kappa=2 beta=1") {
    const KernelSpec ks = make_kernel_spec(2.0, 1.0, 10.0);
    const Vec3 u = v - v1;
    const double un = norm(u);
    const Vec3 sigma = sigma_from_angles(u, theta, phi);
    const double q = eval_kernel(u, sigma, ks);
    const double r = q / ks.sigma_total;

    PairEvent real_ev;
    real_ev.i = 0;
    real_ev.i1 = 1;
    real_ev.outcome = Outcome::Real;
    real_ev.alpha = u / un;
    real_ev.u_norm = un;
    real_ev.theta = theta;
    real_ev.phi = phi;
    real_ev.sigma = sigma;
    real_ev.q = q;

    PairEvent virt_ev = real_ev;
    virt_ev.outcome = Outcome::VirtualOnly;

    const auto exp_gamma =
        expected_gamma(v, v1, real_ev, virt_ev, r, ks, Algorithm::General, true, Objective::Ty);
    const auto j0 = [&](const Pair6& x) {
      const Vec3 uu = x[0] - x[1];
      // Acceptance with the scattering angle held fixed: the angular factor
      // of the kernel is a constant along the perturbation.
      const Vec3 s = sigma_from_angles(uu, theta, phi);
      const double rr = std::min(eval_kernel(uu, s, ks) / ks.sigma_total, 1.0);
      auto [a, b] = post_collision(x[0], x[1], s);
      const double phi_real = 0.5 * (phi_of(Objective::Ty, a) + phi_of(Objective::Ty, b));
      const double phi_virt = 0.5 * (phi_of(Objective::Ty, x[0]) + phi_of(Objective::Ty, x[1]));
      return rr * phi_real + (1 - rr) * phi_virt;
    };
    for (int comp = 0; comp < 6; ++comp) {
      Pair6 hi{v, v1}, lo{v, v1};
      hi[comp / 3][comp % 3] += oracles::kFdStep;
      lo[comp / 3][comp % 3] -= oracles::kFdStep;
      const double fd = (j0(hi) - j0(lo)) / (2 * oracles::kFdStep);
      CHECK(close_rel(exp_gamma[comp / 3][comp % 3], fd, 1e-6));
    }
  }
}

TEST_CASE("pathwise_initial_derivative") {
  SimConfig cfg;
  cfg.n_particles = 1000;
  cfg.n_steps = 0;
  const auto init = init_ensemble(cfg);

  const auto dz = pathwise_initial_derivative(init.normals, 2, cfg);
  for (std::size_t i = 0; i < 50; ++i) {
    // Tz0 = 0.5: derivative is v_z / (2 Tz0) = v_z, with zero x/y parts.
    CHECK(dz[i].x == 0.0);
    CHECK(dz[i].y == 0.0);
    CHECK(dz[i].z == doctest::Approx(init.ensemble.v[i].z / (2.0 * 0.5)).epsilon(1e-12));
  }

  // Centered difference of the reparameterized sampler with frozen normals.
  const double delta = 1e-5;
  SimConfig hi = cfg, lo = cfg;
  hi.initial_temperatures[2] += delta;
  lo.initial_temperatures[2] -= delta;
  const auto ens_hi = init_ensemble(hi);
  const auto ens_lo = init_ensemble(lo);
  for (std::size_t i = 0; i < 50; ++i) {
    const double fd = (ens_hi.ensemble.v[i].z - ens_lo.ensemble.v[i].z) / (2 * delta);
    CHECK(std::abs(dz[i].z - fd) < 1e-8);
  }
}

TEST_CASE("assemble_gradient: zero influence and the M=0 identity") {
  SimConfig cfg;
  cfg.n_particles = 10000;
  cfg.n_steps = 0;
  cfg.kernel = make_kernel_spec(0, 1, 10.0);
  const auto fwd = run_forward(cfg);

  AdjointState zero = final_gamma(fwd.final_ensemble, Objective::Ty);
  for (auto& g : zero.gammas) g = Vec3{};
  std::array<std::vector<Vec3>, 3> dv;
  for (int p = 0; p < 3; ++p) dv[p] = pathwise_initial_derivative(fwd.initial_normals, p, cfg);
  const auto zres = assemble_gradient(zero, dv);
  CHECK(zres.grad == std::array<double, 3>{0, 0, 0});

  // With no steps the gradient matrix is the identity up to sampling noise;
  // off-diagonal entries vanish exactly.
  const double tol = 3.0 / std::sqrt(static_cast<double>(cfg.n_particles));
  const std::array<Objective, 3> objs{Objective::Tx, Objective::Ty, Objective::Tz};
  for (int l = 0; l < 3; ++l) {
    const auto res = adjoint_gradient(fwd, cfg, objs[static_cast<std::size_t>(l)]);
    for (int p = 0; p < 3; ++p) {
      if (p == l)
        CHECK(std::abs(res.grad[static_cast<std::size_t>(p)] - 1.0) < tol);
      else
        CHECK(res.grad[static_cast<std::size_t>(p)] == 0.0);
    }
  }
}

TEST_CASE("checkpoint-and-replay reproduces the stored-record gradient") {
  SimConfig cfg;
  cfg.n_particles = 2000;
  cfg.n_steps = 13;  // not a multiple of the checkpoint stride
  cfg.kernel = make_kernel_spec(2, 1, 10.0);
  cfg.seed = 321;

  SimConfig rep = cfg;
  rep.record_policy = RecordPolicy::Checkpoint;
  const auto full = run_forward(cfg);
  const auto chk = run_forward(rep);
  CHECK(chk.records.empty());
  CHECK(!chk.checkpoints.empty());
  CHECK(full.final_ensemble.v == chk.final_ensemble.v);

  for (const Objective obj : {Objective::Tx, Objective::Ty}) {
    const auto g_full = adjoint_gradient(full, cfg, obj);
    const auto g_chk = adjoint_gradient(chk, rep, obj);
    CHECK(g_full.grad == g_chk.grad);
  }
}

TEST_CASE("OpenMP adjoint matches the serial reference and thread count") {
  SimConfig cfg;
  cfg.n_particles = 4000;
  cfg.n_steps = 10;
  cfg.kernel = make_kernel_spec(1, 1, 10.0);
  const auto fwd = run_forward(cfg);

  const auto par = adjoint_gradient(fwd, cfg, Objective::Ty);
  const auto ser = ref::adjoint_gradient(fwd, cfg, Objective::Ty);
  CHECK(par.grad == ser.grad);

  set_thread_count(1);
  const auto one = adjoint_gradient(fwd, cfg, Objective::Ty);
  set_thread_count(8);
  const auto eight = adjoint_gradient(fwd, cfg, Objective::Ty);
  set_thread_count(0);
  CHECK(one.grad == eight.grad);
}

TEST_CASE("mode resolution for the angular correction") {
  CHECK(use_btilde_for(make_kernel_spec(0, 0, 10), BTildeMode::Auto) == false);
  CHECK(use_btilde_for(make_kernel_spec(2, 0, 10), BTildeMode::Auto) == true);
  CHECK(use_btilde_for(make_kernel_spec(0, 0, 10), BTildeMode::On) == true);
  CHECK(use_btilde_for(make_kernel_spec(5, 0, 10), BTildeMode::Off) == false);
}

TEST_CASE("adjoint pass costs no more than the forward pass") {
  SimConfig cfg;
  cfg.n_particles = 100000;
  cfg.n_steps = 20;
  cfg.kernel = make_kernel_spec(2, 1, 10.0);
  const auto fwd = run_forward(cfg);
  const auto res = adjoint_gradient(fwd, cfg, Objective::Ty);
  // Timing comparison: advisory only, wall clocks on shared machines drift.
  WARN_LE(res.wall_seconds_adjoint, res.wall_seconds_forward);
}
