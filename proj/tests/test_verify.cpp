#include "boltzgrad/verify.hpp"

#include <cmath>

#include "boltzgrad/forward.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace boltzgrad;

namespace {

SimConfig small_config(double kappa, double beta, std::int64_t n, std::int32_t m) {
  SimConfig cfg;
  cfg.n_particles = n;
  cfg.n_steps = m;
  cfg.kernel = make_kernel_spec(kappa, beta, 10.0);
  cfg.seed = 777;
  return cfg;
}

double norm3(const std::array<double, 3>& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

}  // namespace

TEST_CASE("objective_value basics") {
  VelocityEnsemble ens;
  ens.v = {{1, 0, 0}, {-1, 0, 0}};
  ens.rho = 1.0;
  CHECK(objective_value(ens, Objective::Tx) == doctest::Approx(1.0));
  CHECK(objective_value(ens, Objective::Ty) == 0.0);
  CHECK(objective_value(ens, Objective::Energy) == doctest::Approx(1.0));
  CHECK_THROWS_AS(objective_from_name("Txy"), std::invalid_argument);
}

TEST_CASE("fd on a synthetic quadratic is exact") {
  const auto j = [](const std::array<double, 3>& m) { return m[0] * m[0]; };
  CHECK(fd_component_custom(j, {3.0, 1.0, 1.0}, 0, 0.1) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(fd_component_custom(j, {3.0, 1.0, 1.0}, 1, 0.1) == 0.0);
  CHECK_THROWS_AS(fd_component_custom(j, {3.0, 1.0, 1.0}, 0, 0.0), std::invalid_argument);
}

TEST_CASE("fd gradient with no steps recovers the frozen-normal variance") {
  // With M=0 and common random numbers, J(T) = T_l * (sample variance of the
  // frozen normals): the central difference is exact and near one.
  SimConfig cfg = small_config(0, 1, 20000, 0);
  for (int p = 0; p < 3; ++p) {
    const double g = fd_gradient_component(cfg, p == 0   ? Objective::Tx
                                                : p == 1 ? Objective::Ty
                                                         : Objective::Tz,
                                           p, 0.1);
    CHECK(std::abs(g - 1.0) < 5.0 / std::sqrt(static_cast<double>(cfg.n_particles)));
  }
  CHECK_THROWS_AS(fd_gradient_component(cfg, Objective::Tz, 2, 0.6), std::invalid_argument);
}

TEST_CASE("common random numbers make repeated runs bitwise identical") {
  SimConfig cfg = small_config(1, 1, 2000, 10);
  const double j1 = simulate_objective(cfg, Objective::Ty);
  const double j2 = simulate_objective(cfg, Objective::Ty);
  CHECK(j1 == j2);
}

TEST_CASE("batch statistics bookkeeping") {
  SimConfig cfg = small_config(0, 1, 500, 5);
  SUBCASE("forced single seed collapses the spread") {
    const RunStatistics st =
        batch_statistics(cfg, Method::Adjoint, Objective::Ty, 8, 42, BTildeMode::Auto, 0.1,
                         /*seed_stride=*/0);
    for (int p = 0; p < 3; ++p) CHECK(st.std_of_mean[static_cast<std::size_t>(p)] == 0.0);
  }
  SUBCASE("rejects degenerate run counts") {
    CHECK_THROWS_AS(batch_statistics(cfg, Method::Adjoint, Objective::Ty, 1, 42),
                    std::invalid_argument);
  }
  SUBCASE("per-run results are ordered by seed") {
    const RunStatistics st = batch_statistics(cfg, Method::Adjoint, Objective::Ty, 4, 42);
    SimConfig c2 = cfg;
    c2.seed = 44;  // third replicate
    const auto fwd = run_forward(c2);
    const auto g = adjoint_gradient(fwd, c2, Objective::Ty);
    CHECK(st.per_run[2] == g.grad);
  }
}

TEST_CASE("std of the mean shrinks like the replicate root") {
  SimConfig cfg = small_config(0, 1, 500, 5);
  const RunStatistics s25 = batch_statistics(cfg, Method::Adjoint, Objective::Ty, 25, 1000);
  const RunStatistics s100 = batch_statistics(cfg, Method::Adjoint, Objective::Ty, 100, 5000);
  const double ratio = norm3(s25.std_of_mean) / norm3(s100.std_of_mean);
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("adjoint gradients are less noisy than finite differences") {
  SimConfig cfg = small_config(0, 1, 1000, 10);
  const RunStatistics ad = batch_statistics(cfg, Method::Adjoint, Objective::Ty, 30, 9000);
  const RunStatistics fd =
      batch_statistics(cfg, Method::FiniteDifference, Objective::Ty, 30, 9000);
  for (int p = 0; p < 3; ++p)
    CHECK(ad.std_of_mean[static_cast<std::size_t>(p)] <
          fd.std_of_mean[static_cast<std::size_t>(p)]);

  const auto err = gradient_error(ad, fd);
  for (int p = 0; p < 3; ++p) {
    CHECK(err[static_cast<std::size_t>(p)] ==
          std::abs(ad.mean[static_cast<std::size_t>(p)] - fd.mean[static_cast<std::size_t>(p)]));
  }
}

TEST_CASE("gradient_error trivial cases") {
  RunStatistics a, b;
  a.mean = {1.0, 2.0, 3.0};
  b.mean = {1.0, 2.0, 3.0};
  CHECK(gradient_error(a, b) == std::array<double, 3>{0, 0, 0});
  b.mean = {0.99, 2.0, 3.0};
  CHECK(gradient_error(a, b)[0] == doctest::Approx(0.01));
}

TEST_CASE("gradient error decreases with the particle count") {
  for (double kappa : {1.0, 2.0}) {
    std::array<double, 2> e_norm{}, noise{};
    const std::array<std::int64_t, 2> ns{500, 5000};
    for (int i = 0; i < 2; ++i) {
      SimConfig cfg = small_config(kappa, 1, ns[static_cast<std::size_t>(i)], 20);
      const auto ad = batch_statistics(cfg, Method::Adjoint, Objective::Ty, 60, 2222);
      const auto fd = batch_statistics(cfg, Method::FiniteDifference, Objective::Ty, 60, 2222);
      const auto err = gradient_error(ad, fd);
      e_norm[static_cast<std::size_t>(i)] = norm3(err);
      std::array<double, 3> comb{};
      for (int p = 0; p < 3; ++p)
        comb[static_cast<std::size_t>(p)] =
            std::hypot(ad.std_of_mean[static_cast<std::size_t>(p)],
                       fd.std_of_mean[static_cast<std::size_t>(p)]);
      noise[static_cast<std::size_t>(i)] = norm3(comb);
    }
    // Non-increasing up to twice the estimated standard error.
    CHECK(e_norm[1] <= e_norm[0] + 2.0 * (noise[0] + noise[1]));
  }
}

TEST_CASE("energy gradient equals the sum of the component gradients") {
  SimConfig cfg = small_config(1, 1, 1000, 10);
  const auto fwd = run_forward(cfg);
  const auto ge = adjoint_gradient(fwd, cfg, Objective::Energy);
  std::array<double, 3> sum{};
  for (const Objective o : {Objective::Tx, Objective::Ty, Objective::Tz}) {
    const auto g = adjoint_gradient(fwd, cfg, o);
    for (int p = 0; p < 3; ++p) sum[static_cast<std::size_t>(p)] += g.grad[static_cast<std::size_t>(p)];
  }
  for (int p = 0; p < 3; ++p)
    CHECK(ge.grad[static_cast<std::size_t>(p)] ==
          doctest::Approx(sum[static_cast<std::size_t>(p)]).epsilon(1e-12));
}
