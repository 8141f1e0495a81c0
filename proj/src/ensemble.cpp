#include "boltzgrad/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "boltzgrad/reduce.hpp"
#include "boltzgrad/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace boltzgrad {

void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double collision_rate(const SimConfig& cfg) {
  if (cfg.algorithm == Algorithm::Separable)
    return weighted_area(cfg.kernel) * cfg.kernel.sigma_v * cfg.rho;
  return 4.0 * kPi * cfg.kernel.sigma_total * cfg.rho;
}

std::int64_t virtual_pair_count(const SimConfig& cfg) {
  const double x = 0.5 * cfg.dt * collision_rate(cfg) * static_cast<double>(cfg.n_particles);
  const double r = std::nearbyint(x);
  // dt*mu*N/2 is often an exact integer up to FP dust (e.g. 0.1 * 1 * 1e6/2);
  // snap before taking the ceiling.
  const double nc = std::abs(x - r) <= 1e-9 * (x > 1.0 ? x : 1.0) ? r : std::ceil(x);
  return static_cast<std::int64_t>(nc);
}

void validate(const SimConfig& cfg) {
  if (cfg.n_particles <= 0) throw std::invalid_argument("config: N must be positive");
  if (cfg.n_particles % 2 != 0) throw std::invalid_argument("config: N must be even");
  if (cfg.n_steps < 0) throw std::invalid_argument("config: M must be >= 0");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("config: dt must be > 0");
  if (!(cfg.rho > 0.0)) throw std::invalid_argument("config: rho must be > 0");
  for (double t : cfg.initial_temperatures)
    if (!(t > 0.0)) throw std::invalid_argument("config: initial temperatures must be > 0");
  if (!(cfg.kernel.sigma_v > 0.0)) throw std::invalid_argument("config: Sigma_v must be > 0");
  if (!(cfg.kernel.epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be > 0");
  const double dtmu = cfg.dt * collision_rate(cfg);
  if (dtmu > 1.0 + 1e-9)
    throw std::invalid_argument("config: dt*mu exceeds 1 (collision probability per step)");
  if (cfg.n_steps > 0 && 2 * virtual_pair_count(cfg) > cfg.n_particles)
    throw std::invalid_argument("config: collision count exceeds ensemble");
}

std::array<double, 3> component_temperatures(const VelocityEnsemble& ens) {
  const auto n = static_cast<std::int64_t>(ens.v.size());
  const Vec3 s = det_sum<Vec3>(n, [&](std::int64_t i) {
    const Vec3& v = ens.v[static_cast<std::size_t>(i)];
    return Vec3{v.x * v.x, v.y * v.y, v.z * v.z};
  });
  const double inv = 1.0 / static_cast<double>(n);
  return {s.x * inv, s.y * inv, s.z * inv};
}

Vec3 momentum_sum(const VelocityEnsemble& ens) {
  const auto n = static_cast<std::int64_t>(ens.v.size());
  return det_sum<Vec3>(n, [&](std::int64_t i) { return ens.v[static_cast<std::size_t>(i)]; });
}

double energy_sum(const VelocityEnsemble& ens) {
  const auto n = static_cast<std::int64_t>(ens.v.size());
  return det_sum<double>(n,
                         [&](std::int64_t i) { return norm2(ens.v[static_cast<std::size_t>(i)]); });
}

double objective_value(const VelocityEnsemble& ens, Objective o) {
  const auto n = static_cast<std::int64_t>(ens.v.size());
  const double s = det_sum<double>(
      n, [&](std::int64_t i) { return phi_of(o, ens.v[static_cast<std::size_t>(i)]); });
  return ens.rho / static_cast<double>(n) * s;
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::Tx: return "Tx";
    case Objective::Ty: return "Ty";
    case Objective::Tz: return "Tz";
    default: return "energy";
  }
}

Objective objective_from_name(const std::string& name) {
  if (name == "Tx" || name == "tx") return Objective::Tx;
  if (name == "Ty" || name == "ty") return Objective::Ty;
  if (name == "Tz" || name == "tz") return Objective::Tz;
  if (name == "energy" || name == "Energy") return Objective::Energy;
  throw std::invalid_argument("unknown objective selector: " + name);
}

InitResult init_ensemble(const SimConfig& cfg) {
  validate(cfg);
  const std::int64_t n = cfg.n_particles;
  InitResult out;
  out.ensemble.v.resize(static_cast<std::size_t>(n));
  out.ensemble.rho = cfg.rho;
  out.normals.resize(static_cast<std::size_t>(n));
  const double sx = std::sqrt(cfg.initial_temperatures[0]);
  const double sy = std::sqrt(cfg.initial_temperatures[1]);
  const double sz = std::sqrt(cfg.initial_temperatures[2]);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    RandomStream st(cfg.seed, 0, static_cast<std::uint32_t>(i), StreamTag::InitNormal);
    const Vec3 nrm{st.normal(), st.normal(), st.normal()};
    out.normals[static_cast<std::size_t>(i)] = nrm;
    out.ensemble.v[static_cast<std::size_t>(i)] = {sx * nrm.x, sy * nrm.y, sz * nrm.z};
  }
  return out;
}

}  // namespace boltzgrad
