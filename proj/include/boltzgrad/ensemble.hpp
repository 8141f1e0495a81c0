#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "boltzgrad/kernel.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

enum class Algorithm { Separable, General };

enum class Objective { Tx, Ty, Tz, Energy };

// All: keep every per-step collision record for the adjoint pass.
// Checkpoint: keep velocity snapshots only; the adjoint replays forward
//   windows from them to regenerate records.
// None: forward-only run (finite differences, relaxation).
enum class RecordPolicy { All, Checkpoint, None };

struct SimConfig {
  std::int64_t n_particles = 10000;
  std::int32_t n_steps = 20;
  double dt = 0.1;
  KernelSpec kernel = make_kernel_spec(0.0, 1.0, 10.0);
  std::uint64_t seed = 12345;
  Algorithm algorithm = Algorithm::Separable;
  std::array<double, 3> initial_temperatures{1.0, 1.0, 0.5};
  double rho = 1.0;
  RecordPolicy record_policy = RecordPolicy::All;

  double t_final() const { return n_steps * dt; }
};

// Throws std::invalid_argument on violated invariants (odd N, nonpositive
// temperatures, per-step collision probability above one, ...).
void validate(const SimConfig& cfg);

// mu = A_kappa * Sigma_v * rho for the separable path,
// mu = 4*pi * Sigma * rho for the general path.
double collision_rate(const SimConfig& cfg);

// N_c = ceil(dt * mu * N / 2), snapped to the nearest integer when the real
// product sits within 1e-9 of one (guards against FP dust in dt*mu).
std::int64_t virtual_pair_count(const SimConfig& cfg);

// Empirical representation of the distribution: N particle velocities plus
// the (conserved) mass density.
struct VelocityEnsemble {
  std::vector<Vec3> v;
  double rho = 1.0;
  std::int32_t step_index = 0;
};

// Per-component second moments (1/N) sum v_l^2.
std::array<double, 3> component_temperatures(const VelocityEnsemble& ens);
Vec3 momentum_sum(const VelocityEnsemble& ens);
double energy_sum(const VelocityEnsemble& ens);  // sum |v_i|^2

inline double phi_of(Objective o, const Vec3& v) {
  switch (o) {
    case Objective::Tx: return v.x * v.x;
    case Objective::Ty: return v.y * v.y;
    case Objective::Tz: return v.z * v.z;
    default: return norm2(v);
  }
}

inline Vec3 phi_prime(Objective o, const Vec3& v) {
  switch (o) {
    case Objective::Tx: return {2.0 * v.x, 0.0, 0.0};
    case Objective::Ty: return {0.0, 2.0 * v.y, 0.0};
    case Objective::Tz: return {0.0, 0.0, 2.0 * v.z};
    default: return v * 2.0;
  }
}

// J = (rho/N) sum phi(v_i).
double objective_value(const VelocityEnsemble& ens, Objective o);

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct InitResult {
  VelocityEnsemble ensemble;
  std::vector<Vec3> normals;  // raw standard normals, kept for the pathwise derivative
};

// Anisotropic Gaussian initial condition
//   v_i = (sqrt(Tx0) Nx, sqrt(Ty0) Ny, sqrt(Tz0) Nz).
InitResult init_ensemble(const SimConfig& cfg);

}  // namespace boltzgrad
