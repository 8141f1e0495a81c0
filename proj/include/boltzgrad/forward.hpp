#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "boltzgrad/ensemble.hpp"
#include "boltzgrad/records.hpp"
#include "boltzgrad/rng.hpp"

namespace boltzgrad {

struct StepDiagnostics {
  std::int64_t bound_violations = 0;  // pairs whose kernel value exceeded its bound
  std::int64_t real_collisions = 0;
};

// n_c disjoint pairs drawn uniformly without replacement (partial
// Fisher-Yates over 0..n-1). Throws if 2*n_c > n.
std::vector<std::pair<std::uint32_t, std::uint32_t>> select_pairs(std::int64_t n,
                                                                  std::int64_t n_c,
                                                                  RandomStream& stream);

// One time step of the separable-kernel algorithm: accept on the velocity
// part |u|^beta / Sigma_v, sample angles only on acceptance.
CollisionStepRecord step_separable(VelocityEnsemble& ens, const SimConfig& cfg,
                                   StepDiagnostics& diag);

// One time step of the general algorithm: sigma sampled uniformly on the
// sphere for every virtual pair, accept on q / Sigma.
CollisionStepRecord step_general(VelocityEnsemble& ens, const SimConfig& cfg,
                                 StepDiagnostics& diag);

struct ForwardResult {
  VelocityEnsemble final_ensemble;
  std::vector<CollisionStepRecord> records;    // RecordPolicy::All
  std::vector<VelocityEnsemble> checkpoints;   // RecordPolicy::Checkpoint
  std::int32_t checkpoint_stride = 0;
  std::vector<Vec3> initial_normals;
  StepDiagnostics diagnostics;
  double wall_seconds = 0.0;
};

// Runs all M steps from the sampled initial condition and returns everything
// the adjoint pass needs under the configured record policy.
ForwardResult run_forward(const SimConfig& cfg);

// Plain sequential implementation kept as the reference for the OpenMP
// kernels above; produces bit-identical ensembles and records.
namespace ref {
CollisionStepRecord step_separable(VelocityEnsemble& ens, const SimConfig& cfg,
                                   StepDiagnostics& diag);
CollisionStepRecord step_general(VelocityEnsemble& ens, const SimConfig& cfg,
                                 StepDiagnostics& diag);
ForwardResult run_forward(const SimConfig& cfg);
}  // namespace ref

}  // namespace boltzgrad
