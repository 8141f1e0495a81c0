#pragma once

#include <cstdint>
#include <vector>

#include "boltzgrad/collision_geometry.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

enum class Outcome : std::uint8_t {
  Real,         // virtual collision accepted as a real collision
  VirtualOnly,  // virtual collision rejected (or degenerate |u| < tol)
};

// One virtual collision pair as seen by the adjoint pass. For separable-path
// rejections only alpha and u_norm are meaningful (angles are never sampled);
// sigma/theta/phi stay zero. q holds the value used in the acceptance test:
// |u|^beta for the separable path, the full kernel for the general path.
struct PairEvent {
  std::uint32_t i = 0;
  std::uint32_t i1 = 0;
  Outcome outcome = Outcome::VirtualOnly;
  Vec3 alpha;
  Vec3 sigma;
  double u_norm = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double q = 0.0;
};

inline bool operator==(const PairEvent& a, const PairEvent& b) {
  return a.i == b.i && a.i1 == b.i1 && a.outcome == b.outcome && a.alpha == b.alpha &&
         a.sigma == b.sigma && a.u_norm == b.u_norm && a.theta == b.theta &&
         a.phi == b.phi && a.q == b.q;
}

struct CollisionStepRecord {
  std::int32_t step = 0;
  std::vector<PairEvent> events;
};

inline bool operator==(const CollisionStepRecord& a, const CollisionStepRecord& b) {
  return a.step == b.step && a.events == b.events;
}

inline CollisionFrame frame_of(const PairEvent& ev) {
  return {ev.alpha, ev.sigma, ev.u_norm, ev.theta, ev.phi};
}

}  // namespace boltzgrad
