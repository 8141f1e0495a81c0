#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "boltzgrad/kernel.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

// The scattering frame and the G matrices divide by alpha_x^2 + alpha_y^2.
// Below this threshold all vectors are permuted (x,y,z) -> (y,z,x), evaluated,
// and permuted back.
inline constexpr double kTolAxis = 1e-12;

// Everything the adjoint pass needs about one collision: pre- and
// post-collision relative directions plus the sampled angles.
struct CollisionFrame {
  Vec3 alpha;  // (v - v1)/|v - v1|
  Vec3 sigma;  // post-collision relative direction
  double u_norm = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

// Elastic binary collision: midpoint preserved, relative velocity rotated
// onto sigma.
inline std::pair<Vec3, Vec3> post_collision(const Vec3& v, const Vec3& v1,
                                            const Vec3& sigma) {
  const Vec3 mid = (v + v1) * 0.5;
  const Vec3 half = sigma * (0.5 * norm(v - v1));
  return {mid + half, mid - half};
}

namespace detail {

inline Vec3 perm_fwd(const Vec3& a) { return {a.y, a.z, a.x}; }
inline Vec3 perm_inv(const Vec3& a) { return {a.z, a.x, a.y}; }

// sigma = F(u) * (sin t cos p, sin t sin p, cos t) with the frame's third
// column along u; assumes u_x^2 + u_y^2 is not degenerate.
inline Vec3 sigma_from_angles_core(const Vec3& u, double theta, double phi) {
  const double un = norm(u);
  const double w = std::sqrt(u.x * u.x + u.y * u.y);
  const double st = std::sin(theta), ct = std::cos(theta);
  const double s1 = st * std::cos(phi), s2 = st * std::sin(phi);
  return {
      (u.x * u.z * s1 - u.y * un * s2) / (un * w) + u.x * ct / un,
      (u.y * u.z * s1 + u.x * un * s2) / (un * w) + u.y * ct / un,
      -w * s1 / un + u.z * ct / un,
  };
}

// S w where S_lj = sum_i sigma_i (G_l)_ij; S = -|u| (d sigma/d u)^T for the
// frame above. Assumes alpha is not axis-degenerate.
inline Vec3 g_tensor_action_core(const Vec3& a, const Vec3& sigma, const Vec3& w) {
  const double w2 = a.x * a.x + a.y * a.y;
  const Vec3 g1w{(a.y * w.y + a.x * a.x * a.z * w.z) / w2,
                 (-a.y * w.x + a.x * a.y * a.z * w.z) / w2,
                 (-a.x * a.x * a.z * w.x - a.x * a.y * a.z * w.y) / w2};
  const Vec3 g2w{(-a.x * w.y + a.x * a.y * a.z * w.z) / w2,
                 (a.x * w.x + a.y * a.y * a.z * w.z) / w2,
                 (-a.x * a.y * a.z * w.x - a.y * a.y * a.z * w.y) / w2};
  const Vec3 g3w{-a.x * w.z, -a.y * w.z, a.x * w.x + a.y * w.y};
  return {dot(sigma, g1w), dot(sigma, g2w), dot(sigma, g3w)};
}

}  // namespace detail

inline Vec3 sigma_from_angles(const Vec3& u, double theta, double phi) {
  const double un2 = norm2(u);
  if (un2 < kTolU * kTolU) throw std::domain_error("degenerate relative velocity");
  if (u.x * u.x + u.y * u.y < kTolAxis * un2)
    return detail::perm_inv(detail::sigma_from_angles_core(detail::perm_fwd(u), theta, phi));
  return detail::sigma_from_angles_core(u, theta, phi);
}

inline Vec3 g_tensor_action(const Vec3& alpha, const Vec3& sigma, const Vec3& w) {
  if (alpha.x * alpha.x + alpha.y * alpha.y < kTolAxis)
    return detail::perm_inv(detail::g_tensor_action_core(
        detail::perm_fwd(alpha), detail::perm_fwd(sigma), detail::perm_fwd(w)));
  return detail::g_tensor_action_core(alpha, sigma, w);
}

// Recovers (theta, phi) of a stored sigma in the same frame convention.
inline std::pair<double, double> angles_from_sigma(const Vec3& u, const Vec3& sigma) {
  const double un = norm(u);
  if (un < kTolU) throw std::domain_error("degenerate relative velocity");
  Vec3 uu = u, ss = sigma;
  const bool permuted = u.x * u.x + u.y * u.y < kTolAxis * un * un;
  if (permuted) {
    uu = detail::perm_fwd(u);
    ss = detail::perm_fwd(sigma);
  }
  const double w = std::sqrt(uu.x * uu.x + uu.y * uu.y);
  // Components of sigma in the frame (col1, col2, u/|u|).
  const double s1 = (uu.x * uu.z * ss.x + uu.y * uu.z * ss.y - w * w * ss.z) / (un * w);
  const double s2 = (-uu.y * ss.x + uu.x * ss.y) / w;
  double ct = dot(uu, ss) / un;
  if (ct > 1.0) ct = 1.0;
  if (ct < -1.0) ct = -1.0;
  double phi = std::atan2(s2, s1);
  if (phi < 0.0) phi += kTwoPi;
  return {std::acos(ct), phi};
}

// Action of A(sigma, alpha) on a stacked pair (g, g1):
//   top/bottom = 1/2 (g + g1) +- 1/2 sigma [alpha . (g - g1)].
inline std::pair<Vec3, Vec3> a_action(const Vec3& sigma, const Vec3& alpha,
                                      const Vec3& g, const Vec3& g1) {
  const Vec3 mean = (g + g1) * 0.5;
  const Vec3 d = sigma * (0.5 * dot(alpha, g - g1));
  return {mean + d, mean - d};
}

// Action of B(sigma, alpha) = A(sigma, alpha)^T = A^{-1}.
inline std::pair<Vec3, Vec3> b_action(const Vec3& sigma, const Vec3& alpha,
                                      const Vec3& g, const Vec3& g1) {
  return a_action(alpha, sigma, g, g1);
}

// Transpose-Jacobian action of the collision map on an influence pair.
// With angle_dependent = false this is the plain B action (sigma treated as
// fixed); with true it adds the correction for sigma's dependence on the
// pre-collision relative direction:
//   top += 1/2 S (g1 - g), bottom += 1/2 S (g - g1).
inline std::pair<Vec3, Vec3> adjoint_D_action(const CollisionFrame& frame, const Vec3& g,
                                              const Vec3& g1, bool angle_dependent) {
  auto [top, bottom] = b_action(frame.sigma, frame.alpha, g, g1);
  if (angle_dependent) {
    const Vec3 corr = g_tensor_action(frame.alpha, frame.sigma, g1 - g) * 0.5;
    top += corr;
    bottom -= corr;
  }
  return {top, bottom};
}

}  // namespace boltzgrad
