#pragma once

#include <cmath>
#include <stdexcept>

#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

// Relative speeds below this are treated as non-colliding everywhere: the
// collision map would be the identity and the score functions are singular.
inline constexpr double kTolU = 1e-12;

// Threshold on 1+cos(theta) below which the angular score is undefined.
inline constexpr double kTolTheta = 1e-12;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Collision kernel family
//
//   q(v - v1, sigma) = c_norm * (1 + cos(theta))^kappa * |v - v1|^beta,
//   cos(theta) = sigma . (v - v1)/|v - v1|,
//   c_norm     = (1 + kappa) / (2^(kappa+2) * pi * epsilon),
//
// normalized so the weighted sphere area of the angular factor is 1/epsilon.
// sigma_v bounds the velocity part |u|^beta (separable sampling path);
// sigma_total = c_norm * 2^kappa * sigma_v bounds the full kernel (general
// rejection path).
struct KernelSpec {
  double kappa = 0.0;
  double beta = 0.0;
  double epsilon = 10.0;
  double sigma_v = 1.0;
  double sigma_total = 0.0;
  double c_norm = 0.0;
};

inline KernelSpec make_kernel_spec(double kappa, double beta, double epsilon,
                                   double sigma_v = 0.0) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("kernel: kappa must be >= 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("kernel: beta must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("kernel: epsilon must be > 0");
  KernelSpec ks;
  ks.kappa = kappa;
  ks.beta = beta;
  ks.epsilon = epsilon;
  ks.sigma_v = sigma_v > 0.0 ? sigma_v : std::pow(10.0, beta);
  ks.c_norm = (1.0 + kappa) / (std::pow(2.0, kappa + 2.0) * kPi * epsilon);
  ks.sigma_total = ks.c_norm * std::pow(2.0, kappa) * ks.sigma_v;
  return ks;
}

// q(u, sigma); zero for degenerate relative velocity.
inline double eval_kernel(const Vec3& u, const Vec3& sigma, const KernelSpec& ks) {
  const double un = norm(u);
  if (un < kTolU) return 0.0;
  const double c = dot(sigma, u) / un;
  const double opc = 1.0 + c > 0.0 ? 1.0 + c : 0.0;
  const double angular = ks.kappa == 0.0 ? 1.0 : std::pow(opc, ks.kappa);
  return ks.c_norm * angular * std::pow(un, ks.beta);
}

// Integral of the angular factor over the unit sphere; equals 1/epsilon for
// this normalization.
inline double weighted_area(const KernelSpec& ks) {
  return ks.c_norm * kTwoPi * std::pow(2.0, ks.kappa + 1.0) / (ks.kappa + 1.0);
}

// Scattering angle with density proportional to (1+cos t)^kappa sin t,
// via the closed-form inverse CDF cos(theta) = 2 (1-xi)^(1/(kappa+1)) - 1.
inline double sample_theta(const KernelSpec& ks, double xi) {
  double c = 2.0 * std::pow(1.0 - xi, 1.0 / (ks.kappa + 1.0)) - 1.0;
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

// d/dv log |u|^beta = beta u / |u|^2 (u = v - v1; the v1 gradient is the
// negation).
inline Vec3 grad_log_q_velocity(const Vec3& u, double beta) {
  const double u2 = norm2(u);
  if (u2 < kTolU * kTolU) throw std::domain_error("degenerate relative velocity");
  return u * (beta / u2);
}

// d/dv q(u, sigma) with sigma held fixed; finite as q -> 0 for kappa >= 1.
inline Vec3 grad_q_full(const Vec3& u, const Vec3& sigma, const KernelSpec& ks) {
  const double un = norm(u);
  if (un < kTolU) throw std::domain_error("degenerate relative velocity");
  const Vec3 alpha = u / un;
  const double c = dot(sigma, alpha);
  const double opc = 1.0 + c > 0.0 ? 1.0 + c : 0.0;
  const double angular = ks.kappa == 0.0 ? 1.0 : std::pow(opc, ks.kappa);
  const double q = ks.c_norm * angular * std::pow(un, ks.beta);
  Vec3 g = u * (ks.beta * q / (un * un));
  if (ks.kappa > 0.0) {
    const double dangular = ks.kappa * std::pow(opc, ks.kappa - 1.0);
    g += (sigma - alpha * c) *
         (ks.c_norm * dangular * std::pow(un, ks.beta) / un);
  }
  return g;
}

// d/dv log q with sigma held fixed:
//   beta u/|u|^2 + kappa/(1+cos theta) (sigma - (sigma.alpha) alpha)/|u|.
inline Vec3 grad_log_q_full(const Vec3& u, const Vec3& sigma, const KernelSpec& ks) {
  const double un = norm(u);
  if (un < kTolU) throw std::domain_error("degenerate relative velocity");
  const Vec3 alpha = u / un;
  Vec3 g = u * (ks.beta / (un * un));
  if (ks.kappa > 0.0) {
    const double c = dot(sigma, alpha);
    if (1.0 + c <= kTolTheta) throw std::domain_error("vanishing kernel, score undefined");
    g += (sigma - alpha * c) * (ks.kappa / ((1.0 + c) * un));
  }
  return g;
}

// Score of the rejection branch: -d/dv log(bound - q). The separable path
// rejects on the velocity part only; the general path on the full kernel.
inline Vec3 grad_log_rejection(const Vec3& u, const Vec3* sigma, const KernelSpec& ks,
                               bool separable) {
  const double un = norm(u);
  if (un < kTolU) throw std::domain_error("degenerate relative velocity");
  if (separable) {
    const double qv = std::pow(un, ks.beta);
    if (qv >= ks.sigma_v)
      throw std::domain_error("acceptance certain, rejection score undefined");
    if (ks.beta == 0.0) return Vec3{};
    return u * (-ks.beta * qv / (un * un * (ks.sigma_v - qv)));
  }
  if (sigma == nullptr) throw std::invalid_argument("general rejection score needs sigma");
  const double q = eval_kernel(u, *sigma, ks);
  if (q >= ks.sigma_total)
    throw std::domain_error("acceptance certain, rejection score undefined");
  return grad_q_full(u, *sigma, ks) * (-1.0 / (ks.sigma_total - q));
}

}  // namespace boltzgrad
