#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "sdpcrown/linalg.hpp"

namespace sdpcrown {

namespace detail {

// Exact minimum of p.y over {y >= 0, ||y - yc|| <= rho}. The KKT system
// gives y(t) = max(yc - t*p, 0) with t = 1/(2*mu); ||y(t) - yc|| is
// nondecreasing in t, so the boundary multiplier is found by bisection.
inline double min_linear_orthant_ball(const Vector& p, const Vector& yc, double rho) {
  const Index n = p.size();
  auto point_at = [&](double t) { return (yc - t * p).cwiseMax(0.0).eval(); };
  auto dist_at = [&](double t) { return (point_at(t) - yc).norm(); };

  if (dist_at(0.0) > rho) return std::numeric_limits<double>::infinity();  // empty slice

  // Interior-face optimum: value 0 whenever p >= 0 and the pinned point fits.
  if ((p.array() >= 0).all()) {
    Vector y = yc.cwiseMax(0.0);
    for (Index i = 0; i < n; ++i)
      if (p[i] > 0) y[i] = 0.0;
    if ((y - yc).norm() <= rho) return 0.0;
  }

  double t_lo = 0.0, t_hi = 1.0;
  int guard = 0;
  while (dist_at(t_hi) < rho) {
    t_hi *= 2.0;
    if (++guard > 200) return p.dot(point_at(t_hi));  // plateau below rho
  }
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (t_lo + t_hi);
    (dist_at(mid) < rho ? t_lo : t_hi) = mid;
  }
  return p.dot(point_at(0.5 * (t_lo + t_hi)));
}

}  // namespace detail

/// Brute-force minimum of c.relu(x) - g.x over B2(center, rho) by sign
/// pattern enumeration: within each orthant the objective is linear and the
/// constrained minimum is computed exactly from the KKT conditions. A seeded
/// sampling pass is kept as a safety net.
inline double brute_min_relu_ball(const Vector& c, const Vector& g, const Vector& center,
                                  double rho, std::uint64_t seed = 0,
                                  int safety_samples = 100000) {
  const Index n = c.size();
  if (n > 12) throw std::invalid_argument("brute_min_relu_ball: dimension > 12");
  if (c.size() != g.size() || c.size() != center.size())
    throw std::invalid_argument("brute_min_relu_ball: dimension mismatch");

  auto objective = [&](const Vector& x) { return c.dot(x.cwiseMax(0.0)) - g.dot(x); };

  if (rho == 0) return objective(center);

  double best = objective(center);
  Vector p(n), yc(n);
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    for (Index i = 0; i < n; ++i) {
      const bool positive = (mask >> i) & 1u;
      p[i] = positive ? c[i] - g[i] : g[i];
      yc[i] = positive ? center[i] : -center[i];
    }
    best = std::min(best, detail::min_linear_orthant_ball(p, yc, rho));
  }

  std::mt19937_64 rng(seed);
  for (int s = 0; s < safety_samples; ++s)
    best = std::min(best, objective(ball_sample(center, rho, rng)));
  return best;
}

/// Central finite differences, one coordinate at a time.
inline Vector finite_difference(const std::function<double(const Vector&)>& fn,
                                const Vector& point, double step) {
  Vector grad(point.size());
  Vector x = point;
  for (Index i = 0; i < point.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = fn(x);
    x[i] = orig - step;
    const double down = fn(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace sdpcrown
