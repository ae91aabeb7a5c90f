#pragma once

#include <cmath>

#include "sdpcrown/network.hpp"

namespace sdpcrown {

struct AttackResult {
  double value = 0.0;  // best c.f(x) found
  Vector point;        // the attaining x
  bool feasible = false;
};

/// Gradient of c.f(x) with respect to x. ReLU at exactly zero uses
/// subgradient 0.
inline Vector input_gradient(const Network& net, const Vector& c, const Vector& x) {
  const auto zs = forward_trace(net, x);
  const std::size_t N = net.depth();
  Vector grad = c;
  for (std::size_t k = N; k >= 1; --k) {
    grad = net.layers()[k - 1].weight.transpose() * grad;
    if (k > 1) {
      const Vector& z = zs[k - 2];
      for (Index i = 0; i < grad.size(); ++i)
        if (z[i] <= 0) grad[i] = 0.0;
    }
  }
  return grad;
}

inline Vector project_ball(const Vector& x, const Vector& center, double rho) {
  const Vector d = x - center;
  const double nd = d.norm();
  if (nd <= rho) return x;
  return center + (rho / nd) * d;
}

/// Projected gradient descent on c.f(x) over B2(center, rho). Restart 0
/// starts at the center; the rest start uniform in the ball with per-restart
/// seeds, so restarts can run in any order with the same result.
inline AttackResult pgd_upper_bound(const Network& net, const Vector& c, const Vector& center,
                                    double rho, int steps = 200, int restarts = 10,
                                    double step_size_factor = 0.1, std::uint64_t seed = 0) {
  if (rho < 0) throw std::invalid_argument("pgd_upper_bound: negative rho");
  auto objective = [&](const Vector& x) { return c.dot(forward(net, x)); };

  AttackResult best{objective(center), center, true};
  if (rho == 0) return best;

  // step size decays geometrically from step_size_factor*rho down to 1% of
  // it, so early steps explore and late steps settle into the local minimum
  const double step0 = step_size_factor * rho;
  const double decay = steps > 0 ? std::pow(0.01, 1.0 / steps) : 1.0;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed * 1000003ull + static_cast<std::uint64_t>(r));
    Vector x = r == 0 ? center : ball_sample(center, rho, rng);
    double step = step0;
    for (int s = 0; s <= steps; ++s) {
      const double val = objective(x);
      if (val < best.value) {
        best.value = val;
        best.point = x;
      }
      if (s == steps) break;
      Vector grad = input_gradient(net, c, x);
      const double ng = grad.norm();
      if (ng > 0) grad /= ng;
      x = project_ball(x - step * grad, center, rho);
      step *= decay;
    }
  }
  best.feasible = (best.point - center).norm() <= rho * (1.0 + 1e-12);
  return best;
}

/// Product-of-Lipschitz baseline:
///   c.f(center) - rho * ||c^T W^(N)||_2 * prod_{k<N} ||W^(k)||_2.
inline double lip_naive_bound(const Network& net, const Vector& c, const Vector& center,
                              double rho) {
  double lip = (net.layers().back().weight.transpose() * c).norm();
  for (std::size_t k = 0; k + 1 < net.depth(); ++k)
    lip *= spectral_norm(net.layers()[k].weight, 1e-12);
  return c.dot(forward(net, center)) - rho * lip;
}

/// Minimum of c.f(x) over n seeded samples; sample 0 is always the center,
/// the rest are uniform in the ball.
inline double sample_min(const Network& net, const Vector& c, const Vector& center,
                         double rho, int n, std::uint64_t seed = 0) {
  if (n < 1) throw std::invalid_argument("sample_min: n must be >= 1");
  double best = c.dot(forward(net, center));
  std::mt19937_64 rng(seed);
  for (int s = 1; s < n; ++s)
    best = std::min(best, c.dot(forward(net, ball_sample(center, rho, rng))));
  return best;
}

}  // namespace sdpcrown
