#pragma once

#include <cmath>
#include <vector>

#include "sdpcrown/box.hpp"
#include "sdpcrown/network.hpp"
#include "sdpcrown/relaxation.hpp"
#include "sdpcrown/sets.hpp"

namespace sdpcrown {

/// Per-layer l2 balls containing the preactivations.
struct BallBounds {
  std::vector<Vector> center;  // z^^(k)
  std::vector<double> radius;  // rho^(k)
};

/// Per-layer axis-aligned ellipsoids containing the preactivations.
struct EllipsoidBounds {
  std::vector<Vector> center;
  std::vector<Vector> axes;  // strictly positive
};

/// Which argument of the three-way minimum in phi is active. Ties resolve
/// in the order first, second, zero; gradients use the same convention.
enum class PhiBranch { first, second, zero };

/// phi_i = min{c_i - g_i - lambda*xc_i, g_i + lambda*xc_i, 0}.
inline Vector phi(const Vector& c, const Vector& g, const Vector& center, double lambda,
                  std::vector<PhiBranch>* branches = nullptr) {
  if (c.size() != g.size() || c.size() != center.size())
    throw std::invalid_argument("phi: dimension mismatch");
  if (lambda < 0) throw std::invalid_argument("phi: negative lambda");
  Vector out(c.size());
  if (branches) branches->assign(static_cast<std::size_t>(c.size()), PhiBranch::zero);
  for (Index i = 0; i < c.size(); ++i) {
    const double a = c[i] - g[i] - lambda * center[i];
    const double b = g[i] + lambda * center[i];
    if (a <= b && a <= 0) {
      out[i] = a;
      if (branches) (*branches)[static_cast<std::size_t>(i)] = PhiBranch::first;
    } else if (b <= 0) {
      out[i] = b;
      if (branches) (*branches)[static_cast<std::size_t>(i)] = PhiBranch::second;
    } else {
      out[i] = 0.0;
    }
  }
  return out;
}

/// Offset h(g, lambda) certifying c.relu(x) >= g.x + h on B2(center, rho).
/// lambda = 0 is the limit case and is only valid when phi(g, 0) vanishes.
inline double sdp_offset(const Vector& c, const Vector& g, const Vector& center,
                         double rho, double lambda) {
  if (lambda < 0) throw std::invalid_argument("sdp_offset: negative lambda");
  if (lambda == 0) {
    if (phi(c, g, center, 0.0).norm() != 0)
      throw std::invalid_argument("sdp_offset: lambda = 0 requires phi(g, 0) = 0");
    return 0.0;
  }
  const Vector p = phi(c, g, center, lambda);
  return -0.5 * (lambda * (rho * rho - center.squaredNorm()) +
                 p.squaredNorm() / lambda);
}

/// sup over lambda >= 0 of sdp_offset at a zero center:
/// -rho * ||min{c - g, g, 0}||_2. Exact minimum of c.relu(x) - g.x on the ball.
inline double optimal_offset_zero_center(const Vector& c, const Vector& g, double rho) {
  if (c.size() != g.size()) throw std::invalid_argument("optimal_offset_zero_center: dimension mismatch");
  double ss = 0.0;
  for (Index i = 0; i < c.size(); ++i) {
    const double m = std::min({c[i] - g[i], g[i], 0.0});
    ss += m * m;
  }
  return -rho * std::sqrt(ss);
}

/// Maximizer of the zero-center offset: lambda* = ||phi|| / rho.
inline double optimal_lambda_zero_center(const Vector& c, const Vector& g, double rho) {
  const Vector p = phi(c, g, Vector::Zero(c.size()), 0.0);
  return rho > 0 ? p.norm() / rho : 0.0;
}

namespace detail {
// Tight tolerance for norms entering certified radii; the (1 + 10*tol)
// inflation stays inside the 1e-9 golden-test budget.
inline constexpr double kRadiusNormTol = 1e-12;
}  // namespace detail

/// Per-layer balls via cumulative spectral norms. ReLU is applied to the
/// centers between layers, which keeps the radii valid by 1-Lipschitzness.
inline BallBounds ball_propagate(const Network& net, const Vector& center, double rho) {
  if (center.size() != net.input_dim())
    throw std::invalid_argument("ball_propagate: input dimension mismatch");
  BallBounds out;
  Vector c = center;
  double r = rho;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (k > 0) c = c.cwiseMax(0.0);
    const auto& layer = net.layers()[k];
    c = layer.weight * c + layer.bias_or_zero();
    r *= spectral_norm(layer.weight, detail::kRadiusNormTol);
    out.center.push_back(c);
    out.radius.push_back(r);
  }
  return out;
}

/// One affine step of the ellipsoid heuristic:
///   y = rowwise_l2(W diag(axes)),  axes' = y * ||diag(y)^-1 W diag(axes)||_2.
/// A zero row of W diag(axes) maps to a point; its axis is floored at 1e-12.
inline std::pair<Vector, Vector> ellipsoid_propagate(const Matrix& W, const Vector& center,
                                                     const Vector& axes,
                                                     const Vector* bias = nullptr) {
  if (W.cols() != center.size() || W.cols() != axes.size())
    throw std::invalid_argument("ellipsoid_propagate: dimension mismatch");
  if ((axes.array() <= 0).any())
    throw std::invalid_argument("ellipsoid_propagate: axes must be positive");
  constexpr double eps_axis = 1e-12;

  Vector new_center = W * center;
  if (bias) new_center += *bias;

  const Matrix M = W * axes.asDiagonal();
  const Vector y = M.rowwise().norm();
  Matrix normalized = M;
  for (Index r = 0; r < M.rows(); ++r)
    if (y[r] > 0) normalized.row(r) /= y[r];
  const double sigma = spectral_norm(normalized, detail::kRadiusNormTol);
  Vector new_axes = y * sigma;
  for (Index r = 0; r < new_axes.size(); ++r)
    if (new_axes[r] <= 0) new_axes[r] = eps_axis;
  return {new_center, new_axes};
}

/// Per-layer ellipsoids from an input ball B2(center, rho); centers are
/// ReLU'd between layers, axes carry through ReLU unchanged.
inline EllipsoidBounds ellipsoid_propagate_network(const Network& net, const Vector& center,
                                                   double rho) {
  if (center.size() != net.input_dim())
    throw std::invalid_argument("ellipsoid_propagate_network: input dimension mismatch");
  EllipsoidBounds out;
  Vector c = center;
  Vector axes = Vector::Constant(center.size(), rho > 0 ? rho : 1e-12);
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (k > 0) c = c.cwiseMax(0.0);
    const auto& layer = net.layers()[k];
    Vector b = layer.bias_or_zero();
    auto [nc, na] = ellipsoid_propagate(layer.weight, c, axes, &b);
    c = nc;
    axes = na;
    out.center.push_back(c);
    out.axes.push_back(axes);
  }
  return out;
}

/// phi for the ellipsoid/box intersection offset,
///   phi_i = axes_i * min{a_i, b_i, 0} with
///   a_i = c_i - g_i + tau_i(brad_i - bc_i) - lambda * ec_i / axes_i^2,
///   b_i = g_i + tau_i(brad_i + bc_i) + lambda * ec_i / axes_i^2.
inline Vector phi_extension(const Vector& c, const Vector& g, const Ellipsoid& ell,
                            const Box& box, double lambda, const Vector& tau,
                            std::vector<PhiBranch>* branches = nullptr) {
  const Index n = c.size();
  Vector out(n);
  if (branches) branches->assign(static_cast<std::size_t>(n), PhiBranch::zero);
  for (Index i = 0; i < n; ++i) {
    const double w = lambda * ell.center[i] / (ell.axes[i] * ell.axes[i]);
    const double a = c[i] - g[i] + tau[i] * (box.radius[i] - box.center[i]) - w;
    const double b = g[i] + tau[i] * (box.radius[i] + box.center[i]) + w;
    if (a <= b && a <= 0) {
      out[i] = ell.axes[i] * a;
      if (branches) (*branches)[static_cast<std::size_t>(i)] = PhiBranch::first;
    } else if (b <= 0) {
      out[i] = ell.axes[i] * b;
      if (branches) (*branches)[static_cast<std::size_t>(i)] = PhiBranch::second;
    } else {
      out[i] = 0.0;
    }
  }
  return out;
}

/// Offset h(g, lambda, tau) certifying c.relu(x) >= g.x + h on the
/// intersection of the ellipsoid and the box. tau must be zero for neurons
/// whose box interval does not straddle zero.
inline double sdp_offset_extension(const Vector& c, const Vector& g, const Ellipsoid& ell,
                                   const Box& box, double lambda, const Vector& tau) {
  if (c.size() != g.size() || c.size() != ell.center.size() || c.size() != box.center.size() ||
      c.size() != tau.size())
    throw std::invalid_argument("sdp_offset_extension: dimension mismatch");
  if (lambda <= 0) throw std::invalid_argument("sdp_offset_extension: lambda must be positive");
  if ((tau.array() < 0).any())
    throw std::invalid_argument("sdp_offset_extension: negative tau");

  const Vector scaled_center = ell.center.cwiseQuotient(ell.axes);
  const Vector p = phi_extension(c, g, ell, box, lambda, tau);
  const double box_term =
      2.0 * tau.dot(box.radius.cwiseProduct(box.radius) - box.center.cwiseProduct(box.center));
  return -0.5 * (lambda * (1.0 - scaled_center.squaredNorm()) + box_term +
                 p.squaredNorm() / lambda);
}

/// Exact minimum of g.x + h over B2(center, rho).
inline double close_bound_ball(const LinearBound& bound, const Vector& center, double rho) {
  return bound.g.dot(center) - rho * bound.g.norm() + bound.h;
}

/// Backward pass with the per-layer box offsets replaced by the l2-ball
/// offsets h(g^(k), lambda^(k)). Relaxations come from the enclosing box.
inline BackwardResult sdpcrown_backward(const Network& net,
                                        const std::vector<LayerRelaxation>& relax,
                                        const Vector& c, const BallBounds& balls,
                                        const Vector& lambdas) {
  const std::size_t N = net.depth();
  if (relax.size() + 1 < N)
    throw std::invalid_argument("sdpcrown_backward: missing relaxation layer");
  if (static_cast<std::size_t>(lambdas.size()) + 1 < N)
    throw std::invalid_argument("sdpcrown_backward: missing lambda");

  BackwardResult res;
  res.g.assign(N, Vector());
  res.h.assign(N, 0.0);
  res.g[N - 1] = c;
  res.h[N - 1] = 0.0;

  for (std::size_t k = N - 1; k >= 1; --k) {
    const Vector& g_up = res.g[k];
    const auto& layer = net.layers()[k];
    const Vector ck = layer.weight.transpose() * g_up;
    const double dk = res.h[k] + (layer.bias ? g_up.dot(*layer.bias) : 0.0);
    const auto& rel = relax[k - 1];
    Vector gk(ck.size());
    for (Index i = 0; i < ck.size(); ++i) {
      const auto& nr = rel[static_cast<std::size_t>(i)];
      gk[i] = ck[i] >= 0 ? ck[i] * nr.alpha : ck[i] * nr.beta;
    }
    res.g[k - 1] = gk;
    res.h[k - 1] =
        sdp_offset(ck, gk, balls.center[k - 1], balls.radius[k - 1], lambdas[static_cast<Index>(k) - 1]) +
        dk;
  }

  res.g_in = net.layers()[0].weight.transpose() * res.g[0];
  res.h_in = res.h[0] + (net.layers()[0].bias ? res.g[0].dot(*net.layers()[0].bias) : 0.0);
  return res;
}

/// Extension variant: offsets are taken over the per-layer ellipsoid
/// intersected with the per-layer box. tau entries of stable neurons are
/// forced to zero before use.
inline BackwardResult sdpcrown_backward_ext(const Network& net,
                                            const std::vector<LayerRelaxation>& relax,
                                            const Vector& c, const EllipsoidBounds& ells,
                                            const BoxBounds& boxes, const Vector& lambdas,
                                            const std::vector<Vector>& taus) {
  const std::size_t N = net.depth();
  if (relax.size() + 1 < N || taus.size() + 1 < N)
    throw std::invalid_argument("sdpcrown_backward_ext: missing per-layer parameters");

  BackwardResult res;
  res.g.assign(N, Vector());
  res.h.assign(N, 0.0);
  res.g[N - 1] = c;
  res.h[N - 1] = 0.0;

  for (std::size_t k = N - 1; k >= 1; --k) {
    const Vector& g_up = res.g[k];
    const auto& layer = net.layers()[k];
    const Vector ck = layer.weight.transpose() * g_up;
    const double dk = res.h[k] + (layer.bias ? g_up.dot(*layer.bias) : 0.0);
    const auto& rel = relax[k - 1];
    Vector gk(ck.size());
    Vector tk = taus[k - 1];
    for (Index i = 0; i < ck.size(); ++i) {
      const auto& nr = rel[static_cast<std::size_t>(i)];
      gk[i] = ck[i] >= 0 ? ck[i] * nr.alpha : ck[i] * nr.beta;
      if (nr.status != NeuronStatus::unstable) tk[i] = 0.0;
    }
    Ellipsoid ell{ells.center[k - 1], ells.axes[k - 1]};
    Box box{boxes.center[k - 1], boxes.radius[k - 1]};
    res.g[k - 1] = gk;
    res.h[k - 1] =
        sdp_offset_extension(ck, gk, ell, box, lambdas[static_cast<Index>(k) - 1], tk) + dk;
  }

  res.g_in = net.layers()[0].weight.transpose() * res.g[0];
  res.h_in = res.h[0] + (net.layers()[0].bias ? res.g[0].dot(*net.layers()[0].bias) : 0.0);
  return res;
}

}  // namespace sdpcrown
