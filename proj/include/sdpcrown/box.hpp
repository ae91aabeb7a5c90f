#pragma once

#include <vector>

#include "sdpcrown/network.hpp"
#include "sdpcrown/relaxation.hpp"
#include "sdpcrown/sets.hpp"

namespace sdpcrown {

/// Per-layer interval bounds on the preactivations z^(k).
struct BoxBounds {
  std::vector<Vector> center;  // z~^(k)
  std::vector<Vector> radius;  // rho~^(k), nonnegative
};

/// Interval bound propagation from the input box B_inf(center, radius).
inline BoxBounds ibp(const Network& net, const Vector& center, const Vector& radius) {
  if (center.size() != net.input_dim() || radius.size() != net.input_dim())
    throw std::invalid_argument("ibp: input dimension mismatch");
  if ((radius.array() < 0).any()) throw std::invalid_argument("ibp: negative radius");

  BoxBounds out;
  Vector c = center, r = radius;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (k > 0) {
      // post-ReLU interval [relu(lo), relu(hi)], back to center/radius form
      Vector lo = (c - r).cwiseMax(0.0);
      Vector hi = (c + r).cwiseMax(0.0);
      c = 0.5 * (lo + hi);
      r = 0.5 * (hi - lo);
    }
    const auto& layer = net.layers()[k];
    c = layer.weight * c + layer.bias_or_zero();
    r = layer.weight.cwiseAbs() * r;
    out.center.push_back(c);
    out.radius.push_back(r);
  }
  return out;
}

/// Intermediate state of one backward pass: g^(k), h^(k) for the layers it
/// visited, plus the bound expressed over the input coordinates.
struct BackwardResult {
  std::vector<Vector> g;   // g^(k), k = 1..top (index k-1)
  std::vector<double> h;   // h^(k)
  Vector g_in;
  double h_in = 0.0;
};

namespace detail {

/// Backward LiRPA over layers 1..top of the network, starting from the
/// linear functional c on z^(top). Relaxations must cover layers 1..top-1.
inline BackwardResult lirpa_backward_range(const Network& net,
                                           const std::vector<LayerRelaxation>& relax,
                                           const Vector& c, std::size_t top) {
  const auto& layers = net.layers();
  if (top == 0 || top > net.depth())
    throw std::invalid_argument("lirpa_backward: bad top layer");
  if (relax.size() + 1 < top)
    throw std::invalid_argument("lirpa_backward: missing relaxation layer");
  if (c.size() != layers[top - 1].weight.rows())
    throw std::invalid_argument("lirpa_backward: c dimension mismatch");

  BackwardResult res;
  res.g.assign(top, Vector());
  res.h.assign(top, 0.0);
  res.g[top - 1] = c;
  res.h[top - 1] = 0.0;

  for (std::size_t k = top - 1; k >= 1; --k) {
    const Vector& g_up = res.g[k];
    const Vector ck = layers[k].weight.transpose() * g_up;
    const double dk = res.h[k] + (layers[k].bias ? g_up.dot(*layers[k].bias) : 0.0);
    const auto& rel = relax[k - 1];
    Vector gk(ck.size());
    double hk = dk;
    for (Index i = 0; i < ck.size(); ++i) {
      const auto& nr = rel[static_cast<std::size_t>(i)];
      if (ck[i] >= 0) {
        gk[i] = ck[i] * nr.alpha;
      } else {
        gk[i] = ck[i] * nr.beta;
        hk += ck[i] * nr.gamma;
      }
    }
    res.g[k - 1] = gk;
    res.h[k - 1] = hk;
  }

  res.g_in = layers[0].weight.transpose() * res.g[0];
  res.h_in = res.h[0] + (layers[0].bias ? res.g[0].dot(*layers[0].bias) : 0.0);
  return res;
}

}  // namespace detail

/// Backward LiRPA pass: constructs g, h with g.x + h <= c.f(x) on the box
/// the relaxations were built from.
inline BackwardResult lirpa_backward(const Network& net,
                                     const std::vector<LayerRelaxation>& relax,
                                     const Vector& c) {
  return detail::lirpa_backward_range(net, relax, c, net.depth());
}

/// Exact minimum of g.x + h over the box B_inf(center, radius).
inline double close_bound_box(const LinearBound& bound, const Vector& center,
                              const Vector& radius) {
  return bound.g.dot(center) - bound.g.cwiseAbs().dot(radius) + bound.h;
}

/// Builds per-neuron relaxations for layers 1..N-1 from a BoxBounds record,
/// with a uniform free slope for unstable neurons.
inline std::vector<LayerRelaxation> relaxations_from_boxes(const BoxBounds& boxes,
                                                           double alpha_free = 0.5) {
  std::vector<LayerRelaxation> out;
  for (std::size_t k = 0; k + 1 < boxes.center.size(); ++k) {
    Vector a = Vector::Constant(boxes.center[k].size(), alpha_free);
    out.push_back(relax_layer(boxes.center[k], boxes.radius[k], a));
  }
  return out;
}

/// Tighter alternative to ibp: bounds each z_i^(k) by a backward pass with
/// c = +/- e_i on the truncated network, layer by layer from the input up.
inline BoxBounds intermediate_boxes_backward(const Network& net, const Vector& center,
                                             const Vector& radius, double alpha_free = 0.5) {
  if (center.size() != net.input_dim() || radius.size() != net.input_dim())
    throw std::invalid_argument("intermediate_boxes_backward: input dimension mismatch");
  BoxBounds out;
  std::vector<LayerRelaxation> relax;
  for (std::size_t k = 1; k <= net.depth(); ++k) {
    const Index width = net.layers()[k - 1].weight.rows();
    Vector lo(width), hi(width);
    for (Index i = 0; i < width; ++i) {
      Vector ei = Vector::Zero(width);
      ei[i] = 1.0;
      auto lb = detail::lirpa_backward_range(net, relax, ei, k);
      lo[i] = close_bound_box({lb.g_in, lb.h_in, Box{center, radius}}, center, radius);
      ei[i] = -1.0;
      auto ub = detail::lirpa_backward_range(net, relax, ei, k);
      hi[i] = -close_bound_box({ub.g_in, ub.h_in, Box{center, radius}}, center, radius);
    }
    out.center.push_back(0.5 * (lo + hi));
    out.radius.push_back(0.5 * (hi - lo));
    if (k < net.depth()) {
      Vector a = Vector::Constant(width, alpha_free);
      relax.push_back(relax_layer(out.center.back(), out.radius.back(), a));
    }
  }
  return out;
}

}  // namespace sdpcrown
