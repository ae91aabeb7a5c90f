#pragma once

#include <stdexcept>
#include <vector>

#include "sdpcrown/linalg.hpp"

namespace sdpcrown {

enum class NeuronStatus { active, inactive, unstable };

/// Triangle relaxation of one ReLU over the interval
/// [center - radius, center + radius]:
///   alpha * z <= relu(z) <= beta * z + gamma.
struct NeuronRelaxation {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  NeuronStatus status = NeuronStatus::inactive;
};

/// Boundary ties: lo == 0 counts as active, hi == 0 as inactive (checked in
/// that order), so a degenerate zero-radius interval resolves by the sign of
/// the center with center == 0 mapping to inactive.
inline NeuronRelaxation relax_relu(double center, double radius, double alpha_free) {
  if (radius < 0) throw std::invalid_argument("relax_relu: negative radius");
  const double lo = center - radius;
  const double hi = center + radius;
  if (hi <= 0) return {0.0, 0.0, 0.0, NeuronStatus::inactive};
  if (lo >= 0) return {1.0, 1.0, 0.0, NeuronStatus::active};
  const double beta = hi / (2.0 * radius);
  const double gamma = -hi * lo / (2.0 * radius);
  return {alpha_free, beta, gamma, NeuronStatus::unstable};
}

using LayerRelaxation = std::vector<NeuronRelaxation>;

inline LayerRelaxation relax_layer(const Vector& center, const Vector& radius,
                                   const Vector& alpha_free) {
  LayerRelaxation out(static_cast<std::size_t>(center.size()));
  for (Index i = 0; i < center.size(); ++i)
    out[static_cast<std::size_t>(i)] = relax_relu(center[i], radius[i], alpha_free[i]);
  return out;
}

}  // namespace sdpcrown
