#pragma once

#include <stdexcept>
#include <variant>

#include "sdpcrown/linalg.hpp"

namespace sdpcrown {

/// Axis-aligned box {x : |x_i - center_i| <= radius_i}.
struct Box {
  Vector center;
  Vector radius;
};

/// l2 ball {x : ||x - center||_2 <= radius}.
struct Ball {
  Vector center;
  double radius = 0.0;
};

/// Axis-aligned ellipsoid {x : ||diag(axes)^-1 (x - center)||_2 <= 1}.
struct Ellipsoid {
  Vector center;
  Vector axes;
};

using PerturbationSet = std::variant<Box, Ball, Ellipsoid>;

inline const Vector& set_center(const PerturbationSet& s) {
  return std::visit([](const auto& v) -> const Vector& { return v.center; }, s);
}

/// Tightest enclosing box; for a ball this is B_inf(center, radius * 1).
inline Box enclosing_box(const PerturbationSet& s) {
  if (const auto* b = std::get_if<Box>(&s)) return *b;
  if (const auto* b = std::get_if<Ball>(&s))
    return {b->center, Vector::Constant(b->center.size(), b->radius)};
  const auto& e = std::get<Ellipsoid>(s);
  return {e.center, e.axes};
}

/// Linear lower bound g.x + h <= c.f(x), valid for all x in input_set.
struct LinearBound {
  Vector g;
  double h = 0.0;
  PerturbationSet input_set;
};

}  // namespace sdpcrown
