#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "sdpcrown/box.hpp"

using namespace sdpcrown;

namespace {

Network random_net(std::mt19937_64& rng, std::initializer_list<Index> widths, bool bias = true) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<DenseLayer> layers;
  auto it = widths.begin();
  Index in = *it++;
  for (; it != widths.end(); ++it) {
    Matrix W(*it, in);
    for (Index r = 0; r < W.rows(); ++r)
      for (Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng) / std::sqrt(double(in));
    DenseLayer l{W, std::nullopt};
    if (bias) {
      Vector b(*it);
      for (Index r = 0; r < b.size(); ++r) b[r] = 0.2 * dist(rng);
      l.bias = b;
    }
    layers.push_back(std::move(l));
    in = *it;
  }
  return Network(std::move(layers));
}

// Worked example: x^ = (1,1), rho = 1, no biases. With the lower ReLU slope
// fixed to 0, the backward pass yields g = (0,0), h = -2.
Network golden_net() {
  Matrix W1(2, 2), W2(2, 2), W3(1, 2);
  W1 << 0, 1, 1, 0;
  W2 << -1, 1, 1, -1;
  W3 << -1, -1;
  return Network({{W1, std::nullopt}, {W2, std::nullopt}, {W3, std::nullopt}});
}

Vector box_sample(const Vector& center, const Vector& radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector x = center;
  for (Index i = 0; i < x.size(); ++i) x[i] += u(rng) * radius[i];
  return x;
}

}  // namespace

TEST_CASE("ibp intervals contain all sampled preactivations") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_net(rng, {4, 6, 5, 3});
    const Vector center = gaussian_vector(4, rng);
    const Vector radius = Vector::Constant(4, 0.5);
    const auto boxes = ibp(net, center, radius);
    REQUIRE(boxes.center.size() == net.depth());
    for (int s = 0; s < 500; ++s) {
      const auto zs = forward_trace(net, box_sample(center, radius, rng));
      for (std::size_t k = 0; k < zs.size(); ++k) {
        const Vector slack =
            boxes.radius[k] - (zs[k] - boxes.center[k]).cwiseAbs();
        CHECK(slack.minCoeff() >= -1e-9);
      }
    }
  }
}

TEST_CASE("ibp on the golden network") {
  const Network net = golden_net();
  Vector c(2), r(2);
  c << 1, 1;
  r << 1, 1;
  const auto boxes = ibp(net, c, r);
  CHECK(boxes.center[0] == c);
  CHECK(boxes.radius[0] == r);
  CHECK(boxes.center[1].isZero());
  CHECK(boxes.radius[1] == Vector::Constant(2, 2.0));
}

TEST_CASE("golden backward pass: g = 0, h = -2") {
  const Network net = golden_net();
  Vector c(2), r(2);
  c << 1, 1;
  r << 1, 1;
  const auto boxes = ibp(net, c, r);
  const auto relax = relaxations_from_boxes(boxes, 0.0);  // lower slope 0
  const auto res = lirpa_backward(net, relax, Vector::Ones(1));
  CHECK(res.g_in.isZero(1e-15));
  CHECK(res.h_in == doctest::Approx(-2.0));
  CHECK(close_bound_box({res.g_in, res.h_in, Box{c, r}}, c, r) == doctest::Approx(-2.0));
}

TEST_CASE("backward bound is sound on the box and below the true minimum") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_net(rng, {3, 8, 8, 1});
    const Vector center = gaussian_vector(3, rng);
    const Vector radius = Vector::Constant(3, 0.3);
    const auto boxes = ibp(net, center, radius);
    const auto relax = relaxations_from_boxes(boxes, 0.5);
    const auto res = lirpa_backward(net, relax, Vector::Ones(1));
    const double bound = close_bound_box({res.g_in, res.h_in, Box{center, radius}}, center, radius);
    for (int s = 0; s < 2000; ++s) {
      const Vector x = box_sample(center, radius, rng);
      const double fx = forward(net, x)[0];
      CHECK(res.g_in.dot(x) + res.h_in <= fx + 1e-9);
      CHECK(bound <= fx + 1e-9);
    }
  }
}

TEST_CASE("close_bound_box is the exact box minimum of a linear function") {
  Vector g(3), c(3), r(3);
  g << 2, -1, 0;
  c << 1, 1, 1;
  r << 0.5, 0.5, 0.5;
  // min = 2*0.5 + (-1)*1.5 + 0 + h
  CHECK(close_bound_box({g, 3.0, Box{c, r}}, c, r) == doctest::Approx(2.0 * 0.5 - 1.5 + 3.0));
}

TEST_CASE("backward intermediate boxes are sound and never looser than ibp") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 8; ++trial) {
    const Network net = random_net(rng, {3, 7, 6, 4});
    const Vector center = gaussian_vector(3, rng);
    const Vector radius = Vector::Constant(3, 0.4);
    const auto naive = ibp(net, center, radius);
    const auto tight = intermediate_boxes_backward(net, center, radius, 0.5);
    REQUIRE(tight.center.size() == naive.center.size());
    // First layer: both are the exact affine image, so the boxes agree.
    CHECK(tight.center[0].isApprox(naive.center[0], 1e-9));
    CHECK(tight.radius[0].isApprox(naive.radius[0], 1e-9));
    // Deeper layers carry no dominance guarantee in either direction; only
    // soundness is asserted below.
    for (int s = 0; s < 500; ++s) {
      const auto zs = forward_trace(net, box_sample(center, radius, rng));
      for (std::size_t k = 0; k < zs.size(); ++k) {
        const Vector slack = tight.radius[k] - (zs[k] - tight.center[k]).cwiseAbs();
        CHECK(slack.minCoeff() >= -1e-9);
      }
    }
  }
}

TEST_CASE("input validation") {
  std::mt19937_64 rng(1);
  const Network net = random_net(rng, {3, 4, 2});
  CHECK_THROWS_AS((void)ibp(net, Vector::Zero(2), Vector::Zero(2)), std::invalid_argument);
  Vector neg = Vector::Constant(3, -1.0);
  CHECK_THROWS_AS((void)ibp(net, Vector::Zero(3), neg), std::invalid_argument);
  CHECK_THROWS_AS((void)lirpa_backward(net, {}, Vector::Ones(2)), std::invalid_argument);
}
