#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "sdpcrown/linalg.hpp"

using namespace sdpcrown;

namespace {
Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}
}  // namespace

TEST_CASE("spectral_norm matches the eigenvalue oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Index rows = 1 + static_cast<Index>(rng() % 12);
    const Index cols = 1 + static_cast<Index>(rng() % 12);
    const Matrix W = random_matrix(rows, cols, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(W.transpose() * W);
    const double expected = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    const double got = spectral_norm(W, 1e-12);
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
    CHECK(got >= expected - 1e-9 * expected);  // inflation keeps the estimate from understating
  }
}

TEST_CASE("spectral_norm on known matrices") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3.0, -5.0, 1.0;
  CHECK(spectral_norm(d) == doctest::Approx(5.0));

  Matrix r1(2, 3);
  r1 << 1, 2, 2, 2, 4, 4;  // rank one: rows proportional
  CHECK(spectral_norm(r1) == doctest::Approx(std::sqrt(5.0 * 9.0)));

  CHECK(spectral_norm(Matrix::Zero(4, 2)) == doctest::Approx(0.0));
}

TEST_CASE("spectral_norm upper-bounds the gain of every unit vector") {
  std::mt19937_64 rng(11);
  const Matrix W = random_matrix(9, 6, rng);
  const double sigma = spectral_norm(W);
  for (int s = 0; s < 100; ++s) {
    const Vector v = unit_sphere_sample(6, rng);
    CHECK((W * v).norm() <= sigma * (1.0 + 1e-12));
  }
}

TEST_CASE("rowwise_l2 is exact") {
  Matrix W(2, 3);
  W << 3, 4, 0, 1, 2, 2;
  const Vector n = rowwise_l2(W);
  CHECK(n[0] == doctest::Approx(5.0));
  CHECK(n[1] == doctest::Approx(3.0));
}

TEST_CASE("matvec helpers check dimensions") {
  Matrix W(2, 3);
  W.setOnes();
  Vector bad(2);
  bad.setOnes();
  CHECK_THROWS_AS((void)matvec(W, bad), std::invalid_argument);
  Vector good(3);
  good << 1, 2, 3;
  CHECK(matvec(W, good)[0] == doctest::Approx(6.0));
  CHECK(matTvec(W, bad)[0] == doctest::Approx(2.0));
  CHECK(abs_matvec(W, good)[1] == doctest::Approx(6.0));
}

TEST_CASE("samplers respect their supports and are seed-deterministic") {
  std::mt19937_64 rng(3);
  Vector center(4);
  center << 1, -2, 0.5, 3;
  for (int s = 0; s < 200; ++s) {
    const Vector x = ball_sample(center, 2.0, rng);
    CHECK((x - center).norm() <= 2.0 + 1e-12);
  }
  for (int s = 0; s < 50; ++s)
    CHECK(unit_sphere_sample(5, rng).norm() == doctest::Approx(1.0));

  std::mt19937_64 a(42), b(42);
  CHECK(ball_sample(center, 1.0, a) == ball_sample(center, 1.0, b));
}

TEST_CASE("ball_sample actually fills the ball, not just its surface") {
  std::mt19937_64 rng(5);
  const Vector center = Vector::Zero(3);
  int inner = 0;
  for (int s = 0; s < 2000; ++s)
    if ((ball_sample(center, 1.0, rng)).norm() < 0.8) ++inner;
  // P(||x|| < 0.8) = 0.8^3 = 0.512 for the uniform ball distribution
  CHECK(inner > 700);
  CHECK(inner < 1400);
}
