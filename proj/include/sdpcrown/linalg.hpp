#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sdpcrown {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when power iteration fails to converge. Carries the last
/// iterate so the caller can decide whether it is usable.
class SpectralNormError : public std::runtime_error {
 public:
  SpectralNormError(double last, int iters)
      : std::runtime_error("spectral_norm: no convergence after " +
                           std::to_string(iters) +
                           " iterations (last estimate " +
                           std::to_string(last) + ")"),
        last_estimate(last) {}
  double last_estimate;
};

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

/// Largest singular value of W, estimated by power iteration on W^T W
/// from a seeded start on the unit sphere. The result is inflated by
/// (1 + 10*tol) so radii derived from it never understate the true norm.
inline double spectral_norm(const Matrix& W, double tol = 1e-9,
                            int max_iter = 10000, std::uint64_t seed = 0) {
  if (W.size() == 0) throw std::invalid_argument("spectral_norm: empty matrix");
  if (!(tol > 0)) throw std::invalid_argument("spectral_norm: tol must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(W.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  double nv = v.norm();
  if (nv == 0) v.setOnes();
  v.normalize();

  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = W.transpose() * (W * v);
    double nw = w.norm();
    if (nw == 0) return 0.0;  // v in the null space and W^T W v = 0
    double sigma_next = std::sqrt(nw);
    v = w / nw;
    if (it > 0 && std::abs(sigma_next - sigma) <= tol * sigma_next) {
      return sigma_next * (1.0 + 10.0 * tol);
    }
    sigma = sigma_next;
  }
  throw SpectralNormError(sigma, max_iter);
}

/// Rowwise l2 norms: entry i is the norm of row i of W.
inline Vector rowwise_l2(const Matrix& W) {
  if (W.size() == 0) throw std::invalid_argument("rowwise_l2: empty matrix");
  return W.rowwise().norm();
}

inline Vector matvec(const Matrix& W, const Vector& v) {
  if (W.cols() != v.size())
    throw std::invalid_argument("matvec: dimension mismatch");
  return W * v;
}

inline Vector matTvec(const Matrix& W, const Vector& v) {
  if (W.rows() != v.size())
    throw std::invalid_argument("matTvec: dimension mismatch");
  return W.transpose() * v;
}

/// |W| * v, used to push interval radii through an affine layer.
inline Vector abs_matvec(const Matrix& W, const Vector& v) {
  if (W.cols() != v.size())
    throw std::invalid_argument("abs_matvec: dimension mismatch");
  return W.cwiseAbs() * v;
}

// -- seeded sampling helpers shared by tests, attacks and oracles --

inline Vector gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

inline Vector unit_sphere_sample(Index n, std::mt19937_64& rng) {
  Vector v = gaussian_vector(n, rng);
  double nv = v.norm();
  if (nv == 0) { v.setZero(); v[0] = 1.0; return v; }
  return v / nv;
}

/// Uniform sample from the ball B2(center, radius).
inline Vector ball_sample(const Vector& center, double radius,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector dir = unit_sphere_sample(center.size(), rng);
  double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(center.size()));
  return center + r * dir;
}

}  // namespace sdpcrown
