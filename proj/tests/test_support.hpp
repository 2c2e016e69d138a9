#ifndef MRXI_TEST_SUPPORT_HPP
#define MRXI_TEST_SUPPORT_HPP

#include "mrxi.hpp"

#include <random>

namespace mrxi::support {

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double symmetry_error(const Matrix& m) { return (m - m.transpose()).norm() / std::max(m.norm(), 1e-300); }

inline double min_eig(const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); }

inline Vec2 unit(double t) { return {std::cos(t), std::sin(t)}; }

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace mrxi::support

#endif
