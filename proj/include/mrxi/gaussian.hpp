#ifndef MRXI_GAUSSIAN_HPP
#define MRXI_GAUSSIAN_HPP

// Gaussian priors, exact linear-Gaussian posterior updates and data simulation.

#include "mrxi/forward.hpp"
#include "mrxi/grid.hpp"
#include "mrxi/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mrxi {

/// Raised when a factorization or iteration produces unusable numbers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GaussianBelief {
  Vector mean;
  Matrix cov;

  Eigen::Index dim() const { return mean.size(); }
};

/// i.i.d. sensor noise with standard deviation eta.
struct NoiseModel {
  double eta = 1.0;

  Vector variances(Eigen::Index count) const { return Vector::Constant(count, eta * eta); }
};

inline void symmetrize(Matrix& a) { a = 0.5 * (a + a.transpose()).eval(); }

/// (Gamma_0)_ij = gamma^2 exp(-|x_i - x_j|^2 / (2 ell^2)) over the given points.
inline Matrix squared_exp_prior(const std::vector<Vec2>& points, double gamma_sd, double ell) {
  if (!(gamma_sd > 0.0) || !(ell > 0.0))
    throw std::invalid_argument("squared_exp_prior: gamma_sd and ell must be positive");
  const auto n = static_cast<Eigen::Index>(points.size());
  const double g2 = gamma_sd * gamma_sd;
  Matrix cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = g2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = g2 * std::exp(-(points[i] - points[j]).squaredNorm() / (2.0 * ell * ell));
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

inline Matrix squared_exp_prior(const PixelGrid& grid, double gamma_sd, double ell) {
  return squared_exp_prior(grid.centers(), gamma_sd, ell);
}

/// Conditions `prior` on y = K c + e, e ~ N(0, diag(noise_var)).
/// An empty K returns the prior unchanged.
inline GaussianBelief batch_posterior(const GaussianBelief& prior, const Matrix& k, const Vector& noise_var,
                                      const Vector& y) {
  const Eigen::Index n = prior.dim();
  if (prior.cov.rows() != n || prior.cov.cols() != n)
    throw std::invalid_argument("posterior: covariance does not match mean");
  if (k.cols() != n) throw std::invalid_argument("posterior: K has " + std::to_string(k.cols()) +
                                                 " columns, belief has dimension " + std::to_string(n));
  if (noise_var.size() != k.rows() || y.size() != k.rows())
    throw std::invalid_argument("posterior: data or noise length does not match K");
  if (k.rows() == 0) return prior;

  const Matrix gk = prior.cov * k.transpose();  // Gamma K^T
  Matrix s = k * gk;
  s.diagonal() += noise_var;
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior: innovation matrix is not positive definite");

  GaussianBelief post;
  post.mean = prior.mean + gk * llt.solve(y - k * prior.mean);
  post.cov = prior.cov - gk * llt.solve(gk.transpose());
  symmetrize(post.cov);
  return post;
}

inline GaussianBelief posterior_update(const GaussianBelief& belief, const Matrix& k, const NoiseModel& noise,
                                       const Vector& y) {
  return batch_posterior(belief, k, noise.variances(k.rows()), y);
}

/// y = K truth + e with e ~ N(0, eta^2 I); eta = 0 gives noiseless data.
inline Vector simulate_data(const Vector& truth, const DesignAngles& design, const ForwardModel& data_model,
                            const NoiseModel& noise, std::mt19937_64& rng) {
  if (truth.size() != data_model.point_count())
    throw std::invalid_argument("simulate_data: truth does not match the data grid");
  Vector y = data_model.system_matrix(design) * truth;
  if (noise.eta > 0.0) {
    std::normal_distribution<double> normal(0.0, noise.eta);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += normal(rng);
  }
  return y;
}

inline Vector simulate_data(const Vector& truth, const DesignAngles& design, const SensorArray& sensors,
                            const PixelGrid& data_grid, const NoiseModel& noise, std::uint64_t seed) {
  auto rng = substream(seed, "noise");
  return simulate_data(truth, design, ForwardModel(sensors, data_grid), noise, rng);
}

}  // namespace mrxi

#endif  // MRXI_GAUSSIAN_HPP
