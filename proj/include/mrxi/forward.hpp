#ifndef MRXI_FORWARD_HPP
#define MRXI_FORWARD_HPP

// Dipole measurement model: kernel, system matrices and their derivatives with
// respect to the angular activation parameters.

#include "mrxi/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mrxi {

/// Sensors and activations live on a circle of this radius, in units of rho.
inline constexpr double kMeasurementRadius = 1.1;

/// 3 d d^T / |d|^5 - I / |d|^3 with d = target - source.
inline Eigen::Matrix2d dipole_matrix(const Vec2& source, const Vec2& target) {
  const Vec2 d = target - source;
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw std::invalid_argument("dipole_matrix: coincident points");
  const double r = std::sqrt(r2);
  const double r3 = r2 * r, r5 = r3 * r2;
  return 3.0 * d * d.transpose() / r5 - Eigen::Matrix2d::Identity() / r3;
}

/// Measurement at a sensor (s, sigma) of a unit concentration at x activated by
/// the dipole (a, alpha).
inline double kernel(const Vec2& s, const Vec2& sigma, const Vec2& a, const Vec2& alpha, const Vec2& x) {
  return sigma.dot(dipole_matrix(x, s) * (dipole_matrix(a, x) * alpha));
}

struct SensorArray {
  std::vector<Vec2> positions;
  std::vector<Vec2> orientations;

  std::size_t count() const { return positions.size(); }

  /// `count` equiangular sensors on the measurement circle, pointing at the origin.
  static SensorArray equiangular(std::size_t count, double rho) {
    SensorArray out;
    for (std::size_t j = 0; j < count; ++j) {
      const double t = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(count);
      const Vec2 p = kMeasurementRadius * rho * Vec2(std::cos(t), std::sin(t));
      out.positions.push_back(p);
      out.orientations.push_back(-p.normalized());
    }
    return out;
  }
};

/// Position angle on the measurement circle and absolute orientation angle of
/// one activation dipole.
struct Activation {
  double position = 0.0;
  double direction = 0.0;

  Vec2 location(double rho) const {
    return kMeasurementRadius * rho * Vec2(std::cos(position), std::sin(position));
  }
  Vec2 moment() const { return {std::cos(direction), std::sin(direction)}; }
};

using DesignAngles = std::vector<Activation>;

/// Flattens to (pos_1, dir_1, pos_2, dir_2, ...).
inline Vector to_vector(const DesignAngles& design) {
  Vector xi(2 * design.size());
  for (std::size_t i = 0; i < design.size(); ++i) {
    xi[2 * i] = design[i].position;
    xi[2 * i + 1] = design[i].direction;
  }
  return xi;
}

inline DesignAngles from_vector(const Vector& xi) {
  if (xi.size() % 2 != 0) throw std::invalid_argument("from_vector: odd number of design angles");
  DesignAngles design(static_cast<std::size_t>(xi.size() / 2));
  for (std::size_t i = 0; i < design.size(); ++i) design[i] = {xi[2 * i], xi[2 * i + 1]};
  return design;
}

/// System matrix block of one activation and its angular derivatives.
/// Unused orders are left empty.
struct ActivationDerivatives {
  Matrix value;
  Matrix d_pos, d_dir;
  Matrix d_pos_pos, d_pos_dir, d_dir_dir;
};

/// Discretized forward operator for a fixed sensor array and a fixed set of
/// quadrature points. The sensor half of the kernel, D(s_j - x_m) sigma_j, does
/// not depend on the design and is tabulated once.
class ForwardModel {
 public:
  ForwardModel(const SensorArray& sensors, const PixelGrid& grid)
      : ForwardModel(sensors, grid.centers(), grid.omega(), grid.rho()) {}

  ForwardModel(const SensorArray& sensors, std::vector<Vec2> points, double omega, double rho)
      : points_(std::move(points)), omega_(omega), rho_(rho) {
    const auto ns = static_cast<Eigen::Index>(sensors.count());
    const auto np = static_cast<Eigen::Index>(points_.size());
    ux_.resize(ns, np);
    uy_.resize(ns, np);
    for (Eigen::Index j = 0; j < ns; ++j) {
      for (Eigen::Index m = 0; m < np; ++m) {
        const Vec2 u = dipole_matrix(points_[m], sensors.positions[j]) * sensors.orientations[j];
        ux_(j, m) = u.x();
        uy_(j, m) = u.y();
      }
    }
  }

  Eigen::Index sensor_count() const { return ux_.rows(); }
  Eigen::Index point_count() const { return ux_.cols(); }
  double omega() const { return omega_; }
  double rho() const { return rho_; }

  Matrix block(const Activation& act) const { return derivatives(act, 0).value; }

  /// Stacked system matrix, one block of sensor_count() rows per activation.
  Matrix system_matrix(const DesignAngles& design) const {
    const Eigen::Index ns = sensor_count();
    Matrix k(ns * static_cast<Eigen::Index>(design.size()), point_count());
    for (std::size_t i = 0; i < design.size(); ++i)
      k.middleRows(static_cast<Eigen::Index>(i) * ns, ns) = block(design[i]);
    return k;
  }

  ActivationDerivatives derivatives(const Activation& act, int order) const {
    if (order < 0 || order > 2) throw std::invalid_argument("derivatives: order must be 0, 1 or 2");
    const Eigen::Index np = point_count();
    const Vec2 a = act.location(rho_);
    const Vec2 tangent = kMeasurementRadius * rho_ * Vec2(-std::sin(act.position), std::cos(act.position));
    const Vec2 alpha = act.moment();
    const Vec2 alpha_t(-alpha.y(), alpha.x());

    // Activation field D(x_m - a) alpha and its derivatives, one column per point.
    Eigen::Matrix2Xd f(2, np), fp, fd, fpp, fpd, fdd;
    if (order >= 1) {
      fp.resize(2, np);
      fd.resize(2, np);
    }
    if (order >= 2) {
      fpp.resize(2, np);
      fpd.resize(2, np);
      fdd.resize(2, np);
    }
    for (Eigen::Index m = 0; m < np; ++m) {
      const FieldAt field(points_[m] - a);
      f.col(m) = field.value(alpha);
      if (order >= 1) {
        fp.col(m) = -field.jacobian(alpha, tangent);
        fd.col(m) = field.value(alpha_t);
      }
      if (order >= 2) {
        fpp.col(m) = field.hessian(alpha, tangent, tangent) + field.jacobian(alpha, a);
        fpd.col(m) = -field.jacobian(alpha_t, tangent);
        fdd.col(m) = -f.col(m);
      }
    }

    ActivationDerivatives out;
    out.value = contract(f);
    if (order >= 1) {
      out.d_pos = contract(fp);
      out.d_dir = contract(fd);
    }
    if (order >= 2) {
      out.d_pos_pos = contract(fpp);
      out.d_pos_dir = contract(fpd);
      out.d_dir_dir = contract(fdd);
    }
    return out;
  }

 private:
  // Derivatives of g(d) = D(d) alpha = 3 (d.alpha) d / r^5 - alpha / r^3 with
  // respect to the separation vector d = x - a.
  struct FieldAt {
    Vec2 d;
    double r3, r5, r7, r9;

    explicit FieldAt(const Vec2& sep) : d(sep) {
      const double r2 = d.squaredNorm();
      const double r = std::sqrt(r2);
      r3 = r2 * r;
      r5 = r3 * r2;
      r7 = r5 * r2;
      r9 = r7 * r2;
    }

    Vec2 value(const Vec2& alpha) const { return 3.0 * d.dot(alpha) * d / r5 - alpha / r3; }

    // J(alpha) v
    Vec2 jacobian(const Vec2& alpha, const Vec2& v) const {
      const double s = d.dot(alpha);
      return 3.0 / r5 * (d * alpha.dot(v) + s * v + alpha * d.dot(v)) - 15.0 * s / r7 * d * d.dot(v);
    }

    // H(alpha)[u, v]
    Vec2 hessian(const Vec2& alpha, const Vec2& u, const Vec2& v) const {
      const double s = d.dot(alpha);
      const double au = alpha.dot(u), av = alpha.dot(v);
      const double du = d.dot(u), dv = d.dot(v), uv = u.dot(v);
      return 3.0 / r5 * (au * v + av * u + uv * alpha) -
             15.0 / r7 * (au * dv * d + av * du * d + du * dv * alpha + s * (dv * u + du * v + uv * d)) +
             105.0 * s * du * dv / r9 * d;
    }
  };

  Matrix contract(const Eigen::Matrix2Xd& field) const {
    return omega_ * (ux_.array().rowwise() * field.row(0).array() +
                     uy_.array().rowwise() * field.row(1).array())
                        .matrix();
  }

  std::vector<Vec2> points_;
  double omega_;
  double rho_;
  Matrix ux_, uy_;
};

inline Matrix system_matrix(const DesignAngles& design, const SensorArray& sensors, const PixelGrid& grid) {
  return ForwardModel(sensors, grid).system_matrix(design);
}

inline std::vector<ActivationDerivatives> design_derivatives(const DesignAngles& design,
                                                             const SensorArray& sensors,
                                                             const PixelGrid& grid, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("design_derivatives: order must be 1 or 2");
  const ForwardModel model(sensors, grid);
  std::vector<ActivationDerivatives> out;
  out.reserve(design.size());
  for (const auto& act : design) out.push_back(model.derivatives(act, order));
  return out;
}

}  // namespace mrxi

#endif  // MRXI_FORWARD_HPP
