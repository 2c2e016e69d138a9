#ifndef MRXI_TV_HPP
#define MRXI_TV_HPP

// Smoothed total variation on a P1 triangulation of the pixel centers and the
// lagged diffusivity iteration that yields a Gaussian posterior approximation.

#include "mrxi/gaussian.hpp"
#include "mrxi/grid.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrxi {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct TvConfig {
  double T = 1e-6;       // smoothing in phi(t) = sqrt(t^2 + T^2)
  double gamma = 10.0;   // prior strength
  double tau = 1e-3;     // relative change of Phi that stops the inner loop
  int max_iters = 200;

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("TvConfig: T must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("TvConfig: gamma must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("TvConfig: tau must be positive");
    if (max_iters < 1) throw std::invalid_argument("TvConfig: max_iters must be >= 1");
  }
};

/// Triangle mesh with a piecewise linear basis. Nodes flagged as fixed carry the
/// value zero and are eliminated; all vectors passed to the TV routines hold the
/// free nodes only.
class TvMesh {
 public:
  TvMesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles, std::vector<bool> fixed)
      : nodes_(std::move(nodes)), triangles_(std::move(triangles)), free_index_(nodes_.size(), -1) {
    if (fixed.size() != nodes_.size()) throw std::invalid_argument("TvMesh: fixed flags do not match nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!fixed[i]) {
        free_index_[i] = static_cast<int>(free_nodes_.size());
        free_nodes_.push_back(i);
      }
    }
    areas_.reserve(triangles_.size());
    grads_.reserve(triangles_.size());
    for (const auto& t : triangles_) {
      const Vec2 e1 = nodes_[t[1]] - nodes_[t[0]];
      const Vec2 e2 = nodes_[t[2]] - nodes_[t[0]];
      const double det = e1.x() * e2.y() - e1.y() * e2.x();
      if (det == 0.0) throw std::invalid_argument("TvMesh: degenerate triangle");
      // Gradients of the barycentric coordinates, one column per vertex.
      Eigen::Matrix<double, 2, 3> g;
      g.col(1) = Vec2(e2.y(), -e2.x()) / det;
      g.col(2) = Vec2(-e1.y(), e1.x()) / det;
      g.col(0) = -g.col(1) - g.col(2);
      areas_.push_back(0.5 * std::abs(det));
      grads_.push_back(g);
    }
  }

  /// Lattice triangulation of a pixel grid: every 2x2 block of neighboring pixel
  /// centers is cut into a lower-left and an upper-right right triangle, each kept
  /// when all three corners are kept pixels. Boundary-layer pixels are fixed.
  explicit TvMesh(const PixelGrid& grid) : TvMesh(grid.centers(), lattice_triangles(grid), boundary_flags(grid)) {}

  std::size_t node_count() const { return nodes_.size(); }
  Eigen::Index free_count() const { return static_cast<Eigen::Index>(free_nodes_.size()); }
  std::size_t triangle_count() const { return triangles_.size(); }
  double area() const {
    double a = 0.0;
    for (double t : areas_) a += t;
    return a;
  }

  const std::vector<std::size_t>& free_nodes() const { return free_nodes_; }
  std::vector<Vec2> free_points() const {
    std::vector<Vec2> out;
    out.reserve(free_nodes_.size());
    for (auto i : free_nodes_) out.push_back(nodes_[i]);
    return out;
  }

  /// Full nodal vector with zeros at fixed nodes.
  Vector embed(const Vector& c) const {
    check(c);
    Vector full = Vector::Zero(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t k = 0; k < free_nodes_.size(); ++k) full[free_nodes_[k]] = c[k];
    return full;
  }

  Vector extract(const Vector& full) const {
    if (full.size() != static_cast<Eigen::Index>(nodes_.size()))
      throw std::invalid_argument("TvMesh::extract: length mismatch");
    Vector c(free_count());
    for (std::size_t k = 0; k < free_nodes_.size(); ++k) c[k] = full[free_nodes_[k]];
    return c;
  }

  /// Piecewise constant gradient on triangle t.
  Vec2 gradient(std::size_t t, const Vector& c) const {
    Vec2 g = Vec2::Zero();
    for (int v = 0; v < 3; ++v) {
      const int f = free_index_[triangles_[t][v]];
      if (f >= 0) g += c[f] * grads_[t].col(v);
    }
    return g;
  }

  double triangle_area(std::size_t t) const { return areas_[t]; }
  const Eigen::Matrix<double, 2, 3>& basis_gradients(std::size_t t) const { return grads_[t]; }
  int free_index(std::size_t node) const { return free_index_[node]; }
  const std::array<int, 3>& triangle(std::size_t t) const { return triangles_[t]; }

  void check(const Vector& c) const {
    if (c.size() != free_count())
      throw std::invalid_argument("TvMesh: expected " + std::to_string(free_count()) + " free values, got " +
                                  std::to_string(c.size()));
  }

 private:
  static std::vector<std::array<int, 3>> lattice_triangles(const PixelGrid& grid) {
    std::vector<std::array<int, 3>> tris;
    for (int r = 0; r + 1 < grid.n(); ++r) {
      for (int c = 0; c + 1 < grid.n(); ++c) {
        const int p00 = grid.index_of(r, c), p10 = grid.index_of(r, c + 1);
        const int p01 = grid.index_of(r + 1, c), p11 = grid.index_of(r + 1, c + 1);
        if (p00 >= 0 && p10 >= 0 && p01 >= 0) tris.push_back({p00, p10, p01});
        if (p11 >= 0 && p01 >= 0 && p10 >= 0) tris.push_back({p11, p01, p10});
      }
    }
    return tris;
  }

  static std::vector<bool> boundary_flags(const PixelGrid& grid) {
    std::vector<bool> fixed(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) fixed[i] = grid.on_boundary(i);
    return fixed;
  }

  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> free_index_;
  std::vector<std::size_t> free_nodes_;
  std::vector<double> areas_;
  std::vector<Eigen::Matrix<double, 2, 3>> grads_;
};

/// Phi(c) = sum over triangles of area * sqrt(|grad c|^2 + T^2).
inline double tv_functional(const Vector& c, const TvMesh& mesh, double T) {
  mesh.check(c);
  double phi = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
    phi += mesh.triangle_area(t) * std::sqrt(mesh.gradient(t, c).squaredNorm() + T * T);
  return phi;
}

/// Lagged diffusivity matrix Theta(c): the P1 stiffness matrix weighted by
/// 1 / sqrt(|grad c|^2 + T^2) on each triangle. Theta(c) c is the gradient of Phi.
inline SparseMatrix assemble_theta(const Vector& c, const TvMesh& mesh, double T) {
  mesh.check(c);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(9 * mesh.triangle_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const double w = mesh.triangle_area(t) / std::sqrt(mesh.gradient(t, c).squaredNorm() + T * T);
    const auto& g = mesh.basis_gradients(t);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 3; ++a) {
      const int fa = mesh.free_index(tri[a]);
      if (fa < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int fb = mesh.free_index(tri[b]);
        if (fb < 0) continue;
        entries.emplace_back(fa, fb, w * g.col(a).dot(g.col(b)));
      }
    }
  }
  SparseMatrix theta(mesh.free_count(), mesh.free_count());
  theta.setFromTriplets(entries.begin(), entries.end());
  return theta;
}

/// ½ (y - K c)^T N^{-1} (y - K c) + gamma Phi(c), N = diag(noise_var).
inline double map_objective(const Vector& c, const Matrix& k, const Vector& y, const Vector& noise_var,
                            const TvConfig& cfg, const TvMesh& mesh) {
  const Vector r = y - k * c;
  return 0.5 * r.cwiseAbs2().cwiseQuotient(noise_var).sum() + cfg.gamma * tv_functional(c, mesh, cfg.T);
}

namespace detail {

using ThetaFactor = Eigen::SimplicialLLT<SparseMatrix>;

inline void factor_theta(ThetaFactor& chol, const Vector& c, const TvMesh& mesh, double T) {
  chol.compute(assemble_theta(c, mesh, T));
  if (chol.info() != Eigen::Success) throw NumericalError("lagged diffusivity: Theta is not positive definite");
}

inline Matrix dense_inverse(const Eigen::SimplicialLLT<SparseMatrix>& chol, Eigen::Index n) {
  Matrix inv = chol.solve(Matrix::Identity(n, n));
  symmetrize(inv);
  return inv;
}

}  // namespace detail

/// Theta(c)^{-1} as a dense matrix.
inline Matrix inverse_theta(const Vector& c, const TvMesh& mesh, double T) {
  detail::ThetaFactor chol;
  detail::factor_theta(chol, c, mesh, T);
  return detail::dense_inverse(chol, mesh.free_count());
}

/// gamma^{-1} (G - G K^T (K G K^T + gamma N)^{-1} K G) with G = Theta(c)^{-1}:
/// the covariance of the Gaussian approximation attached to the linearization at c.
inline Matrix tv_covariance(const Vector& c, const Matrix& k, const Vector& noise_var, const TvConfig& cfg,
                            const TvMesh& mesh) {
  detail::ThetaFactor chol;
  detail::factor_theta(chol, c, mesh, cfg.T);
  Matrix cov = detail::dense_inverse(chol, mesh.free_count());
  if (k.rows() > 0) {
    const Matrix x = chol.solve(Matrix(k.transpose()));
    Matrix s = k * x;
    s.diagonal() += cfg.gamma * noise_var;
    const Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("tv_covariance: innovation matrix is not positive definite");
    cov -= x * llt.solve(x.transpose());
  }
  cov /= cfg.gamma;
  symmetrize(cov);
  return cov;
}

struct LaggedDiffusivityResult {
  Vector map;
  Matrix cov;              // empty unless requested
  int iterations = 0;
  bool converged = false;
  double last_delta_phi = 0.0;
  std::vector<double> objective;  // MAP objective at the start point and every iterate
};

/// Lagged diffusivity iteration started from prev_map. Each step solves the
/// Gaussian problem with prior covariance gamma^{-1} Theta(c^{(j-1)})^{-1}; the loop
/// stops once |Phi(c^{(j-1)}) - Phi(c^{(j)})| / Phi(c^{(j)}) <= tau. The covariance is
/// formed once, from the linearization that produced the final iterate.
inline LaggedDiffusivityResult lagged_diffusivity(const Vector& prev_map, const Matrix& k, const Vector& y,
                                                  const Vector& noise_var, const TvConfig& cfg,
                                                  const TvMesh& mesh, bool with_covariance = true) {
  cfg.validate();
  mesh.check(prev_map);
  if (k.cols() != mesh.free_count()) throw std::invalid_argument("lagged_diffusivity: K does not match mesh");
  if (y.size() != k.rows() || noise_var.size() != k.rows())
    throw std::invalid_argument("lagged_diffusivity: data or noise length does not match K");

  LaggedDiffusivityResult out;
  Vector current = prev_map;
  double phi_current = tv_functional(current, mesh, cfg.T);
  out.objective.push_back(map_objective(current, k, y, noise_var, cfg, mesh));

  const Matrix kt = k.transpose();
  detail::ThetaFactor chol;
  for (int j = 1; j <= cfg.max_iters; ++j) {
    detail::factor_theta(chol, current, mesh, cfg.T);
    Vector next;
    Matrix x;
    Eigen::LLT<Matrix> llt;
    if (k.rows() > 0) {
      x = chol.solve(kt);
      Matrix s = k * x;
      s.diagonal() += cfg.gamma * noise_var;
      llt.compute(s);
      if (llt.info() != Eigen::Success) throw NumericalError("lagged diffusivity: innovation matrix is not positive definite");
      next = x * llt.solve(y);
    } else {
      next = Vector::Zero(mesh.free_count());
    }
    if (!next.allFinite()) throw NumericalError("lagged diffusivity: non-finite iterate at step " + std::to_string(j));

    const double phi_next = tv_functional(next, mesh, cfg.T);
    const double delta = std::abs(phi_current - phi_next) / phi_next;
    out.objective.push_back(map_objective(next, k, y, noise_var, cfg, mesh));
    out.iterations = j;
    out.last_delta_phi = delta;

    const bool done = delta <= cfg.tau;
    if (done || j == cfg.max_iters) {
      out.converged = done;
      if (with_covariance) {
        Matrix cov = detail::dense_inverse(chol, mesh.free_count());
        if (k.rows() > 0) cov -= x * llt.solve(x.transpose());
        cov /= cfg.gamma;
        symmetrize(cov);
        out.cov = std::move(cov);
      }
      out.map = std::move(next);
      return out;
    }
    current = std::move(next);
    phi_current = phi_next;
  }
  return out;  // unreachable: the loop always returns at j == max_iters
}

}  // namespace mrxi

#endif  // MRXI_TV_HPP
