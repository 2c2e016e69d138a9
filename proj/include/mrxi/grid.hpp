#ifndef MRXI_GRID_HPP
#define MRXI_GRID_HPP

// Disk-masked pixel grids, phantoms and pixel-quadrature L2 quantities.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrxi {

using Vec2 = Eigen::Vector2d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform n x n pixelization of the square [-rho, rho]^2 with every pixel whose
/// center lies outside the open disk of radius rho removed.
///
/// Kept pixels are numbered row-major over the bounding square: row r has
/// y = -rho + (r + 1/2) h, column c has x = -rho + (c + 1/2) h, h = 2 rho / n.
class PixelGrid {
 public:
  PixelGrid(int n, double rho) : n_(n), rho_(rho) {
    if (n < 2) throw std::invalid_argument("PixelGrid: n must be >= 2, got " + std::to_string(n));
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("PixelGrid: rho must be positive and finite");

    const double h = spacing();
    omega_ = h * h;
    lookup_.assign(static_cast<std::size_t>(n) * n, -1);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const Vec2 x(-rho + (c + 0.5) * h, -rho + (r + 0.5) * h);
        if (x.norm() < rho) {
          lookup_[static_cast<std::size_t>(r) * n + c] = static_cast<int>(centers_.size());
          centers_.push_back(x);
          rows_.push_back(r);
          cols_.push_back(c);
        }
      }
    }

    boundary_.assign(centers_.size(), false);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const int r = rows_[i], c = cols_[i];
      boundary_[i] = index_of(r - 1, c) < 0 || index_of(r + 1, c) < 0 || index_of(r, c - 1) < 0 ||
                     index_of(r, c + 1) < 0;
    }
  }

  int n() const { return n_; }
  double rho() const { return rho_; }
  double spacing() const { return 2.0 * rho_ / n_; }
  /// Area of a single pixel.
  double omega() const { return omega_; }
  std::size_t size() const { return centers_.size(); }

  const Vec2& center(std::size_t i) const { return centers_[i]; }
  const std::vector<Vec2>& centers() const { return centers_; }
  int row(std::size_t i) const { return rows_[i]; }
  int col(std::size_t i) const { return cols_[i]; }
  bool on_boundary(std::size_t i) const { return boundary_[i]; }

  /// Kept-pixel index at (row, col), or -1 if the cell is discarded or off the square.
  int index_of(int r, int c) const {
    if (r < 0 || c < 0 || r >= n_ || c >= n_) return -1;
    return lookup_[static_cast<std::size_t>(r) * n_ + c];
  }

  std::vector<std::size_t> boundary_layer() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (boundary_[i]) out.push_back(i);
    return out;
  }

  /// Area of the continuum disk, pi rho^2.
  double domain_area() const { return M_PI * rho_ * rho_; }

 private:
  int n_;
  double rho_;
  double omega_ = 0.0;
  std::vector<Vec2> centers_;
  std::vector<int> rows_;
  std::vector<int> cols_;
  std::vector<bool> boundary_;
  std::vector<int> lookup_;
};

inline PixelGrid build_disk_grid(int n, double rho) { return PixelGrid(n, rho); }

/// Writes the header `n rho count omega` followed by one line per kept pixel:
/// `index row col cx cy boundary_flag`.
inline void write_grid(std::ostream& os, const PixelGrid& grid) {
  const auto old_precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << grid.n() << ' ' << grid.rho() << ' ' << grid.size() << ' ' << grid.omega() << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << i << ' ' << grid.row(i) << ' ' << grid.col(i) << ' ' << grid.center(i).x() << ' '
       << grid.center(i).y() << ' ' << (grid.on_boundary(i) ? 1 : 0) << '\n';
  }
  os.precision(old_precision);
}

// ---------------------------------------------------------------------------
// Phantoms

/// P-shaped inclusion in units of rho: an axis-aligned stem rectangle and an
/// annular loop clipped to x >= loop_min_x.
struct PShape {
  double stem_x0 = 0.15, stem_x1 = 0.25;
  double stem_y0 = -0.75, stem_y1 = -0.15;
  double loop_cx = 0.35, loop_cy = -0.30;
  double loop_outer = 0.22, loop_inner = 0.10;
  double loop_min_x = 0.20;

  bool contains(const Vec2& p) const {
    if (p.x() >= stem_x0 && p.x() <= stem_x1 && p.y() >= stem_y0 && p.y() <= stem_y1) return true;
    const double r = std::hypot(p.x() - loop_cx, p.y() - loop_cy);
    return p.x() >= loop_min_x && r <= loop_outer && r >= loop_inner;
  }
};

/// Half-plane x < offset (left) or x > offset (right), offset in units of rho.
struct HalfPlane {
  enum class Side { Left, Right } side = Side::Left;
  double offset = 0.0;

  bool contains(const Vec2& p) const {
    return side == Side::Left ? p.x() < offset : p.x() > offset;
  }
};

struct Phantom {
  enum class Kind { Constant, PShape, Indicator } kind = Kind::Constant;
  double background = 0.0;
  double inclusion = 1.0;
  PShape p_shape{};
  HalfPlane region{};

  static Phantom constant(double value) {
    Phantom p;
    p.kind = Kind::Constant;
    p.background = value;
    return p;
  }
  static Phantom p_shaped(double background = 0.0, double inclusion = 1.0, PShape shape = {}) {
    Phantom p;
    p.kind = Kind::PShape;
    p.background = background;
    p.inclusion = inclusion;
    p.p_shape = shape;
    return p;
  }
  static Phantom indicator(HalfPlane region, double background = 0.0, double inclusion = 1.0) {
    Phantom p;
    p.kind = Kind::Indicator;
    p.background = background;
    p.inclusion = inclusion;
    p.region = region;
    return p;
  }

  /// Value at a point given in units of rho.
  double value_at_scaled(const Vec2& p) const {
    switch (kind) {
      case Kind::Constant: return background;
      case Kind::PShape: return p_shape.contains(p) ? inclusion : background;
      case Kind::Indicator: return region.contains(p) ? inclusion : background;
    }
    return background;
  }
};

inline Vector eval_phantom(const Phantom& phantom, const PixelGrid& grid) {
  Vector v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    v[i] = phantom.value_at_scaled(grid.center(i) / grid.rho());
  return v;
}

// ---------------------------------------------------------------------------
// Transfer and error measures

/// Nearest-center restriction from one pixelization of the disk to another.
/// Ties go to the smallest source index.
inline Vector restrict_to(const Vector& v, const PixelGrid& from, const PixelGrid& to) {
  if (static_cast<std::size_t>(v.size()) != from.size())
    throw std::invalid_argument("restrict_to: vector length does not match source grid");
  if (std::abs(from.rho() - to.rho()) > 1e-12 * std::max(from.rho(), to.rho()))
    throw std::invalid_argument("restrict_to: grids have different rho");
  if (from.n() == to.n()) return v;

  const double tie = 1e-12 * from.omega();
  Vector out(to.size());
  for (std::size_t t = 0; t < to.size(); ++t) {
    const Vec2& x = to.center(t);
    // The lattice cell containing x may have been discarded by the disk mask,
    // so scan all source pixels.
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t s = 0; s < from.size(); ++s) {
      const double d = (from.center(s) - x).squaredNorm();
      if (d < best - tie) {
        best = d;
        arg = s;
      }
    }
    out[static_cast<Eigen::Index>(t)] = v[static_cast<Eigen::Index>(arg)];
  }
  return out;
}

/// ||estimate - truth|| / ||truth|| in the pixel-quadrature L2 norm.
inline double relative_l2_error(const Vector& estimate, const Vector& truth, const PixelGrid& grid) {
  if (estimate.size() != truth.size() || static_cast<std::size_t>(truth.size()) != grid.size())
    throw std::invalid_argument("relative_l2_error: length mismatch");
  const double den = std::sqrt(grid.omega() * truth.squaredNorm());
  if (den == 0.0) throw std::invalid_argument("relative_l2_error: truth vector is zero");
  return std::sqrt(grid.omega() * (estimate - truth).squaredNorm()) / den;
}

}  // namespace mrxi

#endif  // MRXI_GRID_HPP
