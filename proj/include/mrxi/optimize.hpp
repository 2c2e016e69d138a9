#ifndef MRXI_OPTIMIZE_HPP
#define MRXI_OPTIMIZE_HPP

// Gradient descent and safeguarded Newton iterations with a bisection line
// search on the Wolfe conditions, exhaustive search over the angle torus, and
// orientation post-processing.

#include "mrxi/forward.hpp"
#include "mrxi/objective.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrxi {

struct OptimizerConfig {
  double epsilon = 1e-5;  // gradient-norm tolerance
  double lambda0 = 1.0;   // initial step for every line search
  int max_iters = 50;
  double delta = 1e-5;    // Newton positive-definiteness floor
  int n_wolfe = 15;
  double beta1 = 1e-10;
  double beta2 = 0.9;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("OptimizerConfig: epsilon must be positive");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("OptimizerConfig: lambda0 must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("OptimizerConfig: delta must be positive");
    if (max_iters < 1) throw std::invalid_argument("OptimizerConfig: max_iters must be >= 1");
    if (n_wolfe < 0) throw std::invalid_argument("OptimizerConfig: n_wolfe must be >= 0");
    if (!(beta1 > 0.0 && beta1 < beta2 && beta2 < 1.0))
      throw std::invalid_argument("OptimizerConfig: need 0 < beta1 < beta2 < 1");
  }
};

struct LineSearchResult {
  double step = 0.0;
  bool accepted = false;  // false when the iteration cap was hit
  int iterations = 0;
};

/// Bisection on the Wolfe conditions. `base` is the objective (with gradient)
/// at xi; d must be a descent direction.
template <Objective F>
LineSearchResult wolfe_bisection(const F& f, const Vector& xi, const Evaluation& base, const Vector& d,
                                 const OptimizerConfig& cfg) {
  const double slope = base.gradient.dot(d);
  if (!(slope < 0.0)) throw std::invalid_argument("wolfe_bisection: d is not a descent direction");

  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  double lambda = cfg.lambda0;
  LineSearchResult out;
  for (int l = 0; l < cfg.n_wolfe; ++l) {
    out.iterations = l + 1;
    const Vector trial = xi + lambda * d;
    const double value = f(trial, 0).value;
    if (value - base.value > lambda * cfg.beta1 * slope) {
      upper = lambda;
      lambda = 0.5 * (lower + upper);
    } else if (f(trial, 1).gradient.dot(d) < cfg.beta2 * slope) {
      lower = lambda;
      lambda = std::isinf(upper) ? 2.0 * lower : 0.5 * (lower + upper);
    } else {
      out.step = lambda;
      out.accepted = true;
      return out;
    }
  }
  out.step = lambda;
  return out;
}

template <Objective F>
LineSearchResult wolfe_bisection(const F& f, const Vector& xi, const Vector& d, const OptimizerConfig& cfg) {
  return wolfe_bisection(f, xi, f(xi, 1), d, cfg);
}

struct TraceEntry {
  int iter = 0;
  double psi = 0.0;
  double grad_norm = 0.0;
  double lambda = 0.0;  // step taken from this iterate; 0 on the last line
  double min_eig = std::numeric_limits<double>::quiet_NaN();  // of the (shifted) Newton matrix
  bool wolfe_accepted = false;
};

struct OptimizeResult {
  Vector xi;
  Evaluation final;
  int iterations = 0;
  bool converged = false;  // |grad| <= epsilon at the returned point
  std::vector<TraceEntry> trace;
};

/// Writes `iter psi grad_norm lambda`, one line per iterate.
inline void write_trace(std::ostream& os, const std::vector<TraceEntry>& trace) {
  const auto old_precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : trace) os << e.iter << ' ' << e.psi << ' ' << e.grad_norm << ' ' << e.lambda << '\n';
  os.precision(old_precision);
}

namespace detail {

template <Objective F, class Direction>
OptimizeResult descend(const F& f, const Vector& xi0, const OptimizerConfig& cfg, int order, Direction direction) {
  cfg.validate();
  OptimizeResult out;
  out.xi = xi0;
  Evaluation current = f(out.xi, order);
  int i = 0;
  while (current.gradient.norm() > cfg.epsilon && i < cfg.max_iters) {
    TraceEntry entry{i, current.value, current.gradient.norm()};
    const Vector step_dir = direction(current, entry);
    const LineSearchResult ls = wolfe_bisection(f, out.xi, current, step_dir, cfg);
    entry.lambda = ls.step;
    entry.wolfe_accepted = ls.accepted;
    out.trace.push_back(entry);
    out.xi += ls.step * step_dir;
    current = f(out.xi, order);
    ++i;
  }
  out.trace.push_back(TraceEntry{i, current.value, current.gradient.norm()});
  out.iterations = i;
  out.converged = current.gradient.norm() <= cfg.epsilon;
  out.final = std::move(current);
  return out;
}

}  // namespace detail

template <Objective F>
OptimizeResult gradient_descent(const F& f, const Vector& xi0, const OptimizerConfig& cfg) {
  return detail::descend(f, xi0, cfg, 1, [](const Evaluation& e, TraceEntry&) -> Vector {
    return -e.gradient / e.gradient.norm();
  });
}

/// Newton direction from the Hessian, shifted to have smallest eigenvalue delta
/// whenever it is not already >= delta I.
inline Vector newton_direction(const Evaluation& e, double delta, double* min_eig = nullptr) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(e.hessian);
  if (eig.info() != Eigen::Success) throw std::runtime_error("newton: eigendecomposition failed");
  Vector lambdas = eig.eigenvalues();
  const double mu = lambdas.minCoeff();
  if (mu < delta) lambdas.array() += delta - mu;
  if (min_eig) *min_eig = lambdas.minCoeff();
  const Matrix& v = eig.eigenvectors();
  const Vector d = -(v * (v.transpose() * e.gradient).cwiseQuotient(lambdas));
  return d / d.norm();
}

template <Objective F>
OptimizeResult newton(const F& f, const Vector& xi0, const OptimizerConfig& cfg) {
  return detail::descend(f, xi0, cfg, 2, [&cfg](const Evaluation& e, TraceEntry& entry) -> Vector {
    return newton_direction(e, cfg.delta, &entry.min_eig);
  });
}

// ---------------------------------------------------------------------------

struct ExhaustiveResult {
  Activation xi;
  int pos_index = 0;
  int dir_index = 0;
  double value = 0.0;
  Matrix landscape;  // row = position angle index, column = direction angle index
};

inline double grid_angle(int i, int resolution) {
  return 2.0 * M_PI * (static_cast<double>(i) / static_cast<double>(resolution));
}

/// Minimizes f(pos, dir) over the equidistant resolution x resolution grid on
/// [0, 2pi)^2; the first minimum in row-major order wins.
template <class F>
ExhaustiveResult exhaustive_search(const F& f, int resolution) {
  if (resolution < 1) throw std::invalid_argument("exhaustive_search: resolution must be >= 1");
  ExhaustiveResult out;
  out.landscape.resize(resolution, resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) out.landscape(i, j) = f(grid_angle(i, resolution), grid_angle(j, resolution));

  out.value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      if (out.landscape(i, j) < out.value) {
        out.value = out.landscape(i, j);
        out.pos_index = i;
        out.dir_index = j;
      }
    }
  }
  out.xi = {grid_angle(out.pos_index, resolution), grid_angle(out.dir_index, resolution)};
  return out;
}

inline void write_landscape(std::ostream& os, const Matrix& landscape) {
  const auto old_precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < landscape.rows(); ++i) {
    for (Eigen::Index j = 0; j < landscape.cols(); ++j) os << (j ? " " : "") << landscape(i, j);
    os << '\n';
  }
  os.precision(old_precision);
}

// ---------------------------------------------------------------------------

inline double wrap_angle(double theta) {
  double w = std::fmod(theta, 2.0 * M_PI);
  if (w < 0.0) w += 2.0 * M_PI;
  if (w >= 2.0 * M_PI) w = 0.0;
  return w;
}

/// Flips inward-pointing dipoles by pi and wraps both angles to [0, 2pi).
/// Neither criterion changes: flipping only negates the activation's rows.
inline DesignAngles canonicalize_orientation(const DesignAngles& design) {
  DesignAngles out = design;
  for (auto& act : out) {
    const Vec2 radial(std::cos(act.position), std::sin(act.position));
    if (act.moment().dot(radial) < 0.0) act.direction += M_PI;
    act.position = wrap_angle(act.position);
    act.direction = wrap_angle(act.direction);
  }
  return out;
}

}  // namespace mrxi

#endif  // MRXI_OPTIMIZE_HPP
