#ifndef MRXI_SEQUENTIAL_HPP
#define MRXI_SEQUENTIAL_HPP

// Outer design loops: simultaneous optimization of all activations under a
// Gaussian prior, and the adaptive edge-promoting loop that alternates
// single-activation design with lagged diffusivity reconstructions.

#include "mrxi/criteria.hpp"
#include "mrxi/forward.hpp"
#include "mrxi/gaussian.hpp"
#include "mrxi/grid.hpp"
#include "mrxi/optimize.hpp"
#include "mrxi/random.hpp"
#include "mrxi/tv.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mrxi {

enum class DesignMethod { GradientDescent, Newton, Exhaustive, Reference };

inline DesignMethod parse_method(std::string_view name) {
  if (name == "gd") return DesignMethod::GradientDescent;
  if (name == "newton") return DesignMethod::Newton;
  if (name == "exhaustive") return DesignMethod::Exhaustive;
  if (name == "reference") return DesignMethod::Reference;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected gd, newton, exhaustive or reference)");
}

inline std::string to_string(DesignMethod m) {
  switch (m) {
    case DesignMethod::GradientDescent: return "gd";
    case DesignMethod::Newton: return "newton";
    case DesignMethod::Exhaustive: return "exhaustive";
    case DesignMethod::Reference: return "reference";
  }
  return "?";
}

/// Equiangular outward dipoles, theta_pos = theta_dir = 2 pi k / n, in index order.
inline DesignAngles equidistant_design(int n_act) {
  if (n_act < 0) throw std::invalid_argument("equidistant_design: negative activation count");
  DesignAngles out;
  for (int k = 0; k < n_act; ++k) {
    const double t = 2.0 * M_PI * (static_cast<double>(k) / static_cast<double>(n_act));
    out.push_back({t, t});
  }
  return out;
}

/// The equidistant design in introduction order: quadrants are visited in turn
/// (I, II, III, IV, I, ...), each by increasing angle. Angle 2 pi k / n lies in
/// quadrant floor(4k / n).
inline DesignAngles reference_schedule(int n_act) {
  if (n_act < 1) throw std::invalid_argument("reference_schedule: n_act must be >= 1");
  const DesignAngles all = equidistant_design(n_act);
  std::vector<std::vector<int>> quadrant(4);
  for (int k = 0; k < n_act; ++k) quadrant[static_cast<std::size_t>(4 * k / n_act)].push_back(k);
  DesignAngles out;
  std::vector<std::size_t> next(4, 0);
  while (static_cast<int>(out.size()) < n_act) {
    for (std::size_t q = 0; q < 4; ++q) {
      if (next[q] < quadrant[q].size()) out.push_back(all[static_cast<std::size_t>(quadrant[q][next[q]++])]);
    }
  }
  return out;
}

/// Reported criterion: the expected L2 error for A, the information gain for D.
/// `value` is what DesignCriterion returns (for D: relative to the base).
inline double scaled_criterion(double value, CriterionKind kind, const PixelGrid& grid) {
  return kind == CriterionKind::A ? expected_l2(std::max(value, 0.0), grid) : -0.5 * value;
}

// ---------------------------------------------------------------------------
// Gaussian prior, all activations at once

struct BatchResult {
  DesignAngles design;            // canonicalized
  DesignAngles initial;
  double value = 0.0;             // criterion at the returned design
  double scaled = 0.0;
  std::vector<double> history;    // scaled criterion per optimizer iterate
  OptimizeResult optimizer;
};

/// Draws 2 n_act i.i.d. uniform angles from the "init" substream of seed.
inline DesignAngles random_design(int n_act, std::uint64_t seed) {
  auto rng = substream(seed, "init");
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * M_PI);
  DesignAngles out(static_cast<std::size_t>(n_act));
  for (auto& act : out) {
    act.position = uniform(rng);
    act.direction = uniform(rng);
  }
  return out;
}

inline BatchResult optimize_gaussian_batch(int n_act, const GaussianBelief& prior, const SensorArray& sensors,
                                           const PixelGrid& grid, const NoiseModel& noise,
                                           const OptimizerConfig& cfg, DesignMethod method, std::uint64_t seed,
                                           CriterionKind kind = CriterionKind::A, RoiWeight weight = {}) {
  if (n_act < 0) throw std::invalid_argument("optimize_gaussian_batch: negative activation count");
  if (method != DesignMethod::GradientDescent && method != DesignMethod::Newton)
    throw std::invalid_argument("optimize_gaussian_batch: method must be gd or newton");
  if (weight.diag.size() == 0) weight = RoiWeight::full(prior.cov.rows());
  const DesignCriterion crit(ForwardModel(sensors, grid), prior.cov, noise, kind, std::move(weight));

  BatchResult out;
  out.initial = random_design(n_act, seed);
  const Vector xi0 = to_vector(out.initial);
  if (n_act == 0) {
    out.value = crit.base_value();
    out.scaled = scaled_criterion(out.value, kind, grid);
    out.history = {out.scaled};
    return out;
  }
  out.optimizer = method == DesignMethod::Newton ? newton(crit, xi0, cfg) : gradient_descent(crit, xi0, cfg);
  out.design = canonicalize_orientation(from_vector(out.optimizer.xi));
  out.value = crit.value(to_vector(out.design));
  out.scaled = scaled_criterion(out.value, kind, grid);
  for (const auto& e : out.optimizer.trace) out.history.push_back(scaled_criterion(e.psi, kind, grid));
  return out;
}

/// Criterion of a fixed design under the Gaussian prior.
inline double gaussian_design_value(const DesignAngles& design, const Matrix& prior_cov, const SensorArray& sensors,
                                    const PixelGrid& grid, const NoiseModel& noise,
                                    CriterionKind kind = CriterionKind::A, RoiWeight weight = {}) {
  if (weight.diag.size() == 0) weight = RoiWeight::full(prior_cov.rows());
  return DesignCriterion(ForwardModel(sensors, grid), prior_cov, noise, kind, std::move(weight))
      .value(to_vector(design));
}

// ---------------------------------------------------------------------------
// Edge-promoting sequential design

struct SequentialGrids {
  PixelGrid recon;
  PixelGrid opt;
  PixelGrid data;
};

struct SequentialOptions {
  int resolution = 100;           // exhaustive grid per angle
  bool refine_exhaustive = false; // polish the grid argmin with a few Newton steps
  int refine_steps = 5;
  bool keep_landscapes = true;
  bool final_covariance = true;
  std::function<void(int k, double rel_error)> on_step;
};

struct SequentialResult {
  DesignAngles designs;
  Vector final_map;                          // on the full recon grid
  Matrix final_cov;                          // over interior recon nodes
  std::vector<double> per_step_errors;
  std::vector<double> per_step_criterion;    // Psi_A of the chosen activation
  std::vector<std::vector<TraceEntry>> traces;
  std::vector<Vector> snapshots;             // MAP after each step, full recon grid
  std::vector<int> inner_iterations;
  std::vector<bool> inner_converged;
  std::vector<double> inner_last_delta;
  std::vector<std::vector<double>> inner_objective;
  std::vector<Matrix> landscapes;            // exhaustive only
};

namespace detail {

inline Vector stack(const std::vector<Vector>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

}  // namespace detail

inline SequentialResult run_sequential_tv(int n_act, const Phantom& phantom, const SequentialGrids& grids,
                                          const SensorArray& sensors, const NoiseModel& noise,
                                          const TvConfig& tv_cfg, const OptimizerConfig& opt_cfg,
                                          DesignMethod method, std::uint64_t seed,
                                          const SequentialOptions& options = {}) {
  if (n_act < 1) throw std::invalid_argument("run_sequential_tv: n_act must be >= 1");
  const double rho = grids.recon.rho();
  if (std::abs(grids.opt.rho() - rho) > 1e-12 * rho || std::abs(grids.data.rho() - rho) > 1e-12 * rho)
    throw std::invalid_argument("run_sequential_tv: grids must share rho");
  if (!(noise.eta > 0.0)) throw std::invalid_argument("run_sequential_tv: eta must be positive");
  if (options.resolution < 1) throw std::invalid_argument("run_sequential_tv: resolution must be >= 1");
  tv_cfg.validate();
  opt_cfg.validate();

  const TvMesh recon_mesh(grids.recon);
  const TvMesh opt_mesh(grids.opt);
  const ForwardModel recon_model(sensors, recon_mesh.free_points(), grids.recon.omega(), rho);
  const ForwardModel opt_model(sensors, opt_mesh.free_points(), grids.opt.omega(), rho);
  const ForwardModel data_model(sensors, grids.data);

  const Vector truth_data = eval_phantom(phantom, grids.data);
  const Vector truth_recon = eval_phantom(phantom, grids.recon);
  const DesignAngles schedule = reference_schedule(n_act);

  SequentialResult out;
  Vector map = Vector::Ones(recon_mesh.free_count());
  std::vector<Vector> data;
  const Eigen::Index ns = recon_model.sensor_count();

  for (int k = 1; k <= n_act; ++k) {
    const auto step = static_cast<std::size_t>(k - 1);
    Activation chosen = schedule[step];
    std::vector<TraceEntry> trace;
    double criterion_value = std::numeric_limits<double>::quiet_NaN();

    // Linearization of the current reconstruction on the coarse grid.
    const Vector map_opt = opt_mesh.extract(restrict_to(recon_mesh.embed(map), grids.recon, grids.opt));
    const Matrix base = k == 1 ? inverse_theta(map_opt, opt_mesh, tv_cfg.T)
                               : tv_covariance(map_opt, opt_model.system_matrix(out.designs),
                                               noise.variances(ns * (k - 1)), tv_cfg, opt_mesh);
    const DesignCriterion crit(opt_model, base, noise, CriterionKind::A, RoiWeight::full(base.rows()));

    switch (method) {
      case DesignMethod::Reference: break;
      case DesignMethod::GradientDescent:
      case DesignMethod::Newton: {
        const Vector xi0 = to_vector({chosen});
        const OptimizeResult r =
            method == DesignMethod::Newton ? newton(crit, xi0, opt_cfg) : gradient_descent(crit, xi0, opt_cfg);
        chosen = from_vector(r.xi).front();
        trace = r.trace;
        break;
      }
      case DesignMethod::Exhaustive: {
        ExhaustiveResult r = exhaustive_search(
            [&crit](double pos, double dir) { return crit.value(to_vector({{pos, dir}})); }, options.resolution);
        chosen = r.xi;
        if (options.refine_exhaustive) {
          OptimizerConfig refine = opt_cfg;
          refine.max_iters = options.refine_steps;
          const OptimizeResult nr = newton(crit, to_vector({chosen}), refine);
          if (nr.final.value <= r.value) chosen = from_vector(nr.xi).front();
          trace = nr.trace;
        }
        if (options.keep_landscapes) out.landscapes.push_back(std::move(r.landscape));
        break;
      }
    }
    chosen = canonicalize_orientation({chosen}).front();
    criterion_value = crit.value(to_vector({chosen}));
    out.designs.push_back(chosen);

    auto rng = substream(seed, "noise", static_cast<std::uint64_t>(k));
    data.push_back(simulate_data(truth_data, {chosen}, data_model, noise, rng));

    const Matrix k_recon = recon_model.system_matrix(out.designs);
    const bool last = k == n_act;
    LaggedDiffusivityResult ld = lagged_diffusivity(map, k_recon, detail::stack(data), noise.variances(k_recon.rows()),
                                                    tv_cfg, recon_mesh, last && options.final_covariance);
    map = ld.map;
    const Vector full = recon_mesh.embed(map);
    const double err = relative_l2_error(full, truth_recon, grids.recon);

    out.per_step_errors.push_back(err);
    out.per_step_criterion.push_back(criterion_value);
    out.traces.push_back(std::move(trace));
    out.snapshots.push_back(full);
    out.inner_iterations.push_back(ld.iterations);
    out.inner_converged.push_back(ld.converged);
    out.inner_last_delta.push_back(ld.last_delta_phi);
    out.inner_objective.push_back(std::move(ld.objective));
    if (last) {
      out.final_map = full;
      out.final_cov = std::move(ld.cov);
    }
    if (options.on_step) options.on_step(k, err);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

struct PrecisionGuard {
  std::ostream& os;
  std::streamsize old;
  explicit PrecisionGuard(std::ostream& s) : os(s), old(s.precision()) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
  }
  ~PrecisionGuard() { os.precision(old); }
};

}  // namespace detail

/// `k,theta_pos,theta_dir` with k starting at 1.
inline void write_designs_csv(std::ostream& os, const DesignAngles& design) {
  detail::PrecisionGuard guard(os);
  os << "k,theta_pos,theta_dir\n";
  for (std::size_t i = 0; i < design.size(); ++i)
    os << i + 1 << ',' << design[i].position << ',' << design[i].direction << '\n';
}

inline void write_errors_csv(std::ostream& os, const std::vector<double>& errors, const std::vector<double>& criterion) {
  if (errors.size() != criterion.size()) throw std::invalid_argument("write_errors_csv: length mismatch");
  detail::PrecisionGuard guard(os);
  os << "k,rel_l2,criterion\n";
  for (std::size_t i = 0; i < errors.size(); ++i) os << i + 1 << ',' << errors[i] << ',' << criterion[i] << '\n';
}

/// `iter,value` one line per entry.
inline void write_history_csv(std::ostream& os, const std::vector<double>& history, std::string_view column) {
  detail::PrecisionGuard guard(os);
  os << "iter," << column << '\n';
  for (std::size_t i = 0; i < history.size(); ++i) os << i << ',' << history[i] << '\n';
}

/// Grid header line followed by one value per pixel.
inline void write_snapshot(std::ostream& os, const Vector& values, const PixelGrid& grid) {
  if (static_cast<std::size_t>(values.size()) != grid.size())
    throw std::invalid_argument("write_snapshot: length does not match grid");
  detail::PrecisionGuard guard(os);
  os << "# n=" << grid.n() << " rho=" << grid.rho() << " count=" << grid.size() << '\n';
  for (Eigen::Index i = 0; i < values.size(); ++i) os << values[i] << '\n';
}

}  // namespace mrxi

#endif  // MRXI_SEQUENTIAL_HPP
