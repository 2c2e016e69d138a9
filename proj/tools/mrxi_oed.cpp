// Experiment runner: Gaussian batch design, adaptive TV design, criterion
// landscapes and a self-check of the numerical building blocks.

#include "mrxi.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mrxi;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string experiment, method, output_dir, seed;
  bool quiet = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override key=value (repeatable)");
    app->add_option("-e,--experiment", experiment, "gaussian-1, gaussian-roi, tv-1, tv-2 or custom");
    app->add_option("-m,--method", method, "gd, newton, exhaustive or reference");
    app->add_option("-o,--output-dir", output_dir, "directory for result files");
    app->add_option("--seed", seed, "run seed");
    app->add_flag("-q,--quiet", quiet, "no progress output");
  }

  ExperimentConfig resolve(const std::string& default_experiment = {}) const {
    ConfigEntries file;
    if (!default_experiment.empty()) file.emplace_back("experiment", default_experiment);
    if (!config_path.empty())
      for (auto& e : read_config_file(config_path)) file.push_back(std::move(e));
    ConfigEntries flags;
    for (const auto& s : sets) flags.push_back(parse_override(s));
    if (!experiment.empty()) flags.emplace_back("experiment", experiment);
    if (!method.empty()) flags.emplace_back("method", method);
    if (!output_dir.empty()) flags.emplace_back("output_dir", output_dir);
    if (!seed.empty()) flags.emplace_back("seed", seed);
    return resolve_config(file, flags);
  }
};

class Output {
 public:
  Output(const ExperimentConfig& cfg, std::string command)
      : dir_(cfg.output_dir), command_(std::move(command)), hash_(hash_hex(config_hash(cfg))), seed_(cfg.seed) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("config key 'output_dir': cannot create '" + dir_.string() + "': " + ec.message());
    std::ofstream echo(dir_ / "config.resolved");
    echo << "# " << header() << '\n' << to_config_text(cfg);
    files_.push_back("config.resolved");
  }

  std::string header() const { return "mrxi_oed " + command_ + " config_hash=" + hash_ + " seed=" + std::to_string(seed_); }

  /// Opens `name` (relative to the output directory) and writes the comment header.
  std::ofstream open(const std::string& name) {
    const fs::path path = dir_ / name;
    fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << "# " << header() << '\n';
    files_.push_back(name);
    return os;
  }

  void manifest(const ExperimentConfig& cfg, const std::vector<std::pair<std::string, std::string>>& results) {
    std::ofstream os(dir_ / "manifest.txt");
    os << "# " << header() << '\n';
    os << "command=" << command_ << '\n';
    os << "config_hash=" << hash_ << '\n';
    os << "seed=" << seed_ << '\n';
    os << "scale=" << cfg.scale << (cfg.scale == "desk" ? " (reduced grids, not the published resolution)" : "") << '\n';
    for (const auto& w : cfg.warnings) os << "warning=" << w << '\n';
    for (const auto& [k, v] : results) os << "result." << k << '=' << v << '\n';
    for (const auto& f : files_) os << "file=" << f << '\n';
    os << "[config]\n" << to_config_text(cfg);
  }

 private:
  fs::path dir_;
  std::string command_;
  std::string hash_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

std::string num(double x) { return config_detail::fmt(x); }

void note(bool quiet, const std::string& text) {
  if (!quiet) std::cerr << text << std::endl;
}

void warn(const ExperimentConfig& cfg) {
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

int run_gaussian(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.resolve("gaussian-1");
  if (cfg.is_tv()) throw ConfigError("config key 'experiment': gaussian-oed needs gaussian-1, gaussian-roi or custom");
  warn(cfg);
  Output out(cfg, "gaussian-oed");

  const PixelGrid grid(cfg.n_opt, cfg.rho);
  const SensorArray sensors = SensorArray::equiangular(static_cast<std::size_t>(cfg.n_sensors), cfg.rho);
  GaussianBelief prior{Vector::Zero(static_cast<Eigen::Index>(grid.size())), squared_exp_prior(grid, cfg.gamma_sd, cfg.ell)};
  const NoiseModel noise{cfg.eta};
  const RoiWeight weight = make_roi(cfg, grid.centers());

  note(opts.quiet, "gaussian-oed: " + std::to_string(cfg.n_act) + " activations on " + std::to_string(grid.size()) +
                       " pixels, method " + to_string(cfg.method));
  const BatchResult r = optimize_gaussian_batch(cfg.n_act, prior, sensors, grid, noise, cfg.opt, cfg.method, cfg.seed,
                                                cfg.criterion, weight);
  const DesignAngles reference = equidistant_design(cfg.n_act);
  const double ref_value = gaussian_design_value(reference, prior.cov, sensors, grid, noise, cfg.criterion, weight);
  const double ref_scaled = scaled_criterion(ref_value, cfg.criterion, grid);

  const std::string column = cfg.criterion == CriterionKind::A ? "expected_l2" : "information_gain";
  { auto os = out.open("designs.csv"); write_designs_csv(os, r.design); }
  { auto os = out.open("initial.csv"); write_designs_csv(os, r.initial); }
  { auto os = out.open("reference.csv"); write_designs_csv(os, reference); }
  { auto os = out.open("history.csv"); write_history_csv(os, r.history, column); }
  { auto os = out.open("trace.txt"); write_trace(os, r.optimizer.trace); }
  {
    auto os = out.open("summary.csv");
    os << "quantity,value\n"
       << "criterion," << num(r.value) << '\n'
       << column << ',' << num(r.scaled) << '\n'
       << "reference_criterion," << num(ref_value) << '\n'
       << "reference_" << column << ',' << num(ref_scaled) << '\n'
       << "iterations," << r.optimizer.iterations << '\n'
       << "converged," << (r.optimizer.converged ? 1 : 0) << '\n';
  }
  out.manifest(cfg, {{column, num(r.scaled)},
                     {"reference_" + column, num(ref_scaled)},
                     {"iterations", std::to_string(r.optimizer.iterations)},
                     {"converged", r.optimizer.converged ? "true" : "false"}});
  note(opts.quiet, "  " + column + " " + num(r.scaled) + " (reference " + num(ref_scaled) + ")");
  return 0;
}

// ---------------------------------------------------------------------------

SequentialGrids grids_of(const ExperimentConfig& cfg) {
  return {PixelGrid(cfg.n_recon, cfg.rho), PixelGrid(cfg.n_opt, cfg.rho), PixelGrid(cfg.n_data, cfg.rho)};
}

int run_tv(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.resolve("tv-1");
  if (!cfg.is_tv()) throw ConfigError("config key 'experiment': tv-sequential needs tv-1 or tv-2");
  warn(cfg);
  Output out(cfg, "tv-sequential");

  const SequentialGrids grids = grids_of(cfg);
  const SensorArray sensors = SensorArray::equiangular(static_cast<std::size_t>(cfg.n_sensors), cfg.rho);
  SequentialOptions so;
  so.resolution = cfg.resolution;
  so.refine_exhaustive = cfg.refine_exhaustive;
  const auto t0 = std::chrono::steady_clock::now();
  so.on_step = [&](int k, double err) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[96];
    std::snprintf(buf, sizeof buf, "  k=%d rel_l2=%.6f (%.1f s)", k, err, s);
    note(opts.quiet, buf);
  };
  note(opts.quiet, "tv-sequential: " + std::to_string(cfg.n_act) + " activations, method " + to_string(cfg.method));
  const SequentialResult r = run_sequential_tv(cfg.n_act, cfg.phantom, grids, sensors, NoiseModel{cfg.eta}, cfg.tv,
                                               cfg.opt, cfg.method, cfg.seed, so);

  { auto os = out.open("designs.csv"); write_designs_csv(os, r.designs); }
  { auto os = out.open("errors.csv"); write_errors_csv(os, r.per_step_errors, r.per_step_criterion); }
  {
    auto os = out.open("inner.csv");
    os << "k,iterations,converged,last_delta_phi\n";
    for (std::size_t i = 0; i < r.inner_iterations.size(); ++i)
      os << i + 1 << ',' << r.inner_iterations[i] << ',' << (r.inner_converged[i] ? 1 : 0) << ','
         << num(r.inner_last_delta[i]) << '\n';
  }
  {
    auto os = out.open("inner_objective.csv");
    os << "k,j,objective\n";
    for (std::size_t i = 0; i < r.inner_objective.size(); ++i)
      for (std::size_t j = 0; j < r.inner_objective[i].size(); ++j)
        os << i + 1 << ',' << j << ',' << num(r.inner_objective[i][j]) << '\n';
  }
  { auto os = out.open("grid_recon.txt"); write_grid(os, grids.recon); }
  {
    auto os = out.open("truth.txt");
    write_snapshot(os, eval_phantom(cfg.phantom, grids.recon), grids.recon);
  }
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    auto os = out.open("snapshots/map_" + std::to_string(i + 1) + ".txt");
    write_snapshot(os, r.snapshots[i], grids.recon);
  }
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    if (r.traces[i].empty()) continue;
    auto os = out.open("traces/trace_" + std::to_string(i + 1) + ".txt");
    write_trace(os, r.traces[i]);
  }
  for (std::size_t i = 0; i < r.landscapes.size(); ++i) {
    auto os = out.open("landscapes/landscape_" + std::to_string(i + 1) + ".txt");
    write_landscape(os, r.landscapes[i]);
  }
  {
    const TvMesh mesh(grids.recon);
    auto os = out.open("final_variance.txt");
    write_snapshot(os, mesh.embed(r.final_cov.diagonal()), grids.recon);
  }
  out.manifest(cfg, {{"final_rel_l2", num(r.per_step_errors.back())}});
  return 0;
}

// ---------------------------------------------------------------------------

int run_landscape(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.resolve();
  warn(cfg);
  Output out(cfg, "landscape");
  const SensorArray sensors = SensorArray::equiangular(static_cast<std::size_t>(cfg.n_sensors), cfg.rho);
  Matrix landscape;
  if (cfg.is_tv()) {
    // The landscape of step k, after k - 1 exhaustive steps.
    SequentialOptions so;
    so.resolution = cfg.resolution;
    so.final_covariance = false;
    note(opts.quiet, "landscape: sequential step " + std::to_string(cfg.landscape_step));
    SequentialResult r = run_sequential_tv(cfg.landscape_step, cfg.phantom, grids_of(cfg), sensors,
                                           NoiseModel{cfg.eta}, cfg.tv, cfg.opt, DesignMethod::Exhaustive, cfg.seed, so);
    landscape = std::move(r.landscapes.back());
  } else {
    const PixelGrid grid(cfg.n_opt, cfg.rho);
    const DesignCriterion crit(ForwardModel(sensors, grid), squared_exp_prior(grid, cfg.gamma_sd, cfg.ell),
                               NoiseModel{cfg.eta}, cfg.criterion, make_roi(cfg, grid.centers()));
    note(opts.quiet, "landscape: first activation under the prior");
    landscape = exhaustive_search([&crit](double p, double d) { return crit.value(to_vector({{p, d}})); },
                                  cfg.resolution).landscape;
  }
  Eigen::Index i = 0, j = 0;
  const double best = landscape.minCoeff(&i, &j);
  { auto os = out.open("landscape.txt"); write_landscape(os, landscape); }
  out.manifest(cfg, {{"argmin_pos", num(grid_angle(static_cast<int>(i), cfg.resolution))},
                     {"argmin_dir", num(grid_angle(static_cast<int>(j), cfg.resolution))},
                     {"min", num(best)}});
  return 0;
}

// ---------------------------------------------------------------------------

struct CheckReport {
  int failures = 0;
  void line(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << std::endl;
    if (!ok) ++failures;
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

int run_forward_check(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.resolve("gaussian-1");
  const PixelGrid grid(cfg.n_opt, cfg.rho);
  const SensorArray sensors = SensorArray::equiangular(static_cast<std::size_t>(cfg.n_sensors), cfg.rho);
  const ForwardModel model(sensors, grid);
  const NoiseModel noise{cfg.eta};
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  CheckReport report;

  {
    double worst = 0.0;
    std::uniform_real_distribution<double> coord(-cfg.rho, cfg.rho);
    for (int t = 0; t < 200; ++t) {
      const Vec2 x(coord(rng), coord(rng));
      const double ts = angle(rng), ta = angle(rng);
      const Vec2 s = kMeasurementRadius * cfg.rho * Vec2(std::cos(ts), std::sin(ts));
      const Vec2 a = kMeasurementRadius * cfg.rho * Vec2(std::cos(ta), std::sin(ta));
      const double ss = angle(rng), sa = angle(rng);
      const Vec2 sigma(std::cos(ss), std::sin(ss)), alpha(std::cos(sa), std::sin(sa));
      const double k1 = kernel(s, sigma, a, alpha, x), k2 = kernel(a, alpha, s, sigma, x);
      worst = std::max(worst, std::abs(k1 - k2) / std::max(1.0, std::abs(k1)));
    }
    report.line(worst <= 1e-12, "kernel-reciprocity", "max scaled difference " + num(worst));
  }
  {
    double worst = 0.0;
    const double h = 1e-6;
    for (int t = 0; t < 10; ++t) {
      const Activation act{angle(rng), angle(rng)};
      const auto d = model.derivatives(act, 2);
      const auto pp = model.derivatives({act.position + h, act.direction}, 1);
      const auto pm = model.derivatives({act.position - h, act.direction}, 1);
      const auto dp = model.derivatives({act.position, act.direction + h}, 1);
      const auto dm = model.derivatives({act.position, act.direction - h}, 1);
      auto err = [](const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); };
      worst = std::max({worst, err(d.d_pos, (pp.value - pm.value) / (2 * h)), err(d.d_dir, (dp.value - dm.value) / (2 * h)),
                        err(d.d_pos_pos, (pp.d_pos - pm.d_pos) / (2 * h)), err(d.d_pos_dir, (dp.d_pos - dm.d_pos) / (2 * h)),
                        err(d.d_dir_dir, (dp.d_dir - dm.d_dir) / (2 * h))});
    }
    report.line(worst <= 1e-6, "system-matrix-derivatives", "max relative FD error " + num(worst));
  }
  const Matrix prior = squared_exp_prior(grid, cfg.gamma_sd, cfg.ell);
  for (const CriterionKind kind : {CriterionKind::A, CriterionKind::D}) {
    const DesignCriterion crit(model, prior, noise, kind, RoiWeight::full(prior.rows()));
    double worst = 0.0;
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
      Vector xi(2);
      xi << angle(rng), angle(rng);
      const Evaluation e = crit.evaluate(xi, 2);
      Vector g(2);
      Matrix hess(2, 2);
      for (int a = 0; a < 2; ++a) {
        Vector xp = xi, xm = xi;
        xp[a] += h;
        xm[a] -= h;
        g[a] = (crit.value(xp) - crit.value(xm)) / (2 * h);
        hess.col(a) = (crit.evaluate(xp, 1).gradient - crit.evaluate(xm, 1).gradient) / (2 * h);
      }
      worst = std::max({worst, (e.gradient - g).norm() / g.norm(), (e.hessian - hess).norm() / hess.norm()});
    }
    report.line(worst <= 1e-5, std::string("criterion-derivatives-") + (kind == CriterionKind::A ? "A" : "D"),
                "max relative FD error " + num(worst));
  }
  {
    const GaussianBelief p0{Vector::Zero(prior.rows()), prior};
    DesignAngles design;
    for (int i = 0; i < 3; ++i) design.push_back({angle(rng), angle(rng)});
    const Matrix k = model.system_matrix(design);
    std::normal_distribution<double> normal;
    Vector y(k.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = normal(rng);
    const GaussianBelief batch = posterior_update(p0, k, noise, y);
    GaussianBelief seq = p0;
    double trace_prev = seq.cov.trace();
    bool monotone = true;
    const Eigen::Index ns = model.sensor_count();
    for (int i = 0; i < 3; ++i) {
      seq = posterior_update(seq, k.middleRows(i * ns, ns), noise, y.segment(i * ns, ns));
      monotone = monotone && seq.cov.trace() <= trace_prev;
      trace_prev = seq.cov.trace();
    }
    const double em = (seq.mean - batch.mean).norm() / batch.mean.norm();
    const double ec = (seq.cov - batch.cov).norm() / batch.cov.norm();
    report.line(em <= 1e-8 && ec <= 1e-8 && monotone, "posterior-batch-vs-recursive",
                "mean " + num(em) + " cov " + num(ec) + (monotone ? "" : " trace increased"));
  }
  {
    const TvMesh mesh(grid);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      Vector c(mesh.free_count());
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
      const Vector g = assemble_theta(c, mesh, cfg.tv.T) * c;
      Vector fd(c.size());
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        Vector cp = c, cm = c;
        cp[i] += h;
        cm[i] -= h;
        fd[i] = (tv_functional(cp, mesh, cfg.tv.T) - tv_functional(cm, mesh, cfg.tv.T)) / (2 * h);
      }
      worst = std::max(worst, (g - fd).norm() / fd.norm());
    }
    report.line(worst <= 1e-6, "tv-gradient-identity", "max relative FD error " + num(worst));
  }
  {
    double worst = 0.0;
    for (const CriterionKind kind : {CriterionKind::A, CriterionKind::D}) {
      const DesignCriterion crit(model, prior, noise, kind, RoiWeight::full(prior.rows()));
      for (int t = 0; t < 20; ++t) {
        const double p = angle(rng), d = angle(rng);
        const double v1 = crit.value(to_vector({{p, d}})), v2 = crit.value(to_vector({{p, d + M_PI}}));
        worst = std::max(worst, rel(v2, v1));
      }
    }
    report.line(worst <= 1e-12, "orientation-flip-invariance", "max relative difference " + num(worst));
  }
  note(opts.quiet, report.failures == 0 ? "forward-check: all passed" : "forward-check: " + std::to_string(report.failures) + " failed");
  return report.failures == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimal activation design for magnetorelaxometry imaging"};
  app.require_subcommand(1);
  CommonOptions gaussian, tv, landscape, check;
  gaussian.attach(app.add_subcommand("gaussian-oed", "optimize all activations at once under a Gaussian prior"));
  tv.attach(app.add_subcommand("tv-sequential", "adaptive design with the edge-promoting prior"));
  landscape.attach(app.add_subcommand("landscape", "dump the single-activation criterion over the angle grid"));
  check.attach(app.add_subcommand("forward-check", "run kernel, derivative and posterior property checks"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand("gaussian-oed")) return run_gaussian(gaussian);
    if (app.got_subcommand("tv-sequential")) return run_tv(tv);
    if (app.got_subcommand("landscape")) return run_landscape(landscape);
    return run_forward_check(check);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
