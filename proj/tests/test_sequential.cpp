#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mrxi;
using namespace mrxi::support;

namespace {

SequentialGrids small_grids() { return {PixelGrid(16, 0.5), PixelGrid(10, 0.5), PixelGrid(20, 0.5)}; }

SequentialResult small_run(DesignMethod method, std::uint64_t seed, int n_act = 3) {
  SequentialOptions opts;
  opts.resolution = 12;
  return run_sequential_tv(n_act, Phantom::p_shaped(), small_grids(), SensorArray::equiangular(36, 0.5), NoiseModel{0.1},
                           TvConfig{}, OptimizerConfig{}, method, seed, opts);
}

}  // namespace

TEST(Method, ParseAndPrint) {
  for (auto m : {DesignMethod::GradientDescent, DesignMethod::Newton, DesignMethod::Exhaustive, DesignMethod::Reference})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("annealing"), std::invalid_argument);
}

TEST(ReferenceSchedule, FourActivations) {
  const DesignAngles d = reference_schedule(4);
  ASSERT_EQ(d.size(), 4u);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(d[k].position, k * M_PI / 2, 1e-15);
}

TEST(ReferenceSchedule, EightActivationsRoundRobin) {
  const DesignAngles d = reference_schedule(8);
  const int order[] = {0, 2, 4, 6, 1, 3, 5, 7};
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(d[i].position, 2 * M_PI * order[i] / 8, 1e-15);
}

TEST(ReferenceSchedule, OutwardAndComplete) {
  for (int n : {1, 5, 15}) {
    const DesignAngles d = reference_schedule(n);
    ASSERT_EQ(d.size(), static_cast<std::size_t>(n));
    std::vector<double> pos;
    for (const auto& a : d) {
      EXPECT_GT(a.moment().dot(a.location(1.0)), 0.0);
      EXPECT_EQ(a.position, a.direction);
      pos.push_back(a.position);
    }
    std::sort(pos.begin(), pos.end());
    for (int k = 0; k < n; ++k) EXPECT_NEAR(pos[k], 2 * M_PI * k / n, 1e-15);
  }
  EXPECT_THROW(reference_schedule(0), std::invalid_argument);
}

TEST(GaussianBatch, NoActivations) {
  const PixelGrid g(12, 0.5);
  const GaussianBelief prior{Vector::Zero(static_cast<Eigen::Index>(g.size())), squared_exp_prior(g, 1.0, 0.15)};
  const BatchResult r = optimize_gaussian_batch(0, prior, SensorArray::equiangular(36, 0.5), g, NoiseModel{1.0},
                                                OptimizerConfig{}, DesignMethod::Newton, 1);
  EXPECT_TRUE(r.design.empty());
  EXPECT_DOUBLE_EQ(r.value, prior.cov.trace());
}

TEST(GaussianBatch, MonotoneHistoryAndIdempotentValue) {
  const PixelGrid g(12, 0.5);
  const SensorArray sensors = SensorArray::equiangular(36, 0.5);
  const GaussianBelief prior{Vector::Zero(static_cast<Eigen::Index>(g.size())), squared_exp_prior(g, 1.0, 0.15)};
  for (auto kind : {CriterionKind::A, CriterionKind::D}) {
    OptimizerConfig cfg;
    cfg.max_iters = 15;
    const BatchResult r =
        optimize_gaussian_batch(3, prior, sensors, g, NoiseModel{1.0}, cfg, DesignMethod::Newton, 4, kind);
    ASSERT_EQ(r.design.size(), 3u);
    // The scaled D value is an information gain and so increases.
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      if (!r.optimizer.trace[i - 1].wolfe_accepted) continue;
      if (kind == CriterionKind::A) EXPECT_LE(r.history[i], r.history[i - 1]);
      else EXPECT_GE(r.history[i], r.history[i - 1]);
    }
    EXPECT_EQ(gaussian_design_value(r.design, prior.cov, sensors, g, NoiseModel{1.0}, kind), r.value);
    EXPECT_EQ(r.initial.size(), 3u);
  }
}

TEST(GaussianBatch, SeededInitialDesign) {
  EXPECT_EQ(to_vector(random_design(4, 9)), to_vector(random_design(4, 9)));
  EXPECT_NE(to_vector(random_design(4, 9)), to_vector(random_design(4, 10)));
  for (const auto& a : random_design(20, 3)) {
    EXPECT_GE(a.position, 0.0);
    EXPECT_LT(a.position, 2 * M_PI);
  }
}

TEST(ScaledCriterion, AAndD) {
  const PixelGrid g(10, 0.5);
  EXPECT_DOUBLE_EQ(scaled_criterion(2.0, CriterionKind::A, g), expected_l2(2.0, g));
  EXPECT_DOUBLE_EQ(scaled_criterion(-4.0, CriterionKind::D, g), 2.0);
}

TEST(Exhaustive, NewtonRefinesGridMinimum) {
  const PixelGrid g(20, 0.5);
  const DesignCriterion crit(ForwardModel(SensorArray::equiangular(36, 0.5), g), squared_exp_prior(g, 1.0, 0.15),
                             NoiseModel{1.0}, CriterionKind::A, RoiWeight::full(static_cast<Eigen::Index>(g.size())));
  const int res = 100;
  const auto ex = exhaustive_search([&](double p, double d) { return crit.value(to_vector({{p, d}})); }, res);
  const OptimizeResult nr = newton(crit, to_vector({ex.xi}), OptimizerConfig{});
  EXPECT_LE(nr.final.value, ex.value);
  EXPECT_NEAR(nr.final.value, ex.value, 1e-2 * ex.value);
  const double cell = 2 * M_PI / res;
  EXPECT_LE(std::abs(nr.xi[0] - ex.xi.position), cell);
  EXPECT_LE(std::abs(nr.xi[1] - ex.xi.direction), cell);
}

TEST(SequentialTv, ReferenceFollowsScheduleAndIgnoresSeed) {
  const SequentialResult a = small_run(DesignMethod::Reference, 1, 4);
  const SequentialResult b = small_run(DesignMethod::Reference, 2, 4);
  const DesignAngles sched = reference_schedule(4);
  ASSERT_EQ(a.designs.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(a.designs[k].position, sched[k].position, 1e-15);
    EXPECT_NEAR(a.designs[k].direction, sched[k].direction, 1e-15);
  }
  EXPECT_EQ(to_vector(a.designs), to_vector(b.designs));
  EXPECT_NE(a.per_step_errors, b.per_step_errors);
  EXPECT_EQ(a.per_step_errors.size(), 4u);
  EXPECT_EQ(a.snapshots.size(), 4u);
  EXPECT_EQ(a.final_map.size(), static_cast<Eigen::Index>(PixelGrid(16, 0.5).size()));
}

TEST(SequentialTv, ExhaustiveRunIsDeterministic) {
  const SequentialResult a = small_run(DesignMethod::Exhaustive, 5);
  const SequentialResult b = small_run(DesignMethod::Exhaustive, 5);
  EXPECT_EQ(a.per_step_errors, b.per_step_errors);
  EXPECT_EQ(to_vector(a.designs), to_vector(b.designs));
  ASSERT_EQ(a.landscapes.size(), 3u);
  EXPECT_EQ(a.landscapes[0].rows(), 12);
  for (std::size_t k = 0; k < a.per_step_errors.size(); ++k) {
    EXPECT_TRUE(a.inner_converged[k]);
    EXPECT_TRUE(std::isfinite(a.per_step_errors[k]));
  }
  EXPECT_LE(symmetry_error(a.final_cov), 1e-12);
  EXPECT_GE(min_eig(a.final_cov), -1e-10 * a.final_cov.trace() / static_cast<double>(a.final_cov.rows()));
}

TEST(SequentialTv, GradientMethodsRun) {
  for (auto m : {DesignMethod::GradientDescent, DesignMethod::Newton}) {
    const SequentialResult r = small_run(m, 1, 2);
    ASSERT_EQ(r.traces.size(), 2u);
    EXPECT_FALSE(r.traces[0].empty());
    for (const auto& t : r.traces)
      for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i].psi, t[i - 1].psi);
  }
}

TEST(SequentialTv, RejectsBadInput) {
  const SequentialGrids mixed{PixelGrid(16, 0.5), PixelGrid(10, 1.0), PixelGrid(20, 0.5)};
  EXPECT_THROW(run_sequential_tv(2, Phantom::p_shaped(), mixed, SensorArray::equiangular(36, 0.5), NoiseModel{0.1},
                                 TvConfig{}, OptimizerConfig{}, DesignMethod::Reference, 1),
               std::invalid_argument);
  EXPECT_THROW(small_run(DesignMethod::Reference, 1, 0), std::invalid_argument);
}

TEST(Writers, CsvLayouts) {
  std::ostringstream d, e, h, s;
  write_designs_csv(d, {{0.5, 0.25}});
  EXPECT_EQ(d.str(), "k,theta_pos,theta_dir\n1,0.5,0.25\n");
  write_errors_csv(e, {0.5}, {2.0});
  EXPECT_EQ(e.str(), "k,rel_l2,criterion\n1,0.5,2\n");
  write_history_csv(h, {1.0, 0.5}, "psi");
  EXPECT_EQ(h.str(), "iter,psi\n0,1\n1,0.5\n");
  write_snapshot(s, Vector::Ones(4), PixelGrid(2, 1.0));
  EXPECT_EQ(s.str(), "# n=2 rho=1 count=4\n1\n1\n1\n1\n");
  EXPECT_THROW(write_errors_csv(e, {1.0}, {}), std::invalid_argument);
}

TEST(Writers, FullPrecisionRoundTrip) {
  std::ostringstream d;
  const double x = 2.0 / 3.0;
  write_designs_csv(d, {{x, x}});
  std::istringstream in(d.str());
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), x);
}
