#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mrxi;
using namespace mrxi::support;

namespace {

TvMesh unit_triangle() { return TvMesh({{0, 0}, {1, 0}, {0, 1}}, {{{0, 1, 2}}}, {false, false, false}); }

struct Problem {
  PixelGrid grid{20, 0.5};
  TvMesh mesh{grid};
  Matrix k;
  Vector y, noise_var;
  TvConfig cfg;

  explicit Problem(int n_act = 4, double eta = 0.1) {
    const ForwardModel model(SensorArray::equiangular(36, 0.5), mesh.free_points(), grid.omega(), 0.5);
    DesignAngles design;
    for (int i = 0; i < n_act; ++i) design.push_back({2 * M_PI * i / n_act, 2 * M_PI * i / n_act});
    k = model.system_matrix(design);
    const Vector truth = mesh.extract(eval_phantom(Phantom::p_shaped(), grid));
    std::mt19937_64 rng(31);
    y = k * truth + random_vector(k.rows(), rng, eta);
    noise_var = Vector::Constant(k.rows(), eta * eta);
  }
};

}  // namespace

TEST(TvFunctional, SingleTriangle) {
  const TvMesh m = unit_triangle();
  EXPECT_DOUBLE_EQ(m.area(), 0.5);
  EXPECT_DOUBLE_EQ(tv_functional(Vector::Unit(3, 1), m, 0.0), 0.5);
}

TEST(TvFunctional, ZeroIsTTimesArea) {
  const PixelGrid g(20, 0.5);
  const TvMesh mesh(g);
  EXPECT_NEAR(tv_functional(Vector::Zero(mesh.free_count()), mesh, 1e-3), 1e-3 * mesh.area(), 1e-15);
}

TEST(TvFunctional, Homogeneity) {
  const PixelGrid g(16, 0.5);
  const TvMesh mesh(g);
  std::mt19937_64 rng(8);
  const Vector c = random_vector(mesh.free_count(), rng);
  const double base = tv_functional(c, mesh, 0.0);
  for (double s : {-2.0, 0.5, 3.0}) EXPECT_NEAR(tv_functional(s * c, mesh, 1e-12), std::abs(s) * base, 1e-9 * base);
}

TEST(Theta, ZeroMapIsScaledStiffness) {
  const PixelGrid g(12, 0.5);
  const TvMesh mesh(g);
  const Vector zero = Vector::Zero(mesh.free_count());
  const Matrix s = Matrix(assemble_theta(zero, mesh, 1.0));
  const Matrix t = Matrix(assemble_theta(zero, mesh, 1e-3));
  EXPECT_LE((t - s / 1e-3).norm(), 1e-10 * t.norm());
}

TEST(Theta, EvenInC) {
  const PixelGrid g(12, 0.5);
  const TvMesh mesh(g);
  std::mt19937_64 rng(12);
  const Vector c = random_vector(mesh.free_count(), rng);
  EXPECT_EQ(Matrix(assemble_theta(c, mesh, 1e-4)), Matrix(assemble_theta(-c, mesh, 1e-4)));
}

TEST(Theta, SymmetricPositiveDefinite) {
  const PixelGrid g(12, 0.5);
  const TvMesh mesh(g);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 5; ++i) {
    const Matrix t = Matrix(assemble_theta(random_vector(mesh.free_count(), rng), mesh, 1e-6));
    EXPECT_LE(symmetry_error(t), 1e-14);
    EXPECT_GT(min_eig(t), 0.0);
  }
}

TEST(Theta, GradientIdentity) {
  const PixelGrid g(20, 0.5);
  const TvMesh mesh(g);
  std::mt19937_64 rng(14);
  const double T = 1e-2, h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const Vector c = random_vector(mesh.free_count(), rng);
    const Vector grad = assemble_theta(c, mesh, T) * c;
    Vector fd(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      Vector p = c, m = c;
      p[i] += h;
      m[i] -= h;
      fd[i] = (tv_functional(p, mesh, T) - tv_functional(m, mesh, T)) / (2 * h);
    }
    EXPECT_LE((grad - fd).norm() / grad.norm(), 1e-6);
  }
}

TEST(LaggedDiffusivity, ZeroDataGivesZeroMap) {
  Problem p;
  p.y.setZero();
  const auto r = lagged_diffusivity(Vector::Zero(p.mesh.free_count()), p.k, p.y, p.noise_var, p.cfg, p.mesh);
  EXPECT_TRUE(r.map.isZero(0.0));
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  const auto s = lagged_diffusivity(Vector::Ones(p.mesh.free_count()), p.k, p.y, p.noise_var, p.cfg, p.mesh);
  EXPECT_TRUE(s.map.isZero(0.0));
  EXPECT_TRUE(s.converged);
}

TEST(LaggedDiffusivity, SingleStepIsGaussianMean) {
  Problem p;
  p.cfg.max_iters = 1;
  std::mt19937_64 rng(15);
  const Vector start = random_vector(p.mesh.free_count(), rng);
  const auto r = lagged_diffusivity(start, p.k, p.y, p.noise_var, p.cfg, p.mesh);
  const GaussianBelief prior{Vector::Zero(start.size()), inverse_theta(start, p.mesh, p.cfg.T) / p.cfg.gamma};
  const GaussianBelief post = batch_posterior(prior, p.k, p.noise_var, p.y);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LE((r.map - post.mean).norm() / post.mean.norm(), 1e-6);
  EXPECT_LE((r.cov - post.cov).norm() / post.cov.norm(), 1e-6);
}

TEST(LaggedDiffusivity, MonotoneObjectiveAndValidCovariance) {
  Problem p;
  const auto r = lagged_diffusivity(Vector::Ones(p.mesh.free_count()), p.k, p.y, p.noise_var, p.cfg, p.mesh);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.last_delta_phi, p.cfg.tau);
  for (std::size_t j = 1; j < r.objective.size(); ++j)
    EXPECT_LE(r.objective[j], r.objective[j - 1] + 1e-10 * std::abs(r.objective[j - 1])) << "iterate " << j;
  EXPECT_LE(symmetry_error(r.cov), 1e-12);
  EXPECT_GE(min_eig(r.cov), -1e-10 * r.cov.trace() / static_cast<double>(r.cov.rows()));
}

TEST(LaggedDiffusivity, Deterministic) {
  Problem p;
  const Vector start = Vector::Ones(p.mesh.free_count());
  const auto a = lagged_diffusivity(start, p.k, p.y, p.noise_var, p.cfg, p.mesh);
  const auto b = lagged_diffusivity(start, p.k, p.y, p.noise_var, p.cfg, p.mesh);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(a.cov, b.cov);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(TvCovariance, MatchesGaussianDowndate) {
  Problem p(2);
  std::mt19937_64 rng(16);
  const Vector c = random_vector(p.mesh.free_count(), rng);
  const Matrix cov = tv_covariance(c, p.k, p.noise_var, p.cfg, p.mesh);
  const GaussianBelief prior{Vector::Zero(c.size()), inverse_theta(c, p.mesh, p.cfg.T) / p.cfg.gamma};
  const Matrix ref = batch_posterior(prior, p.k, p.noise_var, p.y).cov;
  EXPECT_LE((cov - ref).norm() / ref.norm(), 1e-6);
  EXPECT_LE(cov.trace(), prior.cov.trace());
}

TEST(TvConfig, Validation) {
  TvConfig c;
  EXPECT_NO_THROW(c.validate());
  c.T = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
