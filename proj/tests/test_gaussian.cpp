#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mrxi;
using namespace mrxi::support;

namespace {

GaussianBelief smooth_prior(const PixelGrid& g) {
  return {Vector::Zero(static_cast<Eigen::Index>(g.size())), squared_exp_prior(g, 1.0, 0.15)};
}

void expect_valid_update(const Matrix& before, const Matrix& after, std::mt19937_64& rng) {
  EXPECT_LE(symmetry_error(after), 1e-12);
  EXPECT_GE(min_eig(after), -1e-10 * after.trace() / static_cast<double>(after.rows()));
  EXPECT_LE(after.trace(), before.trace());
  for (int i = 0; i < 100; ++i) {
    const Vector v = random_vector(before.rows(), rng);
    EXPECT_LE(v.dot(after * v), v.dot(before * v) + 1e-10 * v.squaredNorm());
  }
}

}  // namespace

TEST(Prior, DiagonalAndDistanceEll) {
  const std::vector<Vec2> pts{{0, 0}, {0.15, 0}, {3, 0}, {30, 0}};
  const Matrix c = squared_exp_prior(pts, 1.0, 0.15);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(c(i, i), 1.0);
  EXPECT_NEAR(c(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(c(0, 1), 0.60653, 1e-5);
  EXPECT_GT(c(0, 1), c(0, 2));
  EXPECT_GE(c(0, 2), c(0, 3));
  EXPECT_EQ(c, c.transpose());
  EXPECT_DOUBLE_EQ(squared_exp_prior(pts, 2.0, 1.0)(0, 0), 4.0);
  EXPECT_THROW(squared_exp_prior(pts, 0.0, 1.0), std::invalid_argument);
}

TEST(Posterior, ScalarUpdate) {
  const GaussianBelief prior{Vector::Zero(1), Matrix::Identity(1, 1)};
  const GaussianBelief post = posterior_update(prior, Matrix::Ones(1, 1), NoiseModel{1.0}, Vector::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(post.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(post.cov(0, 0), 0.5);
}

TEST(Posterior, ZeroOperatorLeavesBeliefUnchanged) {
  const PixelGrid g(8, 0.5);
  GaussianBelief prior = smooth_prior(g);
  prior.mean.setConstant(0.3);
  const Eigen::Index n = prior.dim();
  const GaussianBelief post = posterior_update(prior, Matrix::Zero(5, n), NoiseModel{0.5}, Vector::Ones(5));
  EXPECT_LE((post.mean - prior.mean).norm(), 1e-14);
  EXPECT_LE((post.cov - prior.cov).norm(), 1e-14 * prior.cov.norm());
  const GaussianBelief same = batch_posterior(prior, Matrix(0, n), Vector(0), Vector(0));
  EXPECT_EQ(same.mean, prior.mean);
  EXPECT_EQ(same.cov, prior.cov);
}

TEST(Posterior, BatchEqualsRecursive) {
  const PixelGrid g(20, 0.5);
  const SensorArray sensors = SensorArray::equiangular(36, 0.5);
  const ForwardModel model(sensors, g);
  const NoiseModel noise{0.1};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(0, 2 * M_PI);
  const GaussianBelief prior = smooth_prior(g);
  const DesignAngles design{{ang(rng), ang(rng)}, {ang(rng), ang(rng)}, {ang(rng), ang(rng)}};
  const Vector y = random_vector(3 * 36, rng);

  GaussianBelief seq = prior;
  for (int i = 0; i < 3; ++i) {
    const GaussianBelief next = posterior_update(seq, model.block(design[i]), noise, y.segment(36 * i, 36));
    expect_valid_update(seq.cov, next.cov, rng);
    seq = next;
  }
  const GaussianBelief batch = posterior_update(prior, model.system_matrix(design), noise, y);
  EXPECT_LE((seq.mean - batch.mean).norm() / batch.mean.norm(), 1e-8);
  EXPECT_LE((seq.cov - batch.cov).norm() / batch.cov.norm(), 1e-8);
}

TEST(Posterior, PermutationInvariance) {
  const PixelGrid g(14, 0.5);
  const ForwardModel model(SensorArray::equiangular(12, 0.5), g);
  const GaussianBelief prior = smooth_prior(g);
  const NoiseModel noise{0.2};
  std::mt19937_64 rng(2);
  const Vector y1 = random_vector(12, rng), y2 = random_vector(12, rng);
  const Activation a{0.3, 1.0}, b{2.5, 4.0};
  Matrix k12(24, prior.dim()), k21(24, prior.dim());
  k12 << model.block(a), model.block(b);
  k21 << model.block(b), model.block(a);
  Vector y12(24), y21(24);
  y12 << y1, y2;
  y21 << y2, y1;
  const GaussianBelief p = posterior_update(prior, k12, noise, y12), q = posterior_update(prior, k21, noise, y21);
  EXPECT_LE((p.mean - q.mean).norm() / p.mean.norm(), 1e-8);
  EXPECT_LE((p.cov - q.cov).norm() / p.cov.norm(), 1e-8);
}

TEST(Posterior, MeanLinearInData) {
  const PixelGrid g(10, 0.5);
  const ForwardModel model(SensorArray::equiangular(8, 0.5), g);
  const GaussianBelief prior = smooth_prior(g);
  const Matrix k = model.block({1.0, 1.0});
  std::mt19937_64 rng(4);
  const Vector y1 = random_vector(8, rng), y2 = random_vector(8, rng);
  const NoiseModel noise{0.3};
  const Vector m = posterior_update(prior, k, noise, 2.0 * y1 - y2).mean;
  const Vector l = 2.0 * posterior_update(prior, k, noise, y1).mean - posterior_update(prior, k, noise, y2).mean;
  EXPECT_LE((m - l).norm(), 1e-10 * std::max(1.0, m.norm()));
}

TEST(Posterior, DimensionMismatch) {
  const GaussianBelief prior{Vector::Zero(3), Matrix::Identity(3, 3)};
  EXPECT_THROW(posterior_update(prior, Matrix::Ones(2, 4), NoiseModel{}, Vector::Ones(2)), std::invalid_argument);
  EXPECT_THROW(posterior_update(prior, Matrix::Ones(2, 3), NoiseModel{}, Vector::Ones(3)), std::invalid_argument);
}

TEST(Simulate, NoiselessAndDeterministic) {
  const PixelGrid data(24, 0.5);
  const SensorArray sensors = SensorArray::equiangular(36, 0.5);
  const Vector truth = eval_phantom(Phantom::p_shaped(), data);
  const DesignAngles design{{0.5, 0.5}, {2.0, 1.0}};
  const Vector exact = ForwardModel(sensors, data).system_matrix(design) * truth;
  EXPECT_EQ(simulate_data(truth, design, sensors, data, NoiseModel{0.0}, 1), exact);
  const Vector a = simulate_data(truth, design, sensors, data, NoiseModel{0.1}, 42);
  const Vector b = simulate_data(truth, design, sensors, data, NoiseModel{0.1}, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, simulate_data(truth, design, sensors, data, NoiseModel{0.1}, 43));
  EXPECT_THROW(simulate_data(Vector::Ones(3), design, sensors, data, NoiseModel{0.1}, 1), std::invalid_argument);
}

TEST(Simulate, EmpiricalNoiseLevel) {
  const PixelGrid data(6, 0.5);
  const SensorArray sensors = SensorArray::equiangular(100, 0.5);
  const ForwardModel model(sensors, data);
  const Vector truth = Vector::Ones(static_cast<Eigen::Index>(data.size()));
  const DesignAngles design{{0.0, 0.0}};
  const Vector exact = model.system_matrix(design) * truth;
  auto rng = substream(9, "noise");
  double sum = 0, sum2 = 0;
  int count = 0;
  while (count < 10000) {
    const Vector e = simulate_data(truth, design, model, NoiseModel{0.25}, rng) - exact;
    sum += e.sum();
    sum2 += e.squaredNorm();
    count += static_cast<int>(e.size());
  }
  const double mean = sum / count;
  EXPECT_NEAR(std::sqrt(sum2 / count - mean * mean), 0.25, 0.03 * 0.25);
}
