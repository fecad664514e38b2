/*
 * Copyright (C) 2026 The srmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "srmc/generator.hpp"

using namespace srmc;
using Td = Tensor<double>;

namespace {

ExpFamilyEnergy<double> smooth_1d() {
  // Two wells at +-0.6; strongly contracting but smooth.
  return ExpFamilyEnergy<double>(FeatureSpec::rbf(1, 2, -0.6, 0.6, 0.4), {0.8, 0.6});
}

ExpFamilyEnergy<double> smooth_2d() {
  RandomStream r(5, 5);
  std::vector<double> theta(9);
  for (auto& v : theta) v = r.uniform(0.0, 0.4);
  return ExpFamilyEnergy<double>(FeatureSpec::rbf(2, 3, -1, 1, 0.7), std::move(theta));
}

}  // namespace

TEST(Interpolate, EndpointsAreBitExact) {
  ConvEnergyNet<double> net(ArchSpec{32, 1, 1});
  net.init_params(2);
  const Td z1 = draw_p0<double>(2, net.example_shape(), 1), z2 = draw_p0<double>(2, net.example_shape(), 2);
  InterpolationSpec spec;
  spec.rhos = {0.0, 0.5, 1.0};
  spec.steps = 5;
  const auto xs = interpolate(net, z1, z2, spec);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_TRUE(xs[2].bit_equal(run_deterministic<double>(net, z1, 5)));
  EXPECT_TRUE(xs[0].bit_equal(run_deterministic<double>(net, z2, 5)));
  EXPECT_THROW((void)mix_latents(z1, z2, 1.5), std::invalid_argument);
}

TEST(Interpolate, MixingPreservesP0Variance) {
  const Td z1 = draw_p0<double>(400, Shape{500}, 3), z2 = draw_p0<double>(400, Shape{500}, 4);
  for (double rho : {0.0, 0.3, 0.7071, 0.9, 1.0}) {
    const Td z = mix_latents(z1, z2, rho);
    double s = 0, s2 = 0;
    for (double v : z.data()) {
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(z.size());
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(var, 1.0 / 3.0, 0.02 / 3.0) << rho;
  }
}

TEST(Reconstruct, UnrolledGradientMatchesFiniteDifferences) {
  for (int which = 0; which < 2; ++which) {
    const auto net = which == 0 ? smooth_1d() : smooth_2d();
    const std::size_t D = net.example_shape()[0];
    const Td z = draw_p0<double>(3, Shape{D}, 7), target = draw_p0<double>(3, Shape{D}, 8);
    const auto g = unrolled_loss_gradient(net, z, target, 6, 0.3);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < z.size(); ++k) {
      Td p = z, m = z;
      p.mutable_data()[k] += eps;
      m.mutable_data()[k] -= eps;
      const std::size_t i = k / D;
      const double fd = (unrolled_loss_gradient(net, p, target, 6, 0.3, false).loss[i] -
                         unrolled_loss_gradient(net, m, target, 6, 0.3, false).loss[i]) / (2 * eps);
      EXPECT_NEAR(g.grad_z[k], fd, 1e-3 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Reconstruct, ZeroIterationsReturnsBaseline) {
  const auto net = smooth_2d();
  const Td target = draw_p0<double>(4, net.example_shape(), 1);
  const Td z0 = draw_p0<double>(4, net.example_shape(), 2);
  ReconstructionSpec spec;
  spec.max_iters = 0;
  spec.steps = 10;
  const auto r = reconstruct<double>(net, target, spec, z0);
  const Td x = run_deterministic<double>(net, z0, 10);
  EXPECT_TRUE(r.x_hat.bit_equal(x));
  double mse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - target[i]) * (x[i] - target[i]);
  EXPECT_DOUBLE_EQ(r.mse_per_pixel, mse / static_cast<double>(x.size()));
  ASSERT_EQ(r.trajectory.size(), 1u);
}

TEST(Reconstruct, SelfReconstructionOfSmoothChain) {
  const auto net = smooth_2d();
  const Td z_true = draw_p0<double>(6, net.example_shape(), 11);
  const Td target = run_deterministic<double>(net, z_true, 20, 0.3);
  ReconstructionSpec spec;
  spec.steps = 20;
  spec.step_size = 0.3;
  spec.seed = 12;
  const auto r = reconstruct<double>(net, target, spec);
  EXPECT_LT(r.mse_per_pixel, 1e-4);
  for (std::size_t t = 1; t < r.trajectory.size(); ++t) EXPECT_LE(r.trajectory[t], r.trajectory[t - 1]);
}

TEST(Reconstruct, ConvNetTrajectoryIsMonotone) {
  ConvEnergyNet<double> net(ArchSpec{32, 1, 1});
  net.init_params(3);
  const Td target = draw_p0<double>(2, net.example_shape(), 4);
  ReconstructionSpec spec;
  spec.steps = 5;
  spec.max_iters = 15;
  const auto r = reconstruct<double>(net, target, spec);
  ASSERT_GE(r.trajectory.size(), 2u);
  for (std::size_t t = 1; t < r.trajectory.size(); ++t) EXPECT_LE(r.trajectory[t], r.trajectory[t - 1]);
  EXPECT_LT(r.trajectory.back(), r.trajectory.front());
}

TEST(Reconstruct, RejectsShapeMismatch) {
  const auto net = smooth_2d();
  ReconstructionSpec spec;
  EXPECT_THROW((void)reconstruct<double>(net, Td(Shape{2, 3}), spec), ShapeError);
  EXPECT_THROW((void)reconstruct<double>(net, Td(Shape{2, 2}), spec, Td(Shape{3, 2})), ShapeError);
}

TEST(VaryK, ZeroStepsHasNoSaturation) {
  const auto net = smooth_2d();
  SamplerConfig base;
  base.step_size = 0.3;
  base.noise_scale = 0.5;
  const auto rows = vary_k(net, {0, 10, 40}, 500, 3, base);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].saturation_fraction, 0.0);
  EXPECT_EQ(rows[0].mean_grad_norm, 0.0);
  EXPECT_GT(rows[2].saturation_fraction, 0.0);
  EXPECT_TRUE(rows[0].samples.bit_equal(draw_p0<double>(500, Shape{2}, 3)));
}
