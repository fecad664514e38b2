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
#include <numbers>
#include <vector>

#include "srmc/grid.hpp"
#include "srmc/rng.hpp"

using namespace srmc;
using P = std::array<double, 2>;

namespace {

GridModel gaussian(const Lattice& lat, double mean, double var) {
  return normalize(lat, [=](const P& x) { return -(x[0] - mean) * (x[0] - mean) / (2 * var); });
}

}  // namespace

TEST(Normalize, FlatOnUnitInterval) {
  const auto lat = Lattice::line(-1, 1, 1024);
  const auto g = normalize(lat, std::vector<double>(1024, 0.0));
  EXPECT_NEAR(g.log_z, std::log(2.0), 1e-14);
  for (double d : g.density) EXPECT_NEAR(d, 0.5, 1e-14);
  EXPECT_NEAR(g.mass(), 1.0, 1e-10);
  EXPECT_TRUE(g.normalized);
}

TEST(Normalize, GaussianLogPartition) {
  const auto g = gaussian(Lattice::line(-8, 8, 4096), 0, 1);
  EXPECT_NEAR(g.log_z, std::log(std::sqrt(2 * std::numbers::pi)), 1e-6);
}

TEST(Normalize, ShiftInvariance) {
  const auto lat = Lattice::line(-3, 3, 500);
  std::vector<double> f(lat.size()), h(lat.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = std::sin(3 * lat.point(i)[0]);
    h[i] = f[i] + 700.0;  // would overflow a naive exp
  }
  const auto a = normalize(lat, f), b = normalize(lat, h);
  EXPECT_NEAR(b.log_z - a.log_z, 700.0, 1e-9);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(a.density[i], b.density[i], 1e-12);
}

TEST(Normalize, TwoDimensionalMass) {
  const auto lat = Lattice::box(-3, 3, 128);
  const auto g = normalize(lat, [](const P& x) { return -x[0] * x[0] - 0.5 * x[1] * x[1] + 0.3 * x[0] * x[1]; });
  EXPECT_NEAR(g.mass(), 1.0, 1e-10);
  EXPECT_EQ(g.density.size(), 128u * 128u);
}

TEST(Kl, SelfIsZeroAndGaussianClosedForm) {
  const auto lat = Lattice::line(-12, 12, 8192);
  const auto p = gaussian(lat, 0, 1), q = gaussian(lat, 0, 2);
  EXPECT_NEAR(kl(p, p), 0.0, 1e-15);
  const double exact = std::log(std::sqrt(2.0)) + 0.25 - 0.5;
  EXPECT_NEAR(kl(p, q), exact, 1e-5);
  EXPECT_NEAR(exact, 0.09657, 1e-5);
  EXPECT_GE(kl(q, p), 0.0);
}

TEST(Kl, SupportViolationAndLatticeMismatch) {
  const auto lat = Lattice::line(-2, 2, 100);
  std::vector<double> d(100, 1.0), e(100, 1.0);
  for (std::size_t i = 0; i < 50; ++i) e[i] = 0.0;
  const auto p = from_density(lat, d), q = from_density(lat, e);
  EXPECT_THROW((void)kl(p, q), SupportError);
  EXPECT_NO_THROW((void)kl(q, p));
  EXPECT_THROW((void)kl(p, from_density(Lattice::line(-2, 2, 101), std::vector<double>(101, 1.0))),
               std::invalid_argument);
}

TEST(Entropy, UniformAndGaussian) {
  EXPECT_NEAR(entropy(normalize(Lattice::line(-1, 1, 256), std::vector<double>(256, 0.0))), std::log(2.0), 1e-12);
  const auto g = gaussian(Lattice::line(-10, 10, 8192), 0.3, 0.5);
  EXPECT_NEAR(entropy(g), 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * 0.5), 1e-6);
}

TEST(Quadrature, RefinementConsistency) {
  auto lat = Lattice::line(-6, 6, 256);
  auto f = [](const P& x) { return -x[0] * x[0] / 2 + 0.5 * std::cos(2 * x[0]); };
  auto g = [](const P& x) { return -(x[0] - 0.5) * (x[0] - 0.5) / 1.5; };
  const double kl1 = kl(normalize(lat, f), normalize(lat, g)), h1 = entropy(normalize(lat, f));
  const auto fine = lat.refined();
  EXPECT_EQ(fine.size(), 512u);
  EXPECT_NEAR(kl(normalize(fine, f), normalize(fine, g)), kl1, 1e-4);
  EXPECT_NEAR(entropy(normalize(fine, f)), h1, 1e-4);

  const auto box = Lattice::box(-4, 4, 64);
  auto f2 = [](const P& x) { return -(x[0] * x[0] + x[1] * x[1]) / 2 + 0.2 * x[0] * x[1]; };
  EXPECT_NEAR(entropy(normalize(box.refined(), f2)), entropy(normalize(box, f2)), 1e-4);
}

TEST(Quadrature, ExpectationAndTotalVariation) {
  const auto lat = Lattice::line(-10, 10, 4096);
  const auto p = gaussian(lat, 1.0, 0.25);
  EXPECT_NEAR(expectation(p, [](const P& x) { return x[0]; }), 1.0, 1e-9);
  EXPECT_NEAR(expectation(p, [](const P& x) { return x[0] * x[0]; }), 1.25, 1e-9);
  EXPECT_NEAR(total_variation(p, p), 0.0, 1e-15);
  const auto q = gaussian(lat, -1.0, 0.25);
  EXPECT_GT(total_variation(p, q), 0.9);
  EXPECT_LE(total_variation(p, q), 1.0);
}

TEST(Kde, IntegratesToOneAndTracksDensity) {
  RandomStream r(3, 3);
  std::vector<P> pts(20000);
  for (auto& p : pts) p = {r.normal(), 0.0};
  const auto lat = Lattice::line(-6, 6, 1024);
  const auto k = kde(pts, lat);
  EXPECT_NEAR(k.grid.mass(), 1.0, 1e-6);
  EXPECT_GT(k.bandwidth[0], 0.0);
  EXPECT_LT(total_variation(k.grid, gaussian(lat, 0, 1)), 0.03);

  std::vector<P> pts2(5000);
  for (auto& p : pts2) p = {0.5 * r.normal(), 0.5 * r.normal() + 1};
  const auto k2 = kde(pts2, Lattice::box(-3, 3, 96));
  EXPECT_NEAR(k2.grid.mass(), 1.0, 1e-6);
}

TEST(Kde, SilvermanOneDimensional) {
  RandomStream r(4, 4);
  std::vector<P> pts(1000);
  for (auto& p : pts) p = {2.0 * r.normal(), 0.0};
  const auto bw = silverman_bandwidth(pts, 1);
  // 0.9 * sd * n^-1/5 with sd close to 2.
  EXPECT_NEAR(bw[0], 0.9 * 2.0 * std::pow(1000.0, -0.2), 0.05);
}
