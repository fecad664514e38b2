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

#include "srmc/theory.hpp"

using namespace srmc;
using P = std::array<double, 2>;

namespace {

GridModel gaussian(const Lattice& lat, double mean, double var) {
  return normalize(lat, [=](const P& x) { return -(x[0] - mean) * (x[0] - mean) / (2 * var); });
}

GridModel uniform_pm1(const Lattice& lat) {
  return normalize(lat, [](const P& x) { return std::abs(x[0]) <= 1.0 ? 0.0 : -1e300; });
}

}  // namespace

TEST(MomentMatch, GaussianFamilyRecoversNaturalParameters) {
  const auto lat = Lattice::line(-4, 6, 2048);
  const FeatureMap<double> map(FeatureSpec::polynomial(1, 2));
  const auto h = grid_features(lat, map);
  const auto data = gaussian(lat, 1.0, 0.25);
  const auto mm = match_moments(lat, {}, h, moments(data, h));
  EXPECT_LT(mm.residual, 1e-10);
  EXPECT_NEAR(mm.beta[0], 4.0, 1e-6);
  EXPECT_NEAR(mm.beta[1], -2.0, 1e-6);
  EXPECT_LT(total_variation(mm.model, data), 1e-8);
}

TEST(MomentMatch, UnreachableTargetThrows) {
  const auto lat = Lattice::line(-1, 1, 64);
  const FeatureMap<double> map(FeatureSpec::polynomial(1, 1));
  const auto h = grid_features(lat, map);
  EXPECT_THROW((void)match_moments(lat, {}, h, {5.0}), NewtonFailure);
}

TEST(Pythagorean, IdentityHoldsForGaussianFamily) {
  const auto lat = Lattice::line(-4, 6, 2048);
  const FeatureMap<double> map(FeatureSpec::polynomial(1, 2));
  const auto rep = verify_pythagorean(map, gaussian(lat, 1.0, 0.25), normalize(lat, std::vector<double>(2048, 0.0)));
  ASSERT_GE(rep.pairs.size(), 20u);
  EXPECT_LT(rep.max_identity_violation, 1e-8);
  EXPECT_LT(rep.max_entropy_form_violation, 1e-8);
  EXPECT_LE(rep.max_entropy_excess, 1e-9);
  EXPECT_LT(rep.estimating_residual, 1e-10);
  EXPECT_TRUE(rep.passes());
  for (const auto& pr : rep.pairs) {
    EXPECT_LT(pr.omega_residual, 1e-10);
    EXPECT_GT(pr.kl_p_hat, 0.0);  // the sweep leaves p_hat
  }
}

TEST(Pythagorean, ProjectionOfItselfIsTrivial) {
  const auto lat = Lattice::line(-4, 6, 1024);
  const FeatureMap<double> map(FeatureSpec::polynomial(1, 2));
  const auto h = grid_features(lat, map);
  const auto data = gaussian(lat, 1.0, 0.25);
  const auto hat = match_moments(lat, {}, h, moments(data, h)).model;
  const auto theta = tilt(lat, {}, h, {0.5, -1.0});
  EXPECT_NEAR(kl(hat, hat), 0.0, 1e-15);
  EXPECT_NEAR(kl(hat, theta), kl(hat, hat) + kl(hat, theta), 1e-15);
}

TEST(Pythagorean, TwoDimensionalFamily) {
  const auto lat = Lattice::box(-3, 3, 96);
  const FeatureMap<double> map(FeatureSpec::polynomial(2, 2));
  const auto data = normalize(lat, [](const P& x) {
    return -0.8 * (x[0] - 0.3) * (x[0] - 0.3) - 0.6 * x[1] * x[1] + 0.2 * x[0] * x[1] + 0.1 * std::sin(3 * x[0]);
  });
  PythagoreanOptions opt;
  opt.pairs = 8;
  const auto rep = verify_pythagorean(map, data, normalize(lat, std::vector<double>(lat.size(), 0.0)), opt);
  EXPECT_LT(rep.max_identity_violation, 1e-8);
  EXPECT_LE(rep.max_entropy_excess, 1e-9);
}

TEST(MonotoneKl, DecreasesAndConverges) {
  const auto lat = Lattice::line(-3, 3, 600);
  const auto target = gaussian(lat, 0.5, 0.25);
  const auto rep = verify_monotone_kl(target, uniform_pm1(lat), {0, 1, 2, 5, 10, 25, 50, 100});
  ASSERT_EQ(rep.kl.size(), 8u);
  EXPECT_NEAR(rep.kl[0], kl(uniform_pm1(lat), target), 1e-12);
  EXPECT_TRUE(rep.monotone(1e-9));
  for (std::size_t i = 1; i < rep.kl.size(); ++i) EXPECT_LE(rep.kl[i], rep.kl[i - 1] + 1e-9);
  EXPECT_LT(rep.kl.back(), 0.01);
}

TEST(MonotoneKl, TransitionMatrixIsStochasticAndReversible) {
  const auto lat = Lattice::line(-2, 2, 80);
  const auto target = normalize(lat, [](const P& x) { return -2 * (x[0] * x[0] - 0.5) * (x[0] * x[0] - 0.5); });
  const auto Pm = lattice_transition_matrix(target, {});
  const std::size_t n = lat.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_GE(Pm[i * n + j], 0.0);
      s += Pm[i * n + j];
      EXPECT_NEAR(target.density[i] * Pm[i * n + j], target.density[j] * Pm[j * n + i], 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(ToyTargets, SamplerMomentsMatchDensity) {
  const auto lat = Lattice::line(-4, 4, 2048);
  for (const auto& t : {ToyTarget::gauss1d(), ToyTarget::mixture1d()}) {
    const auto xs = t.sample<double>(200000, 5);
    double s = 0, s2 = 0;
    for (double v : xs.data()) {
      s += v;
      s2 += v * v;
    }
    const auto g = t.on(lat);
    EXPECT_NEAR(s / 2e5, expectation(g, [](const P& x) { return x[0]; }), 0.01) << t.name;
    EXPECT_NEAR(s2 / 2e5, expectation(g, [](const P& x) { return x[0] * x[0]; }), 0.01) << t.name;
  }
  EXPECT_NEAR(ToyTarget::mixture2d().on(Lattice::box(-3, 3, 128)).mass(), 1.0, 1e-10);
  EXPECT_THROW((void)ToyTarget::by_name("nope"), std::invalid_argument);
}

TEST(ToyExperiment, SymmetricTargetGivesCenteredSamples) {
  auto cfg = ToyConfig::defaults_for(ToyTarget::mixture1d());
  cfg.train.steps = 300;
  cfg.train.batch = 128;
  cfg.n_data = 4000;
  cfg.n_samples = 4000;
  cfg.lattice = Lattice::line(-3, 3, 256);
  const auto rep = run_toy_experiment(ToyTarget::mixture1d(), cfg);
  // Standard error of the mean of 4000 draws from a law with spread about 1.
  const double se = std::sqrt((1.0 + 0.09) / 4000.0);
  EXPECT_LT(std::abs(rep.sample_mean[0]), 4 * se);
  EXPECT_NEAR(rep.kde.grid.mass(), 1.0, 1e-6);
  EXPECT_EQ(rep.updates, 300u);
}
