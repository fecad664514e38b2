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

#ifndef SRMC_GRADCHECK_HPP
#define SRMC_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srmc/energy.hpp"
#include "srmc/graph.hpp"
#include "srmc/rng.hpp"

namespace srmc {

/// Central-difference comparison.  The error of one coordinate is
/// |a - fd| / max(|a|, |fd|, floor), where the floor (1e-3 of the largest
/// analytic entry) keeps near-zero entries from dominating through roundoff.
///
/// A ConvNet is only piecewise smooth.  When a perturbation of +-eps flips
/// the sign of some leaky-ReLU pre-activation, the difference quotient
/// straddles a kink and says nothing about the derivative; such coordinates
/// are counted in `skipped` and replaced by fresh draws.
struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

namespace detail {
// Visits coordinates (all of them, or random draws) until `want` were
// accepted by `check`, which returns false for a skipped coordinate.
template <class Fn>
void for_coordinates(std::size_t n, std::size_t want, std::uint64_t seed, GradCheck& r, Fn&& check) {
  if (want == 0 || want >= n) {
    for (std::size_t k = 0; k < n; ++k) (check(k) ? r.checked : r.skipped)++;
    return;
  }
  RandomStream rng(seed, n, Purpose::kGeneric);
  std::size_t accepted = 0;
  for (std::size_t tries = 0; accepted < want && tries < 50 * want; ++tries) {
    if (check(static_cast<std::size_t>(rng.below(n)))) {
      ++accepted;
      ++r.checked;
    } else {
      ++r.skipped;
    }
  }
}

inline const ConvEnergyNet<double>* as_conv(const EnergyNet<double>& net) {
  return dynamic_cast<const ConvEnergyNet<double>*>(&net);
}

inline double scale_floor(std::span<const double> a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return std::max(1e-3 * m, 1e-12);
}

inline double rel_error(double a, double fd, double floor) {
  return std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
}
}  // namespace detail

/// d/dx of sum_i f(x_i) against finite differences on up to max_coords
/// coordinates of x (all of them when max_coords is 0).
inline GradCheck check_grad_x(const EnergyNet<double>& net, const Tensor<double>& x, double eps = 1e-5,
                              std::size_t max_coords = 0, std::uint64_t seed = 0) {
  const Tensor<double> g = net.grad_x(x);
  const double floor = detail::scale_floor(g.data());
  auto total = [&](const Tensor<double>& y) {
    double s = 0;
    const Tensor<double> f = net.forward(y);
    for (double v : f.data()) s += v;
    return s;
  };
  const auto* conv = detail::as_conv(net);
  const auto base = conv ? conv->activation_pattern(x) : std::vector<std::uint8_t>{};
  GradCheck r;
  detail::for_coordinates(x.size(), max_coords, seed, r, [&](std::size_t k) {
    Tensor<double> p = x, m = x;
    p.mutable_data()[k] += eps;
    m.mutable_data()[k] -= eps;
    if (conv && (conv->activation_pattern(p) != base || conv->activation_pattern(m) != base)) return false;
    const double fd = (total(p) - total(m)) / (2 * eps);
    r.max_rel_error = std::max(r.max_rel_error, detail::rel_error(g[k], fd, floor));
    return true;
  });
  return r;
}

/// grad_theta (the batch mean of d f / d theta) against finite differences on
/// up to max_coords entries of every parameter tensor.
inline GradCheck check_grad_theta(EnergyNet<double>& net, const Tensor<double>& x, double eps = 1e-5,
                                  std::size_t max_coords = 0, std::uint64_t seed = 0) {
  const ParamSet<double> g = net.grad_theta(x);
  auto mean_f = [&] {
    const Tensor<double> f = net.forward(x);
    double s = 0;
    for (double v : f.data()) s += v;
    return s / static_cast<double>(f.size());
  };
  const auto* conv = detail::as_conv(net);
  const auto base = conv ? conv->activation_pattern(x) : std::vector<std::uint8_t>{};
  GradCheck r;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double floor = detail::scale_floor(g[p].value.data());
    detail::for_coordinates(g[p].value.size(), max_coords, seed + p, r, [&](std::size_t k) {
      auto& w = net.params()[p].value;
      const double orig = w[k];
      w.mutable_data()[k] = orig + eps;
      const double fp = mean_f();
      const bool kink_p = conv && conv->activation_pattern(x) != base;
      w.mutable_data()[k] = orig - eps;
      const double fm = mean_f();
      const bool kink_m = conv && conv->activation_pattern(x) != base;
      w.mutable_data()[k] = orig;
      if (kink_p || kink_m) return false;
      r.max_rel_error = std::max(r.max_rel_error, detail::rel_error(g[p].value[k], (fp - fm) / (2 * eps), floor));
      return true;
    });
  }
  return r;
}

/// One graph op: the gradient of sum(w * op(inputs)) with respect to
/// inputs[which], for a fixed random weighting w, against central
/// differences on every coordinate.  Callers keep inputs of piecewise ops
/// away from their kinks.
template <class Build>
GradCheck check_op_grad(const std::vector<Tensor<double>>& inputs, std::size_t which, Build&& build,
                        double eps = 1e-5, std::uint64_t seed = 0) {
  Tensor<double> w;
  auto objective = [&](Graph<double>& g, const std::vector<Var>& leaves) {
    const Var y = build(g, leaves);
    if (w.shape() != g.value(y).shape()) {
      RandomStream rng(seed, 0, Purpose::kGeneric);
      w = Tensor<double>(g.value(y).shape());
      for (auto& v : w.mutable_data()) v = rng.uniform(0.5, 1.5);
    }
    return g.sum(g.mul(y, g.leaf(w)));
  };
  auto eval = [&](const Tensor<double>& x) {
    Graph<double> g;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(g.leaf(i == which ? x : inputs[i]));
    return g.value(objective(g, leaves)).item();
  };
  Graph<double> g;
  std::vector<Var> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(g.leaf(inputs[i], i == which));
  g.backward(objective(g, leaves));
  const Tensor<double> analytic = g.grad(leaves[which]);
  const double floor = detail::scale_floor(analytic.data());
  GradCheck r;
  detail::for_coordinates(analytic.size(), 0, seed, r, [&](std::size_t k) {
    Tensor<double> p = inputs[which], m = inputs[which];
    p.mutable_data()[k] += eps;
    m.mutable_data()[k] -= eps;
    const double fd = (eval(p) - eval(m)) / (2 * eps);
    r.max_rel_error = std::max(r.max_rel_error, detail::rel_error(analytic[k], fd, floor));
    return true;
  });
  return r;
}

}  // namespace srmc

#endif  // SRMC_GRADCHECK_HPP
