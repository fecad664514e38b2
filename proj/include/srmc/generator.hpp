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

#ifndef SRMC_GENERATOR_HPP
#define SRMC_GENERATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "srmc/energy.hpp"
#include "srmc/sampler.hpp"
#include "srmc/tensor.hpp"

namespace srmc {

// The learned K-step chain read as a generator x = M(z): latent z ~ p0,
// noise disabled.

struct InterpolationSpec {
  std::vector<double> rhos;
  std::size_t steps = 100;
  double step_size = 1.0;
};

/// z_rho = rho z1 + sqrt(1 - rho^2) z2, which keeps the per-coordinate
/// variance of p0.
template <class T>
Tensor<T> mix_latents(const Tensor<T>& z1, const Tensor<T>& z2, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("interpolation rho must lie in [0, 1]");
  if (z1.shape() != z2.shape()) throw ShapeError("mix_latents: latent shapes differ");
  const T a = static_cast<T>(rho);
  const T b = static_cast<T>(std::sqrt(1.0 - rho * rho));
  Tensor<T> out(z1.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * z1[i] + b * z2[i];
  return out;
}

/// x_rho = M(z_rho) for every rho, in order.
template <class T>
std::vector<Tensor<T>> interpolate(const EnergyNet<T>& net, const Tensor<T>& z1, const Tensor<T>& z2,
                                   const InterpolationSpec& spec) {
  std::vector<Tensor<T>> out;
  out.reserve(spec.rhos.size());
  for (double rho : spec.rhos) out.push_back(run_deterministic(net, mix_latents(z1, z2, rho), spec.steps, spec.step_size));
  return out;
}

struct ReconstructionSpec {
  std::size_t max_iters = 200;
  std::size_t steps = 100;
  double step_size = 1.0;
  double initial_lr = 0.5;          // first trial step on z
  double armijo = 1e-4;             // sufficient-decrease constant
  double growth = 2.0;              // trial step growth after an accepted step
  std::size_t max_backtracks = 40;
  double stop_loss = 0.0;           // per-example loss at which to stop early
  double divergence_bound = 1e3;
  std::uint64_t seed = 0;           // for z0 ~ p0 when no init is given
};

template <class T>
struct ReconstructionResult {
  Tensor<T> z;
  Tensor<T> x_hat;
  double mse_per_pixel = 0;
  std::vector<double> trajectory;  // mean per-pixel loss after each iteration, [0] = at z0
};

/// M(z) together with dL/dz for L_i(z) = ||x_i - M(z_i)||^2, by reverse
/// accumulation through the unrolled noise-free chain:
/// a_K = 2 (M(z) - x), a_k = a_{k+1} + step * H(x_k) a_{k+1}.
template <class T>
struct ChainGradient {
  Tensor<T> x_final;
  Tensor<T> grad_z;
  std::vector<double> loss;  // per example
};

template <class T>
ChainGradient<T> unrolled_loss_gradient(const EnergyNet<T>& net, const Tensor<T>& z, const Tensor<T>& target,
                                        std::size_t steps, double step_size, bool with_gradient = true) {
  if (z.shape() != target.shape()) throw ShapeError("reconstruction: latent and target shapes differ");
  std::vector<Tensor<T>> states;
  states.reserve(steps + 1);
  states.push_back(z);
  SamplerConfig cfg;
  cfg.deterministic = true;
  cfg.step_size = step_size;
  for (std::size_t k = 0; k < steps; ++k) states.push_back(langevin_step<T>(net, states.back(), cfg, {}, k));
  ChainGradient<T> out;
  out.x_final = states.back();
  const std::size_t N = z.dim(0), D = z.example_size();
  out.loss.assign(N, 0.0);
  Tensor<T> adj(z.shape());
  auto a = adj.mutable_data();
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const std::size_t k = i * D + j;
      const double r = static_cast<double>(out.x_final[k]) - static_cast<double>(target[k]);
      out.loss[i] += r * r;
      a[k] = static_cast<T>(2.0 * r);
    }
  if (!with_gradient) return out;
  const T s = static_cast<T>(step_size);
  for (std::size_t k = steps; k-- > 0;) {
    const Tensor<T> hv = net.hvp_x(states[k], adj);
    auto ad = adj.mutable_data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += s * hv[i];
  }
  out.grad_z = std::move(adj);
  return out;
}

/// Gradient descent on z with per-example backtracking (Armijo) line search,
/// so each example's loss, and hence the reported trajectory, never increases.
template <class T>
ReconstructionResult<T> reconstruct(const EnergyNet<T>& net, const Tensor<T>& target, const ReconstructionSpec& spec,
                                    const std::optional<Tensor<T>>& z_init = std::nullopt) {
  net.check_input(target);
  Tensor<T> z = z_init ? *z_init : draw_p0<T>(target.dim(0), net.example_shape(), spec.seed);
  if (z.shape() != target.shape()) throw ShapeError("reconstruct: initial latent and target shapes differ");
  const std::size_t N = target.dim(0), D = target.example_size();
  const double pixels = static_cast<double>(N * D);

  ChainGradient<T> cur = unrolled_loss_gradient(net, z, target, spec.steps, spec.step_size);
  std::vector<double> lr(N, spec.initial_lr);
  std::vector<bool> active(N, true);
  ReconstructionResult<T> res;
  auto total = [&](const std::vector<double>& l) {
    double s = 0;
    for (double v : l) s += v;
    return s / pixels;
  };
  res.trajectory.push_back(total(cur.loss));

  for (std::size_t it = 0; it < spec.max_iters; ++it) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < N; ++i) {
      if (!active[i]) continue;
      if (cur.loss[i] <= spec.stop_loss) {
        active[i] = false;
        continue;
      }
      todo.push_back(i);
    }
    if (todo.empty()) break;
    std::vector<double> gnorm2(N, 0.0);
    for (std::size_t i : todo)
      for (std::size_t j = 0; j < D; ++j) {
        const double g = static_cast<double>(cur.grad_z[i * D + j]);
        gnorm2[i] += g * g;
      }
    std::vector<std::size_t> pending;
    for (std::size_t i : todo) {
      if (gnorm2[i] == 0.0) {
        active[i] = false;
        continue;
      }
      pending.push_back(i);
    }
    std::vector<bool> moved(N, false);
    for (std::size_t bt = 0; bt <= spec.max_backtracks && !pending.empty(); ++bt) {
      // Candidates for the pending examples, evaluated together.
      const std::size_t P = pending.size();
      Shape s = target.shape();
      s[0] = P;
      std::vector<T> zc(P * D), tc(P * D);
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = pending[p];
        for (std::size_t j = 0; j < D; ++j) {
          zc[p * D + j] = static_cast<T>(static_cast<double>(z[i * D + j]) -
                                         lr[i] * static_cast<double>(cur.grad_z[i * D + j]));
          tc[p * D + j] = target[i * D + j];
        }
      }
      Tensor<T> zt(s, std::move(zc));
      if (static_cast<double>(max_abs<T>(zt.data())) > spec.divergence_bound)
        throw ChainDivergence("reconstruction: latent exceeded bound", it);
      const ChainGradient<T> cand = unrolled_loss_gradient(net, zt, Tensor<T>(s, std::move(tc)), spec.steps,
                                                           spec.step_size, false);
      std::vector<std::size_t> retry;
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = pending[p];
        if (cand.loss[p] <= cur.loss[i] - spec.armijo * lr[i] * gnorm2[i]) {
          auto zd = z.mutable_data();
          for (std::size_t j = 0; j < D; ++j) zd[i * D + j] = zt[p * D + j];
          moved[i] = true;
        } else {
          lr[i] *= 0.5;
          retry.push_back(i);
        }
      }
      pending = std::move(retry);
    }
    for (std::size_t i : pending) active[i] = false;  // no descent step found
    cur = unrolled_loss_gradient(net, z, target, spec.steps, spec.step_size);
    for (std::size_t i = 0; i < N; ++i)
      if (moved[i]) lr[i] *= spec.growth;
    res.trajectory.push_back(total(cur.loss));
  }
  res.z = z;
  res.x_hat = cur.x_final;
  res.mse_per_pixel = total(cur.loss);
  return res;
}

template <class T>
struct VaryKRow {
  std::size_t steps = 0;
  double saturation_fraction = 0;  // share of values outside [-1, 1] before clamping
  double mean_grad_norm = 0;
  Tensor<T> samples;
};

/// Samples a net trained with some K1 for several K2 values from one shared
/// set of p0 draws.
template <class T>
std::vector<VaryKRow<T>> vary_k(const EnergyNet<T>& net, const std::vector<std::size_t>& k_list, std::size_t batch,
                                std::uint64_t seed, SamplerConfig base = {}) {
  base.clamp_output = false;
  std::vector<VaryKRow<T>> rows;
  for (std::size_t K : k_list) {
    SamplerConfig cfg = base;
    cfg.steps = K;
    auto r = short_run_sample<T>(net, cfg, batch, seed);
    std::size_t out_of_range = 0;
    for (T v : r.samples.data())
      if (v > T(1) || v < T(-1)) ++out_of_range;
    VaryKRow<T> row;
    row.steps = K;
    row.saturation_fraction =
        r.samples.size() ? static_cast<double>(out_of_range) / static_cast<double>(r.samples.size()) : 0.0;
    row.mean_grad_norm = r.mean_grad_norm;
    row.samples = std::move(r.samples);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace srmc

#endif  // SRMC_GENERATOR_HPP
