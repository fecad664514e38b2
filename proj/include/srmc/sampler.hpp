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

#ifndef SRMC_SAMPLER_HPP
#define SRMC_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srmc/energy.hpp"
#include "srmc/parallel.hpp"
#include "srmc/rng.hpp"
#include "srmc/tensor.hpp"

namespace srmc {

/// K-step Langevin: x <- x + step_size * grad f(x) + noise_scale * N(0, I).
/// The defaults reproduce the reference update x += f'(x) + 1e-2 * randn.
struct SamplerConfig {
  std::size_t steps = 100;
  double step_size = 1.0;
  double noise_scale = 1e-2;
  bool deterministic = false;
  bool clamp_output = false;
  bool record_noise = false;
  double divergence_bound = 1e3;
  std::size_t threads = 0;

  [[nodiscard]] double effective_noise() const noexcept { return deterministic ? 0.0 : noise_scale; }
};

class ChainDivergence : public std::runtime_error {
 public:
  ChainDivergence(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

template <class T>
struct ChainState {
  Tensor<T> x;  // current state, one example
  Tensor<T> z;  // initial draw
  std::size_t step = 0;
  std::vector<Tensor<T>> noise_record;  // scaled noise added at each step, if recorded
};

template <class T>
struct SampleResult {
  Tensor<T> samples;
  std::vector<ChainState<T>> chains;
  double mean_grad_norm = 0.0;  // mean over chains and steps of ||grad_x f||_2
};

/// i.i.d. Uniform(-1, 1); chain i reads only its own stream.
template <class T>
Tensor<T> draw_p0(std::size_t batch, const Shape& example, std::uint64_t seed) {
  Shape s{batch};
  s.insert(s.end(), example.begin(), example.end());
  Tensor<T> out(s);
  auto d = out.mutable_data();
  const std::size_t ex = shape_numel(example);
  for (std::size_t i = 0; i < batch; ++i) {
    RandomStream rng(seed, i, Purpose::kInit);
    for (std::size_t j = 0; j < ex; ++j) d[i * ex + j] = static_cast<T>(rng.uniform(-1.0, 1.0));
  }
  return out;
}

namespace detail {

template <class T>
struct StepOutput {
  Tensor<T> x;
  std::vector<double> grad_norms;
};

template <class T>
StepOutput<T> langevin_step_impl(const EnergyNet<T>& net, const Tensor<T>& x, const SamplerConfig& cfg,
                                 std::span<RandomStream> rngs, std::size_t step,
                                 std::vector<Tensor<T>>* noise_out = nullptr) {
  const std::size_t N = x.dim(0), D = x.example_size();
  if (rngs.size() != N && cfg.effective_noise() > 0)
    throw std::invalid_argument("langevin_step: need one random stream per chain");
  Tensor<T> grad;
  try {
    grad = net.value_and_grad_x(x).grad;
  } catch (const NonFiniteError& e) {
    throw ChainDivergence("chain diverged at step " + std::to_string(step) + ": " + e.what(), step);
  }
  const T a = static_cast<T>(cfg.step_size);
  const double eta = cfg.effective_noise();
  Tensor<T> next(x.shape());
  auto nd = next.mutable_data();
  std::vector<double> norms(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<T> noise;
    if (noise_out) noise.assign(D, T(0));
    double g2 = 0;
    for (std::size_t j = 0; j < D; ++j) {
      const std::size_t k = i * D + j;
      const T g = grad[k];
      g2 += static_cast<double>(g) * static_cast<double>(g);
      T v = x[k] + a * g;
      if (eta > 0) {
        const T u = static_cast<T>(eta * rngs[i].normal());
        v += u;
        if (noise_out) noise[j] = u;
      }
      nd[k] = v;
    }
    norms[i] = std::sqrt(g2);
    if (noise_out) {
      Shape es(x.shape().begin() + 1, x.shape().end());
      noise_out->push_back(Tensor<T>(std::move(es), std::move(noise)));
    }
  }
  if (!next.all_finite())
    throw ChainDivergence("chain diverged at step " + std::to_string(step) + ": non-finite state", step);
  if (static_cast<double>(max_abs<T>(next.data())) > cfg.divergence_bound)
    throw ChainDivergence("chain diverged at step " + std::to_string(step) + ": |x| exceeded bound", step);
  return {std::move(next), std::move(norms)};
}

}  // namespace detail

/// One Langevin transition for every chain in the batch; rngs[i] drives chain i.
template <class T>
Tensor<T> langevin_step(const EnergyNet<T>& net, const Tensor<T>& x, const SamplerConfig& cfg,
                        std::span<RandomStream> rngs, std::size_t step = 0) {
  return detail::langevin_step_impl(net, x, cfg, rngs, step).x;
}

/// Runs cfg.steps transitions from `init` (or fresh p0 draws) and returns the
/// detached final states.  Chains are split across workers in contiguous
/// blocks; every chain owns its noise stream, so the result does not depend
/// on the worker count.
template <class T>
SampleResult<T> short_run_sample(const EnergyNet<T>& net, const SamplerConfig& cfg, std::size_t batch,
                                 std::uint64_t seed, const std::optional<Tensor<T>>& init = std::nullopt) {
  Tensor<T> z = init ? *init : draw_p0<T>(batch, net.example_shape(), seed);
  net.check_input(z);
  batch = z.dim(0);
  const std::size_t threads = resolve_threads(cfg.threads);
  std::vector<Tensor<T>> parts(std::max<std::size_t>(1, std::min(threads, batch)));
  std::vector<std::vector<double>> norm_sums(parts.size());
  std::vector<std::vector<std::vector<Tensor<T>>>> noise(parts.size());
  const std::size_t per = batch == 0 ? 0 : (batch + parts.size() - 1) / parts.size();

  parallel_chunks(batch, parts.size(), [&](std::size_t b, std::size_t e) {
    const std::size_t part = per == 0 ? 0 : b / per;
    std::vector<RandomStream> rngs;
    rngs.reserve(e - b);
    for (std::size_t i = b; i < e; ++i) rngs.emplace_back(seed, i, Purpose::kLangevin);
    Tensor<T> x = z.slice_batch(b, e);
    std::vector<double> sums(e - b, 0.0);
    if (cfg.record_noise) noise[part].assign(e - b, {});
    for (std::size_t k = 0; k < cfg.steps; ++k) {
      std::vector<Tensor<T>> step_noise;
      auto out = detail::langevin_step_impl(net, x, cfg, rngs, k, cfg.record_noise ? &step_noise : nullptr);
      x = std::move(out.x);
      for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += out.grad_norms[i];
      for (std::size_t i = 0; i < step_noise.size(); ++i) noise[part][i].push_back(std::move(step_noise[i]));
    }
    parts[part] = std::move(x);
    norm_sums[part] = std::move(sums);
  });

  SampleResult<T> r;
  std::vector<Tensor<T>> filled;
  for (auto& p : parts)
    if (p.rank() > 0 && p.dim(0) > 0) filled.push_back(std::move(p));
  r.samples = filled.empty() ? z : concat_batch<T>(filled);
  if (cfg.clamp_output)
    for (auto& v : r.samples.mutable_data()) v = std::clamp(v, T(-1), T(1));
  double total = 0;
  std::size_t count = 0;
  for (const auto& s : norm_sums)
    for (double v : s) {
      total += v;
      ++count;
    }
  r.mean_grad_norm = (count > 0 && cfg.steps > 0) ? total / static_cast<double>(count * cfg.steps) : 0.0;
  r.chains.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    ChainState<T> c;
    c.z = z.slice_batch(i, i + 1);
    c.x = r.samples.slice_batch(i, i + 1);
    c.step = cfg.steps;
    if (cfg.record_noise && per > 0) c.noise_record = std::move(noise[i / per][i % per]);
    r.chains.push_back(std::move(c));
  }
  return r;
}

/// M_theta(z): the noise-free K-step chain.
template <class T>
Tensor<T> run_deterministic(const EnergyNet<T>& net, const Tensor<T>& z, std::size_t steps,
                            double step_size = 1.0, std::size_t threads = 0) {
  SamplerConfig cfg;
  cfg.steps = steps;
  cfg.step_size = step_size;
  cfg.deterministic = true;
  cfg.threads = threads;
  return short_run_sample<T>(net, cfg, z.dim(0), 0, z).samples;
}

/// Temperature of the density a small-step Langevin update with these
/// coefficients targets: exp(f / T_L) with T_L = noise^2 / (2 step_size).
inline double langevin_temperature(const SamplerConfig& cfg) {
  return cfg.noise_scale * cfg.noise_scale / (2.0 * cfg.step_size);
}

}  // namespace srmc

#endif  // SRMC_SAMPLER_HPP
