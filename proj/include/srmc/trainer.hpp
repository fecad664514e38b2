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

#ifndef SRMC_TRAINER_HPP
#define SRMC_TRAINER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "srmc/adam.hpp"
#include "srmc/energy.hpp"
#include "srmc/rng.hpp"
#include "srmc/sampler.hpp"
#include "srmc/tensor.hpp"

namespace srmc {

/// Linear decay of the learning rate and data noise over the last part of a
/// run, down to final_factor of their initial values.
struct AnnealConfig {
  double start_fraction = 0.75;
  double final_factor = 0.1;

  [[nodiscard]] double factor(std::uint64_t t, std::uint64_t total) const {
    if (total == 0) return 1.0;
    const double start = start_fraction * static_cast<double>(total);
    const double x = static_cast<double>(t);
    if (x <= start) return 1.0;
    const double span = static_cast<double>(total) - start;
    const double frac = span > 0 ? std::min(1.0, (x - start) / span) : 1.0;
    return 1.0 - (1.0 - final_factor) * frac;
  }
};

/// Data-noise presets by number of Langevin steps (K -> sigma).
inline double sigma_preset(std::size_t K) {
  static const std::map<std::size_t, double> table{{5, 0.15}, {10, 0.1}, {25, 0.05},
                                                   {50, 0.04}, {75, 0.03}, {100, 0.03}};
  auto it = table.lower_bound(K);
  if (it == table.end()) return table.rbegin()->second;
  return it->second;
}

struct TrainConfig {
  std::uint64_t steps = 100000;
  std::size_t batch = 64;
  double sigma = 3e-2;
  SamplerConfig sampler{};
  AdamConfig adam{};
  AnnealConfig anneal{};
  std::uint64_t seed = 1;
  std::uint64_t checkpoint_every = 0;
  bool record_wall_clock = true;
  std::size_t metrics_capacity = std::size_t{1} << 20;

  [[nodiscard]] double eta_at(std::uint64_t t) const { return adam.lr * anneal.factor(t, steps); }
  [[nodiscard]] double sigma_at(std::uint64_t t) const { return sigma * anneal.factor(t, steps); }

  void validate() const {
    if (!(sigma >= 0)) throw std::invalid_argument("sigma must be non-negative");
    if (batch == 0) throw std::invalid_argument("batch size must be at least 1");
    if (!(anneal.final_factor >= 0 && anneal.final_factor <= 1))
      throw std::invalid_argument("anneal final factor must lie in [0, 1]");
  }
};

struct Metrics {
  std::uint64_t iteration = 0;
  double f_data_mean = 0;
  double f_neg_mean = 0;
  double delta_norm = 0;
  double grad_mag = 0;
  double eta = 0;
  double sigma = 0;
  double wall_ms = 0;
};

template <class T>
struct TrainState {
  std::unique_ptr<EnergyNet<T>> net;
  AdamState<T> adam;
  std::uint64_t iteration = 0;
  std::vector<Metrics> metrics;

  TrainState() = default;
  explicit TrainState(std::unique_ptr<EnergyNet<T>> n)
      : net(std::move(n)), adam(AdamState<T>::like(net->params())) {}

  TrainState(const TrainState& o) : net(o.net->clone()), adam(o.adam), iteration(o.iteration), metrics(o.metrics) {}
  TrainState& operator=(const TrainState& o) {
    if (this != &o) {
      net = o.net->clone();
      adam = o.adam;
      iteration = o.iteration;
      metrics = o.metrics;
    }
    return *this;
  }
  TrainState(TrainState&&) noexcept = default;
  TrainState& operator=(TrainState&&) noexcept = default;
};

/// x + sigma * N(0, I); example i reads stream (seed, i).
template <class T>
Tensor<T> smooth_batch(const Tensor<T>& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw std::invalid_argument("smooth_batch: sigma must be non-negative");
  if (sigma == 0) return x;
  Tensor<T> out = x;
  auto d = out.mutable_data();
  const std::size_t N = x.dim(0), D = x.example_size();
  for (std::size_t i = 0; i < N; ++i) {
    RandomStream rng(seed, i, Purpose::kSmoothing);
    for (std::size_t j = 0; j < D; ++j) d[i * D + j] += static_cast<T>(sigma * rng.normal());
  }
  return out;
}

template <class T>
struct DeltaResult {
  ParamSet<T> delta;
  double f_pos_mean = 0;
  double f_neg_mean = 0;
  double norm = 0;
};

/// Delta(theta) = mean d f(pos)/d theta - mean d f(neg)/d theta.
template <class T>
DeltaResult<T> compute_delta(const EnergyNet<T>& net, const Tensor<T>& pos, const Tensor<T>& neg) {
  if (pos.shape() != neg.shape())
    throw ShapeError("compute_delta: positive " + shape_str(pos.shape()) + " vs negative " + shape_str(neg.shape()));
  DeltaResult<T> r;
  ParamSet<T> gp = net.grad_theta(pos);
  const ParamSet<T> gn = net.grad_theta(neg);
  for (std::size_t p = 0; p < gp.size(); ++p) {
    auto d = gp[p].value.mutable_data();
    const auto n = gn[p].value.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= n[i];
  }
  r.delta = std::move(gp);
  r.norm = static_cast<double>(params_l2(r.delta));
  auto mean_of = [](const Tensor<T>& f) {
    double s = 0;
    for (T v : f.data()) s += static_cast<double>(v);
    return f.size() ? s / static_cast<double>(f.size()) : 0.0;
  };
  r.f_pos_mean = mean_of(net.forward(pos));
  r.f_neg_mean = mean_of(net.forward(neg));
  return r;
}

/// Thrown when the negative chains blow up; the state passed to train_step is
/// left untouched so the caller can dump it.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::uint64_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  [[nodiscard]] std::uint64_t iteration() const noexcept { return iteration_; }

 private:
  std::uint64_t iteration_;
};

namespace detail {
inline std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t t, Purpose p) {
  return mix64(seed ^ mix64(t ^ mix64(static_cast<std::uint64_t>(p) << 32)));
}
}  // namespace detail

/// Draws m examples (with replacement) for iteration t.
template <class T>
Tensor<T> sample_data_batch(const Tensor<T>& data, std::size_t m, std::uint64_t seed, std::uint64_t t) {
  if (data.rank() == 0 || data.dim(0) == 0) throw std::invalid_argument("dataset is empty");
  RandomStream rng(seed, t, Purpose::kDataIndex);
  const std::size_t n = data.dim(0), D = data.example_size();
  Shape s = data.shape();
  s[0] = m;
  std::vector<T> v(m * D);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = static_cast<std::size_t>(rng.below(n));
    std::copy_n(data.raw() + idx * D, D, v.begin() + static_cast<std::ptrdiff_t>(i * D));
  }
  return Tensor<T>(std::move(s), std::move(v));
}

/// One learning iteration: data batch, smoothing, fresh p0 negatives, K
/// Langevin steps, Adam ascent along Delta.  Every random draw is keyed by
/// (cfg.seed, state.iteration), so resuming from a saved state continues the
/// uninterrupted sequence exactly.
template <class T>
DeltaResult<T> train_step(TrainState<T>& state, const TrainConfig& cfg, const Tensor<T>& data) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t t = state.iteration;
  const Tensor<T> raw = sample_data_batch(data, cfg.batch, cfg.seed, t);
  const double sigma = cfg.sigma_at(t);
  const double eta = cfg.eta_at(t);
  const Tensor<T> pos = smooth_batch(raw, sigma, detail::iteration_seed(cfg.seed, t, Purpose::kSmoothing));

  SampleResult<T> neg;
  try {
    neg = short_run_sample<T>(*state.net, cfg.sampler, cfg.batch,
                              detail::iteration_seed(cfg.seed, t, Purpose::kLangevin));
  } catch (const ChainDivergence& e) {
    throw TrainingDiverged(std::string("iteration ") + std::to_string(t) + ": " + e.what(), t);
  }
  DeltaResult<T> d = compute_delta(*state.net, pos, neg.samples);
  if (eta > 0) adam_ascent(state.net->params(), d.delta, state.adam, cfg.adam, eta);

  Metrics row;
  row.iteration = t;
  row.f_data_mean = d.f_pos_mean;
  row.f_neg_mean = d.f_neg_mean;
  row.delta_norm = d.norm;
  row.grad_mag = neg.mean_grad_norm;
  row.eta = eta;
  row.sigma = sigma;
  if (cfg.record_wall_clock)
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  state.metrics.push_back(row);
  if (state.metrics.size() > cfg.metrics_capacity)
    state.metrics.erase(state.metrics.begin(), state.metrics.begin() + static_cast<std::ptrdiff_t>(state.metrics.size() - cfg.metrics_capacity));
  ++state.iteration;
  return d;
}

/// Runs train_step until state.iteration == cfg.steps.  on_step fires after
/// every iteration (metrics streaming, checkpointing).
template <class T>
void train(TrainState<T>& state, const TrainConfig& cfg, const Tensor<T>& data,
           const std::type_identity_t<std::function<void(const TrainState<T>&)>>& on_step = {}) {
  cfg.validate();
  while (state.iteration < cfg.steps) {
    train_step(state, cfg, data);
    if (on_step) on_step(state);
  }
}

// ---------------------------------------------------------------------------
// Estimating-equation diagnostics

struct ResidualReport {
  double norm = 0;                  // ||Delta||_2
  double standard_error = 0;        // sqrt(sum_j se_j^2), the noise level of the norm
  std::vector<double> components;   // Delta_j
  std::vector<double> component_se; // se_j

  [[nodiscard]] bool within(double n_se) const { return norm <= n_se * standard_error; }
  [[nodiscard]] double max_standardized() const {
    double m = 0;
    for (std::size_t j = 0; j < components.size(); ++j)
      m = std::max(m, component_se[j] > 0 ? std::abs(components[j]) / component_se[j] : 0.0);
    return m;
  }
};

namespace detail {
// Per-example d f / d theta, flattened, accumulated into mean and variance.
template <class T>
void accumulate_moments(const EnergyNet<T>& net, const Tensor<T>& x, std::vector<double>& mean,
                        std::vector<double>& var) {
  const std::size_t N = x.dim(0);
  const std::size_t P = param_count(net.params());
  std::vector<double> s(P, 0.0), s2(P, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const ParamSet<T> g = net.grad_theta(x.slice_batch(i, i + 1));
    std::size_t k = 0;
    for (const auto& nt : g)
      for (T v : nt.value.data()) {
        s[k] += static_cast<double>(v);
        s2[k] += static_cast<double>(v) * static_cast<double>(v);
        ++k;
      }
  }
  mean.assign(P, 0.0);
  var.assign(P, 0.0);
  for (std::size_t k = 0; k < P; ++k) {
    mean[k] = s[k] / static_cast<double>(N);
    var[k] = N > 1 ? std::max(0.0, (s2[k] - static_cast<double>(N) * mean[k] * mean[k]) / static_cast<double>(N - 1)) : 0.0;
  }
}
}  // namespace detail

/// Monte-Carlo estimate of Delta(theta) over the whole (smoothed) dataset
/// against n_samples fresh short-run negatives, with standard errors.
template <class T>
ResidualReport estimating_equation_residual(const EnergyNet<T>& net, const Tensor<T>& data,
                                            const TrainConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
  const Tensor<T> pos = smooth_batch(data, cfg.sigma, detail::iteration_seed(seed, 0, Purpose::kSmoothing));
  const Tensor<T> neg =
      short_run_sample<T>(net, cfg.sampler, n_samples, detail::iteration_seed(seed, 0, Purpose::kLangevin)).samples;
  std::vector<double> mp, vp, mn, vn;
  detail::accumulate_moments(net, pos, mp, vp);
  detail::accumulate_moments(net, neg, mn, vn);
  ResidualReport r;
  double n2 = 0, se2 = 0;
  for (std::size_t k = 0; k < mp.size(); ++k) {
    const double d = mp[k] - mn[k];
    const double se = std::sqrt(vp[k] / static_cast<double>(pos.dim(0)) + vn[k] / static_cast<double>(n_samples));
    r.components.push_back(d);
    r.component_se.push_back(se);
    n2 += d * d;
    se2 += se * se;
  }
  r.norm = std::sqrt(n2);
  r.standard_error = std::sqrt(se2);
  return r;
}

// ---------------------------------------------------------------------------
// Toy fits

struct FitOptions {
  double tolerance = 0.01;          // on the smoothed moment gap, max-norm
  std::uint64_t patience = 100;     // consecutive iterations below tolerance
  double gap_decay = 0.99;          // EMA decay used to smooth per-batch Delta
  std::size_t precheck_samples = 20000;
  double precheck_se = 3.0;         // skip training if the residual is within this many SE
};

template <class T>
struct FitResult {
  TrainState<T> state;
  bool converged = false;
  std::uint64_t updates = 0;
  double final_gap = 0;
};

/// Trains `net` on low-dimensional data until the smoothed moment gap stays
/// below tolerance for `patience` iterations or cfg.steps is reached.  If the
/// estimating-equation residual of the initial net is already within
/// precheck_se standard errors, no update is made.  A tolerance of zero runs
/// the full schedule and keeps the final state.
template <class T>
FitResult<T> fit_toy(std::unique_ptr<EnergyNet<T>> net, const Tensor<T>& data, const TrainConfig& cfg,
                     const FitOptions& opt = {}) {
  cfg.validate();
  FitResult<T> out;
  out.state = TrainState<T>(std::move(net));
  if (opt.precheck_samples > 0) {
    const auto pre = estimating_equation_residual(*out.state.net, data, cfg, opt.precheck_samples,
                                                  mix64(cfg.seed ^ 0xC0FFEEull));
    if (pre.max_standardized() < opt.precheck_se) {
      out.converged = true;
      out.final_gap = pre.max_standardized();
      return out;
    }
  }
  std::vector<double> ema;
  std::uint64_t below = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  std::optional<TrainState<T>> best;
  while (out.state.iteration < cfg.steps) {
    const DeltaResult<T> d = train_step(out.state, cfg, data);
    ++out.updates;
    if (ema.empty()) ema.assign(param_count(d.delta), 0.0);
    const double bias = 1.0 - std::pow(opt.gap_decay, static_cast<double>(out.updates));
    double gap = 0;
    std::size_t k = 0;
    for (const auto& nt : d.delta)
      for (T v : nt.value.data()) {
        ema[k] = opt.gap_decay * ema[k] + (1.0 - opt.gap_decay) * static_cast<double>(v);
        gap = std::max(gap, std::abs(ema[k] / bias));
        ++k;
      }
    out.final_gap = gap;
    if (opt.tolerance > 0 && gap < best_gap) {
      best_gap = gap;
      best = out.state;
    }
    below = gap < opt.tolerance ? below + 1 : 0;
    if (below >= opt.patience) {
      out.converged = true;
      return out;
    }
  }
  if (best && !out.converged) {
    out.state = std::move(*best);
    out.final_gap = best_gap;
  }
  return out;
}

}  // namespace srmc

#endif  // SRMC_TRAINER_HPP
