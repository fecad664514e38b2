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

#ifndef SRMC_ENERGY_HPP
#define SRMC_ENERGY_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srmc/graph.hpp"
#include "srmc/rng.hpp"
#include "srmc/tensor.hpp"

namespace srmc {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <class T>
using ParamSet = std::vector<NamedTensor<T>>;

template <class T>
ParamSet<T> zeros_like(const ParamSet<T>& p) {
  ParamSet<T> out;
  out.reserve(p.size());
  for (const auto& nt : p) out.push_back({nt.name, Tensor<T>(nt.value.shape())});
  return out;
}

template <class T>
T params_l2(const ParamSet<T>& p) {
  T s = 0;
  for (const auto& nt : p)
    for (T v : nt.value.data()) s += v * v;
  return std::sqrt(s);
}

template <class T>
std::size_t param_count(const ParamSet<T>& p) {
  std::size_t n = 0;
  for (const auto& nt : p) n += nt.value.size();
  return n;
}

enum class Family : std::uint32_t { kConvNet = 0, kExpFamily = 1 };

// ---------------------------------------------------------------------------
// ConvNet architecture

struct LayerRow {
  std::size_t kernel = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool activation = true;
  std::size_t out_size = 0;  // spatial extent after the layer
};

/// Energy ConvNet for 32/64/128 inputs: a 3x3 stride-1 layer with n_f maps,
/// stride-2 4x4 layers that halve the extent down to 4x4 (channels doubling
/// up to 8 n_f), and a final 4x4 valid conv to one scalar.
struct ArchSpec {
  std::size_t input_size = 32;
  std::size_t channels = 3;
  std::size_t n_f = 64;
  double leaky_slope = 0.2;

  [[nodiscard]] std::vector<LayerRow> rows() const {
    if (input_size != 32 && input_size != 64 && input_size != 128)
      throw std::invalid_argument("ArchSpec: input_size must be 32, 64 or 128, got " + std::to_string(input_size));
    if (channels == 0 || n_f == 0) throw std::invalid_argument("ArchSpec: channels and n_f must be positive");
    std::vector<LayerRow> r;
    r.push_back({3, channels, n_f, 1, 1, true, input_size});
    std::size_t size = input_size;
    std::size_t ch = n_f;
    while (size > 4) {
      const std::size_t next = std::min(ch * 2, 8 * n_f);
      size /= 2;
      r.push_back({4, ch, next, 2, 1, true, size});
      ch = next;
    }
    r.push_back({4, ch, 1, 1, 0, false, 1});
    return r;
  }

  [[nodiscard]] bool standard_width() const { return n_f == 32 || n_f == 64 || n_f == 128; }
};

// ---------------------------------------------------------------------------
// Exponential-family feature maps

enum class FeatureKind : std::uint32_t { kPolynomial = 0, kRbf = 1 };

/// h(x) for low-dimensional points.  Polynomial features list, per total
/// degree d, the pure powers x1^d, x2^d and then the mixed terms, which for
/// d <= 2 gives [x, x^2] in 1-D and [x1, x2, x1^2, x2^2, x1 x2] in 2-D.
/// RBF features are Gaussian bumps on a regular grid of centers.
struct FeatureSpec {
  FeatureKind kind = FeatureKind::kPolynomial;
  std::size_t dim = 1;
  std::size_t degree = 2;
  std::size_t centers_per_axis = 11;
  double lo = -2.5;
  double hi = 2.5;
  double width = 0.5;

  static FeatureSpec polynomial(std::size_t dim, std::size_t degree) {
    FeatureSpec s;
    s.kind = FeatureKind::kPolynomial;
    s.dim = dim;
    s.degree = degree;
    return s;
  }

  static FeatureSpec rbf(std::size_t dim, std::size_t per_axis, double lo, double hi, double width) {
    FeatureSpec s;
    s.kind = FeatureKind::kRbf;
    s.dim = dim;
    s.centers_per_axis = per_axis;
    s.lo = lo;
    s.hi = hi;
    s.width = width;
    return s;
  }
};

template <class T>
class FeatureMap {
 public:
  explicit FeatureMap(FeatureSpec spec) : spec_(spec) {
    if (spec_.dim != 1 && spec_.dim != 2) throw std::invalid_argument("FeatureMap: dim must be 1 or 2");
    if (spec_.kind == FeatureKind::kPolynomial) {
      if (spec_.degree == 0) throw std::invalid_argument("FeatureMap: degree must be positive");
      for (std::size_t d = 1; d <= spec_.degree; ++d) {
        if (spec_.dim == 1) {
          exps_.push_back({d, 0});
          continue;
        }
        exps_.push_back({d, 0});
        exps_.push_back({0, d});
        for (std::size_t b = 1; b < d; ++b) exps_.push_back({d - b, b});
      }
    } else {
      if (spec_.centers_per_axis < 2 || !(spec_.width > 0) || !(spec_.hi > spec_.lo))
        throw std::invalid_argument("FeatureMap: bad RBF grid");
      std::vector<T> axis(spec_.centers_per_axis);
      for (std::size_t i = 0; i < axis.size(); ++i)
        axis[i] = static_cast<T>(spec_.lo + (spec_.hi - spec_.lo) * static_cast<double>(i) /
                                                static_cast<double>(axis.size() - 1));
      if (spec_.dim == 1) {
        for (T a : axis) centers_.push_back({a, T(0)});
      } else {
        for (T a : axis)
          for (T b : axis) centers_.push_back({a, b});
      }
    }
  }

  [[nodiscard]] const FeatureSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] std::size_t dim() const noexcept { return spec_.dim; }
  [[nodiscard]] std::size_t size() const noexcept {
    return spec_.kind == FeatureKind::kPolynomial ? exps_.size() : centers_.size();
  }

  /// h(x); x points to dim() coordinates, out receives size() values.
  void features(const T* x, T* out) const {
    const std::size_t n = size();
    if (spec_.kind == FeatureKind::kPolynomial) {
      for (std::size_t j = 0; j < n; ++j) out[j] = mono(x, exps_[j][0], exps_[j][1]);
      return;
    }
    const T inv = T(1) / static_cast<T>(2 * spec_.width * spec_.width);
    for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(-dist2(x, j) * inv);
  }

  /// grad_x <theta, h(x)>.
  void gradient(const T* x, const T* theta, T* out) const {
    for (std::size_t d = 0; d < spec_.dim; ++d) out[d] = T(0);
    const std::size_t n = size();
    if (spec_.kind == FeatureKind::kPolynomial) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto [a, b] = std::pair{exps_[j][0], exps_[j][1]};
        if (a > 0) out[0] += theta[j] * static_cast<T>(a) * mono(x, a - 1, b);
        if (spec_.dim == 2 && b > 0) out[1] += theta[j] * static_cast<T>(b) * mono(x, a, b - 1);
      }
      return;
    }
    const T w2 = static_cast<T>(spec_.width * spec_.width);
    for (std::size_t j = 0; j < n; ++j) {
      const T hj = std::exp(-dist2(x, j) / (2 * w2));
      for (std::size_t d = 0; d < spec_.dim; ++d) out[d] -= theta[j] * hj * (x[d] - centers_[j][d]) / w2;
    }
  }

  /// Hessian of <theta, h(x)> applied to v.
  void hessian_vector(const T* x, const T* theta, const T* v, T* out) const {
    const std::size_t D = spec_.dim;
    T hess[2][2] = {{0, 0}, {0, 0}};
    const std::size_t n = size();
    if (spec_.kind == FeatureKind::kPolynomial) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = exps_[j][0], b = exps_[j][1];
        if (a >= 2) hess[0][0] += theta[j] * static_cast<T>(a * (a - 1)) * mono(x, a - 2, b);
        if (D == 2) {
          if (b >= 2) hess[1][1] += theta[j] * static_cast<T>(b * (b - 1)) * mono(x, a, b - 2);
          if (a >= 1 && b >= 1) {
            const T m = theta[j] * static_cast<T>(a * b) * mono(x, a - 1, b - 1);
            hess[0][1] += m;
            hess[1][0] += m;
          }
        }
      }
    } else {
      const T w2 = static_cast<T>(spec_.width * spec_.width);
      for (std::size_t j = 0; j < n; ++j) {
        const T hj = theta[j] * std::exp(-dist2(x, j) / (2 * w2));
        for (std::size_t r = 0; r < D; ++r)
          for (std::size_t c = 0; c < D; ++c) {
            const T outer = (x[r] - centers_[j][r]) * (x[c] - centers_[j][c]) / (w2 * w2);
            hess[r][c] += hj * (outer - (r == c ? T(1) / w2 : T(0)));
          }
      }
    }
    for (std::size_t r = 0; r < D; ++r) {
      out[r] = 0;
      for (std::size_t c = 0; c < D; ++c) out[r] += hess[r][c] * v[c];
    }
  }

 private:
  T mono(const T* x, std::size_t a, std::size_t b) const {
    T r = 1;
    for (std::size_t i = 0; i < a; ++i) r *= x[0];
    for (std::size_t i = 0; i < b; ++i) r *= x[1];
    return r;
  }

  T dist2(const T* x, std::size_t j) const {
    T s = 0;
    for (std::size_t d = 0; d < spec_.dim; ++d) {
      const T e = x[d] - centers_[j][d];
      s += e * e;
    }
    return s;
  }

  FeatureSpec spec_;
  std::vector<std::array<std::size_t, 2>> exps_;
  std::vector<std::array<T, 2>> centers_;
};

// ---------------------------------------------------------------------------
// Energy interface

/// Everything needed to rebuild a net's structure (weights excluded).
struct NetDescriptor {
  Family family = Family::kConvNet;
  ArchSpec arch{};
  FeatureSpec features{};
  double temperature = 1.0;
};

template <class T>
struct ValueAndGrad {
  Tensor<T> f;     // [N]
  Tensor<T> grad;  // like x
};

/// Negative energy f(x) = g_theta(x) / T, so p(x) is proportional to exp(f(x)).
/// Batches carry the example index in the leading dimension.
template <class T>
class EnergyNet {
 public:
  virtual ~EnergyNet() = default;

  [[nodiscard]] virtual NetDescriptor descriptor() const = 0;
  [[nodiscard]] virtual Shape example_shape() const = 0;
  [[nodiscard]] virtual std::unique_ptr<EnergyNet> clone() const = 0;

  [[nodiscard]] virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  [[nodiscard]] virtual ValueAndGrad<T> value_and_grad_x(const Tensor<T>& x) const = 0;
  /// Batch mean of d f(x_i) / d theta, one entry per parameter tensor.
  [[nodiscard]] virtual ParamSet<T> grad_theta(const Tensor<T>& x) const = 0;
  /// Per-example Hessian (in x) times v.
  [[nodiscard]] virtual Tensor<T> hvp_x(const Tensor<T>& x, const Tensor<T>& v) const = 0;

  [[nodiscard]] Tensor<T> grad_x(const Tensor<T>& x) const { return value_and_grad_x(x).grad; }

  [[nodiscard]] const ParamSet<T>& params() const noexcept { return params_; }
  ParamSet<T>& params() noexcept { return params_; }

  void set_params(ParamSet<T> p) {
    if (p.size() != params_.size()) throw ShapeError("set_params: parameter count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i].name != params_[i].name || p[i].value.shape() != params_[i].value.shape())
        throw ShapeError("set_params: mismatch at " + p[i].name);
    params_ = std::move(p);
  }

  [[nodiscard]] double temperature() const noexcept { return temperature_; }
  void set_temperature(double t) {
    if (!(t > 0) || !std::isfinite(t)) throw std::invalid_argument("temperature must be positive");
    temperature_ = t;
  }

  void zero_params() {
    for (auto& nt : params_)
      for (auto& v : nt.value.mutable_data()) v = T(0);
  }

  void check_input(const Tensor<T>& x) const {
    const Shape ex = example_shape();
    if (x.rank() != ex.size() + 1 || !std::equal(ex.begin(), ex.end(), x.shape().begin() + 1))
      throw ShapeError("energy input " + shape_str(x.shape()) + " does not match example shape " + shape_str(ex));
    require_finite<T>(x.data(), "energy input");
  }

 protected:
  void warn_if_out_of_range(const Tensor<T>& x) const {
    if (range_warned_.load(std::memory_order_relaxed)) return;
    if (max_abs<T>(x.data()) > T(1)) {
      if (!range_warned_.exchange(true))
        std::cerr << "srmc: warning: energy input outside [-1, 1]\n";
    }
  }

  EnergyNet() = default;
  EnergyNet(const EnergyNet& o) : params_(o.params_), temperature_(o.temperature_) {}
  EnergyNet& operator=(const EnergyNet&) = delete;

  ParamSet<T> params_;
  double temperature_ = 1.0;
  mutable std::atomic<bool> range_warned_{false};
};

// ---------------------------------------------------------------------------

template <class T>
class ConvEnergyNet final : public EnergyNet<T> {
 public:
  explicit ConvEnergyNet(ArchSpec arch, double temperature = 1.0) : arch_(arch), rows_(arch.rows()) {
    if (!arch_.standard_width())
      std::cerr << "srmc: warning: n_f=" << arch_.n_f << " is outside {32, 64, 128}\n";
    this->set_temperature(temperature);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& r = rows_[i];
      this->params_.push_back({"conv" + std::to_string(i) + ".weight",
                               Tensor<T>(Shape{r.out_channels, r.in_channels, r.kernel, r.kernel})});
      this->params_.push_back({"conv" + std::to_string(i) + ".bias", Tensor<T>(Shape{r.out_channels})});
    }
  }

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  void init_params(std::uint64_t seed) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      RandomStream rng(seed, i, Purpose::kParamInit);
      auto& w = this->params_[2 * i].value;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(i)));
      for (auto& v : w.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
      for (auto& v : this->params_[2 * i + 1].value.mutable_data()) v = T(0);
    }
  }

  [[nodiscard]] std::size_t fan_in(std::size_t layer) const {
    const auto& r = rows_.at(layer);
    return r.in_channels * r.kernel * r.kernel;
  }

  [[nodiscard]] const ArchSpec& arch() const noexcept { return arch_; }
  [[nodiscard]] const std::vector<LayerRow>& rows() const noexcept { return rows_; }

  [[nodiscard]] NetDescriptor descriptor() const override {
    NetDescriptor d;
    d.family = Family::kConvNet;
    d.arch = arch_;
    d.temperature = this->temperature_;
    return d;
  }

  [[nodiscard]] Shape example_shape() const override { return {arch_.channels, arch_.input_size, arch_.input_size}; }

  [[nodiscard]] std::unique_ptr<EnergyNet<T>> clone() const override {
    return std::unique_ptr<EnergyNet<T>>(new ConvEnergyNet(*this));
  }

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const override {
    this->check_input(x);
    this->warn_if_out_of_range(x);
    Graph<T> g;
    return g.value(build(g, g.leaf(x, false), false));
  }

  [[nodiscard]] ValueAndGrad<T> value_and_grad_x(const Tensor<T>& x) const override {
    this->check_input(x);
    Graph<T> g;
    const Var xv = g.leaf(x, true);
    const Var f = build(g, xv, false);
    g.backward(g.sum(f));
    return {g.value(f), g.grad(xv)};
  }

  [[nodiscard]] ParamSet<T> grad_theta(const Tensor<T>& x) const override {
    this->check_input(x);
    Graph<T> g;
    std::vector<Var> pv;
    const Var f = build(g, g.leaf(x, false), true, &pv);
    g.backward(g.mean(f));
    ParamSet<T> out;
    for (std::size_t i = 0; i < pv.size(); ++i) out.push_back({this->params_[i].name, g.grad(pv[i])});
    return out;
  }

  /// Sign pattern (pre-activation > 0) of every leaky-ReLU unit, concatenated
  /// over layers and examples.  Two inputs with equal patterns lie on the same
  /// linear piece of f.
  [[nodiscard]] std::vector<std::uint8_t> activation_pattern(const Tensor<T>& x) const {
    this->check_input(x);
    Graph<T> g;
    Var h = g.leaf(x, false);
    std::vector<std::uint8_t> signs;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      h = g.conv2d(h, g.leaf(this->params_[2 * i].value), g.leaf(this->params_[2 * i + 1].value), rows_[i].stride,
                   rows_[i].padding);
      if (!rows_[i].activation) break;
      for (T v : g.value(h).data()) signs.push_back(v > T(0));
      h = g.leaky_relu(h, static_cast<T>(arch_.leaky_slope));
    }
    return signs;
  }

  /// The net is piecewise linear in x (conv + leaky ReLU), so its x-Hessian
  /// vanishes wherever it is defined.
  [[nodiscard]] Tensor<T> hvp_x(const Tensor<T>& x, const Tensor<T>& v) const override {
    this->check_input(x);
    if (v.shape() != x.shape()) throw ShapeError("hvp_x: direction shape mismatch");
    return Tensor<T>(x.shape());
  }

 private:
  ConvEnergyNet(const ConvEnergyNet&) = default;

  Var build(Graph<T>& g, Var x, bool param_grads, std::vector<Var>* param_vars = nullptr) const {
    Var h = x;
    const T slope = static_cast<T>(arch_.leaky_slope);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Var w = g.leaf(this->params_[2 * i].value, param_grads);
      const Var b = g.leaf(this->params_[2 * i + 1].value, param_grads);
      if (param_vars) {
        param_vars->push_back(w);
        param_vars->push_back(b);
      }
      h = g.conv2d(h, w, b, rows_[i].stride, rows_[i].padding);
      if (rows_[i].activation) h = g.leaky_relu(h, slope);
    }
    h = g.reshape(h, Shape{g.value(x).dim(0)});
    return g.scale(h, static_cast<T>(1.0 / this->temperature_));
  }

  ArchSpec arch_;
  std::vector<LayerRow> rows_;
};

// ---------------------------------------------------------------------------

/// f(x) = <theta, h(x)> / T with a fixed feature map h.
template <class T>
class ExpFamilyEnergy final : public EnergyNet<T> {
 public:
  explicit ExpFamilyEnergy(FeatureSpec spec, double temperature = 1.0) : map_(spec) {
    this->set_temperature(temperature);
    this->params_.push_back({"theta", Tensor<T>(Shape{map_.size()})});
  }

  ExpFamilyEnergy(FeatureSpec spec, std::vector<T> theta, double temperature = 1.0)
      : ExpFamilyEnergy(spec, temperature) {
    if (theta.size() != map_.size()) throw ShapeError("ExpFamilyEnergy: theta has wrong length");
    this->params_[0].value = Tensor<T>(Shape{map_.size()}, std::move(theta));
  }

  [[nodiscard]] const FeatureMap<T>& feature_map() const noexcept { return map_; }
  [[nodiscard]] std::span<const T> theta() const noexcept { return this->params_[0].value.data(); }

  [[nodiscard]] NetDescriptor descriptor() const override {
    NetDescriptor d;
    d.family = Family::kExpFamily;
    d.features = map_.spec();
    d.temperature = this->temperature_;
    return d;
  }

  [[nodiscard]] Shape example_shape() const override { return {map_.dim()}; }

  [[nodiscard]] std::unique_ptr<EnergyNet<T>> clone() const override {
    return std::unique_ptr<EnergyNet<T>>(new ExpFamilyEnergy(*this));
  }

  /// h(x_i) for every example, shape [N, n_features].
  [[nodiscard]] Tensor<T> features(const Tensor<T>& x) const {
    this->check_input(x);
    const std::size_t N = x.dim(0), D = map_.dim(), F = map_.size();
    Tensor<T> out(Shape{N, F});
    auto o = out.mutable_data();
    for (std::size_t i = 0; i < N; ++i) map_.features(x.raw() + i * D, o.data() + i * F);
    return out;
  }

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const override {
    const Tensor<T> h = features(x);
    const std::size_t N = x.dim(0), F = map_.size();
    const auto th = theta();
    const T inv_t = static_cast<T>(1.0 / this->temperature_);
    std::vector<T> f(N, T(0));
    for (std::size_t i = 0; i < N; ++i) {
      T s = 0;
      for (std::size_t j = 0; j < F; ++j) s += th[j] * h[i * F + j];
      f[i] = s * inv_t;
    }
    Tensor<T> out(Shape{N}, std::move(f));
    require_finite<T>(out.data(), "exp-family forward");
    return out;
  }

  [[nodiscard]] ValueAndGrad<T> value_and_grad_x(const Tensor<T>& x) const override {
    Tensor<T> f = forward(x);
    const std::size_t N = x.dim(0), D = map_.dim();
    const T inv_t = static_cast<T>(1.0 / this->temperature_);
    Tensor<T> g(x.shape());
    auto gd = g.mutable_data();
    for (std::size_t i = 0; i < N; ++i) {
      map_.gradient(x.raw() + i * D, theta().data(), gd.data() + i * D);
      for (std::size_t d = 0; d < D; ++d) gd[i * D + d] *= inv_t;
    }
    require_finite<T>(g.data(), "exp-family gradient");
    return {std::move(f), std::move(g)};
  }

  [[nodiscard]] ParamSet<T> grad_theta(const Tensor<T>& x) const override {
    const Tensor<T> h = features(x);
    const std::size_t N = x.dim(0), F = map_.size();
    std::vector<T> m(F, T(0));
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < F; ++j) m[j] += h[i * F + j];
    const T scale = static_cast<T>(1.0 / (this->temperature_ * static_cast<double>(N)));
    for (auto& v : m) v *= scale;
    return {{"theta", Tensor<T>(Shape{F}, std::move(m))}};
  }

  [[nodiscard]] Tensor<T> hvp_x(const Tensor<T>& x, const Tensor<T>& v) const override {
    this->check_input(x);
    if (v.shape() != x.shape()) throw ShapeError("hvp_x: direction shape mismatch");
    const std::size_t N = x.dim(0), D = map_.dim();
    const T inv_t = static_cast<T>(1.0 / this->temperature_);
    Tensor<T> out(x.shape());
    auto o = out.mutable_data();
    for (std::size_t i = 0; i < N; ++i) {
      map_.hessian_vector(x.raw() + i * D, theta().data(), v.raw() + i * D, o.data() + i * D);
      for (std::size_t d = 0; d < D; ++d) o[i * D + d] *= inv_t;
    }
    return out;
  }

 private:
  ExpFamilyEnergy(const ExpFamilyEnergy&) = default;

  FeatureMap<T> map_;
};

template <class T>
std::unique_ptr<EnergyNet<T>> make_net(const NetDescriptor& d) {
  if (d.family == Family::kConvNet) return std::make_unique<ConvEnergyNet<T>>(d.arch, d.temperature);
  return std::make_unique<ExpFamilyEnergy<T>>(d.features, d.temperature);
}

}  // namespace srmc

#endif  // SRMC_ENERGY_HPP
