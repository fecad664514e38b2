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

#ifndef SRMC_CONV_HPP
#define SRMC_CONV_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "srmc/tensor.hpp"

namespace srmc::kernels {

/// Geometry of one 2-D cross-correlation over NCHW input and OIHW kernel.
struct ConvGeometry {
  std::size_t batch = 0, in_ch = 0, in_h = 0, in_w = 0;
  std::size_t out_ch = 0, k_h = 0, k_w = 0;
  std::size_t stride = 1, padding = 0;
  std::size_t out_h = 0, out_w = 0;

  [[nodiscard]] std::size_t patch() const { return in_ch * k_h * k_w; }
  [[nodiscard]] std::size_t positions() const { return out_h * out_w; }
  [[nodiscard]] std::size_t in_plane() const { return in_ch * in_h * in_w; }
  [[nodiscard]] std::size_t out_plane() const { return out_ch * out_h * out_w; }
};

/// Output extent; zero when the kernel does not fit.
inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t padding) {
  const std::size_t padded = in + 2 * padding;
  if (stride == 0 || padded < k) return 0;
  return (padded - k) / stride + 1;
}

inline ConvGeometry make_geometry(const Shape& input, const Shape& kernel, const Shape& bias,
                                  std::size_t stride, std::size_t padding) {
  auto fail = [&](const char* why) {
    throw ShapeError(std::string("conv2d: ") + why + "; input " + shape_str(input) + ", kernel " +
                     shape_str(kernel) + ", bias " + shape_str(bias));
  };
  if (input.size() != 4) fail("input must be NCHW");
  if (kernel.size() != 4) fail("kernel must be OIHW");
  if (kernel[1] != input[1]) fail("channel mismatch");
  if (bias.size() != 1 || bias[0] != kernel[0]) fail("bias must have one entry per output channel");
  if (stride == 0) fail("stride must be positive");
  ConvGeometry g;
  g.batch = input[0];
  g.in_ch = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_ch = kernel[0];
  g.k_h = kernel[2];
  g.k_w = kernel[3];
  g.stride = stride;
  g.padding = padding;
  g.out_h = conv_out_extent(g.in_h, g.k_h, stride, padding);
  g.out_w = conv_out_extent(g.in_w, g.k_w, stride, padding);
  if (g.out_h == 0 || g.out_w == 0) fail("kernel does not fit the padded input");
  return g;
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

// Output columns ox whose input column ox * stride + j - padding lies in
// [0, W): returns [lo, hi).
inline std::pair<std::size_t, std::size_t> valid_columns(const ConvGeometry& g, std::size_t j) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding), W = static_cast<std::ptrdiff_t>(g.in_w);
  const auto s = static_cast<std::ptrdiff_t>(g.stride), off = static_cast<std::ptrdiff_t>(j) - pad;
  // smallest ox with ox*s + off >= 0, and smallest ox with ox*s + off >= W
  auto ceil_div = [](std::ptrdiff_t a, std::ptrdiff_t b) { return a <= 0 ? std::ptrdiff_t(0) : (a + b - 1) / b; };
  const auto out_w = static_cast<std::ptrdiff_t>(g.out_w);
  const std::ptrdiff_t lo = std::min(out_w, ceil_div(-off, s));
  const std::ptrdiff_t hi = std::max(lo, std::min(out_w, ceil_div(W - off, s)));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// col is patch() x positions(), row-major.
template <class T>
void im2col(const ConvGeometry& g, const T* img, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto H = static_cast<std::ptrdiff_t>(g.in_h), W = static_cast<std::ptrdiff_t>(g.in_w);
  const std::size_t s = g.stride;
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t i = 0; i < g.k_h; ++i)
      for (std::size_t j = 0; j < g.k_w; ++j) {
        T* row = col + ((c * g.k_h + i) * g.k_w + j) * g.positions();
        const T* plane = img + c * g.in_h * g.in_w;
        const auto [lo, hi] = valid_columns(g, j);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * s + i) - pad;
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= H) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          std::fill(dst, dst + lo, T(0));
          const T* src = plane + (y * W + off + static_cast<std::ptrdiff_t>(lo * s));
          for (std::size_t k = 0; k < hi - lo; ++k) dst[lo + k] = src[k * s];
          std::fill(dst + hi, dst + g.out_w, T(0));
        }
      }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* col, T* img) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto H = static_cast<std::ptrdiff_t>(g.in_h), W = static_cast<std::ptrdiff_t>(g.in_w);
  const std::size_t s = g.stride;
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t i = 0; i < g.k_h; ++i)
      for (std::size_t j = 0; j < g.k_w; ++j) {
        const T* row = col + ((c * g.k_h + i) * g.k_w + j) * g.positions();
        T* plane = img + c * g.in_h * g.in_w;
        const auto [lo, hi] = valid_columns(g, j);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * s + i) - pad;
          if (y < 0 || y >= H) continue;
          const T* src = row + oy * g.out_w + lo;
          T* dst = plane + (y * W + off + static_cast<std::ptrdiff_t>(lo * s));
          for (std::size_t k = 0; k < hi - lo; ++k) dst[k * s] += src[k];
        }
      }
}

// Every routine below works one example at a time, so the arithmetic for an
// example never depends on how many others share the batch.

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* kernel, const T* bias, T* out) {
  std::vector<T> col(g.patch() * g.positions());
  ConstRowMap<T> w(kernel, static_cast<Eigen::Index>(g.out_ch), static_cast<Eigen::Index>(g.patch()));
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(g, input + n * g.in_plane(), col.data());
    ConstRowMap<T> c(col.data(), static_cast<Eigen::Index>(g.patch()),
                     static_cast<Eigen::Index>(g.positions()));
    RowMap<T> o(out + n * g.out_plane(), static_cast<Eigen::Index>(g.out_ch),
                static_cast<Eigen::Index>(g.positions()));
    o.noalias() = w * c;
    for (std::size_t oc = 0; oc < g.out_ch; ++oc) o.row(static_cast<Eigen::Index>(oc)).array() += bias[oc];
  }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, const T* kernel, const T* grad_out, T* grad_in) {
  std::vector<T> col(g.patch() * g.positions());
  ConstRowMap<T> w(kernel, static_cast<Eigen::Index>(g.out_ch), static_cast<Eigen::Index>(g.patch()));
  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstRowMap<T> go(grad_out + n * g.out_plane(), static_cast<Eigen::Index>(g.out_ch),
                      static_cast<Eigen::Index>(g.positions()));
    RowMap<T> c(col.data(), static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.positions()));
    c.noalias() = w.transpose() * go;
    col2im_add(g, col.data(), grad_in + n * g.in_plane());
  }
}

template <class T>
void conv2d_backward_params(const ConvGeometry& g, const T* input, const T* grad_out, T* grad_kernel,
                            T* grad_bias) {
  std::vector<T> col(g.patch() * g.positions());
  RowMap<T> gw(grad_kernel, static_cast<Eigen::Index>(g.out_ch), static_cast<Eigen::Index>(g.patch()));
  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstRowMap<T> go(grad_out + n * g.out_plane(), static_cast<Eigen::Index>(g.out_ch),
                      static_cast<Eigen::Index>(g.positions()));
    if (grad_kernel != nullptr) {
      im2col(g, input + n * g.in_plane(), col.data());
      ConstRowMap<T> c(col.data(), static_cast<Eigen::Index>(g.patch()),
                       static_cast<Eigen::Index>(g.positions()));
      gw.noalias() += go * c.transpose();
    }
    if (grad_bias != nullptr)
      // A plain loop: Eigen's vectorized sum() peels by buffer address, which
      // would make the result depend on where the batch happens to live.
      for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
        const T* row = grad_out + n * g.out_plane() + oc * g.positions();
        T s = 0;
        for (std::size_t p = 0; p < g.positions(); ++p) s += row[p];
        grad_bias[oc] += s;
      }
  }
}

}  // namespace srmc::kernels

#endif  // SRMC_CONV_HPP
