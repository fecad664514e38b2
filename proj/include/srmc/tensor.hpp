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

#ifndef SRMC_TENSOR_HPP
#define SRMC_TENSOR_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace srmc {

#if defined(SRMC_REAL_FLOAT)
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major tensor.  Storage is shared between copies and cloned on
/// the first mutable access, so copies are cheap and behave as values.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : Tensor(Shape{0}) {}

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(shape_numel(shape_), fill)) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    if (shape_numel(shape_) != values.size())
      throw ShapeError("tensor: shape " + shape_str(shape_) + " holds " +
                       std::to_string(shape_numel(shape_)) + " values, got " +
                       std::to_string(values.size()));
    data_ = std::make_shared<std::vector<T>>(std::move(values));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return shape_.at(i); }
  [[nodiscard]] std::size_t size() const noexcept { return data_->size(); }

  [[nodiscard]] std::span<const T> data() const noexcept { return *data_; }
  [[nodiscard]] const T* raw() const noexcept { return data_->data(); }

  std::span<T> mutable_data() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
    return *data_;
  }

  [[nodiscard]] T operator[](std::size_t i) const { return (*data_)[i]; }

  [[nodiscard]] T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
  }

  /// Per-example element count for a tensor whose leading dim is the batch.
  [[nodiscard]] std::size_t example_size() const {
    if (shape_.empty() || shape_[0] == 0) return 0;
    return size() / shape_[0];
  }

  [[nodiscard]] Tensor reshaped(Shape s) const {
    if (shape_numel(s) != size())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(s));
    Tensor out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  /// Rows [begin, end) along the leading dimension.
  [[nodiscard]] Tensor slice_batch(std::size_t begin, std::size_t end) const {
    if (shape_.empty() || begin > end || end > shape_[0])
      throw ShapeError("slice_batch out of range on " + shape_str(shape_));
    Shape s = shape_;
    s[0] = end - begin;
    const std::size_t ex = example_size();
    return Tensor(std::move(s), std::vector<T>(data_->begin() + static_cast<std::ptrdiff_t>(begin * ex),
                                               data_->begin() + static_cast<std::ptrdiff_t>(end * ex)));
  }

  template <class U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> v(data_->begin(), data_->end());
    return Tensor<U>(shape_, std::move(v));
  }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(data_->begin(), data_->end(), [](T v) { return std::isfinite(v); });
  }

  [[nodiscard]] bool bit_equal(const Tensor& o) const {
    return shape_ == o.shape_ && std::equal(data_->begin(), data_->end(), o.data_->begin());
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

template <class T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch of nothing");
  Shape s = parts[0].shape();
  std::size_t rows = 0;
  std::vector<T> v;
  for (const auto& p : parts) {
    if (p.rank() != s.size() || !std::equal(p.shape().begin() + 1, p.shape().end(), s.begin() + 1))
      throw ShapeError("concat_batch " + shape_str(p.shape()) + " vs " + shape_str(s));
    rows += p.dim(0);
    v.insert(v.end(), p.data().begin(), p.data().end());
  }
  s[0] = rows;
  return Tensor<T>(std::move(s), std::move(v));
}

namespace detail {
// Exponent-all-ones test on the raw bits; branch-free so it vectorizes.
template <class T>
bool any_non_finite(std::span<const T> v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr U exp_mask = sizeof(T) == 4 ? U(0x7f800000u) : U(0x7ff0000000000000ull);
  // Non-finite iff every exponent bit is set, i.e. (~bits & mask) == 0.
  U least = exp_mask;
  const T* p = v.data();
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) least = std::min<U>(least, ~std::bit_cast<U>(p[i]) & exp_mask);
  return least == 0;
}
}  // namespace detail

template <class T>
void require_finite(std::span<const T> v, const char* where) {
  if (!detail::any_non_finite(v)) return;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw NonFiniteError(std::string(where) + ": non-finite value at flat index " + std::to_string(i));
}

template <class T>
T max_abs(std::span<const T> v) {
  T m = 0;
  for (T x : v) m = std::max(m, std::abs(x));
  return m;
}

template <class T>
T l2_norm(std::span<const T> v) {
  T s = 0;
  for (T x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace srmc

#endif  // SRMC_TENSOR_HPP
