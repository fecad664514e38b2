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

#ifndef SRMC_GRAPH_HPP
#define SRMC_GRAPH_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "srmc/conv.hpp"
#include "srmc/tensor.hpp"

namespace srmc {

/// Handle to a node recorded on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape.  Nodes are appended in evaluation order, so the tape
/// order is already topological; backward walks it once in reverse.
///
/// Elementwise binary ops accept either equal shapes or a right operand shaped
/// like one example of the left operand (broadcast over the batch dim).
/// Nothing else broadcasts.
template <class T>
class Graph {
 public:
  Var leaf(Tensor<T> value, bool requires_grad = false) {
    require_finite<T>(value.data(), "leaf");
    return push(Op::kLeaf, std::move(value), {}, requires_grad);
  }

  Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }

  Var scale(Var a, T factor) {
    const auto& av = value(a);
    std::vector<T> out(av.size());
    const T* src = av.raw();
    T* dst = out.data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * factor;
    Var v = push(Op::kScale, Tensor<T>(av.shape(), std::move(out)), {a.id}, needs(a));
    nodes_[v.id].scalar = factor;
    return checked(v, "scale");
  }

  Var square(Var a) {
    const auto& av = value(a);
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
    return checked(push(Op::kSquare, Tensor<T>(av.shape(), std::move(out)), {a.id}, needs(a)), "square");
  }

  Var sum(Var a) {
    T s = 0;
    for (T x : value(a).data()) s += x;
    return checked(push(Op::kSum, Tensor<T>::scalar(s), {a.id}, needs(a)), "sum");
  }

  Var mean(Var a) {
    const auto& av = value(a);
    if (av.size() == 0) throw ShapeError("mean of empty tensor");
    T s = 0;
    for (T x : av.data()) s += x;
    return checked(push(Op::kMean, Tensor<T>::scalar(s / static_cast<T>(av.size())), {a.id}, needs(a)), "mean");
  }

  Var leaky_relu(Var a, T slope) {
    if (!(slope > T(0) && slope < T(1))) throw std::invalid_argument("leaky_relu: slope must lie in (0,1)");
    const auto& av = value(a);
    std::vector<T> out(av.size());
    const T* src = av.raw();
    T* dst = out.data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
      // max(x, slope x) equals the two-branch form for slope in (0, 1).
      const T x = src[i];
      dst[i] = std::max(x, slope * x);
    }
    Var v = push(Op::kLeakyRelu, Tensor<T>(av.shape(), std::move(out)), {a.id}, needs(a));
    nodes_[v.id].scalar = slope;
    return checked(v, "leaky_relu");
  }

  Var reshape(Var a, Shape s) {
    return push(Op::kReshape, value(a).reshaped(std::move(s)), {a.id}, needs(a));
  }

  Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
    const auto g = kernels::make_geometry(value(input).shape(), value(kernel).shape(), value(bias).shape(),
                                          stride, padding);
    Tensor<T> out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
    kernels::conv2d_forward(g, value(input).raw(), value(kernel).raw(), value(bias).raw(),
                            out.mutable_data().data());
    Var v = push(Op::kConv2d, std::move(out), {input.id, kernel.id, bias.id},
                 needs(input) || needs(kernel) || needs(bias));
    nodes_[v.id].geometry = g;
    return checked(v, "conv2d");
  }

  /// Populates gradients of every requires-grad node reachable from `root`.
  /// A graph can be differentiated once; a second call throws.
  void backward(Var root) {
    if (backward_done_) throw GraphError("backward called twice on the same graph");
    if (value(root).size() != 1)
      throw GraphError("backward root must be a scalar, got shape " + shape_str(value(root).shape()));
    backward_done_ = true;
    if (!nodes_[root.id].requires_grad) return;
    for (auto& n : nodes_)
      if (n.requires_grad) n.grad.assign(n.value.size(), T(0));
    nodes_[root.id].grad[0] = T(1);
    for (std::size_t k = root.id + 1; k-- > 0;) propagate(nodes_[k]);
  }

  [[nodiscard]] const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }

  [[nodiscard]] Tensor<T> grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (!n.requires_grad) throw GraphError("grad requested for a node that does not require grad");
    if (!backward_done_) throw GraphError("grad requested before backward");
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return Tensor<T>(n.value.shape(), n.grad);
  }

  [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t { kLeaf, kAdd, kSub, kMul, kScale, kSquare, kSum, kMean, kLeakyRelu, kReshape, kConv2d };

  struct Node {
    Op op = Op::kLeaf;
    Tensor<T> value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    std::vector<T> grad;
    T scalar = T(0);
    kernels::ConvGeometry geometry{};
  };

  bool needs(Var v) const { return nodes_.at(v.id).requires_grad; }

  Var push(Op op, Tensor<T> value, std::vector<std::size_t> inputs, bool requires_grad) {
    if (backward_done_) throw GraphError("cannot record on a graph after backward");
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var checked(Var v, const char* op) {
    require_finite<T>(nodes_[v.id].value.data(), op);
    return v;
  }

  // Returns true when b broadcasts over the batch dim of a.
  static bool broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return false;
    if (a.size() == b.size() + 1 && std::equal(b.begin(), b.end(), a.begin() + 1)) return true;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }

  Var binary(Op op, Var a, Var b) {
    const char* name = op == Op::kAdd ? "add" : op == Op::kSub ? "sub" : "mul";
    const auto& av = value(a);
    const auto& bv = value(b);
    const bool bc = broadcast_shape(av.shape(), bv.shape(), name);
    const std::size_t nb = bv.size();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const T y = bv[bc ? i % nb : i];
      out[i] = op == Op::kAdd ? av[i] + y : op == Op::kSub ? av[i] - y : av[i] * y;
    }
    return checked(push(op, Tensor<T>(av.shape(), std::move(out)), {a.id, b.id}, needs(a) || needs(b)), name);
  }

  void propagate(Node& n) {
    if (!n.requires_grad || n.op == Op::kLeaf) return;
    const std::vector<T>& g = n.grad;
    auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
    switch (n.op) {
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul: {
        Node& a = in(0);
        Node& b = in(1);
        const std::size_t nb = b.value.size();
        const bool bc = a.value.size() != nb;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t j = bc ? i % nb : i;
          if (n.op == Op::kMul) {
            if (a.requires_grad) a.grad[i] += g[i] * b.value[j];
            if (b.requires_grad) b.grad[j] += g[i] * a.value[i];
          } else {
            if (a.requires_grad) a.grad[i] += g[i];
            if (b.requires_grad) b.grad[j] += n.op == Op::kAdd ? g[i] : -g[i];
          }
        }
        break;
      }
      case Op::kScale: {
        Node& a = in(0);
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.scalar;
        break;
      }
      case Op::kSquare: {
        Node& a = in(0);
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += T(2) * a.value[i] * g[i];
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        Node& a = in(0);
        const T d = n.op == Op::kSum ? g[0] : g[0] / static_cast<T>(a.value.size());
        for (auto& x : a.grad) x += d;
        break;
      }
      case Op::kLeakyRelu: {
        // At exactly 0 the negative-branch slope is used.
        Node& a = in(0);
        const T* av = a.value.raw();
        const T* gv = g.data();
        T* ag = a.grad.data();
        const T slope = n.scalar;
        const std::size_t count = g.size();
        for (std::size_t i = 0; i < count; ++i) ag[i] += gv[i] * (av[i] > T(0) ? T(1) : slope);
        break;
      }
      case Op::kReshape: {
        Node& a = in(0);
        std::transform(a.grad.begin(), a.grad.end(), g.begin(), a.grad.begin(), std::plus<T>());
        break;
      }
      case Op::kConv2d: {
        Node& x = in(0);
        Node& w = in(1);
        Node& b = in(2);
        if (x.requires_grad) kernels::conv2d_backward_input(n.geometry, w.value.raw(), g.data(), x.grad.data());
        if (w.requires_grad || b.requires_grad)
          kernels::conv2d_backward_params(n.geometry, x.value.raw(), g.data(),
                                          w.requires_grad ? w.grad.data() : nullptr,
                                          b.requires_grad ? b.grad.data() : nullptr);
        break;
      }
      case Op::kLeaf:
        break;
    }
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace srmc

#endif  // SRMC_GRAPH_HPP
