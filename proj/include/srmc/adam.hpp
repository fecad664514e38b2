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

#ifndef SRMC_ADAM_HPP
#define SRMC_ADAM_HPP

#include <cmath>
#include <cstdint>

#include "srmc/energy.hpp"

namespace srmc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  ParamSet<T> m;
  ParamSet<T> v;
  std::uint64_t step = 0;

  static AdamState like(const ParamSet<T>& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

/// One Adam step that ascends `direction` (theta += lr * m_hat / (sqrt(v_hat) + eps)).
template <class T>
void adam_ascent(ParamSet<T>& params, const ParamSet<T>& direction, AdamState<T>& st, const AdamConfig& cfg,
                 double lr) {
  if (direction.size() != params.size() || st.m.size() != params.size())
    throw ShapeError("adam: parameter/state mismatch");
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].value.mutable_data();
    auto m = st.m[p].value.mutable_data();
    auto v = st.v[p].value.mutable_data();
    const auto g = direction[p].value.data();
    if (g.size() != w.size()) throw ShapeError("adam: gradient shape mismatch at " + params[p].name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(static_cast<double>(w[i]) + lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
  }
}

}  // namespace srmc

#endif  // SRMC_ADAM_HPP
