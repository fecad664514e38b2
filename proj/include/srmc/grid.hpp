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

#ifndef SRMC_GRID_HPP
#define SRMC_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace srmc {

/// Uniform midpoint lattice over an interval (dim 1) or a box (dim 2).
/// Cells are enumerated row-major: index = ix * n[1] + iy.
struct Lattice {
  std::size_t dim = 1;
  std::array<std::size_t, 2> n{1024, 1};
  std::array<double, 2> lo{-1.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  static Lattice line(double lo, double hi, std::size_t n) {
    if (!(hi > lo) || n == 0) throw std::invalid_argument("Lattice::line: empty interval");
    return {1, {n, 1}, {lo, 0.0}, {hi, 1.0}};
  }

  static Lattice box(double lo, double hi, std::size_t n_per_axis) {
    if (!(hi > lo) || n_per_axis == 0) throw std::invalid_argument("Lattice::box: empty box");
    return {2, {n_per_axis, n_per_axis}, {lo, lo}, {hi, hi}};
  }

  [[nodiscard]] std::size_t size() const { return dim == 1 ? n[0] : n[0] * n[1]; }
  [[nodiscard]] double spacing(std::size_t axis) const { return (hi[axis] - lo[axis]) / static_cast<double>(n[axis]); }
  [[nodiscard]] double cell_volume() const { return dim == 1 ? spacing(0) : spacing(0) * spacing(1); }
  [[nodiscard]] double axis_point(std::size_t axis, std::size_t i) const {
    return lo[axis] + (static_cast<double>(i) + 0.5) * spacing(axis);
  }
  [[nodiscard]] std::array<double, 2> point(std::size_t idx) const {
    if (dim == 1) return {axis_point(0, idx), 0.0};
    return {axis_point(0, idx / n[1]), axis_point(1, idx % n[1])};
  }
  [[nodiscard]] bool same_as(const Lattice& o) const { return dim == o.dim && n == o.n && lo == o.lo && hi == o.hi; }

  /// Lattice with twice the resolution on every axis.
  [[nodiscard]] Lattice refined() const {
    Lattice r = *this;
    r.n[0] *= 2;
    if (dim == 2) r.n[1] *= 2;
    return r;
  }
};

/// Density on a lattice, normalized by midpoint quadrature.
struct GridModel {
  Lattice lattice;
  std::vector<double> log_density;
  std::vector<double> density;
  double log_z = 0.0;
  bool normalized = false;

  [[nodiscard]] double mass() const {
    double s = 0;
    for (double d : density) s += d;
    return s * lattice.cell_volume();
  }
};

/// exp(f) / Z with Z by midpoint rule, via a max-shifted log-sum-exp.
inline GridModel normalize(const Lattice& lat, const std::vector<double>& f) {
  if (f.size() != lat.size()) throw std::invalid_argument("normalize: value count does not match lattice");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : f) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("normalize: log-density must be finite or -inf");
    mx = std::max(mx, v);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("normalize: density vanishes everywhere");
  double s = 0;
  for (double v : f) s += std::exp(v - mx);
  GridModel g;
  g.lattice = lat;
  g.log_z = mx + std::log(s * lat.cell_volume());
  g.log_density.resize(f.size());
  g.density.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    g.log_density[i] = f[i] - g.log_z;
    g.density[i] = std::exp(g.log_density[i]);
  }
  g.normalized = true;
  return g;
}

inline GridModel normalize(const Lattice& lat, const std::function<double(const std::array<double, 2>&)>& f) {
  std::vector<double> v(lat.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(lat.point(i));
  return normalize(lat, v);
}

/// Takes density values (not logs) and renormalizes them.
inline GridModel from_density(const Lattice& lat, std::vector<double> density) {
  if (density.size() != lat.size()) throw std::invalid_argument("from_density: size mismatch");
  double s = 0;
  for (double d : density) {
    if (!(d >= 0) || !std::isfinite(d)) throw std::invalid_argument("from_density: densities must be finite and >= 0");
    s += d;
  }
  s *= lat.cell_volume();
  if (!(s > 0)) throw std::invalid_argument("from_density: zero mass");
  GridModel g;
  g.lattice = lat;
  g.log_z = std::log(s);
  g.density = std::move(density);
  g.log_density.resize(g.density.size());
  for (std::size_t i = 0; i < g.density.size(); ++i) {
    g.density[i] /= s;
    g.log_density[i] = g.density[i] > 0 ? std::log(g.density[i]) : -std::numeric_limits<double>::infinity();
  }
  g.normalized = true;
  return g;
}

class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require_same_lattice(const GridModel& p, const GridModel& q, const char* what) {
  if (!p.lattice.same_as(q.lattice)) throw std::invalid_argument(std::string(what) + ": models live on different lattices");
}

/// KL(p | q) by midpoint rule.
inline double kl(const GridModel& p, const GridModel& q) {
  require_same_lattice(p, q, "kl");
  double s = 0;
  for (std::size_t i = 0; i < p.density.size(); ++i) {
    if (p.density[i] <= 0) continue;
    if (q.density[i] <= 0) throw SupportError("kl: q vanishes where p has mass");
    s += p.density[i] * (p.log_density[i] - q.log_density[i]);
  }
  return s * p.lattice.cell_volume();
}

/// Differential entropy -E_p[log p].
inline double entropy(const GridModel& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.density.size(); ++i)
    if (p.density[i] > 0) s -= p.density[i] * p.log_density[i];
  return s * p.lattice.cell_volume();
}

inline double total_variation(const GridModel& p, const GridModel& q) {
  require_same_lattice(p, q, "total_variation");
  double s = 0;
  for (std::size_t i = 0; i < p.density.size(); ++i) s += std::abs(p.density[i] - q.density[i]);
  return 0.5 * s * p.lattice.cell_volume();
}

inline double expectation(const GridModel& p, const std::function<double(const std::array<double, 2>&)>& g) {
  double s = 0;
  for (std::size_t i = 0; i < p.density.size(); ++i) s += p.density[i] * g(p.lattice.point(i));
  return s * p.lattice.cell_volume();
}

// ---------------------------------------------------------------------------
// Kernel density estimate

struct KdeEstimate {
  std::vector<std::array<double, 2>> samples;
  std::array<double, 2> bandwidth{0.0, 0.0};
  GridModel grid;
};

/// Silverman's rule of thumb per axis: 0.9 min(sd, IQR/1.34) n^(-1/5) in
/// 1-D, sd (4 / ((d + 2) n))^(1 / (d + 4)) per axis in 2-D.
inline std::array<double, 2> silverman_bandwidth(const std::vector<std::array<double, 2>>& pts, std::size_t dim) {
  const double n = static_cast<double>(pts.size());
  if (pts.size() < 2) throw std::invalid_argument("silverman_bandwidth: need at least two samples");
  std::array<double, 2> bw{0.0, 0.0};
  for (std::size_t a = 0; a < dim; ++a) {
    std::vector<double> v(pts.size());
    double mean = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      v[i] = pts[i][a];
      mean += v[i];
    }
    mean /= n;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (n - 1));
    if (dim == 1) {
      std::sort(v.begin(), v.end());
      auto q = [&](double f) {
        const double pos = f * (n - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1 - w) + v[i + 1] * w : v[i];
      };
      const double iqr = q(0.75) - q(0.25);
      const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
      bw[a] = 0.9 * spread * std::pow(n, -0.2);
    } else {
      bw[a] = sd * std::pow(4.0 / ((static_cast<double>(dim) + 2.0) * n), 1.0 / (static_cast<double>(dim) + 4.0));
    }
    if (!(bw[a] > 0)) throw std::invalid_argument("silverman_bandwidth: degenerate sample");
  }
  return bw;
}

/// Gaussian product-kernel KDE evaluated on the lattice and renormalized
/// over it (mass outside the box is discarded).
inline KdeEstimate kde(const std::vector<std::array<double, 2>>& pts, const Lattice& lat,
                       std::array<double, 2> bandwidth = {0.0, 0.0}) {
  KdeEstimate k;
  k.samples = pts;
  k.bandwidth = bandwidth[0] > 0 ? bandwidth : silverman_bandwidth(pts, lat.dim);
  if (lat.dim == 1) k.bandwidth[1] = 0;
  std::vector<double> dens(lat.size(), 0.0);
  const double cut = 6.0;
  std::vector<double> wx(lat.n[0]), wy(lat.dim == 2 ? lat.n[1] : 1, 1.0);
  for (const auto& p : pts) {
    auto fill = [&](std::size_t axis, std::vector<double>& w, std::size_t& b, std::size_t& e) {
      const double h = k.bandwidth[axis];
      const double dx = lat.spacing(axis);
      const double lo = (p[axis] - cut * h - lat.lo[axis]) / dx;
      const double hi = (p[axis] + cut * h - lat.lo[axis]) / dx;
      b = static_cast<std::size_t>(std::clamp(std::floor(lo), 0.0, static_cast<double>(lat.n[axis])));
      e = static_cast<std::size_t>(std::clamp(std::ceil(hi) + 1, 0.0, static_cast<double>(lat.n[axis])));
      const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
      for (std::size_t i = b; i < e; ++i) {
        const double u = (lat.axis_point(axis, i) - p[axis]) / h;
        w[i] = norm * std::exp(-0.5 * u * u);
      }
    };
    std::size_t bx = 0, ex = 0, by = 0, ey = 1;
    fill(0, wx, bx, ex);
    if (lat.dim == 2) fill(1, wy, by, ey);
    for (std::size_t i = bx; i < ex; ++i) {
      if (lat.dim == 1) {
        dens[i] += wx[i];
        continue;
      }
      double* row = dens.data() + i * lat.n[1];
      for (std::size_t j = by; j < ey; ++j) row[j] += wx[i] * wy[j];
    }
  }
  k.grid = from_density(lat, std::move(dens));
  return k;
}

}  // namespace srmc

#endif  // SRMC_GRID_HPP
