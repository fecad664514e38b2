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

#ifndef SRMC_REPORT_HPP
#define SRMC_REPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srmc/grid.hpp"
#include "srmc/png.hpp"
#include "srmc/trainer.hpp"

namespace srmc {

// ---------------------------------------------------------------------------
// Flat key=value config files.  '#' starts a comment; blank lines ignored.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::map<std::string, std::string> parse_config(std::istream& in, const std::string& origin = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(f, path);
}

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char* kMetricsHeader = "iteration,f_data_mean,f_neg_mean,delta_norm,grad_mag,eta,sigma,wall_ms";

inline std::string format_metrics_row(const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f",
                static_cast<unsigned long long>(m.iteration), m.f_data_mean, m.f_neg_mean, m.delta_norm, m.grad_mag,
                m.eta, m.sigma, m.wall_ms);
  return buf;
}

class MetricsWriter {
 public:
  /// append=true keeps existing rows (resume) and skips the header if present.
  explicit MetricsWriter(const std::string& path, bool append = false) {
    bool need_header = true;
    if (append) {
      std::ifstream probe(path);
      std::string first;
      if (probe && std::getline(probe, first) && first == kMetricsHeader) need_header = false;
    }
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open metrics file '" + path + "'");
    if (need_header) out_ << kMetricsHeader << '\n';
  }
  void write(const Metrics& m) { out_ << format_metrics_row(m) << '\n'; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Plots rendered straight to PNG, plus lattice CSVs.

/// Grayscale heatmap of a 2-D lattice density, max-normalized, y up.
inline Image8 heatmap(const GridModel& g) {
  if (g.lattice.dim != 2) throw std::invalid_argument("heatmap: 2-D lattice required");
  const std::size_t nx = g.lattice.n[0], ny = g.lattice.n[1];
  const double top = *std::max_element(g.density.begin(), g.density.end());
  Image8 img{nx, ny, 1, std::vector<std::uint8_t>(nx * ny)};
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double v = top > 0 ? g.density[i * ny + j] / top : 0.0;
      img.pixels[(ny - 1 - j) * nx + i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
  return img;
}

/// Line plot of 1-D lattice densities on a shared y scale, one color each.
inline Image8 line_plot(const std::vector<const GridModel*>& curves, std::size_t width = 480, std::size_t height = 240) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 4> kColors{{{0, 0, 0}, {200, 30, 30}, {30, 90, 200}, {20, 150, 60}}};
  Image8 img{width, height, 3, std::vector<std::uint8_t>(width * height * 3, 255)};
  double top = 0;
  for (const auto* c : curves) top = std::max(top, *std::max_element(c->density.begin(), c->density.end()));
  if (top <= 0) return img;
  auto put = [&](long x, long y, const std::array<std::uint8_t, 3>& col) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
    for (int c = 0; c < 3; ++c) img.pixels[(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3 + c] = col[c];
  };
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const GridModel& g = *curves[k];
    if (g.lattice.dim != 1) throw std::invalid_argument("line_plot: 1-D lattices required");
    const std::size_t n = g.lattice.n[0];
    long prev = -1;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = std::min(n - 1, x * n / width);
      const long y = static_cast<long>(height - 1) -
                     std::lround(g.density[i] / top * static_cast<double>(height - 10));
      const long a = prev < 0 ? y : std::min(prev, y), b = prev < 0 ? y : std::max(prev, y);
      for (long yy = a; yy <= b; ++yy) put(static_cast<long>(x), yy, kColors[k % kColors.size()]);
      prev = y;
    }
  }
  return img;
}

/// Columns x (or x1,x2), then one per named model.
inline void write_lattice_csv(const std::string& path, const std::vector<std::string>& names,
                              const std::vector<const GridModel*>& models) {
  if (names.size() != models.size() || models.empty()) throw std::invalid_argument("write_lattice_csv: bad columns");
  const Lattice& lat = models[0]->lattice;
  for (const auto* m : models) require_same_lattice(*models[0], *m, "write_lattice_csv");
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << (lat.dim == 1 ? "x" : "x1,x2");
  for (const auto& n : names) f << ',' << n;
  f << '\n';
  char buf[64];
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const auto p = lat.point(i);
    std::snprintf(buf, sizeof buf, "%.9g", p[0]);
    f << buf;
    if (lat.dim == 2) {
      std::snprintf(buf, sizeof buf, ",%.9g", p[1]);
      f << buf;
    }
    for (const auto* m : models) {
      std::snprintf(buf, sizeof buf, ",%.9g", m->density[i]);
      f << buf;
    }
    f << '\n';
  }
}

}  // namespace srmc

#endif  // SRMC_REPORT_HPP
