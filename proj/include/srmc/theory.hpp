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

#ifndef SRMC_THEORY_HPP
#define SRMC_THEORY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "srmc/energy.hpp"
#include "srmc/grid.hpp"
#include "srmc/rng.hpp"
#include "srmc/sampler.hpp"
#include "srmc/trainer.hpp"

namespace srmc {

// ---------------------------------------------------------------------------
// Exponential families on a lattice

/// Feature values at every lattice cell, [cells x F] row-major.
struct GridFeatures {
  std::size_t cells = 0;
  std::size_t count = 0;
  std::vector<double> values;

  [[nodiscard]] const double* row(std::size_t i) const { return values.data() + i * count; }
};

inline GridFeatures grid_features(const Lattice& lat, const FeatureMap<double>& map) {
  if (map.dim() != lat.dim) throw std::invalid_argument("grid_features: feature and lattice dims differ");
  GridFeatures g;
  g.cells = lat.size();
  g.count = map.size();
  g.values.resize(g.cells * g.count);
  for (std::size_t i = 0; i < g.cells; ++i) {
    const auto p = lat.point(i);
    map.features(p.data(), g.values.data() + i * g.count);
  }
  return g;
}

inline std::vector<double> moments(const GridModel& p, const GridFeatures& h) {
  std::vector<double> m(h.count, 0.0);
  for (std::size_t i = 0; i < h.cells; ++i)
    for (std::size_t j = 0; j < h.count; ++j) m[j] += p.density[i] * h.row(i)[j];
  for (auto& v : m) v *= p.lattice.cell_volume();
  return m;
}

/// p(x) proportional to exp(base(x) + <beta, h(x)>).
inline GridModel tilt(const Lattice& lat, const std::vector<double>& base, const GridFeatures& h,
                      const std::vector<double>& beta) {
  std::vector<double> f(lat.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    double s = base.empty() ? 0.0 : base[i];
    for (std::size_t j = 0; j < h.count; ++j) s += beta[j] * h.row(i)[j];
    f[i] = s;
  }
  return normalize(lat, f);
}

class NewtonFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MomentMatch {
  std::vector<double> beta;
  GridModel model;
  double residual = 0;  // ||E_model[h] - target||_inf
  std::size_t iterations = 0;
};

/// Solves E_p[h] = target over the family p ∝ exp(base + <beta, h>) by damped
/// Newton on the convex dual log Z(beta) - <beta, target>.  With an empty
/// base this is the MLE projection onto the exponential family.
inline MomentMatch match_moments(const Lattice& lat, const std::vector<double>& base, const GridFeatures& h,
                                 const std::vector<double>& target, std::vector<double> beta0 = {},
                                 double tol = 1e-13, std::size_t max_iter = 200) {
  const std::size_t F = h.count;
  if (target.size() != F) throw std::invalid_argument("match_moments: target has wrong length");
  std::vector<double> beta = beta0.empty() ? std::vector<double>(F, 0.0) : std::move(beta0);
  auto dual = [&](const GridModel& p, const std::vector<double>& b) {
    double s = p.log_z;
    for (std::size_t j = 0; j < F; ++j) s -= b[j] * target[j];
    return s;
  };
  MomentMatch out;
  GridModel p = tilt(lat, base, h, beta);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const std::vector<double> m = moments(p, h);
    Eigen::VectorXd g(static_cast<Eigen::Index>(F));
    double res = 0;
    for (std::size_t j = 0; j < F; ++j) {
      g(static_cast<Eigen::Index>(j)) = m[j] - target[j];
      res = std::max(res, std::abs(m[j] - target[j]));
    }
    out.iterations = it;
    if (res < tol) {
      out.beta = beta;
      out.model = std::move(p);
      out.residual = res;
      return out;
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(F));
    for (std::size_t i = 0; i < h.cells; ++i) {
      const double w = p.density[i] * lat.cell_volume();
      for (std::size_t a = 0; a < F; ++a)
        for (std::size_t b = 0; b < F; ++b)
          cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
              w * (h.row(i)[a] - m[a]) * (h.row(i)[b] - m[b]);
    }
    const Eigen::VectorXd step = cov.ldlt().solve(-g);
    if (!step.allFinite()) throw NewtonFailure("match_moments: singular feature covariance");
    const double f0 = dual(p, beta);
    const double slope = g.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> cand(beta);
      for (std::size_t j = 0; j < F; ++j) cand[j] += t * step(static_cast<Eigen::Index>(j));
      GridModel q = tilt(lat, base, h, cand);
      // Near the optimum the predicted decrease is below the rounding of the
      // dual itself, so the Armijo test carries no information.
      const bool flat = -slope < 1e-13 * (1.0 + std::abs(f0));
      if (flat || dual(q, cand) <= f0 + 1e-4 * t * slope) {
        beta = std::move(cand);
        p = std::move(q);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) throw NewtonFailure("match_moments: line search failed");
  }
  const std::vector<double> m = moments(p, h);
  double res = 0;
  for (std::size_t j = 0; j < F; ++j) res = std::max(res, std::abs(m[j] - target[j]));
  if (res >= tol * 1e3) throw NewtonFailure("match_moments: no convergence, residual " + std::to_string(res));
  out.beta = beta;
  out.model = std::move(p);
  out.residual = res;
  out.iterations = max_iter;
  return out;
}

// ---------------------------------------------------------------------------
// Pythagorean identities

struct PythagoreanPair {
  double kl_p_theta = 0;      // KL(p | p_theta)
  double kl_p_hat = 0;        // KL(p | p_hat)
  double kl_hat_theta = 0;    // KL(p_hat | p_theta)
  double identity_violation = 0;
  double entropy_form_violation = 0;  // |KL(p | p_hat) - (H(p_hat) - H(p))|
  double p0_form_violation = 0;       // |KL(p | p_hat) - (KL(p | p0) - KL(p_hat | p0))|
  double entropy_p = 0;
  double omega_residual = 0;
};

struct PythagoreanReport {
  std::vector<double> theta_hat;
  double estimating_residual = 0;  // ||E_{p_hat}[h] - E_data[h]||_inf
  double entropy_hat = 0;
  std::vector<PythagoreanPair> pairs;
  double max_identity_violation = 0;
  double max_entropy_form_violation = 0;
  double max_entropy_excess = 0;  // max over swept p of H(p) - H(p_hat)

  [[nodiscard]] bool passes(double tol = 1e-8, double entropy_tol = 1e-9) const {
    return max_identity_violation < tol && max_entropy_form_violation < tol && max_entropy_excess <= entropy_tol;
  }
};

struct PythagoreanOptions {
  std::size_t pairs = 20;
  std::uint64_t seed = 7;
  double tilt_scale = 0.05;
  double theta_linear = 1.5;
  double theta_quadratic_lo = -2.0, theta_quadratic_hi = -0.1;
};

/// Checks KL(p|p_theta) = KL(p|p_hat) + KL(p_hat|p_theta) and
/// KL(p|p_hat) = H(p_hat) - H(p) for members p of the moment set Omega.
/// Omega members are built by tilting p_hat along functions orthogonal (grid
/// inner product) to {1, h} and re-projecting onto the moment constraint.
/// p_theta draws use the first two features as (linear, quadratic) weights.
inline PythagoreanReport verify_pythagorean(const FeatureMap<double>& map, const GridModel& p_data,
                                            const GridModel& p0, const PythagoreanOptions& opt = {}) {
  const Lattice& lat = p_data.lattice;
  require_same_lattice(p_data, p0, "verify_pythagorean");
  const GridFeatures h = grid_features(lat, map);
  const std::vector<double> mu = moments(p_data, h);
  MomentMatch hat = match_moments(lat, {}, h, mu);

  PythagoreanReport rep;
  rep.theta_hat = hat.beta;
  rep.estimating_residual = hat.residual;
  rep.entropy_hat = entropy(hat.model);

  // Orthogonal tilt directions: cubic and quartic monomials (and a sine),
  // Gram-Schmidt against {1, h_1, ..., h_F}.
  const std::size_t cells = lat.size();
  const double dv = lat.cell_volume();
  std::vector<std::vector<double>> basis;
  basis.emplace_back(cells, 1.0);
  for (std::size_t j = 0; j < h.count; ++j) {
    std::vector<double> v(cells);
    for (std::size_t i = 0; i < cells; ++i) v[i] = h.row(i)[j];
    basis.push_back(std::move(v));
  }
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < cells; ++i) s += a[i] * b[i];
    return s * dv;
  };
  auto orthonormalize = [&](std::vector<double> v, std::vector<std::vector<double>>& against) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : against) {
        const double c = dot(v, b) / dot(b, b);
        for (std::size_t i = 0; i < cells; ++i) v[i] -= c * b[i];
      }
    const double n = std::sqrt(dot(v, v));
    for (auto& x : v) x /= n;
    return v;
  };
  std::vector<std::vector<double>> dirs;
  const double span = lat.hi[0] - lat.lo[0];
  for (int kind = 0; kind < 3; ++kind) {
    std::vector<double> v(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      const auto p = lat.point(i);
      const double x = (p[0] - lat.lo[0]) / span * 2.0 - 1.0;
      v[i] = kind == 0 ? x * x * x : kind == 1 ? x * x * x * x : std::sin(3.0 * std::numbers::pi * x);
      if (lat.dim == 2) v[i] *= kind == 2 ? std::cos(2.0 * (p[1] - lat.lo[1]) / span) : 1.0;
    }
    auto d = orthonormalize(std::move(v), basis);
    basis.push_back(d);
    dirs.push_back(std::move(d));
  }

  RandomStream rng(opt.seed, 0, Purpose::kGeneric);
  for (std::size_t r = 0; r < opt.pairs; ++r) {
    std::vector<double> base(hat.model.log_density);
    for (const auto& d : dirs) {
      const double a = opt.tilt_scale * (2.0 * rng.uniform01() - 1.0) * std::sqrt(span);
      for (std::size_t i = 0; i < cells; ++i) base[i] += a * d[i];
    }
    const MomentMatch omega = match_moments(lat, base, h, mu);
    std::vector<double> theta(h.count, 0.0);
    theta[0] = opt.theta_linear * (2.0 * rng.uniform01() - 1.0);
    if (h.count > 1) theta[1] = rng.uniform(opt.theta_quadratic_lo, opt.theta_quadratic_hi);
    const GridModel p_theta = tilt(lat, {}, h, theta);

    PythagoreanPair pr;
    const GridModel& p = omega.model;
    pr.kl_p_theta = kl(p, p_theta);
    pr.kl_p_hat = kl(p, hat.model);
    pr.kl_hat_theta = kl(hat.model, p_theta);
    pr.identity_violation = std::abs(pr.kl_p_theta - pr.kl_p_hat - pr.kl_hat_theta);
    pr.entropy_p = entropy(p);
    pr.entropy_form_violation = std::abs(pr.kl_p_hat - (rep.entropy_hat - pr.entropy_p));
    pr.p0_form_violation = std::abs(pr.kl_p_hat - (kl(p, p0) - kl(hat.model, p0)));
    pr.omega_residual = omega.residual;
    rep.max_identity_violation = std::max(rep.max_identity_violation, pr.identity_violation);
    rep.max_entropy_form_violation =
        std::max({rep.max_entropy_form_violation, pr.entropy_form_violation, pr.p0_form_violation});
    rep.max_entropy_excess = std::max(rep.max_entropy_excess, pr.entropy_p - rep.entropy_hat);
    rep.pairs.push_back(pr);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// KL(q_K | p_theta) along an exact lattice chain

/// Metropolis-adjusted Langevin kernel restricted to a 1-D lattice: Gaussian
/// proposal N(x + tau/2 d log p, tau) over cells, then an acceptance that
/// makes the target exactly stationary, so KL(q_K | target) cannot increase.
struct LatticeKernelConfig {
  double tau = 0.1;
};

struct MonotoneKlReport {
  std::vector<std::size_t> steps;
  std::vector<double> kl;
  double max_increase = 0;  // max over k of KL_k - KL_{k-1}

  [[nodiscard]] bool monotone(double slack = 1e-9) const { return max_increase <= slack; }
};

inline std::vector<double> lattice_transition_matrix(const GridModel& target, const LatticeKernelConfig& cfg) {
  const Lattice& lat = target.lattice;
  if (lat.dim != 1) throw std::invalid_argument("lattice_transition_matrix: 1-D lattices only");
  const std::size_t n = lat.size();
  const double dx = lat.spacing(0);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 == n ? n - 1 : i + 1;
    score[i] = (target.log_density[b] - target.log_density[a]) / (static_cast<double>(b - a) * dx);
  }
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = lat.axis_point(0, i) + 0.5 * cfg.tau * score[i];
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = lat.axis_point(0, j) - mean;
      Q[i * n + j] = std::exp(-0.5 * u * u / cfg.tau);
      s += Q[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) Q[i * n + j] /= s;
  }
  std::vector<double> P(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double fwd = target.density[i] * Q[i * n + j];
      const double rev = target.density[j] * Q[j * n + i];
      const double a = fwd > 0 ? std::min(1.0, rev / fwd) : 1.0;
      P[i * n + j] = Q[i * n + j] * a;
      off += P[i * n + j];
    }
    P[i * n + i] = 1.0 - off;
  }
  return P;
}

inline MonotoneKlReport verify_monotone_kl(const GridModel& target, const GridModel& p0,
                                           std::vector<std::size_t> steps, const LatticeKernelConfig& cfg = {}) {
  require_same_lattice(target, p0, "verify_monotone_kl");
  std::sort(steps.begin(), steps.end());
  const std::size_t n = target.lattice.size();
  const std::vector<double> P = lattice_transition_matrix(target, cfg);
  std::vector<double> q(p0.density);
  std::size_t k = 0;
  MonotoneKlReport rep;
  auto kl_now = [&]() {
    GridModel g = from_density(target.lattice, q);
    return kl(g, target);
  };
  for (std::size_t want : steps) {
    while (k < want) {
      std::vector<double> next(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (q[i] == 0) continue;
        const double* row = P.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) next[j] += q[i] * row[j];
      }
      q = std::move(next);
      ++k;
    }
    rep.steps.push_back(want);
    rep.kl.push_back(kl_now());
    if (rep.kl.size() > 1) rep.max_increase = std::max(rep.max_increase, rep.kl.back() - rep.kl[rep.kl.size() - 2]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Toy targets and the toy experiment

/// Isotropic Gaussian mixture in one or two dimensions.
struct ToyTarget {
  std::string name;
  std::size_t dim = 1;
  std::vector<double> weights;
  std::vector<std::array<double, 2>> means;
  std::vector<double> sds;

  [[nodiscard]] double density(const std::array<double, 2>& x) const {
    double s = 0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      double d2 = 0;
      for (std::size_t a = 0; a < dim; ++a) d2 += (x[a] - means[c][a]) * (x[a] - means[c][a]);
      const double var = sds[c] * sds[c];
      s += weights[c] * std::exp(-0.5 * d2 / var) / std::pow(2.0 * std::numbers::pi * var, 0.5 * static_cast<double>(dim));
    }
    return s;
  }

  template <class T>
  [[nodiscard]] Tensor<T> sample(std::size_t n, std::uint64_t seed) const {
    Tensor<T> out(Shape{n, dim});
    auto d = out.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      RandomStream rng(seed, i, Purpose::kDataset);
      const double u = rng.uniform01();
      std::size_t c = 0;
      double acc = weights[0];
      while (u > acc && c + 1 < weights.size()) acc += weights[++c];
      for (std::size_t a = 0; a < dim; ++a) d[i * dim + a] = static_cast<T>(means[c][a] + sds[c] * rng.normal());
    }
    return out;
  }

  [[nodiscard]] GridModel on(const Lattice& lat) const {
    std::vector<double> v(lat.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = density(lat.point(i));
    return from_density(lat, std::move(v));
  }

  /// N(1, 0.25).
  static ToyTarget gauss1d() { return {"gauss1d", 1, {1.0}, {{1.0, 0.0}}, {0.5}}; }
  /// 0.5 N(-1, 0.09) + 0.5 N(1, 0.09).
  static ToyTarget mixture1d() { return {"mixture1d", 1, {0.5, 0.5}, {{-1.0, 0.0}, {1.0, 0.0}}, {0.3, 0.3}}; }
  /// Four equal modes at (+-1, +-1), sd 0.45.
  static ToyTarget mixture2d() {
    return {"mixture2d", 2, {0.25, 0.25, 0.25, 0.25}, {{-1.0, -1.0}, {-1.0, 1.0}, {1.0, -1.0}, {1.0, 1.0}},
            {0.45, 0.45, 0.45, 0.45}};
  }

  static ToyTarget by_name(const std::string& name) {
    if (name == "gauss1d") return gauss1d();
    if (name == "mixture1d") return mixture1d();
    if (name == "mixture2d") return mixture2d();
    throw std::invalid_argument("unknown toy distribution '" + name + "'");
  }
};

struct ToyConfig {
  TrainConfig train{};
  FitOptions fit{};
  FeatureSpec features{};
  std::size_t n_data = 20000;
  std::size_t n_samples = 10000;
  Lattice lattice{};
  std::uint64_t data_seed = 11;
  std::uint64_t sample_seed = 12;

  /// Settings used for the 1-D and 2-D mixture reproductions.
  static ToyConfig defaults_for(const ToyTarget& target) {
    ToyConfig c;
    c.train.batch = 512;
    c.train.sigma = 0.03;
    c.train.sampler.steps = 100;
    c.train.adam.lr = 1e-3;
    c.train.record_wall_clock = false;
    c.fit.precheck_samples = 0;
    c.fit.tolerance = 0.0;  // run the full schedule
    if (target.dim == 1) {
      c.train.steps = 4000;
      c.features = FeatureSpec::rbf(1, 11, -2.5, 2.5, 0.5);
      c.lattice = Lattice::line(-3.0, 3.0, 1024);
    } else {
      c.train.steps = 1500;
      c.features = FeatureSpec::rbf(2, 7, -2.5, 2.5, 0.6);
      c.lattice = Lattice::box(-3.0, 3.0, 256);
    }
    return c;
  }
};

struct ToyReport {
  ToyTarget target;
  GridModel truth;
  GridModel ebm;  // exp(f / T_L) normalized on the lattice
  KdeEstimate kde;
  double tv_kde_truth = 0;
  double entropy_truth = 0;
  double entropy_ebm = 0;
  double entropy_kde = 0;
  std::array<double, 2> sample_mean{0.0, 0.0};
  std::uint64_t updates = 0;
  std::vector<double> theta;
};

/// Grid-normalized exp(f(x) / temperature) for a low-dimensional energy.
inline GridModel energy_on_lattice(const EnergyNet<double>& net, const Lattice& lat, double temperature) {
  const std::size_t D = lat.dim;
  Tensor<double> pts(Shape{lat.size(), D});
  auto d = pts.mutable_data();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const auto p = lat.point(i);
    for (std::size_t a = 0; a < D; ++a) d[i * D + a] = p[a];
  }
  const Tensor<double> f = net.forward(pts);
  std::vector<double> v(f.data().begin(), f.data().end());
  for (auto& x : v) x /= temperature;
  return normalize(lat, v);
}

inline ToyReport run_toy_experiment(const ToyTarget& target, const ToyConfig& cfg) {
  if (target.dim != cfg.lattice.dim || target.dim != cfg.features.dim)
    throw std::invalid_argument("run_toy_experiment: target, lattice and features must share a dimension");
  ToyReport rep;
  rep.target = target;
  const Tensor<double> data = target.sample<double>(cfg.n_data, cfg.data_seed);
  auto fit = fit_toy<double>(std::make_unique<ExpFamilyEnergy<double>>(cfg.features), data, cfg.train, cfg.fit);
  rep.updates = fit.updates;
  const auto& net = *fit.state.net;
  rep.theta.assign(net.params()[0].value.data().begin(), net.params()[0].value.data().end());

  const Tensor<double> xs = short_run_sample<double>(net, cfg.train.sampler, cfg.n_samples, cfg.sample_seed).samples;
  std::vector<std::array<double, 2>> pts(cfg.n_samples, {0.0, 0.0});
  for (std::size_t i = 0; i < cfg.n_samples; ++i)
    for (std::size_t a = 0; a < target.dim; ++a) {
      pts[i][a] = xs[i * target.dim + a];
      rep.sample_mean[a] += pts[i][a] / static_cast<double>(cfg.n_samples);
    }
  rep.truth = target.on(cfg.lattice);
  rep.kde = kde(pts, cfg.lattice);
  rep.ebm = energy_on_lattice(net, cfg.lattice, langevin_temperature(cfg.train.sampler));
  rep.tv_kde_truth = total_variation(rep.kde.grid, rep.truth);
  rep.entropy_truth = entropy(rep.truth);
  rep.entropy_ebm = entropy(rep.ebm);
  rep.entropy_kde = entropy(rep.kde.grid);
  return rep;
}

}  // namespace srmc

#endif  // SRMC_THEORY_HPP
