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

// srmc command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "srmc.hpp"

namespace fs = std::filesystem;
using namespace srmc;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fills options of `sub` that were not given on the command line from a flat
// key=value file.  Keys are long option names without the dashes.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : load_config(path)) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw ConfigError(path + ": unknown key '" + key + "' for '" + sub->get_name() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// Options shared by the sampling subcommands.

struct ChainArgs {
  std::size_t k = 100;
  double step_size = 1.0;
  double noise = 1e-2;

  void add(CLI::App* a) {
    a->add_option("--k", k, "Langevin steps per chain")->capture_default_str();
    a->add_option("--step-size", step_size, "gradient coefficient of the update")->capture_default_str();
    a->add_option("--noise", noise, "noise standard deviation per step")->capture_default_str();
  }
  [[nodiscard]] SamplerConfig sampler() const {
    SamplerConfig c;
    c.steps = k;
    c.step_size = step_size;
    c.noise_scale = noise;
    return c;
  }
};

template <class T>
std::unique_ptr<EnergyNet<T>> load_net(const std::string& path) {
  auto ck = load_checkpoint<T>(path);
  return std::move(restore_state(ck).net);
}

std::size_t square_nrow(std::size_t n) {
  auto r = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : 0;
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data, out, resume, model = "conv", precision = "float";
  std::size_t resize = 0, count = 0, nf = 64, degree = 2, batch = 64, log_every = 100;
  std::uint64_t data_seed = 1, seed = 1, steps = 100000, checkpoint_every = 0;
  double sigma = 3e-2, lr = 1e-4, anneal_start = 0.75, anneal_final = 0.1;
  std::size_t sample_grid = 64;
  bool no_wall_clock = false;
  ChainArgs chain;
};

template <class T>
int run_train(const TrainArgs& a, bool seed_given) {
  DatasetSpec ds{a.data, a.resize, a.count, a.data_seed};
  const Tensor<T> data = load_dataset<T>(ds);
  ensure_dir(a.out);

  TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.batch = a.batch;
  cfg.sigma = a.sigma;
  cfg.sampler = a.chain.sampler();
  cfg.adam.lr = a.lr;
  cfg.anneal.start_fraction = a.anneal_start;
  cfg.anneal.final_factor = a.anneal_final;
  cfg.seed = a.seed;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.record_wall_clock = !a.no_wall_clock;
  cfg.validate();

  TrainState<T> state;
  if (!a.resume.empty()) {
    const auto ck = load_checkpoint<T>(a.resume);
    if (!seed_given) cfg.seed = ck.seed;
    else if (ck.seed != cfg.seed)
      std::cerr << "srmc: warning: --seed " << cfg.seed << " differs from the checkpoint seed " << ck.seed << '\n';
    state = restore_state(ck);
    state.net->check_input(data.slice_batch(0, 1));
  } else {
    NetDescriptor d;
    if (a.model == "conv") {
      if (data.rank() != 4 || data.dim(2) != data.dim(3))
        throw UsageError("--model conv needs square NCHW images, dataset is " + shape_str(data.shape()));
      d.family = Family::kConvNet;
      d.arch.input_size = data.dim(2);
      d.arch.channels = data.dim(1);
      d.arch.n_f = a.nf;
    } else if (a.model == "poly") {
      if (data.rank() != 2) throw UsageError("--model poly needs [N, D] data, dataset is " + shape_str(data.shape()));
      d.family = Family::kExpFamily;
      d.features = FeatureSpec::polynomial(data.dim(1), a.degree);
    } else {
      throw UsageError("--model must be conv or poly");
    }
    auto net = make_net<T>(d);
    if (auto* conv = dynamic_cast<ConvEnergyNet<T>*>(net.get())) conv->init_params(cfg.seed);
    state = TrainState<T>(std::move(net));
  }

  MetricsWriter metrics(join(a.out, "metrics.csv"), !a.resume.empty());
  auto save = [&](const std::string& name) { save_checkpoint(join(a.out, name), make_checkpoint(state, cfg.seed)); };
  try {
    train<T>(state, cfg, data, [&](const TrainState<T>& s) {
      const Metrics& m = s.metrics.back();
      metrics.write(m);
      if (cfg.checkpoint_every > 0 && s.iteration % cfg.checkpoint_every == 0) {
        metrics.flush();
        save("ckpt_" + std::to_string(s.iteration) + ".srmc");
      }
      if (a.log_every > 0 && (s.iteration % a.log_every == 0 || s.iteration == cfg.steps))
        std::printf("iter %llu  f_data %.5g  f_neg %.5g  |delta| %.4g  eta %.3g\n",
                    static_cast<unsigned long long>(s.iteration), m.f_data_mean, m.f_neg_mean, m.delta_norm, m.eta);
    });
  } catch (const TrainingDiverged& e) {
    metrics.flush();
    save("diverged.srmc");
    std::cerr << "srmc: training diverged: " << e.what() << "; last good state written to "
              << join(a.out, "diverged.srmc") << '\n';
    return 3;
  }
  metrics.flush();
  save("final.srmc");

  if (state.net->example_shape().size() == 3 && a.sample_grid > 0) {
    SamplerConfig sc = cfg.sampler;
    sc.clamp_output = true;
    const auto r = short_run_sample<T>(*state.net, sc, a.sample_grid, detail::iteration_seed(cfg.seed, cfg.steps, Purpose::kGeneric));
    emit_grid(r.samples, join(a.out, "samples.png"), square_nrow(a.sample_grid));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string ckpt, grid, tensor, precision = "float";
  std::size_t batch = 64, nrow = 0;
  std::uint64_t seed = 1;
  bool deterministic = false;
  ChainArgs chain;
};

template <class T>
int run_sample(const SampleArgs& a) {
  const auto net = load_net<T>(a.ckpt);
  SamplerConfig sc = a.chain.sampler();
  sc.deterministic = a.deterministic;
  sc.clamp_output = true;
  const auto r = short_run_sample<T>(*net, sc, a.batch, a.seed);
  if (!a.tensor.empty()) save_tensor_file(a.tensor, r.samples);
  if (!a.grid.empty()) {
    if (net->example_shape().size() != 3) throw UsageError("--grid needs an image model");
    const std::size_t nrow = a.nrow ? a.nrow : square_nrow(a.batch);
    if (nrow == 0) throw UsageError("--batch is not a perfect square; pass --nrow");
    emit_grid(r.samples, a.grid, nrow);
  }
  std::printf("samples %zu  mean |grad f| %.5g\n", r.samples.dim(0), r.mean_grad_norm);
  return 0;
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpArgs {
  std::string ckpt, grid, csv, precision = "float";
  std::size_t pairs = 4, points = 8;
  std::uint64_t seed = 1;
  ChainArgs chain;
};

template <class T>
int run_interpolate(const InterpArgs& a) {
  if (a.points < 2) throw UsageError("--points must be at least 2");
  const auto net = load_net<T>(a.ckpt);
  const Tensor<T> z = draw_p0<T>(2 * a.pairs, net->example_shape(), a.seed);
  InterpolationSpec spec;
  spec.steps = a.chain.k;
  spec.step_size = a.chain.step_size;
  for (std::size_t i = 0; i < a.points; ++i) spec.rhos.push_back(static_cast<double>(i) / static_cast<double>(a.points - 1));
  const auto xs = interpolate(*net, z.slice_batch(0, a.pairs), z.slice_batch(a.pairs, 2 * a.pairs), spec);

  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    f << "rho,f_mean\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Tensor<T> fv = net->forward(xs[i]);
      double s = 0;
      for (T v : fv.data()) s += static_cast<double>(v);
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", spec.rhos[i], s / static_cast<double>(fv.size()));
      f << buf;
    }
  }
  if (!a.grid.empty()) {
    // One row per pair, rho increasing left to right.
    std::vector<Tensor<T>> tiles;
    for (std::size_t p = 0; p < a.pairs; ++p)
      for (const auto& x : xs) tiles.push_back(x.slice_batch(p, p + 1));
    emit_grid(concat_batch<T>(tiles), a.grid, a.points);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconArgs {
  std::string ckpt, data, grid, csv, precision = "float";
  std::size_t resize = 0, count = 16, iters = 200, offset = 0;
  std::uint64_t seed = 1, data_seed = 1;
  ChainArgs chain;
};

template <class T>
int run_reconstruct(const ReconArgs& a) {
  const auto net = load_net<T>(a.ckpt);
  // Built-in sets are generated per index, so asking for just enough keeps
  // indices stable and lets --offset reach past the default size.
  const Tensor<T> data = load_dataset<T>({a.data, a.resize, a.offset + a.count, a.data_seed});
  if (a.offset + a.count > data.dim(0))
    throw UsageError("dataset has " + std::to_string(data.dim(0)) + " examples, asked for " +
                     std::to_string(a.offset + a.count));
  const Tensor<T> target = data.slice_batch(a.offset, a.offset + a.count);
  ReconstructionSpec spec;
  spec.max_iters = a.iters;
  spec.steps = a.chain.k;
  spec.step_size = a.chain.step_size;
  spec.seed = a.seed;
  const auto r = reconstruct(*net, target, spec);
  std::printf("reconstruction mse per pixel %.6g after %zu iterations\n", r.mse_per_pixel, r.trajectory.size() - 1);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    f << "t,mse\n";
    char buf[64];
    for (std::size_t t = 0; t < r.trajectory.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", t, r.trajectory[t]);
      f << buf;
    }
  }
  if (!a.grid.empty()) {
    const std::vector<Tensor<T>> rows{target, r.x_hat};
    emit_grid(concat_batch<T>(rows), a.grid, a.count);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// vary-k

struct VaryKArgs {
  std::string ckpt, out, precision = "float";
  std::vector<std::size_t> ks{0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
  std::size_t batch = 64;
  std::uint64_t seed = 1;
  ChainArgs chain;
};

template <class T>
int run_vary_k(const VaryKArgs& a) {
  const auto net = load_net<T>(a.ckpt);
  ensure_dir(a.out);
  const auto rows = vary_k<T>(*net, a.ks, a.batch, a.seed, a.chain.sampler());
  std::ofstream f(join(a.out, "vary_k.csv"));
  f << "k,saturation_fraction,mean_grad_norm\n";
  const bool images = net->example_shape().size() == 3;
  const std::size_t nrow = square_nrow(a.batch);
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", r.steps, r.saturation_fraction, r.mean_grad_norm);
    f << buf;
    std::printf("K %zu  saturation %.4f  mean |grad f| %.5g\n", r.steps, r.saturation_fraction, r.mean_grad_norm);
    if (images) emit_grid(r.samples, join(a.out, "k_" + std::to_string(r.steps) + ".png"), nrow);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// toy

struct ToyArgs {
  std::string target = "mixture1d", out;
  std::uint64_t steps = 0, seed = 1;
  std::size_t samples = 10000;
};

int run_toy(const ToyArgs& a) {
  const ToyTarget target = ToyTarget::by_name(a.target);
  ToyConfig cfg = ToyConfig::defaults_for(target);
  if (a.steps > 0) cfg.train.steps = a.steps;
  cfg.train.seed = a.seed;
  cfg.n_samples = a.samples;
  const ToyReport rep = run_toy_experiment(target, cfg);
  std::printf("target %s  updates %llu\n", target.name.c_str(), static_cast<unsigned long long>(rep.updates));
  std::printf("TV(kde, truth) %.4f\n", rep.tv_kde_truth);
  std::printf("entropy truth %.4f  ebm %.4f  kde %.4f\n", rep.entropy_truth, rep.entropy_ebm, rep.entropy_kde);
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_lattice_csv(join(a.out, "densities.csv"), {"truth", "ebm", "kde"}, {&rep.truth, &rep.ebm, &rep.kde.grid});
    if (target.dim == 1) {
      write_png(join(a.out, "densities.png"), line_plot({&rep.truth, &rep.ebm, &rep.kde.grid}));
    } else {
      write_png(join(a.out, "truth.png"), heatmap(rep.truth));
      write_png(join(a.out, "ebm.png"), heatmap(rep.ebm));
      write_png(join(a.out, "kde.png"), heatmap(rep.kde.grid));
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

bool verify_pythagorean_suite() {
  const auto lat = Lattice::line(-4, 6, 2048);
  const auto data = normalize(lat, [](const std::array<double, 2>& x) { return -2.0 * (x[0] - 1) * (x[0] - 1); });
  const auto p0 = normalize(lat, std::vector<double>(lat.size(), 0.0));
  const auto rep = verify_pythagorean(FeatureMap<double>(FeatureSpec::polynomial(1, 2)), data, p0);
  std::printf("pythagorean: %zu pairs  identity %.3g  entropy form %.3g  entropy excess %.3g  residual %.3g\n",
              rep.pairs.size(), rep.max_identity_violation, rep.max_entropy_form_violation, rep.max_entropy_excess,
              rep.estimating_residual);
  return rep.pairs.size() >= 20 && rep.passes(1e-8, 1e-9);
}

bool verify_monotone_suite() {
  const auto lat = Lattice::line(-3, 3, 600);
  const auto target = normalize(lat, [](const std::array<double, 2>& x) { return -2.0 * (x[0] - 0.5) * (x[0] - 0.5); });
  const auto p0 = normalize(lat, [](const std::array<double, 2>& x) { return std::abs(x[0]) <= 1 ? 0.0 : -1e300; });
  const auto rep = verify_monotone_kl(target, p0, {0, 1, 2, 5, 10, 25, 50, 100});
  std::printf("monotone-kl:");
  for (std::size_t i = 0; i < rep.steps.size(); ++i) std::printf("  K=%zu %.5g", rep.steps[i], rep.kl[i]);
  std::printf("\n  max increase %.3g\n", rep.max_increase);
  return rep.monotone(1e-9);
}

int run_verify(const std::string& suite) {
  bool ok = true;
  if (suite == "pythagorean" || suite == "all") ok = verify_pythagorean_suite() && ok;
  if (suite == "monotone-kl" || suite == "all") ok = verify_monotone_suite() && ok;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

template <class F>
int by_precision(const std::string& p, F&& f) {
  if (p == "float") return f(float{});
  if (p == "double") return f(double{});
  throw UsageError("--precision must be float or double");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-run MCMC energy-based models"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (overrides SRMC_THREADS)");

  const auto precision_opt = [](CLI::App* s, std::string& p) {
    s->add_option("--precision", p, "float or double arithmetic")->check(CLI::IsMember({"float", "double"}))->capture_default_str();
  };
  std::string config;
  const auto config_opt = [&](CLI::App* s) { s->add_option("--config", config, "flat key=value defaults file"); };

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "learn an energy with short-run Langevin negatives");
  train_cmd->add_option("--data", ta.data, "PNG directory, .srmt tensor file or built-in name")->required();
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  train_cmd->add_option("--resize", ta.resize, "center-crop and resize images to this size");
  train_cmd->add_option("--count", ta.count, "examples drawn from a built-in dataset");
  train_cmd->add_option("--data-seed", ta.data_seed, "seed for built-in datasets")->capture_default_str();
  train_cmd->add_option("--model", ta.model, "conv or poly")->capture_default_str();
  train_cmd->add_option("--nf", ta.nf, "ConvNet base width")->capture_default_str();
  train_cmd->add_option("--degree", ta.degree, "polynomial degree for --model poly")->capture_default_str();
  train_cmd->add_option("--steps", ta.steps, "learning iterations")->capture_default_str();
  train_cmd->add_option("--batch", ta.batch, "examples and chains per iteration")->capture_default_str();
  train_cmd->add_option("--sigma", ta.sigma, "data smoothing noise")->capture_default_str();
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--anneal-start", ta.anneal_start, "fraction of steps before annealing")->capture_default_str();
  train_cmd->add_option("--anneal-final", ta.anneal_final, "final lr and sigma factor")->capture_default_str();
  auto* seed_opt = train_cmd->add_option("--seed", ta.seed, "master seed")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "write ckpt_<iter>.srmc this often");
  train_cmd->add_option("--resume", ta.resume, "continue from a checkpoint");
  train_cmd->add_option("--log-every", ta.log_every, "progress line interval")->capture_default_str();
  train_cmd->add_option("--sample-grid", ta.sample_grid, "final sample grid size, 0 disables")->capture_default_str();
  train_cmd->add_flag("--no-wall-clock", ta.no_wall_clock, "write wall_ms as 0 so metrics are reproducible");
  ta.chain.add(train_cmd);
  precision_opt(train_cmd, ta.precision);
  config_opt(train_cmd);

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "draw short-run samples from a checkpoint");
  sample_cmd->add_option("--ckpt", sa.ckpt, "checkpoint file")->required();
  sample_cmd->add_option("--batch", sa.batch, "number of chains")->capture_default_str();
  sample_cmd->add_option("--seed", sa.seed, "sampling seed")->capture_default_str();
  sample_cmd->add_option("--grid", sa.grid, "PNG grid output");
  sample_cmd->add_option("--nrow", sa.nrow, "images per grid row");
  sample_cmd->add_option("--tensor", sa.tensor, ".srmt output of the raw samples");
  sample_cmd->add_flag("--deterministic", sa.deterministic, "disable the injected noise");
  sa.chain.add(sample_cmd);
  precision_opt(sample_cmd, sa.precision);
  config_opt(sample_cmd);

  InterpArgs ia;
  auto* interp_cmd = app.add_subcommand("interpolate", "noise-free chains along latent interpolations");
  interp_cmd->add_option("--ckpt", ia.ckpt, "checkpoint file")->required();
  interp_cmd->add_option("--pairs", ia.pairs, "latent pairs")->capture_default_str();
  interp_cmd->add_option("--points", ia.points, "rho values in [0, 1]")->capture_default_str();
  interp_cmd->add_option("--seed", ia.seed, "latent seed")->capture_default_str();
  interp_cmd->add_option("--grid", ia.grid, "PNG grid output");
  interp_cmd->add_option("--csv", ia.csv, "rho,f_mean rows");
  ia.chain.add(interp_cmd);
  precision_opt(interp_cmd, ia.precision);
  config_opt(interp_cmd);

  ReconArgs ra;
  auto* recon_cmd = app.add_subcommand("reconstruct", "infer latents that regenerate observed examples");
  recon_cmd->add_option("--ckpt", ra.ckpt, "checkpoint file")->required();
  recon_cmd->add_option("--data", ra.data, "examples to reconstruct")->required();
  recon_cmd->add_option("--resize", ra.resize, "center-crop and resize images to this size");
  recon_cmd->add_option("--data-seed", ra.data_seed, "seed for built-in datasets")->capture_default_str();
  recon_cmd->add_option("--count", ra.count, "examples to reconstruct")->capture_default_str();
  recon_cmd->add_option("--offset", ra.offset, "index of the first example")->capture_default_str();
  recon_cmd->add_option("--iters", ra.iters, "latent descent iterations")->capture_default_str();
  recon_cmd->add_option("--seed", ra.seed, "seed of the initial latents")->capture_default_str();
  recon_cmd->add_option("--grid", ra.grid, "targets above reconstructions");
  recon_cmd->add_option("--csv", ra.csv, "t,mse trajectory");
  ra.chain.add(recon_cmd);
  precision_opt(recon_cmd, ra.precision);
  config_opt(recon_cmd);

  VaryKArgs va;
  auto* vary_cmd = app.add_subcommand("vary-k", "sample a trained net with other chain lengths");
  vary_cmd->add_option("--ckpt", va.ckpt, "checkpoint file")->required();
  vary_cmd->add_option("--out", va.out, "output directory")->required();
  vary_cmd->add_option("--ks", va.ks, "chain lengths")->delimiter(',');
  vary_cmd->add_option("--batch", va.batch, "chains per K")->capture_default_str();
  vary_cmd->add_option("--seed", va.seed, "seed shared by every K")->capture_default_str();
  va.chain.add(vary_cmd);
  precision_opt(vary_cmd, va.precision);
  config_opt(vary_cmd);

  ToyArgs toy;
  auto* toy_cmd = app.add_subcommand("toy", "fit a low-dimensional toy and compare densities on a grid");
  toy_cmd->add_option("--target", toy.target, "gauss1d, mixture1d or mixture2d")->capture_default_str();
  toy_cmd->add_option("--steps", toy.steps, "learning iterations (0 keeps the preset)");
  toy_cmd->add_option("--seed", toy.seed, "training seed")->capture_default_str();
  toy_cmd->add_option("--samples", toy.samples, "short-run samples for the KDE")->capture_default_str();
  toy_cmd->add_option("--out", toy.out, "directory for densities.csv and plots");
  config_opt(toy_cmd);

  std::string suite = "all";
  auto* verify_cmd = app.add_subcommand("verify", "exact checks on grid-normalized models");
  verify_cmd->add_option("--suite", suite, "pythagorean, monotone-kl or all")
      ->check(CLI::IsMember({"pythagorean", "monotone-kl", "all"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads > 0) setenv("SRMC_THREADS", std::to_string(threads).c_str(), 1);
    CLI::App* sub = app.get_subcommands().front();
    if (sub != verify_cmd) apply_config(sub, config);

    if (sub == train_cmd)
      return by_precision(ta.precision, [&](auto t) { return run_train<decltype(t)>(ta, seed_opt->count() > 0); });
    if (sub == sample_cmd) return by_precision(sa.precision, [&](auto t) { return run_sample<decltype(t)>(sa); });
    if (sub == interp_cmd) return by_precision(ia.precision, [&](auto t) { return run_interpolate<decltype(t)>(ia); });
    if (sub == recon_cmd) return by_precision(ra.precision, [&](auto t) { return run_reconstruct<decltype(t)>(ra); });
    if (sub == vary_cmd) return by_precision(va.precision, [&](auto t) { return run_vary_k<decltype(t)>(va); });
    if (sub == toy_cmd) return run_toy(toy);
    return run_verify(suite);
  } catch (const std::exception& e) {
    std::cerr << "srmc: error: " << e.what() << '\n';
    return 1;
  }
}
