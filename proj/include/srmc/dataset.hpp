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

#ifndef SRMC_DATASET_HPP
#define SRMC_DATASET_HPP

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srmc/png.hpp"
#include "srmc/rng.hpp"
#include "srmc/tensor.hpp"
#include "srmc/theory.hpp"

namespace srmc {

static_assert(std::endian::native == std::endian::little, "srmc file formats assume a little-endian host");

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double pixel_to_unit(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

/// Clamp to [-1, 1], then round to the nearest of the 256 levels.
inline std::uint8_t unit_to_pixel(double v) {
  const double c = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((c + 1.0) * 127.5));
}

// ---------------------------------------------------------------------------
// Image <-> tensor

/// Center crop to a square, then bilinear resize to size x size.
inline Image8 center_crop_resize(const Image8& in, std::size_t size) {
  const std::size_t side = std::min(in.width, in.height);
  const std::size_t x0 = (in.width - side) / 2, y0 = (in.height - side) / 2;
  Image8 out{size, size, in.channels, std::vector<std::uint8_t>(size * size * in.channels)};
  const double scale = static_cast<double>(side) / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double sy = std::clamp((static_cast<double>(y) + 0.5) * scale - 0.5, 0.0, static_cast<double>(side - 1));
      const double sx = std::clamp((static_cast<double>(x) + 0.5) * scale - 0.5, 0.0, static_cast<double>(side - 1));
      const std::size_t iy = static_cast<std::size_t>(sy), ix = static_cast<std::size_t>(sx);
      const std::size_t jy = std::min(iy + 1, side - 1), jx = std::min(ix + 1, side - 1);
      const double fy = sy - static_cast<double>(iy), fx = sx - static_cast<double>(ix);
      for (std::size_t c = 0; c < in.channels; ++c) {
        const double v = (1 - fy) * ((1 - fx) * in.at(y0 + iy, x0 + ix, c) + fx * in.at(y0 + iy, x0 + jx, c)) +
                         fy * ((1 - fx) * in.at(y0 + jy, x0 + ix, c) + fx * in.at(y0 + jy, x0 + jx, c));
        out.pixels[(y * size + x) * in.channels + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  return out;
}

/// Appends img as CHW values in [-1, 1].
template <class T>
void append_image(const Image8& img, std::vector<T>& out) {
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.push_back(static_cast<T>(pixel_to_unit(img.at(y, x, c))));
}

/// Tiles an NCHW batch nrow images per row.  Values are clamped to [-1, 1]
/// and mapped to 8 bits; gaps between tiles take pad_value.
template <class T>
Image8 make_grid(const Tensor<T>& x, std::size_t nrow = 0, std::size_t padding = 0, std::uint8_t pad_value = 0) {
  if (x.rank() != 4) throw ShapeError("make_grid: expected an NCHW batch, got " + shape_str(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C != 1 && C != 3) throw ShapeError("make_grid: images need 1 or 3 channels");
  if (N == 0) throw ShapeError("make_grid: empty batch");
  if (nrow == 0) {
    nrow = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(N))));
    if (nrow * nrow != N) throw ShapeError("make_grid: batch of " + std::to_string(N) + " is not a perfect square; pass nrow");
  }
  const std::size_t ncol = nrow, nrows = (N + ncol - 1) / ncol;
  Image8 img;
  img.channels = C;
  img.width = ncol * W + (ncol + 1) * padding;
  img.height = nrows * H + (nrows + 1) * padding;
  img.pixels.assign(img.width * img.height * C, pad_value);
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t gy = padding + (n / ncol) * (H + padding), gx = padding + (n % ncol) * (W + padding);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          img.pixels[((gy + y) * img.width + gx + xx) * C + c] =
              unit_to_pixel(static_cast<double>(x[((n * C + c) * H + y) * W + xx]));
  }
  return img;
}

template <class T>
void emit_grid(const Tensor<T>& x, const std::string& path, std::size_t nrow = 0, std::size_t padding = 0) {
  write_png(path, make_grid(x, nrow, padding));
}

// ---------------------------------------------------------------------------
// Raw tensor files: "SRMT", u32 version, u32 rank, u64 extents, f64 values.

inline constexpr std::uint32_t kTensorFileVersion = 1;

template <class T>
void save_tensor_file(const std::string& path, const Tensor<T>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot open '" + path + "' for writing");
  f.write("SRMT", 4);
  const std::uint32_t ver = kTensorFileVersion, rank = static_cast<std::uint32_t>(t.rank());
  f.write(reinterpret_cast<const char*>(&ver), 4);
  f.write(reinterpret_cast<const char*>(&rank), 4);
  for (std::size_t d : t.shape()) {
    const std::uint64_t e = d;
    f.write(reinterpret_cast<const char*>(&e), 8);
  }
  for (T v : t.data()) {
    const double d = static_cast<double>(v);
    f.write(reinterpret_cast<const char*>(&d), 8);
  }
  if (!f) throw DatasetError("write failed for '" + path + "'");
}

template <class T>
Tensor<T> load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot open tensor file '" + path + "'");
  char magic[4];
  std::uint32_t ver = 0, rank = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&ver), 4);
  f.read(reinterpret_cast<char*>(&rank), 4);
  if (!f || std::memcmp(magic, "SRMT", 4) != 0) throw DatasetError("'" + path + "' is not an srmc tensor file");
  if (ver > kTensorFileVersion)
    throw DatasetError("tensor file version " + std::to_string(ver) + " is newer than supported (" +
                       std::to_string(kTensorFileVersion) + ")");
  if (rank == 0 || rank > 8) throw DatasetError("tensor file has invalid rank");
  Shape s(rank);
  for (auto& d : s) {
    std::uint64_t e = 0;
    f.read(reinterpret_cast<char*>(&e), 8);
    d = static_cast<std::size_t>(e);
  }
  const std::size_t n = shape_numel(s);
  std::vector<double> buf(n);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8));
  if (!f) throw DatasetError("tensor file '" + path + "' is truncated");
  std::vector<T> v(buf.begin(), buf.end());
  Tensor<T> t(std::move(s), std::move(v));
  require_finite<T>(t.data(), "tensor file");
  return t;
}

// ---------------------------------------------------------------------------
// Procedural image set: one anti-aliased disk, square or ring per image on a
// dark background, random position, size and brightness.

template <class T>
Tensor<T> make_shapes(std::size_t n, std::size_t size, std::uint64_t seed) {
  Tensor<T> out(Shape{n, 1, size, size});
  auto d = out.mutable_data();
  const double S = static_cast<double>(size);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng(seed, i, Purpose::kDataset);
    const std::uint64_t kind = rng.below(3);
    const double r = rng.uniform(0.14, 0.28) * S;
    const double cx = rng.uniform(r + 1, S - r - 1), cy = rng.uniform(r + 1, S - r - 1);
    const double fg = rng.uniform(0.3, 1.0), bg = rng.uniform(-1.0, -0.7);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        // 4x4 supersampling for coverage.
        double cover = 0;
        for (int sy = 0; sy < 4; ++sy)
          for (int sx = 0; sx < 4; ++sx) {
            const double px = static_cast<double>(x) + (sx + 0.5) / 4.0 - cx;
            const double py = static_cast<double>(y) + (sy + 0.5) / 4.0 - cy;
            bool in = false;
            if (kind == 0) in = px * px + py * py <= r * r;
            else if (kind == 1) in = std::abs(px) <= 0.85 * r && std::abs(py) <= 0.85 * r;
            else {
              const double q = std::sqrt(px * px + py * py);
              in = q <= r && q >= 0.55 * r;
            }
            cover += in ? 1.0 / 16.0 : 0.0;
          }
        d[(i * size + y) * size + x] = static_cast<T>(bg + cover * (fg - bg));
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset handles

struct DatasetSpec {
  std::string source;            // directory, *.srmt tensor file, or a built-in name
  std::size_t resize = 0;        // center-crop + resize to this size; 0 keeps native size
  std::size_t count = 0;         // for built-ins; 0 picks a default
  std::uint64_t seed = 1;        // for built-ins
};

inline bool is_builtin_dataset(const std::string& s) {
  return s == "gauss1d" || s == "mixture1d" || s == "mixture2d" || s == "shapes32";
}

template <class T>
Tensor<T> load_png_directory(const std::string& dir, std::size_t resize) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DatasetError("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.push_back(e.path().string());
  }
  if (files.empty()) throw DatasetError("no PNG images in '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<T> values;
  std::size_t W = 0, H = 0, C = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image8 img;
    try {
      img = read_png(files[i]);
    } catch (const ImageError& e) {
      throw DatasetError(e.what());
    }
    if (resize > 0) img = center_crop_resize(img, resize);
    if (i == 0) {
      W = img.width;
      H = img.height;
      C = img.channels;
    } else if (img.width != W || img.height != H || img.channels != C) {
      throw DatasetError("'" + files[i] + "' is " + std::to_string(img.width) + "x" + std::to_string(img.height) + "x" +
                         std::to_string(img.channels) + " but earlier images are " + std::to_string(W) + "x" +
                         std::to_string(H) + "x" + std::to_string(C) + "; pass a resize size");
    }
    append_image(img, values);
  }
  return Tensor<T>(Shape{files.size(), C, H, W}, std::move(values));
}

template <class T>
Tensor<T> load_dataset(const DatasetSpec& spec) {
  if (spec.source.empty()) throw DatasetError("no dataset given");
  if (is_builtin_dataset(spec.source)) {
    if (spec.source == "shapes32") return make_shapes<T>(spec.count ? spec.count : 500, 32, spec.seed);
    return ToyTarget::by_name(spec.source).sample<T>(spec.count ? spec.count : 20000, spec.seed);
  }
  namespace fs = std::filesystem;
  if (fs::is_directory(spec.source)) return load_png_directory<T>(spec.source, spec.resize);
  if (fs::is_regular_file(spec.source)) return load_tensor_file<T>(spec.source);
  throw DatasetError("dataset '" + spec.source + "' is neither a directory, a tensor file nor a built-in name");
}

}  // namespace srmc

#endif  // SRMC_DATASET_HPP
