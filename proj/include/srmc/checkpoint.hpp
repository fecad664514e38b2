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

#ifndef SRMC_CHECKPOINT_HPP
#define SRMC_CHECKPOINT_HPP

#include <zlib.h>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "srmc/energy.hpp"
#include "srmc/trainer.hpp"

namespace srmc {

// Layout, all little-endian:
//   "SRMC" | u32 version
//   u32 family | u64 input_size | u64 channels | u64 n_f | f64 leaky_slope | f64 temperature
//   u32 feature kind | u64 feature dim | u64 degree | u64 centers | f64 lo | f64 hi | f64 width
//   u64 iteration | u64 seed
//   u64 n_params, then per parameter: u64 name length, name bytes, u64 rank, u64 extents,
//     f64 values; then the Adam m and v blobs in the same order (values only); u64 adam step
//   u32 CRC-32 of everything before it

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
struct Checkpoint {
  NetDescriptor descriptor{};
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  ParamSet<T> params;
  AdamState<T> adam;
};

namespace detail {
class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(U));
  }
  void bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  template <class T>
  void values(const Tensor<T>& t) {
    for (T v : t.data()) put<double>(static_cast<double>(v));
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  template <class U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, p_ + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes() {
    const auto len = get<std::uint64_t>();
    if (len > 4096) throw CheckpointError("checkpoint: implausible name length");
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  template <class T>
  Tensor<T> values(Shape s) {
    Tensor<T> t(std::move(s));
    for (auto& v : t.mutable_data()) v = static_cast<T>(get<double>());
    return t;
  }
  [[nodiscard]] bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw CheckpointError("checkpoint: truncated file");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = ::crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}
}  // namespace detail

template <class T>
std::vector<unsigned char> encode_checkpoint(const Checkpoint<T>& ck) {
  static_assert(std::endian::native == std::endian::little);
  detail::ByteWriter w;
  for (char c : std::string("SRMC")) w.put<char>(c);
  w.put<std::uint32_t>(kCheckpointVersion);
  const NetDescriptor& d = ck.descriptor;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.family));
  w.put<std::uint64_t>(d.arch.input_size);
  w.put<std::uint64_t>(d.arch.channels);
  w.put<std::uint64_t>(d.arch.n_f);
  w.put<double>(d.arch.leaky_slope);
  w.put<double>(d.temperature);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.features.kind));
  w.put<std::uint64_t>(d.features.dim);
  w.put<std::uint64_t>(d.features.degree);
  w.put<std::uint64_t>(d.features.centers_per_axis);
  w.put<double>(d.features.lo);
  w.put<double>(d.features.hi);
  w.put<double>(d.features.width);
  w.put<std::uint64_t>(ck.iteration);
  w.put<std::uint64_t>(ck.seed);
  w.put<std::uint64_t>(ck.params.size());
  for (const auto& nt : ck.params) {
    w.bytes(nt.name);
    w.put<std::uint64_t>(nt.value.rank());
    for (std::size_t e : nt.value.shape()) w.put<std::uint64_t>(e);
    w.values(nt.value);
  }
  const bool have_adam = ck.adam.m.size() == ck.params.size();
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    have_adam ? w.values(ck.adam.m[i].value) : w.values(Tensor<T>(ck.params[i].value.shape()));
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    have_adam ? w.values(ck.adam.v[i].value) : w.values(Tensor<T>(ck.params[i].value.shape()));
  w.put<std::uint64_t>(have_adam ? ck.adam.step : 0);
  auto& buf = w.buffer();
  w.put<std::uint32_t>(detail::crc32_of(buf.data(), buf.size()));
  return std::move(buf);
}

template <class T>
Checkpoint<T> decode_checkpoint(const std::vector<unsigned char>& buf) {
  if (buf.size() < 12 || std::memcmp(buf.data(), "SRMC", 4) != 0) throw CheckpointError("not an srmc checkpoint");
  std::uint32_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  detail::ByteReader r(buf.data() + 4, buf.size() - 8);
  const auto version = r.get<std::uint32_t>();
  if (version > kCheckpointVersion)
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is newer than this build supports (" +
                          std::to_string(kCheckpointVersion) + ")");
  if (version == 0) throw CheckpointError("checkpoint has invalid version 0");
  if (detail::crc32_of(buf.data(), buf.size() - 4) != stored) throw CheckpointError("checkpoint CRC mismatch");
  Checkpoint<T> ck;
  NetDescriptor& d = ck.descriptor;
  const auto fam = r.get<std::uint32_t>();
  if (fam > 1) throw CheckpointError("checkpoint: unknown model family " + std::to_string(fam));
  d.family = static_cast<Family>(fam);
  d.arch.input_size = r.get<std::uint64_t>();
  d.arch.channels = r.get<std::uint64_t>();
  d.arch.n_f = r.get<std::uint64_t>();
  d.arch.leaky_slope = r.get<double>();
  d.temperature = r.get<double>();
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw CheckpointError("checkpoint: unknown feature kind");
  d.features.kind = static_cast<FeatureKind>(kind);
  d.features.dim = r.get<std::uint64_t>();
  d.features.degree = r.get<std::uint64_t>();
  d.features.centers_per_axis = r.get<std::uint64_t>();
  d.features.lo = r.get<double>();
  d.features.hi = r.get<double>();
  d.features.width = r.get<double>();
  ck.iteration = r.get<std::uint64_t>();
  ck.seed = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n > 1024) throw CheckpointError("checkpoint: implausible parameter count");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.bytes();
    const auto rank = r.get<std::uint64_t>();
    if (rank > 8) throw CheckpointError("checkpoint: implausible rank for " + name);
    Shape s(rank);
    for (auto& e : s) e = r.get<std::uint64_t>();
    ck.params.push_back({std::move(name), r.values<T>(s)});
  }
  ck.adam.m = zeros_like(ck.params);
  ck.adam.v = zeros_like(ck.params);
  for (auto& nt : ck.adam.m) nt.value = r.values<T>(nt.value.shape());
  for (auto& nt : ck.adam.v) nt.value = r.values<T>(nt.value.shape());
  ck.adam.step = r.get<std::uint64_t>();
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
  return ck;
}

template <class T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ck) {
  const auto buf = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw CheckpointError("write failed for '" + path + "'");
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(buf);
}

template <class T>
Checkpoint<T> make_checkpoint(const TrainState<T>& s, std::uint64_t seed) {
  return {s.net->descriptor(), s.iteration, seed, s.net->params(), s.adam};
}

/// Rebuilds a training state; metrics history is not persisted.
template <class T>
TrainState<T> restore_state(const Checkpoint<T>& ck) {
  auto net = make_net<T>(ck.descriptor);
  net->set_params(ck.params);
  TrainState<T> s(std::move(net));
  s.adam = ck.adam;
  s.iteration = ck.iteration;
  return s;
}

}  // namespace srmc

#endif  // SRMC_CHECKPOINT_HPP
