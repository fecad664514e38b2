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

#ifndef SRMC_RNG_HPP
#define SRMC_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace srmc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A block is a pure function of (key, counter); no hidden state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// splitmix64 finalizer, used to mix (seed, stream, purpose) into keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Purposes keep independent uses of one (seed, index) pair on disjoint streams.
enum class Purpose : std::uint32_t {
  kInit = 1,
  kLangevin = 2,
  kDataIndex = 3,
  kSmoothing = 4,
  kParamInit = 5,
  kDataset = 6,
  kGeneric = 7,
};

/// A sequential view over one Philox stream.  Two streams with different
/// (seed, stream_id, purpose) never share blocks; `substream` derives a child
/// deterministically, so per-chain streams do not depend on batch layout.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id,
               Purpose purpose = Purpose::kGeneric) noexcept {
    const std::uint64_t k = mix64(seed ^ mix64(stream_id ^ mix64(static_cast<std::uint64_t>(purpose))));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    const std::uint64_t hi = mix64(stream_id + 0x632BE59BD9B4E019ull);
    counter_[2] = static_cast<std::uint32_t>(hi);
    counter_[3] = static_cast<std::uint32_t>(hi >> 32);
  }

  [[nodiscard]] RandomStream substream(std::uint64_t index) const noexcept {
    const std::uint64_t parent = (std::uint64_t{key_[1]} << 32) | key_[0];
    return RandomStream(parent, index, Purpose::kGeneric);
  }

  std::uint32_t next_u32() noexcept {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform01() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  /// Box-Muller; caches the second variate.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform01()));
    const double phi = 2.0 * std::numbers::pi * uniform01();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  [[nodiscard]] std::uint64_t blocks_consumed() const noexcept {
    return (std::uint64_t{counter_[1]} << 32) | counter_[0];
  }

 private:
  void refill() noexcept {
    buffer_ = Philox4x32::block(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    pos_ = 0;
  }

  Philox4x32::Key key_{};
  Philox4x32::Counter counter_{};
  Philox4x32::Counter buffer_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace srmc

#endif  // SRMC_RNG_HPP
