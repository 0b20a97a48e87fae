#pragma once

// Per-path Gaussian streams. Philox4x32-10 keyed by the run seed maps a path
// index to an independent xoshiro256++ state; normals come from Boost's
// ziggurat sampler on that engine.

#include <array>
#include <cmath>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace harvest::rng {

using Philox4x32Block = std::array<std::uint32_t, 4>;

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
inline Philox4x32Block philox4x32_10(Philox4x32Block ctr, std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Uniform in the open interval (0, 1) from the top 52 bits; 53 would let
/// the largest code round up to 1.
inline double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// xoshiro256++ (Blackman and Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  explicit Xoshiro256pp(std::array<std::uint64_t, 4> state) noexcept : s_(state) {
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ull;
  }

  result_type operator()() noexcept {
    const std::uint64_t r = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return r;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_;
};

/// Gaussian draws for one path. The 256-bit engine state is two Philox blocks
/// at counters (0, 0, path) and (1, 0, path) under the run seed, so path k's
/// sequence depends only on (seed, k) and the draw number.
class PathNormalStream {
 public:
  PathNormalStream(std::uint64_t seed, std::uint64_t path) noexcept : engine_(initial_state(seed, path)) {}

  double next() noexcept {
    ++consumed_;
    return normal_(engine_);
  }

  double uniform() noexcept { return to_open_unit(engine_()); }

  /// Number of normals handed out so far.
  std::uint64_t consumed() const noexcept { return consumed_; }

 private:
  static std::array<std::uint64_t, 4> initial_state(std::uint64_t seed, std::uint64_t path) noexcept {
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto lo = static_cast<std::uint32_t>(path), hi = static_cast<std::uint32_t>(path >> 32);
    const auto a = philox4x32_10({0, 0, lo, hi}, key);
    const auto b = philox4x32_10({1, 0, lo, hi}, key);
    auto join = [](std::uint32_t h, std::uint32_t l) { return (static_cast<std::uint64_t>(h) << 32) | l; };
    return {join(a[0], a[1]), join(a[2], a[3]), join(b[0], b[1]), join(b[2], b[3])};
  }

  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_;
  std::uint64_t consumed_ = 0;
};

/// Uniform on (0, 1) addressed directly by (seed, path, step, lane); used for
/// rare per-step events so that the Gaussian sequence stays aligned.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t path, std::uint32_t step, std::uint32_t lane) noexcept {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed) ^ 0x3C6EF372u,
                                         static_cast<std::uint32_t>(seed >> 32) ^ 0xA54FF53Au};
  const auto out = philox4x32_10(
      {step, lane, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)}, key);
  return to_open_unit((static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
}

}  // namespace harvest::rng
