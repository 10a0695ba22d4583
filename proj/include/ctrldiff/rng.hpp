#pragma once

#include <cmath>
#include <cstdint>

namespace ctrldiff::rng {

// Counter-indexed random numbers.  Every variate is a pure function of a
// (seed, stream, path, step, channel, draw) tuple, so regeneration is
// bit-identical and independent of evaluation order.  Streams partition the
// counter space between uses that must never collide (Brownian increments,
// policy randomization, probe points, kernel estimation starts).

enum class Stream : std::uint64_t {
  brownian = 0x1,
  policy = 0x2,
  probe = 0x3,
  kernel = 0x4,
  scenario = 0x5,
};

namespace detail {

inline std::uint64_t split_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// One 64-bit word per counter tuple.  Each field passes through a full
/// avalanche round before the next is folded in.
inline std::uint64_t word(std::uint64_t seed, Stream stream, std::uint64_t path,
                          std::uint64_t step, std::uint64_t channel,
                          std::uint64_t draw = 0) {
  using detail::split_mix;
  std::uint64_t h = split_mix(seed ^ 0x8c2f9d31a4b6e857ULL);
  h = split_mix(h ^ static_cast<std::uint64_t>(stream));
  h = split_mix(h ^ path);
  h = split_mix(h ^ step);
  h = split_mix(h ^ channel);
  h = split_mix(h ^ draw);
  return h;
}

/// Uniform variate in the open interval (0,1).
inline double uniform01(std::uint64_t seed, Stream stream, std::uint64_t path,
                        std::uint64_t step, std::uint64_t channel,
                        std::uint64_t draw = 0) {
  const std::uint64_t w = word(seed, stream, path, step, channel, draw);
  return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal variate (Box-Muller over two counter words).
inline double normal(std::uint64_t seed, Stream stream, std::uint64_t path,
                     std::uint64_t step, std::uint64_t channel,
                     std::uint64_t draw = 0) {
  const double u1 = uniform01(seed, stream, path, step, channel, 2 * draw);
  const double u2 = uniform01(seed, stream, path, step, channel, 2 * draw + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Folds an arbitrary tag into a seed, giving a derived substream seed.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return detail::split_mix(detail::split_mix(seed ^ 0xd1b54a32d192ed03ULL) ^ tag);
}

}  // namespace ctrldiff::rng
