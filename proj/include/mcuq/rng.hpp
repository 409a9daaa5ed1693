#pragma once

// Counter-based random streams (Philox4x32-10).
//
// A stream is addressed by (seed, stream_id, substream); draw k of a stream is
// a pure function of that address and k, so results do not depend on thread
// scheduling or platform.

#include <array>
#include <cstdint>
#include <limits>

namespace mcuq {

/// One Philox4x32-10 block: ten rounds over a 128-bit counter and 64-bit key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); safe to pass to log().
  double uniform_open();
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// -ln(u1) - ln(u2), i.e. Gamma(2, 1).
  double gamma2();
  /// Poisson(mean): Knuth's product method below 30, rounded normal above.
  std::uint64_t poisson(double mean);
  bool bernoulli(double prob) { return uniform() < prob; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline RngStream rng_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RngStream(seed, stream_id);
}

}  // namespace mcuq
