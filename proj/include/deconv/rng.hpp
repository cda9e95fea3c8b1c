#pragma once

#include <array>
#include <cstdint>

#include "deconv/math.hpp"

namespace deconv {

/// One block of the Philox4x32-10 counter-based generator (Salmon et al.,
/// "Parallel random numbers: as easy as 1, 2, 3"). Exposed as a free
/// function so the known-answer vectors can be checked directly.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  auto round_once = [](std::array<std::uint32_t, 4>& x, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * x[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * x[2];
    x = {static_cast<std::uint32_t>(p1 >> 32) ^ x[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ x[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  };
  for (int r = 0; r < 9; ++r) {
    round_once(ctr, key);
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
  }
  round_once(ctr, key);
  return ctr;
}

/// Counter-based random generator: Philox4x32-10 keyed by a 64-bit seed,
/// with a 64-bit stream id in the upper counter words. Draws from the same
/// (seed, stream) pair reproduce exactly across runs and platforms, and
/// distinct streams are independent, so simulations can be split by index
/// without coordination.
///
/// Value semantics; one instance must not be shared across threads.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint64_t seed() const noexcept {
    return (std::uint64_t{key_[1]} << 32) | key_[0];
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = philox4x32_10({static_cast<std::uint32_t>(counter_),
                              static_cast<std::uint32_t>(counter_ >> 32), stream_[0], stream_[1]},
                             key_);
      ++counter_;
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform double strictly inside (0,1), 53-bit resolution.
  double next_double() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  /// Standard normal draw via the inverse CDF.
  double next_normal() { return normal_quantile(next_double()); }

  /// Laplace draw with scale b (variance 2 b^2) via the inverse CDF.
  double next_laplace(double b) {
    const double u = next_double() - 0.5;
    return (u < 0.0) ? b * std::log1p(2.0 * u) : -b * std::log1p(-2.0 * u);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

}  // namespace deconv
