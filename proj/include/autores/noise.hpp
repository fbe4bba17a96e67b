#pragma once

// Counter-based Gaussian increments. Every draw is a pure function of
// (master_seed, path_index, counter), so ensembles give the same numbers
// whatever the thread count or scheduling order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace autores {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
[[nodiscard]] constexpr std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

/// Independent stream for one path. Block k of the stream yields a pair of
/// standard normals; callers index blocks by step number.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t master_seed, std::uint64_t path_index) noexcept
      : seed_(master_seed), path_(path_index) {}

  [[nodiscard]] std::uint64_t master_seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t path_index() const noexcept { return path_; }
  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  /// Raw 128-bit block for an explicit counter; does not advance the stream.
  [[nodiscard]] std::array<std::uint32_t, 4> block(std::uint64_t counter) const noexcept {
    return philox4x32_10({static_cast<std::uint32_t>(counter),
                          static_cast<std::uint32_t>(counter >> 32),
                          static_cast<std::uint32_t>(path_),
                          static_cast<std::uint32_t>(path_ >> 32)},
                         {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  }

  /// Two independent N(0, 1) draws from block `counter` (Box-Muller).
  [[nodiscard]] std::array<double, 2> normal_pair(std::uint64_t counter) const noexcept {
    const auto b = block(counter);
    const double u1 = to_open_unit(b[0], b[1]);
    const double u2 = to_open_unit(b[2], b[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Uniform in (0, 1) from block `counter`, first half.
  [[nodiscard]] double uniform(std::uint64_t counter) const noexcept {
    const auto b = block(counter);
    return to_open_unit(b[0], b[1]);
  }

  /// Next pair of normals; advances the counter by one block.
  std::array<double, 2> next_normal_pair() noexcept { return normal_pair(counter_++); }
  double next_uniform() noexcept { return uniform(counter_++); }

 private:
  // 53 random bits mapped into the open interval (0, 1).
  static double to_open_unit(std::uint32_t lo, std::uint32_t hi) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t path_;
  std::uint64_t counter_ = 0;
};

}  // namespace autores
