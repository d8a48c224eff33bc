#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace simvae {

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// 64-bit FNV-1a, used to turn stream names and config text into seeds.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// xoshiro256** generator. Satisfies std::uniform_random_bit_generator, but
/// the distribution helpers below are implemented here so results do not
/// depend on the standard library vendor.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }
  result_type next() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (no cached second value).
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
};

/// Seed of the named stream `name` under `root`, further keyed by indices
/// (batch number, sample number, ...). Different keys give independent
/// substreams, so results never depend on the order samples are drawn in.
std::uint64_t stream_seed(std::uint64_t root, std::string_view name,
                          std::initializer_list<std::uint64_t> indices = {}) noexcept;

inline Rng stream(std::uint64_t root, std::string_view name,
                  std::initializer_list<std::uint64_t> indices = {}) noexcept {
  return Rng(stream_seed(root, name, indices));
}

}  // namespace simvae
