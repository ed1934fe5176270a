#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace pgki {

/// xoshiro256** seeded through splitmix64.
///
/// Draw conventions (relied on for cross-implementation reproducibility):
///   uniform01()      = (next() >> 11) * 2^-53, in [0, 1)
///   uniform(a, b)    = a + (b - a) * uniform01()
///   below(n)         = high 64 bits of next() * n  (no rejection step)
///   split()          = new generator seeded with next()
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  std::uint64_t operator()() noexcept { return next(); }

  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept;
  std::size_t below(std::size_t n) noexcept;
  Xoshiro256 split() noexcept;

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

 private:
  std::array<std::uint64_t, 4> s_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Fisher-Yates, i from n-1 down to 1, j = rng.below(i + 1).
template <typename Container>
void shuffle(Container& items, Xoshiro256& rng) {
  using std::swap;
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    swap(items[i - 1], items[j]);
  }
}

}  // namespace pgki
