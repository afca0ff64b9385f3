#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mtaudit/base.hpp"

namespace mtaudit {

// Every shuffle and draw in the toolkit flows through this generator so that
// split manifests and synthetic translations reproduce bit-for-bit across
// platforms. The name below is recorded in manifests; bump it if the stream
// ever changes.
inline constexpr std::string_view kRngVersion = "splitmix64-fisher-yates-v1";

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Independent substream for a named purpose ("splits", "shadow", a domain name, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return fnv1a64(tag, seed ^ 0x9e3779b97f4a7c15ull);
}

// In-place Fisher-Yates.
template <typename T>
void shuffle_seeded_inplace(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// Indices 0..n-1 in shuffled order.
std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64& rng);

// k distinct indices from 0..n-1, order as drawn (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace mtaudit
