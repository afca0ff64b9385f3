#include "mtaudit/rng.hpp"

#include <numeric>

namespace mtaudit {

std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle_seeded_inplace(idx, rng);
  return idx;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
  if (k > n) throw InvalidArgument("sample_indices: k > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Draw the first k slots of a Fisher-Yates pass.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace mtaudit
