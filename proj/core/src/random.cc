#include "grace/random.h"

#include <numeric>

#include "grace/digest.h"

namespace grace {

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  // Reject the low sliver that would bias `x % bound`.
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % bound;
}

double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Rng make_rng(std::uint64_t seed, std::string_view key) {
  const std::uint64_t k = key.empty() ? 0 : digest64(key);
  // seed_seq's mixing algorithm is specified by the standard.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  return Rng(seq);
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t population,
                                                    std::size_t count) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count && i < population; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(count, population));
  return idx;
}

}  // namespace grace
