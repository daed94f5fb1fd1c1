#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace grace {

// The engine is pinned so sampled artifacts are identical across platforms:
// std::mt19937_64's output sequence is fixed by the standard, and every
// bounded draw below goes through `uniform_index` rather than the
// implementation-defined std::uniform_int_distribution.
using Rng = std::mt19937_64;
inline constexpr std::string_view kPrngName = "mt19937_64";

// Uniform integer in [0, bound). bound must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

// Uniform real in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

// Engine seeded from a base seed and a string key (e.g. an example id), so
// per-item draws do not depend on processing order.
Rng make_rng(std::uint64_t seed, std::string_view key = {});

// `count` distinct indices drawn uniformly without replacement from
// [0, population), in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t population,
                                                    std::size_t count);

template <typename T>
void shuffle(Rng& rng, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace grace
