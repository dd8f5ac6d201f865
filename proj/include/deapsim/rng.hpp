// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deapsim {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream of a root seed.
/// Used so that scheduler, mapping, topology and hardware sampling never
/// share a generator, and so parallel candidates get stable seeds.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

/// Uniform integer in [lo, hi].
template <typename Int>
Int uniform_int(Rng& rng, Int lo, Int hi) {
  return std::uniform_int_distribution<Int>(lo, hi)(rng);
}

}  // namespace deapsim
