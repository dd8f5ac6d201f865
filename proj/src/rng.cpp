// SPDX-License-Identifier: Apache-2.0
#include "deapsim/rng.hpp"

namespace deapsim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ fnv1a(stream)) + splitmix64(index + 1));
}

}  // namespace deapsim
