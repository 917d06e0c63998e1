#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfk {

using Engine = std::mt19937_64;

/// Mix a base seed with a list of stream keys (tree index, replicate index, ...) into an
/// independent seed. Streams with different keys are decorrelated by SplitMix64 finalization.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t k : keys) h = mix(h ^ mix(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine make_engine(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  return Engine(derive_seed(base, keys));
}

}  // namespace rfk
