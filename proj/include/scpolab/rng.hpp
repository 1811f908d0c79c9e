#pragma once

#include <cstdint>
#include <random>

namespace scpolab {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to spread raw seed material.
inline std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent deterministic stream for (seed, stream).  Every stateful
// component in a run draws from its own stream so adding or removing one
// consumer never shifts another consumer's sequence.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_bits(mix_bits(seed) ^ mix_bits(stream * 0x9e3779b97f4a7c15ULL + 1));
}

}  // namespace scpolab
