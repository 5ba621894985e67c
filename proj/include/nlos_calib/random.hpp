#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>

namespace nlos_calib {

/// Engine used everywhere; seeded only through derive_seed.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t bits_of(double v) {
  std::uint64_t b = 0;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

/// Seed of an independent stream identified by a master seed and a path of
/// keys, e.g. derive_seed(master, {scenario, seed, Stream::Tof}).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

/// Stream tags for one synthetic run.
enum class Stream : std::uint64_t {
  Scene = 1,
  Subset = 2,
  InitLevel = 3,
  Perturb = 4,
  Tof = 5,
};

inline Rng make_rng(std::uint64_t master,
                    std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

}  // namespace nlos_calib
