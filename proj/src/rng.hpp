#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "error.hpp"

namespace place::rng {

using Engine = std::mt19937_64;

inline Engine make(std::uint64_t seed) { return Engine(seed); }

// splitmix64 finalizer; used to derive independent substream seeds so that
// e.g. workload sampling and parameter init never share a stream.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline int uniform_int(Engine& eng, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(eng);
}

inline double uniform_real(Engine& eng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(eng);
}

// k distinct elements of pool, order of first k positions of a partial
// Fisher-Yates shuffle. Result is sorted for deterministic set semantics.
inline std::vector<int> sample_without_replacement(Engine& eng,
                                                   std::vector<int> pool,
                                                   std::size_t k) {
  if (k > pool.size())
    fail(ErrorKind::InvalidArgument,
         "sample_without_replacement: k exceeds pool size");
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, pool.size() - 1);
    std::swap(pool[i], pool[dist(eng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace place::rng
