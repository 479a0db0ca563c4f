#pragma once

#include <cstdint>

#include "graph.hpp"

namespace place {

// Planted-partition generator. Communities are contiguous node blocks; each
// community owns a disjoint block of signature attributes. Members carry each
// signature attribute with probability 1-noise and each foreign attribute with
// probability noise, so attribute frequencies track community structure.
struct SynthConfig {
  int communities = 4;
  int nodes_per_community = 60;
  double p_in = 0.2;
  double p_out = 0.02;
  int signature_attrs = 3;
  double noise = 0.02;
  std::uint64_t seed = 0;
};

Dataset generate_synthetic(const SynthConfig& cfg);

// Uniform random graph with exactly m edges and attrs_per_node random
// attributes per node. No planted communities; used for scaling benchmarks.
Dataset generate_random(int n, long long m, int c, int attrs_per_node,
                        std::uint64_t seed);

}  // namespace place
