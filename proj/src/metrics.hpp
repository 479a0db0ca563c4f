#pragma once

#include <vector>

namespace place {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set-overlap precision/recall/F1. Inputs are node-id sets (deduplicated
// internally); truth must be nonempty. F1 is 0 when P + R = 0.
Metrics prf1(std::vector<int> predicted, std::vector<int> truth);

}  // namespace place
