#include "metrics.hpp"

#include <algorithm>

#include "error.hpp"

namespace place {

Metrics prf1(std::vector<int> predicted, std::vector<int> truth) {
  auto canonical = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  canonical(predicted);
  canonical(truth);
  if (truth.empty()) fail(ErrorKind::InvalidArgument, "prf1 with empty truth set");

  std::vector<int> both;
  std::set_intersection(predicted.begin(), predicted.end(), truth.begin(),
                        truth.end(), std::back_inserter(both));

  Metrics m;
  double hit = static_cast<double>(both.size());
  m.precision = predicted.empty() ? 0.0 : hit / static_cast<double>(predicted.size());
  m.recall = hit / static_cast<double>(truth.size());
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace place
