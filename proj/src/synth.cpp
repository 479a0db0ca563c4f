#include "synth.hpp"

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace place {

Dataset generate_synthetic(const SynthConfig& cfg) {
  if (cfg.communities < 1 || cfg.nodes_per_community < 1 ||
      cfg.signature_attrs < 1)
    fail(ErrorKind::InvalidArgument, "synthetic config counts must be >= 1");
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(cfg.p_in) || !prob_ok(cfg.p_out) || !prob_ok(cfg.noise))
    fail(ErrorKind::InvalidArgument, "probabilities must lie in [0,1]");
  if (cfg.p_in <= cfg.p_out)
    fail(ErrorKind::InvalidArgument, "p_in must exceed p_out");

  const int k = cfg.communities;
  const int block = cfg.nodes_per_community;
  const int n = k * block;
  const int c = k * cfg.signature_attrs;
  auto comm_of = [&](int v) { return v / block; };

  auto edge_rng = rng::make(rng::derive(cfg.seed, 1));
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double p = comm_of(u) == comm_of(v) ? cfg.p_in : cfg.p_out;
      if (rng::uniform_real(edge_rng, 0.0, 1.0) < p) edges.emplace_back(u, v);
    }

  auto attr_rng = rng::make(rng::derive(cfg.seed, 2));
  std::vector<std::vector<int>> attrs(n);
  for (int v = 0; v < n; ++v) {
    int sig_lo = comm_of(v) * cfg.signature_attrs;
    int sig_hi = sig_lo + cfg.signature_attrs;
    for (int a = 0; a < c; ++a) {
      bool sig = a >= sig_lo && a < sig_hi;
      double p_carry = sig ? 1.0 - cfg.noise : cfg.noise;
      if (rng::uniform_real(attr_rng, 0.0, 1.0) < p_carry) attrs[v].push_back(a);
    }
  }

  Dataset ds;
  ds.graph = AttributedGraph::build(n, c, std::move(edges), std::move(attrs));
  for (int i = 0; i < k; ++i) {
    Community cm;
    for (int v = i * block; v < (i + 1) * block; ++v) cm.members.push_back(v);
    ds.communities.push_back(std::move(cm));
  }
  return ds;
}

Dataset generate_random(int n, long long m, int c, int attrs_per_node,
                        std::uint64_t seed) {
  if (n < 2 || c < 1 || attrs_per_node < 0 || attrs_per_node > c)
    fail(ErrorKind::InvalidArgument, "invalid random-graph parameters");
  long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  if (m < 0 || m > max_edges)
    fail(ErrorKind::InvalidArgument,
         "edge count " + std::to_string(m) + " outside [0, " +
             std::to_string(max_edges) + "]");

  auto engine = rng::make(rng::derive(seed, 3));
  std::unordered_set<long long> seen;
  std::vector<std::pair<int, int>> edges;
  seen.reserve(static_cast<std::size_t>(m) * 2);
  while (static_cast<long long>(edges.size()) < m) {
    int u = rng::uniform_int(engine, 0, n - 1);
    int v = rng::uniform_int(engine, 0, n - 1);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    long long key = static_cast<long long>(u) * n + v;
    if (seen.insert(key).second) edges.emplace_back(u, v);
  }

  std::vector<std::vector<int>> attrs(n);
  std::vector<int> pool(c);
  for (int a = 0; a < c; ++a) pool[a] = a;
  for (int v = 0; v < n; ++v)
    attrs[v] = rng::sample_without_replacement(
        engine, pool, static_cast<std::size_t>(attrs_per_node));

  Dataset ds;
  ds.graph = AttributedGraph::build(n, c, std::move(edges), std::move(attrs));
  return ds;
}

}  // namespace place
