#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"

namespace place {

// Community-search query: one to three anchor nodes plus a possibly-empty
// attribute set. An empty attribute set marks an EQA query.
struct Query {
  std::vector<int> nodes;  // sorted, nonempty
  std::vector<int> attrs;  // sorted
  int community_id = -1;   // ground-truth community index, -1 if unknown

  bool operator==(const Query& other) const = default;
};

// Query plus sampled supervision. Query nodes are always positives; the two
// label sets never overlap.
struct LabeledQuery {
  Query query;
  std::vector<int> positives;  // sorted
  std::vector<int> negatives;  // sorted
};

enum class Protocol { AFC, AFN, EQA };

Protocol protocol_from_name(const std::string& name);
const char* protocol_name(Protocol p);

// AFC: query attrs are the attrs_per_query most frequent attributes among the
// sampled community's members, ties broken towards the lower attribute id.
std::vector<Query> gen_afc(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, int attrs_per_query,
                           std::uint64_t seed);

// AFN: query attrs are the union of the sampled query nodes' attribute sets.
std::vector<Query> gen_afn(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, std::uint64_t seed);

// EQA: no query attributes.
std::vector<Query> gen_eqa(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, std::uint64_t seed);

// Positives: query nodes plus ceil(label_ratio * |community|) sampled members.
// Negatives: ceil(label_ratio * |V \ community|) sampled non-members.
LabeledQuery sample_labels(const AttributedGraph& g, const Query& q,
                           const Community& community, double label_ratio,
                           std::uint64_t seed);

struct WorkloadSpec {
  Protocol protocol = Protocol::AFC;
  int train_count = 20;
  int val_count = 10;
  int test_count = 10;
  int nodes_per_query = 2;
  int attrs_per_query = 3;
  double label_ratio = 1.0;
  std::uint64_t seed = 0;
};

struct Workload {
  std::vector<LabeledQuery> train;
  std::vector<LabeledQuery> val;
  std::vector<LabeledQuery> test;
};

// Generates train/val/test splits in one stream; the splits are disjoint as
// query objects (duplicate draws are rejected and resampled).
Workload gen_workload(const AttributedGraph& g,
                      const std::vector<Community>& communities,
                      const WorkloadSpec& spec);

std::vector<LabeledQuery> load_workload(const std::string& path);
void save_workload(const std::vector<LabeledQuery>& queries,
                   const std::string& path);

}  // namespace place
