#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"
#include "trainer.hpp"

namespace place {

struct Partition {
  int s = 1;
  std::vector<int> assignment;             // node id -> shard id
  long long cut = 0;                       // cross-shard edge count
  std::vector<std::vector<int>> shard_nodes;  // per shard, ascending global ids
};

// Edge-cut heuristic: farthest-first seeds, balanced round-robin BFS growth,
// then boundary-refinement passes that move a node when that strictly lowers
// the cut and keeps shard sizes within the balance envelope.
Partition partition_graph(const AttributedGraph& g, int s, std::uint64_t seed,
                          double balance = 0.1);

void save_partition(const Partition& p, const std::string& path,
                    const std::string& meta_json = "");
Partition load_partition(const std::string& path, const AttributedGraph& g);

// Shard plus the query nodes and their one-hop edges into the shard. Local
// ids follow ascending global id order, so a single-shard route graph is the
// original graph unchanged.
struct QueryRouteSubgraph {
  int shard_id = 0;
  AttributedGraph graph;
  std::vector<int> global_ids;   // local -> global
  std::vector<int> query_local;  // local ids of the query nodes
};

QueryRouteSubgraph build_query_route(const AttributedGraph& g,
                                     const Partition& p, int shard_id,
                                     const Query& q);

// Alternating training where each query trains on sampled query-route
// subgraphs instead of the full graph; labels outside the sampled route are
// dropped for that step. Validation runs through infer_scaled.
TrainResult train_scaled(const AttributedGraph& g,
                         const std::vector<Community>& communities,
                         const std::vector<LabeledQuery>& train_queries,
                         const std::vector<LabeledQuery>& val_queries,
                         PromptTokenStore tokens, EncoderParams params,
                         const TrainConfig& cfg, const Partition& p,
                         int shards_per_query = 1);

// Divide-and-conquer inference: forward pass per shard route graph, merged by
// the home-shard rule so each node is scored exactly once.
Prediction infer_scaled(const AttributedGraph& g, const Partition& p,
                        const PromptTokenStore& tokens, const Query& q,
                        const EncoderParams& params, const PromptConfig& pcfg);

}  // namespace place
