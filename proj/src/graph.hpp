#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace place {

// Undirected attributed graph. Node and attribute ids are dense 0-based
// integers. Edges are stored canonically (u < v, sorted, deduplicated) and
// mirrored into a CSR adjacency at build time. Node features are the binary
// attribute-indicator rows, so the feature width equals the attribute count.
// Immutable after build; safe for concurrent reads.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  // Validates ids, rejects self-loops and duplicate edges, then builds the
  // CSR adjacency, the attribute inverted index, and the feature matrix.
  static AttributedGraph build(int node_count, int attr_count,
                               std::vector<std::pair<int, int>> edges,
                               std::vector<std::vector<int>> node_attrs);

  int node_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int attr_count() const { return c_; }

  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  // Sorted attribute ids of node v.
  const std::vector<int>& attrs_of(int v) const;

  // Sorted neighbor ids of node v.
  std::span<const int> neighbors(int v) const;

  // Sorted ids of the nodes carrying attribute a (inverted index lookup).
  const std::vector<int>& nodes_with_attribute(int a) const;

  bool has_edge(int u, int v) const;

  // Row-major n x c binary indicator matrix as doubles.
  const std::vector<double>& features() const { return features_; }
  std::span<const double> feature_row(int v) const;

  bool operator==(const AttributedGraph& other) const;

 private:
  int n_ = 0;
  int c_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> node_attrs_;
  std::vector<std::vector<int>> attr_index_;
  std::vector<int> adj_offsets_;
  std::vector<int> adj_;
  std::vector<double> features_;
};

struct Community {
  std::vector<int> members;  // sorted, nonempty
};

// A graph file bundles the graph with optional ground-truth communities.
struct Dataset {
  AttributedGraph graph;
  std::vector<Community> communities;
};

// JSON graph file I/O. Files with string node/attribute names are remapped
// through a persisted "<path>.dict.json" sidecar (created on first load).
// meta_json, when nonempty, is stored under a "meta" key and ignored on load.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path,
                  const std::string& meta_json = "");

}  // namespace place
