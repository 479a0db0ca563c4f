#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "graph.hpp"
#include "query.hpp"
#include "tensor.hpp"

namespace place {

// Learnable prompt tokens: one per attribute plus v_n shared virtual tokens.
// Token dimension equals the graph feature dimension c.
struct PromptTokenStore {
  Tensor attr_tokens;  // c x d_in
  Tensor virt_tokens;  // v_n x d_in

  int attr_count() const { return attr_tokens.rows; }
  int virt_count() const { return virt_tokens.rows; }
  int dim() const { return attr_tokens.cols; }
};

PromptTokenStore init_tokens(int c, int v_n, int d_in, std::uint64_t seed);

// Checkpoint I/O; the header records {c, v_n, d_in, seed} plus an optional
// caller-supplied "meta" object.
void save_tokens(const PromptTokenStore& store, std::uint64_t seed,
                 const std::string& path, const std::string& meta_json = "");
PromptTokenStore load_tokens(const std::string& path);

struct PromptConfig {
  double delta = 0.6;
  int v_n = 1;
  bool use_attr_tokens = true;  // ablation switches
  bool use_virt_tokens = true;
};

// One row of the query token list: either attribute token `index` or virtual
// token `index`.
struct TokenRef {
  bool is_virtual = false;
  int index = 0;

  bool operator==(const TokenRef& other) const = default;
};

// Tokens of the query's attributes in ascending attribute order, then all
// virtual tokens. The ablation switches drop either group.
std::vector<TokenRef> select_query_tokens(const PromptTokenStore& store,
                                          const Query& q,
                                          bool use_attr_tokens = true,
                                          bool use_virt_tokens = true);

// Materializes the selected token rows as a |tokens| x d_in matrix.
Tensor materialize_tokens(const PromptTokenStore& store,
                          const std::vector<TokenRef>& tokens);

// sigma(<x, y>).
double similarity(std::span<const double> x, std::span<const double> y);

// Token-token edges: (i, j) with i < j iff sigma(<t_i, t_j>) > delta.
struct QueryPromptGraph {
  int token_count = 0;
  std::vector<std::pair<int, int>> edges;
};

QueryPromptGraph build_prompt_graph(const Tensor& tokens, double delta);

enum class EdgeType { PROMPT = 0, ORIGINAL = 1, CROSS = 2 };
constexpr int kEdgeTypes = 3;

// The original graph with the query's prompt tokens appended as extra nodes.
// Global ids: original nodes keep their ids, token k becomes node n + k.
// Structure that depends only on (graph, query, token selection) — the
// ORIGINAL and CROSS relations — is built once; the PROMPT relation is a
// function of the current token values and is refreshed per forward pass.
class PromptAugmentedGraph {
 public:
  PromptAugmentedGraph(const AttributedGraph& g, const PromptTokenStore& store,
                       const Query& q, const PromptConfig& cfg);

  // Rebuilds the token-token edges from the current token values.
  void refresh_prompt_edges(const PromptTokenStore& store);

  int base_nodes() const { return n_; }
  int token_count() const { return static_cast<int>(tokens_.size()); }
  int node_count() const { return n_ + token_count(); }
  const std::vector<TokenRef>& tokens() const { return tokens_; }
  const Query& query() const { return query_; }
  const AttributedGraph& base() const { return *g_; }
  const PromptConfig& config() const { return cfg_; }
  const QueryPromptGraph& prompt_graph() const { return prompt_; }

  // Aggregation plan for one relation (incoming-neighbor means).
  const SegmentSpec& spec(EdgeType r) const;

  // Deduplicated canonical (u < v) edge list over global ids with types.
  std::vector<std::tuple<int, int, EdgeType>> all_edges() const;

 private:
  void rebuild_prompt_spec();

  const AttributedGraph* g_;
  int n_ = 0;
  Query query_;
  PromptConfig cfg_;
  std::vector<TokenRef> tokens_;
  QueryPromptGraph prompt_;
  std::vector<std::pair<int, int>> cross_edges_;  // (token node, original node)
  SegmentSpec specs_[kEdgeTypes];
};

}  // namespace place
