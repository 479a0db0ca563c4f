#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "prompt.hpp"
#include "tensor.hpp"

namespace place {

struct EncoderConfig {
  int layers = 3;   // K
  int hidden = 128;  // d
  int d_in = 0;      // feature width; equals the graph's attribute count
};

// Relation-typed message-passing weights. Layer k computes
//   h(v) = act( W_self h(v) + sum_r mean_{u in N_r(v)} W_r h(u) + bias )
// with ReLU between layers and no activation after the last.
struct EncoderParams {
  struct Layer {
    Tensor w_self;                         // d_prev x d_out
    std::array<Tensor, kEdgeTypes> w_rel;  // per relation, d_prev x d_out
    Tensor bias;                           // 1 x d_out
  };

  EncoderConfig cfg;
  std::vector<Layer> layers;
};

// Glorot-uniform initialization, deterministic given seed.
EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

void save_encoder(const EncoderParams& params, const std::string& path,
                  const std::string& meta_json = "");
EncoderParams load_encoder(const std::string& path);

struct Prediction {
  std::vector<double> probs;  // length n, original nodes only
  double threshold = 0.5;
};

// Nodes whose probability strictly exceeds the threshold.
std::vector<int> predict_community(const Prediction& pred);

// What the gradient should flow into when a forward computation is built.
enum class GradMode { None, TokensOnly, EncoderOnly, All };

// One forward computation recorded on a tape: feature assembly, K encoder
// layers, decoder. Leaf ids expose the learnable tensors for gradient
// readout after backward().
struct ForwardPlan {
  Tape tape;
  Tape::Id attr_tokens = -1;  // -1 when the query selects no attribute tokens
  Tape::Id virt_tokens = -1;
  struct LayerLeaves {
    Tape::Id w_self;
    std::array<Tape::Id, kEdgeTypes> w_rel;
    Tape::Id bias;
  };
  std::vector<LayerLeaves> enc;
  Tape::Id embeddings = -1;  // n x d, original-node rows of the last layer
  Tape::Id probs = -1;       // n x 1

  // Row indices into the gathered attribute-token block, used to route
  // gradients back to the store (ascending attribute ids).
  std::vector<int> attr_rows;
  std::vector<int> query_rows;
};

// Records the full forward pass of one query on a fresh tape. The augmented
// graph must have had refresh_prompt_edges() called with the same store.
ForwardPlan build_forward(const PromptAugmentedGraph& gm,
                          const PromptTokenStore& store,
                          const EncoderParams& params, GradMode mode);

// Embeddings of the original nodes (first n rows of the last layer).
Tensor encode(const PromptAugmentedGraph& gm, const PromptTokenStore& store,
              const EncoderParams& params);

// Inner-product decoder over precomputed embeddings.
Prediction decode(const Tensor& h, const std::vector<int>& query_nodes);

// Full pipeline: select tokens, threshold the prompt graph, insert, encode,
// decode.
Prediction forward_pass(const AttributedGraph& g, const PromptTokenStore& store,
                        const Query& q, const EncoderParams& params,
                        const PromptConfig& cfg);

}  // namespace place
