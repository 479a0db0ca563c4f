#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "metrics.hpp"
#include "prompt.hpp"
#include "query.hpp"

namespace place {

struct TrainConfig {
  int epochs = 200;
  double lr_theta = 1e-4;  // encoder step size
  double lr_tau = 1e-4;    // token step size
  double delta = 0.6;
  bool use_attr_tokens = true;
  bool use_virt_tokens = true;
  bool sgd = false;  // plain gradient steps instead of Adam
  bool checkpoint_best = true;
  std::uint64_t seed = 0;  // consumed only by the scaled trainer's shard draws

  PromptConfig prompt_config() const {
    return {delta, 0, use_attr_tokens, use_virt_tokens};
  }
};

struct TrainReport {
  std::vector<double> train_loss;  // per-epoch mean over the training queries
  std::vector<double> val_f1;      // per-epoch mean over the validation queries
  int best_epoch = -1;
  double best_val_f1 = 0.0;
  double train_seconds = 0.0;
  int max_route_nodes = 0;  // scaled training only; largest per-step graph
};

struct TrainResult {
  PromptTokenStore tokens;
  EncoderParams params;
  TrainReport report;
};

// -sum log p(v+) - sum log(1 - p(v-)), probabilities clamped to
// [1e-12, 1 - 1e-12].
double bce_loss(const Prediction& pred, const LabeledQuery& lq);

// Alternating optimization: per epoch and per training query, a token step at
// lr_tau with the encoder frozen, then an encoder step at lr_theta with the
// tokens frozen. Returns the state with the best validation F1.
TrainResult train(const AttributedGraph& g,
                  const std::vector<Community>& communities,
                  const std::vector<LabeledQuery>& train_queries,
                  const std::vector<LabeledQuery>& val_queries,
                  PromptTokenStore tokens, EncoderParams params,
                  const TrainConfig& cfg);

enum class FineTuneMode { None, PromptOnly, Both };
FineTuneMode fine_tune_mode_from_name(const std::string& name);
const char* fine_tune_mode_name(FineTuneMode mode);

// Warm-start adaptation to a new graph over the same attribute space.
TrainResult fine_tune(const AttributedGraph& g,
                      const std::vector<Community>& communities,
                      const std::vector<LabeledQuery>& train_queries,
                      const std::vector<LabeledQuery>& val_queries,
                      PromptTokenStore warm_tokens, EncoderParams warm_params,
                      const TrainConfig& cfg, FineTuneMode mode);

// Mean F1 of predicted communities against ground truth over a query set.
// Truth is the full member set of the query's community when known, else the
// query's positive labels.
double evaluate_f1(const AttributedGraph& g,
                   const std::vector<Community>& communities,
                   const std::vector<LabeledQuery>& queries,
                   const PromptTokenStore& tokens, const EncoderParams& params,
                   const PromptConfig& pcfg);

namespace detail {

// Optimizer state covering every learnable tensor.
struct OptState {
  AdamState attr, virt;
  struct LayerOpt {
    AdamState w_self;
    std::array<AdamState, kEdgeTypes> w_rel;
    AdamState bias;
  };
  std::vector<LayerOpt> enc;

  static OptState make(const PromptTokenStore& tokens,
                       const EncoderParams& params);
};

// Records the BCE loss of the plan's probabilities against the labels.
Tape::Id bce_on_tape(Tape& tape, Tape::Id probs, const LabeledQuery& lq);

// One alternation for one query on graph g. The labels must be valid node ids
// of g. Flags select which phases run (fine-tune modes drop one). Returns the
// loss of the last phase that ran.
double alternation_step(const AttributedGraph& g, PromptAugmentedGraph& gm,
                        const LabeledQuery& lq, PromptTokenStore& tokens,
                        EncoderParams& params, OptState& opt,
                        const TrainConfig& cfg, bool update_tokens,
                        bool update_encoder);

std::vector<int> ground_truth(const std::vector<Community>& communities,
                              const LabeledQuery& lq);

}  // namespace detail

}  // namespace place
