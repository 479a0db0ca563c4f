#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <utility>

#include "error.hpp"

namespace place {

namespace {
constexpr double kProbEps = 1e-12;

double clamp_prob(double p) {
  return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}
}  // namespace

double bce_loss(const Prediction& pred, const LabeledQuery& lq) {
  if (lq.positives.empty() && lq.negatives.empty())
    fail(ErrorKind::InvalidArgument, "bce_loss with no labels");
  int n = static_cast<int>(pred.probs.size());
  double loss = 0.0;
  for (int v : lq.positives) {
    if (v < 0 || v >= n) fail(ErrorKind::InvalidArgument, "positive label out of range");
    loss -= std::log(clamp_prob(pred.probs[static_cast<std::size_t>(v)]));
  }
  for (int v : lq.negatives) {
    if (v < 0 || v >= n) fail(ErrorKind::InvalidArgument, "negative label out of range");
    loss -= std::log(1.0 - clamp_prob(pred.probs[static_cast<std::size_t>(v)]));
  }
  return loss;
}

FineTuneMode fine_tune_mode_from_name(const std::string& name) {
  if (name == "none") return FineTuneMode::None;
  if (name == "prompt_only") return FineTuneMode::PromptOnly;
  if (name == "both") return FineTuneMode::Both;
  fail(ErrorKind::InvalidArgument, "unknown fine-tune mode: " + name);
}

const char* fine_tune_mode_name(FineTuneMode mode) {
  switch (mode) {
    case FineTuneMode::None: return "none";
    case FineTuneMode::PromptOnly: return "prompt_only";
    case FineTuneMode::Both: return "both";
  }
  return "?";
}

namespace detail {

OptState OptState::make(const PromptTokenStore& tokens,
                        const EncoderParams& params) {
  OptState opt;
  opt.attr = AdamState(tokens.attr_tokens.rows, tokens.attr_tokens.cols);
  opt.virt = AdamState(tokens.virt_tokens.rows, tokens.virt_tokens.cols);
  for (const auto& layer : params.layers) {
    LayerOpt lo;
    lo.w_self = AdamState(layer.w_self.rows, layer.w_self.cols);
    for (int r = 0; r < kEdgeTypes; ++r)
      lo.w_rel[static_cast<std::size_t>(r)] =
          AdamState(layer.w_rel[static_cast<std::size_t>(r)].rows,
                    layer.w_rel[static_cast<std::size_t>(r)].cols);
    lo.bias = AdamState(layer.bias.rows, layer.bias.cols);
    opt.enc.push_back(std::move(lo));
  }
  return opt;
}

Tape::Id bce_on_tape(Tape& tape, Tape::Id probs, const LabeledQuery& lq) {
  if (lq.positives.empty() && lq.negatives.empty())
    fail(ErrorKind::InvalidArgument, "bce_loss with no labels");
  std::vector<Tape::Id> terms;
  if (!lq.positives.empty()) {
    Tape::Id p = tape.clamp(tape.row_gather(probs, lq.positives), kProbEps, 1.0 - kProbEps);
    terms.push_back(tape.sum(tape.log(p)));
  }
  if (!lq.negatives.empty()) {
    Tape::Id p = tape.clamp(tape.row_gather(probs, lq.negatives), kProbEps, 1.0 - kProbEps);
    terms.push_back(tape.sum(tape.log(tape.affine(p, -1.0, 1.0))));
  }
  Tape::Id total = terms.size() == 2 ? tape.add(terms[0], terms[1]) : terms[0];
  return tape.affine(total, -1.0, 0.0);
}

namespace {

// Reads a leaf gradient, substituting zeros when the leaf never contributed
// to the loss (e.g. a relation weight with no edges of that type).
const Tensor& grad_or_zero(const Tape& tape, Tape::Id id, Tensor& scratch,
                           const Tensor& param) {
  const Tensor& g = tape.grad(id);
  if (g.rows == param.rows && g.cols == param.cols) return g;
  scratch = Tensor::zeros(param.rows, param.cols);
  return scratch;
}

void apply_rows(Tensor& param, const Tensor& grad, std::span<const int> rows,
                AdamState& adam, double lr, bool sgd) {
  if (sgd)
    sgd_step(param, grad, rows, lr);
  else
    adam.step(param, grad, rows, lr);
}

void apply_all(Tensor& param, const Tensor& grad, AdamState& adam, double lr,
               bool sgd) {
  if (sgd)
    sgd_step_all(param, grad, lr);
  else
    adam.step_all(param, grad, lr);
}

double run_phase(const AttributedGraph& g, PromptAugmentedGraph& gm,
                 const LabeledQuery& lq, PromptTokenStore& tokens,
                 EncoderParams& params, OptState& opt, const TrainConfig& cfg,
                 GradMode mode) {
  gm.refresh_prompt_edges(tokens);
  ForwardPlan plan = build_forward(gm, tokens, params, mode);
  Tape::Id loss_id = bce_on_tape(plan.tape, plan.probs, lq);
  double loss = plan.tape.value(loss_id).item();
  if (!std::isfinite(loss))
    fail(ErrorKind::Numeric, "non-finite training loss");
  if (mode == GradMode::None) return loss;

  plan.tape.backward(loss_id);
  Tensor scratch;

  if (mode == GradMode::TokensOnly) {
    if (plan.attr_tokens >= 0) {
      const Tensor& gr = grad_or_zero(plan.tape, plan.attr_tokens, scratch,
                                      tokens.attr_tokens);
      apply_rows(tokens.attr_tokens, gr, plan.attr_rows, opt.attr, cfg.lr_tau,
                 cfg.sgd);
    }
    if (plan.virt_tokens >= 0) {
      const Tensor& gr = grad_or_zero(plan.tape, plan.virt_tokens, scratch,
                                      tokens.virt_tokens);
      apply_all(tokens.virt_tokens, gr, opt.virt, cfg.lr_tau, cfg.sgd);
    }
  } else {
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      auto& layer = params.layers[k];
      auto& leaves = plan.enc[k];
      auto& lo = opt.enc[k];
      apply_all(layer.w_self,
                grad_or_zero(plan.tape, leaves.w_self, scratch, layer.w_self),
                lo.w_self, cfg.lr_theta, cfg.sgd);
      for (int r = 0; r < kEdgeTypes; ++r) {
        auto& w = layer.w_rel[static_cast<std::size_t>(r)];
        apply_all(w,
                  grad_or_zero(plan.tape, leaves.w_rel[static_cast<std::size_t>(r)],
                               scratch, w),
                  lo.w_rel[static_cast<std::size_t>(r)], cfg.lr_theta, cfg.sgd);
      }
      apply_all(layer.bias,
                grad_or_zero(plan.tape, leaves.bias, scratch, layer.bias),
                lo.bias, cfg.lr_theta, cfg.sgd);
    }
  }
  (void)g;
  return loss;
}

}  // namespace

double alternation_step(const AttributedGraph& g, PromptAugmentedGraph& gm,
                        const LabeledQuery& lq, PromptTokenStore& tokens,
                        EncoderParams& params, OptState& opt,
                        const TrainConfig& cfg, bool update_tokens,
                        bool update_encoder) {
  double loss = 0.0;
  bool ran = false;
  if (update_tokens && gm.token_count() > 0) {
    loss = run_phase(g, gm, lq, tokens, params, opt, cfg, GradMode::TokensOnly);
    ran = true;
  }
  if (update_encoder) {
    loss = run_phase(g, gm, lq, tokens, params, opt, cfg, GradMode::EncoderOnly);
    ran = true;
  }
  if (!ran)
    loss = run_phase(g, gm, lq, tokens, params, opt, cfg, GradMode::None);
  return loss;
}

std::vector<int> ground_truth(const std::vector<Community>& communities,
                              const LabeledQuery& lq) {
  int ci = lq.query.community_id;
  if (ci >= 0 && ci < static_cast<int>(communities.size()))
    return communities[static_cast<std::size_t>(ci)].members;
  return lq.positives;
}

}  // namespace detail

double evaluate_f1(const AttributedGraph& g,
                   const std::vector<Community>& communities,
                   const std::vector<LabeledQuery>& queries,
                   const PromptTokenStore& tokens, const EncoderParams& params,
                   const PromptConfig& pcfg) {
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& lq : queries) {
    Prediction pred = forward_pass(g, tokens, lq.query, params, pcfg);
    Metrics m = prf1(predict_community(pred), detail::ground_truth(communities, lq));
    total += m.f1;
  }
  return total / static_cast<double>(queries.size());
}

namespace {

TrainResult run_training(const AttributedGraph& g,
                         const std::vector<Community>& communities,
                         const std::vector<LabeledQuery>& train_queries,
                         const std::vector<LabeledQuery>& val_queries,
                         PromptTokenStore tokens, EncoderParams params,
                         const TrainConfig& cfg, bool update_tokens,
                         bool update_encoder) {
  if (train_queries.empty())
    fail(ErrorKind::InvalidArgument, "training needs at least one query");
  if (cfg.epochs < 1) fail(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (cfg.lr_theta < 0.0 || cfg.lr_tau < 0.0)
    fail(ErrorKind::InvalidArgument, "learning rates must be >= 0");
  if (tokens.dim() != g.attr_count() || params.cfg.d_in != g.attr_count())
    fail(ErrorKind::Validation, "state dimensions do not match the graph");

  auto started = std::chrono::steady_clock::now();
  PromptConfig pcfg = cfg.prompt_config();

  std::vector<PromptAugmentedGraph> gms;
  gms.reserve(train_queries.size());
  for (const auto& lq : train_queries)
    gms.emplace_back(g, tokens, lq.query, pcfg);

  detail::OptState opt = detail::OptState::make(tokens, params);

  TrainResult result;
  TrainReport& report = result.report;
  PromptTokenStore best_tokens;
  EncoderParams best_params;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < train_queries.size(); ++i) {
      try {
        loss_sum += detail::alternation_step(g, gms[i], train_queries[i], tokens,
                                             params, opt, cfg, update_tokens,
                                             update_encoder);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric)
          fail(ErrorKind::Numeric,
               "epoch " + std::to_string(epoch) + ", query " + std::to_string(i) +
                   ": " + e.what());
        throw;
      }
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(train_queries.size()));

    double f1 = evaluate_f1(g, communities, val_queries, tokens, params, pcfg);
    report.val_f1.push_back(f1);
    if (!val_queries.empty() && (report.best_epoch < 0 || f1 > report.best_val_f1)) {
      report.best_epoch = epoch;
      report.best_val_f1 = f1;
      if (cfg.checkpoint_best) {
        best_tokens = tokens;
        best_params = params;
      }
    }
  }

  if (cfg.checkpoint_best && report.best_epoch >= 0) {
    result.tokens = std::move(best_tokens);
    result.params = std::move(best_params);
  } else {
    result.tokens = std::move(tokens);
    result.params = std::move(params);
  }
  report.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

}  // namespace

TrainResult train(const AttributedGraph& g,
                  const std::vector<Community>& communities,
                  const std::vector<LabeledQuery>& train_queries,
                  const std::vector<LabeledQuery>& val_queries,
                  PromptTokenStore tokens, EncoderParams params,
                  const TrainConfig& cfg) {
  return run_training(g, communities, train_queries, val_queries,
                      std::move(tokens), std::move(params), cfg, true, true);
}

TrainResult fine_tune(const AttributedGraph& g,
                      const std::vector<Community>& communities,
                      const std::vector<LabeledQuery>& train_queries,
                      const std::vector<LabeledQuery>& val_queries,
                      PromptTokenStore warm_tokens, EncoderParams warm_params,
                      const TrainConfig& cfg, FineTuneMode mode) {
  if (warm_tokens.dim() != g.attr_count() ||
      warm_params.cfg.d_in != g.attr_count())
    fail(ErrorKind::Validation,
         "warm state dimensions do not match the new graph");

  if (mode == FineTuneMode::None) {
    TrainResult result;
    result.tokens = std::move(warm_tokens);
    result.params = std::move(warm_params);
    result.report.best_val_f1 = evaluate_f1(g, communities, val_queries,
                                            result.tokens, result.params,
                                            cfg.prompt_config());
    if (!val_queries.empty()) result.report.best_epoch = 0;
    result.report.val_f1.push_back(result.report.best_val_f1);
    return result;
  }
  return run_training(g, communities, train_queries, val_queries,
                      std::move(warm_tokens), std::move(warm_params), cfg, true,
                      mode == FineTuneMode::Both);
}

}  // namespace place
