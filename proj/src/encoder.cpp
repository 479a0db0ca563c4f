#include "encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "error.hpp"

namespace place {

using nlohmann::json;

namespace {

Tensor glorot(int rows, int cols, rng::Engine& eng) {
  double limit = std::sqrt(6.0 / (rows + cols));
  return Tensor::uniform(rows, cols, limit, eng);
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.layers < 1 || cfg.hidden < 1 || cfg.d_in < 1)
    fail(ErrorKind::InvalidArgument, "encoder config values must be >= 1");
  EncoderParams params;
  params.cfg = cfg;
  for (int k = 0; k < cfg.layers; ++k) {
    int d_prev = k == 0 ? cfg.d_in : cfg.hidden;
    EncoderParams::Layer layer;
    auto eng = rng::make(rng::derive(seed, 100 + static_cast<std::uint64_t>(k) * 8));
    layer.w_self = glorot(d_prev, cfg.hidden, eng);
    for (int r = 0; r < kEdgeTypes; ++r) layer.w_rel[static_cast<std::size_t>(r)] = glorot(d_prev, cfg.hidden, eng);
    layer.bias = Tensor::zeros(1, cfg.hidden);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

json matrix_to_json(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.rows; ++r)
    rows.push_back(std::vector<double>(t.row(r), t.row(r) + t.cols));
  return rows;
}

Tensor matrix_from_json(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    fail(ErrorKind::Parse, std::string("bad row count for ") + what);
  Tensor t(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      fail(ErrorKind::Parse, std::string("bad column count for ") + what);
    for (int c = 0; c < cols; ++c)
      t.at(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return t;
}

}  // namespace

void save_encoder(const EncoderParams& params, const std::string& path,
                  const std::string& meta_json) {
  json j;
  if (!meta_json.empty()) {
    try {
      j["meta"] = json::parse(meta_json);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("malformed meta JSON: ") + e.what());
    }
  }
  j["format"] = 1;
  j["k"] = params.cfg.layers;
  j["d"] = params.cfg.hidden;
  j["d_in"] = params.cfg.d_in;
  j["relations"] = kEdgeTypes;
  json layers = json::array();
  for (const auto& layer : params.layers) {
    json jl;
    jl["w_self"] = matrix_to_json(layer.w_self);
    json rels = json::array();
    for (const auto& w : layer.w_rel) rels.push_back(matrix_to_json(w));
    jl["w_rel"] = std::move(rels);
    jl["bias"] = std::vector<double>(layer.bias.data.begin(), layer.bias.data.end());
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path);
  out << j.dump() << "\n";
}

EncoderParams load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "malformed JSON in " + path + ": " + e.what());
  }
  for (const char* key : {"k", "d", "d_in", "relations", "layers"})
    if (!j.contains(key))
      fail(ErrorKind::Parse, std::string("model checkpoint missing \"") + key + "\"");
  if (j["relations"].get<int>() != kEdgeTypes)
    fail(ErrorKind::Validation, "model checkpoint relation count mismatch");

  EncoderParams params;
  params.cfg.layers = j["k"].get<int>();
  params.cfg.hidden = j["d"].get<int>();
  params.cfg.d_in = j["d_in"].get<int>();
  if (params.cfg.layers < 1 || params.cfg.hidden < 1 || params.cfg.d_in < 1)
    fail(ErrorKind::Validation, "model checkpoint header out of range");
  if (static_cast<int>(j["layers"].size()) != params.cfg.layers)
    fail(ErrorKind::Validation, "model checkpoint layer count mismatch");

  for (int k = 0; k < params.cfg.layers; ++k) {
    const auto& jl = j["layers"][static_cast<std::size_t>(k)];
    int d_prev = k == 0 ? params.cfg.d_in : params.cfg.hidden;
    EncoderParams::Layer layer;
    layer.w_self = matrix_from_json(jl.at("w_self"), d_prev, params.cfg.hidden, "w_self");
    if (static_cast<int>(jl.at("w_rel").size()) != kEdgeTypes)
      fail(ErrorKind::Validation, "model checkpoint relation count mismatch");
    for (int r = 0; r < kEdgeTypes; ++r)
      layer.w_rel[static_cast<std::size_t>(r)] =
          matrix_from_json(jl.at("w_rel")[static_cast<std::size_t>(r)], d_prev,
                           params.cfg.hidden, "w_rel");
    layer.bias = Tensor(1, params.cfg.hidden);
    const auto& jb = jl.at("bias");
    if (static_cast<int>(jb.size()) != params.cfg.hidden)
      fail(ErrorKind::Validation, "model checkpoint bias width mismatch");
    for (int c = 0; c < params.cfg.hidden; ++c)
      layer.bias.at(0, c) = jb[static_cast<std::size_t>(c)].get<double>();
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<int> predict_community(const Prediction& pred) {
  std::vector<int> out;
  for (std::size_t v = 0; v < pred.probs.size(); ++v)
    if (pred.probs[v] > pred.threshold) out.push_back(static_cast<int>(v));
  return out;
}

ForwardPlan build_forward(const PromptAugmentedGraph& gm,
                          const PromptTokenStore& store,
                          const EncoderParams& params, GradMode mode) {
  const AttributedGraph& g = gm.base();
  if (params.cfg.d_in != g.attr_count())
    fail(ErrorKind::Validation, "encoder input width does not match graph");

  bool grad_tokens = mode == GradMode::TokensOnly || mode == GradMode::All;
  bool grad_enc = mode == GradMode::EncoderOnly || mode == GradMode::All;

  ForwardPlan plan;
  Tape& tape = plan.tape;

  // Feature block: original rows, then attribute-token rows, then virtual
  // rows, matching the augmented graph's node order.
  Tensor x(g.node_count(), g.attr_count());
  x.data = g.features();
  Tape::Id x_id = tape.constant(std::move(x));

  std::vector<Tape::Id> parts = {x_id};
  bool any_attr = false;
  bool any_virt = false;
  for (const TokenRef& ref : gm.tokens()) {
    if (ref.is_virtual)
      any_virt = true;
    else {
      plan.attr_rows.push_back(ref.index);
      any_attr = true;
    }
  }
  if (any_attr) {
    plan.attr_tokens = tape.leaf(store.attr_tokens, grad_tokens);
    parts.push_back(tape.row_gather(plan.attr_tokens, plan.attr_rows));
  }
  if (any_virt) {
    plan.virt_tokens = tape.leaf(store.virt_tokens, grad_tokens);
    parts.push_back(plan.virt_tokens);
  }
  Tape::Id h = parts.size() == 1 ? x_id : tape.concat_rows(parts);

  for (int k = 0; k < params.cfg.layers; ++k) {
    const auto& layer = params.layers[static_cast<std::size_t>(k)];
    ForwardPlan::LayerLeaves leaves;
    leaves.w_self = tape.leaf(layer.w_self, grad_enc);
    leaves.bias = tape.leaf(layer.bias, grad_enc);
    Tape::Id z = tape.add_rowvec(tape.matmul(h, leaves.w_self), leaves.bias);
    for (int r = 0; r < kEdgeTypes; ++r) {
      const SegmentSpec& spec = gm.spec(static_cast<EdgeType>(r));
      leaves.w_rel[static_cast<std::size_t>(r)] =
          tape.leaf(layer.w_rel[static_cast<std::size_t>(r)], grad_enc);
      if (spec.empty()) continue;
      Tape::Id m = tape.segment_mean(h, &spec);
      Tape::Id t = tape.matmul(m, leaves.w_rel[static_cast<std::size_t>(r)]);
      z = tape.scatter_add_rows(z, t, &spec);
    }
    h = k + 1 < params.cfg.layers ? tape.relu(z) : z;
    plan.enc.push_back(leaves);
  }

  plan.embeddings = tape.slice_rows(h, 0, g.node_count());
  plan.query_rows = gm.query().nodes;
  Tape::Id h_q = tape.mean_rows(plan.embeddings, plan.query_rows);
  plan.probs = tape.sigmoid(tape.rows_dot(plan.embeddings, h_q));
  return plan;
}

Tensor encode(const PromptAugmentedGraph& gm, const PromptTokenStore& store,
              const EncoderParams& params) {
  ForwardPlan plan = build_forward(gm, store, params, GradMode::None);
  return plan.tape.value(plan.embeddings);
}

Prediction decode(const Tensor& h, const std::vector<int>& query_nodes) {
  if (query_nodes.empty())
    fail(ErrorKind::InvalidArgument, "decode with empty query node set");
  Tensor h_q(1, h.cols);
  for (int v : query_nodes) {
    if (v < 0 || v >= h.rows)
      fail(ErrorKind::InvalidArgument, "query node out of range in decode");
    const double* in = h.row(v);
    for (int c = 0; c < h.cols; ++c) h_q.data[static_cast<std::size_t>(c)] += in[c];
  }
  double inv = 1.0 / static_cast<double>(query_nodes.size());
  for (auto& x : h_q.data) x *= inv;

  Prediction pred;
  pred.probs.resize(static_cast<std::size_t>(h.rows));
  for (int v = 0; v < h.rows; ++v) {
    const double* in = h.row(v);
    double dot = 0.0;
    for (int c = 0; c < h.cols; ++c) dot += in[c] * h_q.data[static_cast<std::size_t>(c)];
    if (dot >= 0.0) {
      pred.probs[static_cast<std::size_t>(v)] = 1.0 / (1.0 + std::exp(-dot));
    } else {
      double e = std::exp(dot);
      pred.probs[static_cast<std::size_t>(v)] = e / (1.0 + e);
    }
  }
  return pred;
}

Prediction forward_pass(const AttributedGraph& g, const PromptTokenStore& store,
                        const Query& q, const EncoderParams& params,
                        const PromptConfig& cfg) {
  PromptAugmentedGraph gm(g, store, q, cfg);
  gm.refresh_prompt_edges(store);
  ForwardPlan plan = build_forward(gm, store, params, GradMode::None);
  Prediction pred;
  const Tensor& probs = plan.tape.value(plan.probs);
  pred.probs.assign(probs.data.begin(), probs.data.end());
  return pred;
}

}  // namespace place
