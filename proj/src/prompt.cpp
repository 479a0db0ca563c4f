#include "prompt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "error.hpp"

namespace place {

using nlohmann::json;

PromptTokenStore init_tokens(int c, int v_n, int d_in, std::uint64_t seed) {
  if (c < 1 || v_n < 1 || d_in < 1)
    fail(ErrorKind::InvalidArgument, "token counts and dimension must be >= 1");
  PromptTokenStore store;
  auto attr_eng = rng::make(rng::derive(seed, 20));
  auto virt_eng = rng::make(rng::derive(seed, 21));
  store.attr_tokens = Tensor::uniform(c, d_in, 0.1, attr_eng);
  store.virt_tokens = Tensor::uniform(v_n, d_in, 0.1, virt_eng);
  return store;
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

void save_tokens(const PromptTokenStore& store, std::uint64_t seed,
                 const std::string& path, const std::string& meta_json) {
  json j;
  if (!meta_json.empty()) {
    try {
      j["meta"] = json::parse(meta_json);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("malformed meta JSON: ") + e.what());
    }
  }
  j["format"] = 1;
  j["c"] = store.attr_count();
  j["v_n"] = store.virt_count();
  j["d_in"] = store.dim();
  j["seed"] = seed;
  j["attr_tokens"] = matrix_to_json(store.attr_tokens);
  j["virt_tokens"] = matrix_to_json(store.virt_tokens);
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path);
  out << j.dump() << "\n";
}

PromptTokenStore load_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "malformed JSON in " + path + ": " + e.what());
  }
  for (const char* key : {"c", "v_n", "d_in", "attr_tokens", "virt_tokens"})
    if (!j.contains(key))
      fail(ErrorKind::Parse, std::string("token checkpoint missing \"") + key + "\"");
  int c = j["c"].get<int>();
  int v_n = j["v_n"].get<int>();
  int d_in = j["d_in"].get<int>();
  if (c < 1 || v_n < 1 || d_in < 1)
    fail(ErrorKind::Validation, "token checkpoint header out of range");
  PromptTokenStore store;
  store.attr_tokens = matrix_from_json(j["attr_tokens"], c, d_in, "attr_tokens");
  store.virt_tokens = matrix_from_json(j["virt_tokens"], v_n, d_in, "virt_tokens");
  if (!store.attr_tokens.all_finite() || !store.virt_tokens.all_finite())
    fail(ErrorKind::Validation, "token checkpoint contains non-finite values");
  return store;
}

std::vector<TokenRef> select_query_tokens(const PromptTokenStore& store,
                                          const Query& q, bool use_attr_tokens,
                                          bool use_virt_tokens) {
  std::vector<TokenRef> out;
  if (use_attr_tokens) {
    std::vector<int> attrs = q.attrs;
    std::sort(attrs.begin(), attrs.end());
    for (int a : attrs) {
      if (a < 0 || a >= store.attr_count())
        fail(ErrorKind::InvalidArgument,
             "query attribute out of range: " + std::to_string(a));
      out.push_back({false, a});
    }
  }
  if (use_virt_tokens)
    for (int v = 0; v < store.virt_count(); ++v) out.push_back({true, v});
  return out;
}

Tensor materialize_tokens(const PromptTokenStore& store,
                          const std::vector<TokenRef>& tokens) {
  Tensor t(static_cast<int>(tokens.size()), store.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Tensor& src = tokens[i].is_virtual ? store.virt_tokens : store.attr_tokens;
    std::copy_n(src.row(tokens[i].index), store.dim(), t.row(static_cast<int>(i)));
  }
  return t;
}

double similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    fail(ErrorKind::InvalidArgument, "similarity dimension mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  if (dot >= 0.0) return 1.0 / (1.0 + std::exp(-dot));
  double e = std::exp(dot);
  return e / (1.0 + e);
}

QueryPromptGraph build_prompt_graph(const Tensor& tokens, double delta) {
  if (delta <= 0.0 || delta >= 1.0)
    fail(ErrorKind::InvalidArgument, "delta must lie in (0,1)");
  QueryPromptGraph pg;
  pg.token_count = tokens.rows;
  for (int i = 0; i < tokens.rows; ++i)
    for (int j = i + 1; j < tokens.rows; ++j) {
      double s = similarity({tokens.row(i), static_cast<std::size_t>(tokens.cols)},
                            {tokens.row(j), static_cast<std::size_t>(tokens.cols)});
      if (s > delta) pg.edges.emplace_back(i, j);
    }
  return pg;
}

PromptAugmentedGraph::PromptAugmentedGraph(const AttributedGraph& g,
                                           const PromptTokenStore& store,
                                           const Query& q,
                                           const PromptConfig& cfg)
    : g_(&g), query_(q), cfg_(cfg) {
  if (store.dim() != g.attr_count())
    fail(ErrorKind::Validation,
         "token dimension does not match graph attribute count");
  if (store.attr_count() != g.attr_count())
    fail(ErrorKind::Validation,
         "token store attribute count does not match graph");
  for (int v : q.nodes)
    if (v < 0 || v >= g.node_count())
      fail(ErrorKind::InvalidArgument,
           "query node out of range: " + std::to_string(v));
  if (q.nodes.empty()) fail(ErrorKind::InvalidArgument, "query has no nodes");

  tokens_ = select_query_tokens(store, q, cfg.use_attr_tokens, cfg.use_virt_tokens);
  n_ = g.node_count();
  prompt_.token_count = token_count();

  // ORIGINAL relation: the base graph's adjacency, destinations ascending.
  SegmentSpec& orig = specs_[static_cast<int>(EdgeType::ORIGINAL)];
  orig.src_offsets.push_back(0);
  for (int v = 0; v < n_; ++v) {
    auto nb = g.neighbors(v);
    if (nb.empty()) continue;
    orig.dst.push_back(v);
    orig.src.insert(orig.src.end(), nb.begin(), nb.end());
    orig.src_offsets.push_back(static_cast<int>(orig.src.size()));
  }

  // CROSS relation: attribute tokens to carriers of their attribute, virtual
  // tokens to the query nodes.
  std::vector<std::vector<int>> cross_adj(static_cast<std::size_t>(node_count()));
  for (int k = 0; k < token_count(); ++k) {
    int tk = n_ + k;
    const TokenRef& ref = tokens_[static_cast<std::size_t>(k)];
    const std::vector<int>& targets = ref.is_virtual
                                          ? query_.nodes
                                          : g.nodes_with_attribute(ref.index);
    for (int v : targets) {
      cross_edges_.emplace_back(tk, v);
      cross_adj[static_cast<std::size_t>(v)].push_back(tk);
      cross_adj[static_cast<std::size_t>(tk)].push_back(v);
    }
  }
  SegmentSpec& cross = specs_[static_cast<int>(EdgeType::CROSS)];
  cross.src_offsets.push_back(0);
  for (int v = 0; v < node_count(); ++v) {
    auto& nb = cross_adj[static_cast<std::size_t>(v)];
    if (nb.empty()) continue;
    std::sort(nb.begin(), nb.end());
    cross.dst.push_back(v);
    cross.src.insert(cross.src.end(), nb.begin(), nb.end());
    cross.src_offsets.push_back(static_cast<int>(cross.src.size()));
  }
}

void PromptAugmentedGraph::refresh_prompt_edges(const PromptTokenStore& store) {
  prompt_ = build_prompt_graph(materialize_tokens(store, tokens_), cfg_.delta);
  rebuild_prompt_spec();
}

void PromptAugmentedGraph::rebuild_prompt_spec() {
  SegmentSpec& spec = specs_[static_cast<int>(EdgeType::PROMPT)];
  spec = SegmentSpec{};
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(token_count()));
  for (auto [i, j] : prompt_.edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  spec.src_offsets.push_back(0);
  for (int k = 0; k < token_count(); ++k) {
    auto& nb = adj[static_cast<std::size_t>(k)];
    if (nb.empty()) continue;
    std::sort(nb.begin(), nb.end());
    spec.dst.push_back(n_ + k);
    for (int j : nb) spec.src.push_back(n_ + j);
    spec.src_offsets.push_back(static_cast<int>(spec.src.size()));
  }
}

const SegmentSpec& PromptAugmentedGraph::spec(EdgeType r) const {
  return specs_[static_cast<int>(r)];
}

std::vector<std::tuple<int, int, EdgeType>> PromptAugmentedGraph::all_edges()
    const {
  std::vector<std::tuple<int, int, EdgeType>> out;
  for (auto [u, v] : g_->edges()) out.emplace_back(u, v, EdgeType::ORIGINAL);
  for (auto [i, j] : prompt_.edges)
    out.emplace_back(n_ + i, n_ + j, EdgeType::PROMPT);
  for (auto [tk, v] : cross_edges_) out.emplace_back(v, tk, EdgeType::CROSS);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace place
