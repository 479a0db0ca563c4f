#include "partition.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <memory>
#include <utility>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace place {

using nlohmann::json;

namespace {

// Hop distances from the current seed set; -1 where unreachable.
std::vector<int> multi_source_bfs(const AttributedGraph& g,
                                  const std::vector<int>& sources) {
  std::vector<int> dist(static_cast<std::size_t>(g.node_count()), -1);
  std::vector<int> queue;
  queue.reserve(sources.size());
  for (int sv : sources) {
    dist[static_cast<std::size_t>(sv)] = 0;
    queue.push_back(sv);
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v : g.neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] >= 0) continue;
      dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

std::vector<int> pick_seeds(const AttributedGraph& g, int s, rng::Engine& eng) {
  int n = g.node_count();
  std::vector<int> seeds{rng::uniform_int(eng, 0, n - 1)};
  std::vector<char> is_seed(static_cast<std::size_t>(n), 0);
  is_seed[static_cast<std::size_t>(seeds[0])] = 1;
  while (static_cast<int>(seeds.size()) < s) {
    std::vector<int> dist = multi_source_bfs(g, seeds);
    int best = -1;
    long long best_key = -1;
    for (int v = 0; v < n; ++v) {
      if (is_seed[static_cast<std::size_t>(v)]) continue;
      long long key = dist[static_cast<std::size_t>(v)] < 0
                          ? std::numeric_limits<long long>::max()
                          : dist[static_cast<std::size_t>(v)];
      if (key > best_key) {
        best_key = key;
        best = v;
      }
    }
    seeds.push_back(best);
    is_seed[static_cast<std::size_t>(best)] = 1;
  }
  return seeds;
}

long long count_cut(const AttributedGraph& g, const std::vector<int>& assignment) {
  long long cut = 0;
  for (const auto& [u, v] : g.edges())
    if (assignment[static_cast<std::size_t>(u)] !=
        assignment[static_cast<std::size_t>(v)])
      ++cut;
  return cut;
}

std::vector<std::vector<int>> collect_shards(const std::vector<int>& assignment,
                                             int s) {
  std::vector<std::vector<int>> shards(static_cast<std::size_t>(s));
  for (int v = 0; v < static_cast<int>(assignment.size()); ++v)
    shards[static_cast<std::size_t>(assignment[static_cast<std::size_t>(v)])]
        .push_back(v);
  return shards;
}

}  // namespace

Partition partition_graph(const AttributedGraph& g, int s, std::uint64_t seed,
                          double balance) {
  int n = g.node_count();
  if (s < 1) fail(ErrorKind::InvalidArgument, "shard count must be >= 1");
  if (s > n)
    fail(ErrorKind::InvalidArgument, "shard count exceeds the node count");
  if (balance < 0.0 || balance >= 1.0)
    fail(ErrorKind::InvalidArgument, "balance tolerance must be in [0, 1)");

  Partition p;
  p.s = s;
  p.assignment.assign(static_cast<std::size_t>(n), 0);
  if (s == 1) {
    p.cut = 0;
    p.shard_nodes = collect_shards(p.assignment, s);
    return p;
  }

  double target = static_cast<double>(n) / s;
  // The envelope always admits a perfectly balanced split, even when the
  // tolerance band around n/s contains no integer.
  int cap = std::max((n + s - 1) / s,
                     static_cast<int>(std::floor((1.0 + balance) * target)));
  int floor_min =
      std::max(1, std::min(n / s, static_cast<int>(std::ceil((1.0 - balance) * target))));

  auto eng = rng::make(rng::derive(seed, 30));
  std::vector<int> seeds = pick_seeds(g, s, eng);

  std::vector<int>& assignment = p.assignment;
  assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes(static_cast<std::size_t>(s), 0);
  std::vector<std::vector<int>> order(static_cast<std::size_t>(s));  // BFS order
  std::vector<std::size_t> cursor(static_cast<std::size_t>(s), 0);
  std::vector<std::size_t> next_nbr(static_cast<std::size_t>(n), 0);

  auto assign = [&](int v, int shard) {
    assignment[static_cast<std::size_t>(v)] = shard;
    ++sizes[static_cast<std::size_t>(shard)];
    order[static_cast<std::size_t>(shard)].push_back(v);
  };
  for (int i = 0; i < s; ++i) assign(seeds[static_cast<std::size_t>(i)], i);

  // Round-robin frontier growth: each shard below its cap claims one
  // unassigned neighbor per turn, falling back to the lowest unassigned node
  // when its reachable region is spent (disconnected components).
  int unassigned = n - s;
  int next_free = 0;
  while (unassigned > 0) {
    for (int i = 0; i < s && unassigned > 0; ++i) {
      if (sizes[static_cast<std::size_t>(i)] >= cap) continue;
      bool took = false;
      auto& ord = order[static_cast<std::size_t>(i)];
      auto& cur = cursor[static_cast<std::size_t>(i)];
      while (cur < ord.size() && !took) {
        int u = ord[cur];
        auto nb = g.neighbors(u);
        auto& np = next_nbr[static_cast<std::size_t>(u)];
        while (np < nb.size()) {
          int v = nb[np++];
          if (assignment[static_cast<std::size_t>(v)] < 0) {
            assign(v, i);
            --unassigned;
            took = true;
            break;
          }
        }
        if (!took) ++cur;
      }
      if (!took) {
        while (next_free < n && assignment[static_cast<std::size_t>(next_free)] >= 0)
          ++next_free;
        if (next_free < n) {
          assign(next_free, i);
          --unassigned;
        }
      }
    }
  }

  // Boundary refinement: move a node to the neighboring shard with the higher
  // incident-edge count whenever that strictly lowers the cut and both shard
  // sizes stay inside the envelope.
  std::vector<int> cnt(static_cast<std::size_t>(s), 0);
  for (int pass = 0; pass < 10; ++pass) {
    bool moved = false;
    for (int v = 0; v < n; ++v) {
      int from = assignment[static_cast<std::size_t>(v)];
      if (sizes[static_cast<std::size_t>(from)] - 1 < floor_min) continue;
      std::fill(cnt.begin(), cnt.end(), 0);
      for (int u : g.neighbors(v))
        ++cnt[static_cast<std::size_t>(assignment[static_cast<std::size_t>(u)])];
      int best = -1;
      int best_cnt = cnt[static_cast<std::size_t>(from)];
      for (int t = 0; t < s; ++t) {
        if (t == from || sizes[static_cast<std::size_t>(t)] + 1 > cap) continue;
        if (cnt[static_cast<std::size_t>(t)] > best_cnt) {
          best_cnt = cnt[static_cast<std::size_t>(t)];
          best = t;
        }
      }
      if (best >= 0) {
        assignment[static_cast<std::size_t>(v)] = best;
        --sizes[static_cast<std::size_t>(from)];
        ++sizes[static_cast<std::size_t>(best)];
        moved = true;
      }
    }
    if (!moved) break;
  }

  p.cut = count_cut(g, assignment);
  p.shard_nodes = collect_shards(assignment, s);
  return p;
}

void save_partition(const Partition& p, const std::string& path,
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
  j["s"] = p.s;
  j["assignment"] = p.assignment;
  j["cut"] = p.cut;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path);
  out << j.dump() << "\n";
}

Partition load_partition(const std::string& path, const AttributedGraph& g) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("s") || !j.contains("assignment"))
    fail(ErrorKind::Parse, "partition file missing \"s\" or \"assignment\"");
  Partition p;
  p.s = j["s"].get<int>();
  if (p.s < 1) fail(ErrorKind::Validation, "partition shard count must be >= 1");
  if (!j["assignment"].is_array() ||
      static_cast<int>(j["assignment"].size()) != g.node_count())
    fail(ErrorKind::Validation,
         "partition assignment length does not match the graph");
  p.assignment.reserve(j["assignment"].size());
  for (const auto& v : j["assignment"]) {
    if (!v.is_number_integer())
      fail(ErrorKind::Parse, "partition assignment entries must be integers");
    int shard = v.get<int>();
    if (shard < 0 || shard >= p.s)
      fail(ErrorKind::Validation, "partition assignment shard id out of range");
    p.assignment.push_back(shard);
  }
  p.shard_nodes = collect_shards(p.assignment, p.s);
  for (int i = 0; i < p.s; ++i)
    if (p.shard_nodes[static_cast<std::size_t>(i)].empty())
      fail(ErrorKind::Validation, "partition shard " + std::to_string(i) + " is empty");
  p.cut = count_cut(g, p.assignment);
  return p;
}

QueryRouteSubgraph build_query_route(const AttributedGraph& g,
                                     const Partition& p, int shard_id,
                                     const Query& q) {
  int n = g.node_count();
  if (static_cast<int>(p.assignment.size()) != n)
    fail(ErrorKind::InvalidArgument, "partition does not match the graph");
  if (shard_id < 0 || shard_id >= p.s)
    fail(ErrorKind::InvalidArgument, "shard id out of range");
  if (q.nodes.empty()) fail(ErrorKind::InvalidArgument, "query has no nodes");

  std::vector<char> is_query(static_cast<std::size_t>(n), 0);
  for (int v : q.nodes) {
    if (v < 0 || v >= n)
      fail(ErrorKind::InvalidArgument, "query node out of range: " + std::to_string(v));
    is_query[static_cast<std::size_t>(v)] = 1;
  }
  auto in_shard = [&](int v) {
    return p.assignment[static_cast<std::size_t>(v)] == shard_id;
  };

  QueryRouteSubgraph route;
  route.shard_id = shard_id;
  route.global_ids = p.shard_nodes[static_cast<std::size_t>(shard_id)];
  for (int v : q.nodes)
    if (!in_shard(v)) route.global_ids.push_back(v);
  std::sort(route.global_ids.begin(), route.global_ids.end());

  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < route.global_ids.size(); ++i)
    local[static_cast<std::size_t>(route.global_ids[i])] = static_cast<int>(i);

  // Shard-internal edges plus the one-hop edges of the query nodes into the
  // shard; edges between two out-of-shard query nodes are not routed.
  std::vector<std::pair<int, int>> edges;
  for (const auto& [u, v] : g.edges()) {
    bool keep = (in_shard(u) && in_shard(v)) ||
                (in_shard(u) && is_query[static_cast<std::size_t>(v)]) ||
                (in_shard(v) && is_query[static_cast<std::size_t>(u)]);
    if (keep)
      edges.emplace_back(local[static_cast<std::size_t>(u)],
                         local[static_cast<std::size_t>(v)]);
  }

  std::vector<std::vector<int>> attrs;
  attrs.reserve(route.global_ids.size());
  for (int gid : route.global_ids) attrs.push_back(g.attrs_of(gid));

  route.graph = AttributedGraph::build(static_cast<int>(route.global_ids.size()),
                                       g.attr_count(), std::move(edges),
                                       std::move(attrs));
  route.query_local.reserve(q.nodes.size());
  for (int v : q.nodes) route.query_local.push_back(local[static_cast<std::size_t>(v)]);
  std::sort(route.query_local.begin(), route.query_local.end());
  return route;
}

namespace {

// Cached per-(query, shard) training state. Heap-allocated so the augmented
// graph's pointer into the route graph stays valid as the cache grows.
struct RouteEntry {
  QueryRouteSubgraph route;
  LabeledQuery labels;  // local ids, restricted to the route
  std::unique_ptr<PromptAugmentedGraph> gm;
};

std::unique_ptr<RouteEntry> make_route_entry(const AttributedGraph& g,
                                             const Partition& p, int shard,
                                             const LabeledQuery& lq,
                                             const PromptTokenStore& tokens,
                                             const PromptConfig& pcfg) {
  auto entry = std::make_unique<RouteEntry>();
  entry->route = build_query_route(g, p, shard, lq.query);
  entry->labels.query.nodes = entry->route.query_local;
  entry->labels.query.attrs = lq.query.attrs;
  for (std::size_t i = 0; i < entry->route.global_ids.size(); ++i) {
    int gid = entry->route.global_ids[i];
    if (std::binary_search(lq.positives.begin(), lq.positives.end(), gid))
      entry->labels.positives.push_back(static_cast<int>(i));
    if (std::binary_search(lq.negatives.begin(), lq.negatives.end(), gid))
      entry->labels.negatives.push_back(static_cast<int>(i));
  }
  entry->gm = std::make_unique<PromptAugmentedGraph>(entry->route.graph, tokens,
                                                     entry->labels.query, pcfg);
  return entry;
}

}  // namespace

Prediction infer_scaled(const AttributedGraph& g, const Partition& p,
                        const PromptTokenStore& tokens, const Query& q,
                        const EncoderParams& params, const PromptConfig& pcfg) {
  if (static_cast<int>(p.assignment.size()) != g.node_count())
    fail(ErrorKind::InvalidArgument, "partition does not match the graph");
  Prediction out;
  out.probs.assign(static_cast<std::size_t>(g.node_count()), 0.0);
  for (int shard = 0; shard < p.s; ++shard) {
    QueryRouteSubgraph route = build_query_route(g, p, shard, q);
    Query local_q;
    local_q.nodes = route.query_local;
    local_q.attrs = q.attrs;
    Prediction pred = forward_pass(route.graph, tokens, local_q, params, pcfg);
    for (std::size_t i = 0; i < route.global_ids.size(); ++i) {
      int gid = route.global_ids[i];
      if (p.assignment[static_cast<std::size_t>(gid)] == shard)
        out.probs[static_cast<std::size_t>(gid)] = pred.probs[i];
    }
  }
  return out;
}

TrainResult train_scaled(const AttributedGraph& g,
                         const std::vector<Community>& communities,
                         const std::vector<LabeledQuery>& train_queries,
                         const std::vector<LabeledQuery>& val_queries,
                         PromptTokenStore tokens, EncoderParams params,
                         const TrainConfig& cfg, const Partition& p,
                         int shards_per_query) {
  if (train_queries.empty())
    fail(ErrorKind::InvalidArgument, "training needs at least one query");
  if (cfg.epochs < 1) fail(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (cfg.lr_theta < 0.0 || cfg.lr_tau < 0.0)
    fail(ErrorKind::InvalidArgument, "learning rates must be >= 0");
  if (tokens.dim() != g.attr_count() || params.cfg.d_in != g.attr_count())
    fail(ErrorKind::Validation, "state dimensions do not match the graph");
  if (static_cast<int>(p.assignment.size()) != g.node_count())
    fail(ErrorKind::InvalidArgument, "partition does not match the graph");
  if (shards_per_query < 1)
    fail(ErrorKind::InvalidArgument, "shards per query must be >= 1");

  auto started = std::chrono::steady_clock::now();
  PromptConfig pcfg = cfg.prompt_config();
  int spq = std::min(shards_per_query, p.s);

  std::vector<std::vector<std::unique_ptr<RouteEntry>>> train_ctx, val_ctx;
  train_ctx.reserve(train_queries.size());
  for (const auto& lq : train_queries) {
    auto& per_shard = train_ctx.emplace_back();
    for (int shard = 0; shard < p.s; ++shard)
      per_shard.push_back(make_route_entry(g, p, shard, lq, tokens, pcfg));
  }
  val_ctx.reserve(val_queries.size());
  for (const auto& lq : val_queries) {
    auto& per_shard = val_ctx.emplace_back();
    for (int shard = 0; shard < p.s; ++shard)
      per_shard.push_back(make_route_entry(g, p, shard, lq, tokens, pcfg));
  }

  detail::OptState opt = detail::OptState::make(tokens, params);
  auto shard_eng = rng::make(rng::derive(cfg.seed, 40));
  std::vector<int> all_shards(static_cast<std::size_t>(p.s));
  for (int i = 0; i < p.s; ++i) all_shards[static_cast<std::size_t>(i)] = i;

  TrainResult result;
  TrainReport& report = result.report;
  PromptTokenStore best_tokens;
  EncoderParams best_params;

  auto touch_route = [&report](const QueryRouteSubgraph& route) {
    report.max_route_nodes =
        std::max(report.max_route_nodes, route.graph.node_count());
  };

  // Mean validation F1 with divide-and-conquer inference over the cached
  // routes; merged by the home-shard rule, same numbers as infer_scaled.
  auto scaled_val_f1 = [&]() {
    if (val_queries.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t qi = 0; qi < val_queries.size(); ++qi) {
      Prediction merged;
      merged.probs.assign(static_cast<std::size_t>(g.node_count()), 0.0);
      for (int shard = 0; shard < p.s; ++shard) {
        RouteEntry& entry = *val_ctx[qi][static_cast<std::size_t>(shard)];
        touch_route(entry.route);
        entry.gm->refresh_prompt_edges(tokens);
        ForwardPlan plan = build_forward(*entry.gm, tokens, params, GradMode::None);
        const Tensor& probs = plan.tape.value(plan.probs);
        for (std::size_t i = 0; i < entry.route.global_ids.size(); ++i) {
          int gid = entry.route.global_ids[i];
          if (p.assignment[static_cast<std::size_t>(gid)] == shard)
            merged.probs[static_cast<std::size_t>(gid)] = probs.data[i];
        }
      }
      Metrics m = prf1(predict_community(merged),
                       detail::ground_truth(communities, val_queries[qi]));
      total += m.f1;
    }
    return total / static_cast<double>(val_queries.size());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t qi = 0; qi < train_queries.size(); ++qi) {
      std::vector<int> shard_ids =
          spq == p.s ? all_shards
                     : rng::sample_without_replacement(shard_eng, all_shards,
                                                       static_cast<std::size_t>(spq));
      for (int shard : shard_ids) {
        RouteEntry& entry = *train_ctx[qi][static_cast<std::size_t>(shard)];
        touch_route(entry.route);
        try {
          loss_sum += detail::alternation_step(entry.route.graph, *entry.gm,
                                               entry.labels, tokens, params, opt,
                                               cfg, true, true);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::Numeric)
            fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + ", query " +
                                         std::to_string(qi) + ", shard " +
                                         std::to_string(shard) + ": " + e.what());
          throw;
        }
        ++steps;
      }
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(steps));

    double f1 = scaled_val_f1();
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

}  // namespace place
