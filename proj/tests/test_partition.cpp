#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "oracles.hpp"
#include "partition.hpp"
#include "synth.hpp"
#include "trainer.hpp"

using place::AttributedGraph;
using place::Community;
using place::EncoderConfig;
using place::EncoderParams;
using place::Error;
using place::LabeledQuery;
using place::Partition;
using place::Prediction;
using place::PromptConfig;
using place::PromptTokenStore;
using place::Query;
using place::QueryRouteSubgraph;
using place::TrainConfig;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool same_params(const EncoderParams& a, const EncoderParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (!(a.layers[k].w_self == b.layers[k].w_self)) return false;
    if (!(a.layers[k].bias == b.layers[k].bias)) return false;
    for (int r = 0; r < place::kEdgeTypes; ++r)
      if (!(a.layers[k].w_rel[static_cast<std::size_t>(r)] ==
            b.layers[k].w_rel[static_cast<std::size_t>(r)]))
        return false;
  }
  return true;
}

bool same_tokens(const PromptTokenStore& a, const PromptTokenStore& b) {
  return a.attr_tokens == b.attr_tokens && a.virt_tokens == b.virt_tokens;
}

place::Dataset sbm60() {
  place::SynthConfig cfg;
  cfg.communities = 4;
  cfg.nodes_per_community = 15;
  cfg.p_in = 0.4;
  cfg.p_out = 0.04;
  cfg.seed = 3;
  return place::generate_synthetic(cfg);
}

long long recount_cut(const AttributedGraph& g, const std::vector<int>& assignment) {
  long long cut = 0;
  for (const auto& [u, v] : g.edges())
    if (assignment[static_cast<std::size_t>(u)] !=
        assignment[static_cast<std::size_t>(v)])
      ++cut;
  return cut;
}

void check_valid_partition(const AttributedGraph& g, const Partition& p, int s) {
  REQUIRE(p.s == s);
  REQUIRE(static_cast<int>(p.assignment.size()) == g.node_count());
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  REQUIRE(static_cast<int>(p.shard_nodes.size()) == s);
  for (int i = 0; i < s; ++i) {
    CHECK(!p.shard_nodes[static_cast<std::size_t>(i)].empty());
    CHECK(std::is_sorted(p.shard_nodes[static_cast<std::size_t>(i)].begin(),
                         p.shard_nodes[static_cast<std::size_t>(i)].end()));
    for (int v : p.shard_nodes[static_cast<std::size_t>(i)]) {
      REQUIRE(v >= 0);
      REQUIRE(v < g.node_count());
      CHECK(p.assignment[static_cast<std::size_t>(v)] == i);
      CHECK(!seen[static_cast<std::size_t>(v)]);
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (char c : seen) CHECK(c == 1);  // every node lands in exactly one shard
  CHECK(p.cut == recount_cut(g, p.assignment));
}

// Fully-supervised queries over the two-clique graph, mirroring the trainer
// tests so the scaled trainer can be compared against the plain one.
struct Fixture {
  AttributedGraph g = oracles::two_cliques4();
  std::vector<Community> comms = {Community{{0, 1, 2, 3}},
                                  Community{{4, 5, 6, 7}}};
  std::vector<LabeledQuery> train, val;

  Fixture() {
    train.push_back({Query{{0, 1}, {0}, 0}, {0, 1, 2, 3}, {4, 5, 6, 7}});
    train.push_back({Query{{5, 6}, {1}, 1}, {4, 5, 6, 7}, {0, 1, 2, 3}});
    val.push_back({Query{{2, 3}, {0}, 0}, {0, 1, 2, 3}, {4, 5, 6, 7}});
    val.push_back({Query{{4, 7}, {1}, 1}, {4, 5, 6, 7}, {0, 1, 2, 3}});
  }

  PromptTokenStore tokens(std::uint64_t seed = 1) const {
    return place::init_tokens(2, 1, 2, seed);
  }
  EncoderParams params(std::uint64_t seed = 2) const {
    return place::init_encoder(EncoderConfig{2, 8, 2}, seed);
  }
  TrainConfig config() const {
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.lr_theta = 0.02;
    cfg.lr_tau = 0.02;
    cfg.seed = 5;
    return cfg;
  }
};

}  // namespace

TEST_CASE("a single shard is the identity partition") {
  auto g = oracles::two_cliques4();
  Partition p = place::partition_graph(g, 1, 7);
  check_valid_partition(g, p, 1);
  CHECK(p.cut == 0);
  for (int a : p.assignment) CHECK(a == 0);
  CHECK(p.shard_nodes[0] == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("two cliques separate cleanly into two shards") {
  auto g = oracles::two_cliques4();
  Partition p = place::partition_graph(g, 2, 11);
  check_valid_partition(g, p, 2);
  CHECK(p.cut == 0);
  std::set<std::vector<int>> shards(p.shard_nodes.begin(), p.shard_nodes.end());
  std::set<std::vector<int>> want = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  CHECK(shards == want);
}

TEST_CASE("shards stay balanced and the cut is counted correctly") {
  auto ds = sbm60();
  int n = ds.graph.node_count();
  for (int s : {2, 4, 8}) {
    CAPTURE(s);
    Partition p = place::partition_graph(ds.graph, s, 17);
    check_valid_partition(ds.graph, p, s);
    double target = static_cast<double>(n) / s;
    for (int i = 0; i < s; ++i) {
      auto size = static_cast<int>(p.shard_nodes[static_cast<std::size_t>(i)].size());
      CHECK(size >= static_cast<int>(std::floor(0.9 * target)) - 1);
      CHECK(size <= static_cast<int>(std::ceil(1.1 * target)) + 1);
    }
  }
}

TEST_CASE("partitioning is deterministic in the seed") {
  auto ds = sbm60();
  Partition a = place::partition_graph(ds.graph, 4, 23);
  Partition b = place::partition_graph(ds.graph, 4, 23);
  CHECK(a.assignment == b.assignment);
  CHECK(a.cut == b.cut);
}

TEST_CASE("disconnected graphs are covered completely") {
  // Two triangles plus six isolated nodes; frontier growth has to fall back
  // to unreached nodes.
  auto g = AttributedGraph::build(
      12, 1, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
      {{0}, {}, {}, {0}, {}, {}, {}, {}, {}, {}, {}, {}});
  Partition p = place::partition_graph(g, 3, 13);
  check_valid_partition(g, p, 3);
}

TEST_CASE("one shard per node puts every edge on the cut") {
  auto g = oracles::two_cliques4();
  Partition p = place::partition_graph(g, 8, 19);
  check_valid_partition(g, p, 8);
  CHECK(p.cut == g.edge_count());
  for (const auto& shard : p.shard_nodes) CHECK(shard.size() == 1);
}

TEST_CASE("partition argument validation") {
  auto g = oracles::two_cliques4();
  CHECK_THROWS_AS(place::partition_graph(g, 0, 1), Error);
  CHECK_THROWS_AS(place::partition_graph(g, 9, 1), Error);
  CHECK_THROWS_AS(place::partition_graph(g, 2, 1, -0.1), Error);
  CHECK_THROWS_AS(place::partition_graph(g, 2, 1, 1.0), Error);
}

TEST_CASE("partition files round-trip") {
  auto ds = sbm60();
  Partition p = place::partition_graph(ds.graph, 4, 29);
  std::string path = temp_file("place_test_partition.json");
  place::save_partition(p, path, R"({"config_hash":"abc","seed":29})");

  Partition q = place::load_partition(path, ds.graph);
  CHECK(q.s == p.s);
  CHECK(q.assignment == p.assignment);
  CHECK(q.cut == p.cut);
  CHECK(q.shard_nodes == p.shard_nodes);

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"meta\"") != std::string::npos);
  CHECK(text.find("config_hash") != std::string::npos);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(place::save_partition(p, path, "{not json"), Error);
}

TEST_CASE("partition loading validates against the graph") {
  auto g = oracles::two_cliques4();
  std::string path = temp_file("place_test_partition_bad.json");

  CHECK_THROWS_AS(place::load_partition(temp_file("place_test_absent.json"), g),
                  Error);

  auto write = [&](const std::string& text) {
    std::ofstream out(path);
    out << text;
  };
  write("{\"s\": 2");  // truncated
  CHECK_THROWS_AS(place::load_partition(path, g), Error);
  write(R"({"s": 2, "assignment": [0, 0, 0, 0]})");  // wrong length
  CHECK_THROWS_AS(place::load_partition(path, g), Error);
  write(R"({"s": 2, "assignment": [0, 0, 0, 0, 0, 0, 0, 3]})");  // id range
  CHECK_THROWS_AS(place::load_partition(path, g), Error);
  write(R"({"s": 2, "assignment": [0, 0, 0, 0, 0, 0, 0, 0]})");  // empty shard
  CHECK_THROWS_AS(place::load_partition(path, g), Error);

  // A hand-written valid file loads, and the cut is recomputed from scratch.
  write(R"({"s": 2, "assignment": [0, 0, 0, 0, 1, 1, 1, 1], "cut": 999})");
  Partition p = place::load_partition(path, g);
  CHECK(p.cut == 0);
  CHECK(p.shard_nodes[0] == std::vector<int>{0, 1, 2, 3});
  std::filesystem::remove(path);
}

TEST_CASE("single-shard routing reproduces the whole graph") {
  auto g = oracles::two_cliques4();
  Partition p = place::partition_graph(g, 1, 3);
  Query q{{0, 5}, {0}, -1};
  QueryRouteSubgraph route = place::build_query_route(g, p, 0, q);
  CHECK(route.shard_id == 0);
  CHECK(route.graph == g);
  CHECK(route.global_ids == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(route.query_local == q.nodes);
}

TEST_CASE("route subgraphs keep shard edges plus query edges into the shard") {
  auto ds = sbm60();
  const AttributedGraph& g = ds.graph;
  Partition p = place::partition_graph(g, 4, 31);

  // Anchor the query in two different shards so some shard sees out-of-shard
  // query nodes.
  int a = p.shard_nodes[0][0];
  int b = p.shard_nodes[1][0];
  Query q;
  q.nodes = {std::min(a, b), std::max(a, b)};
  q.attrs = {0};

  for (int sid = 0; sid < p.s; ++sid) {
    CAPTURE(sid);
    QueryRouteSubgraph route = place::build_query_route(g, p, sid, q);

    std::set<int> ids(p.shard_nodes[static_cast<std::size_t>(sid)].begin(),
                      p.shard_nodes[static_cast<std::size_t>(sid)].end());
    for (int v : q.nodes) ids.insert(v);
    std::vector<int> want_ids(ids.begin(), ids.end());
    REQUIRE(route.global_ids == want_ids);

    std::vector<int> local(static_cast<std::size_t>(g.node_count()), -1);
    for (std::size_t i = 0; i < want_ids.size(); ++i)
      local[static_cast<std::size_t>(want_ids[i])] = static_cast<int>(i);

    auto in_shard = [&](int v) {
      return p.assignment[static_cast<std::size_t>(v)] == sid;
    };
    auto is_query = [&](int v) {
      return std::find(q.nodes.begin(), q.nodes.end(), v) != q.nodes.end();
    };
    std::set<std::pair<int, int>> want_edges;
    for (const auto& [u, v] : g.edges()) {
      bool keep = (in_shard(u) && in_shard(v)) || (in_shard(u) && is_query(v)) ||
                  (in_shard(v) && is_query(u));
      if (!keep) continue;
      int lu = local[static_cast<std::size_t>(u)];
      int lv = local[static_cast<std::size_t>(v)];
      want_edges.emplace(std::min(lu, lv), std::max(lu, lv));
    }
    auto got = route.graph.edges();
    std::set<std::pair<int, int>> got_edges(got.begin(), got.end());
    CHECK(got_edges == want_edges);

    // Node payloads travel with the nodes.
    for (std::size_t i = 0; i < want_ids.size(); ++i)
      CHECK(route.graph.attrs_of(static_cast<int>(i)) == g.attrs_of(want_ids[i]));

    // The query maps onto local ids and back.
    REQUIRE(route.query_local.size() == q.nodes.size());
    std::vector<int> back;
    for (int lv : route.query_local) back.push_back(want_ids[static_cast<std::size_t>(lv)]);
    std::sort(back.begin(), back.end());
    CHECK(back == q.nodes);
  }

  Query bad = q;
  bad.nodes = {g.node_count()};
  CHECK_THROWS_AS(place::build_query_route(g, p, 0, bad), Error);
  CHECK_THROWS_AS(place::build_query_route(g, p, p.s, q), Error);
  CHECK_THROWS_AS(place::build_query_route(g, p, 0, Query{}), Error);
}

TEST_CASE("scaled inference with one shard matches the plain forward pass") {
  Fixture f;
  auto tokens = f.tokens();
  auto params = f.params();
  PromptConfig pcfg;
  Query q{{0}, {0}, -1};

  Partition p1 = place::partition_graph(f.g, 1, 2);
  Prediction direct = place::forward_pass(f.g, tokens, q, params, pcfg);
  Prediction scaled = place::infer_scaled(f.g, p1, tokens, q, params, pcfg);
  REQUIRE(scaled.probs.size() == direct.probs.size());
  for (std::size_t i = 0; i < direct.probs.size(); ++i)
    CHECK(scaled.probs[i] == direct.probs[i]);  // same route graph, same numbers
}

TEST_CASE("scaled inference scores every node from its home shard") {
  Fixture f;
  auto tokens = f.tokens(4);
  auto params = f.params(5);
  PromptConfig pcfg;
  Query q{{0, 1}, {0}, -1};

  Partition p = place::partition_graph(f.g, 2, 11);
  Prediction merged = place::infer_scaled(f.g, p, tokens, q, params, pcfg);
  REQUIRE(static_cast<int>(merged.probs.size()) == f.g.node_count());
  for (double v : merged.probs) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  // Each node's probability equals a fresh per-shard forward pass on that
  // node's own route graph.
  for (int sid = 0; sid < p.s; ++sid) {
    QueryRouteSubgraph route = place::build_query_route(f.g, p, sid, q);
    Query local;
    local.nodes = route.query_local;
    local.attrs = q.attrs;
    Prediction pred = place::forward_pass(route.graph, tokens, local, params, pcfg);
    for (std::size_t i = 0; i < route.global_ids.size(); ++i) {
      int gid = route.global_ids[i];
      if (p.assignment[static_cast<std::size_t>(gid)] == sid)
        CHECK(merged.probs[static_cast<std::size_t>(gid)] == pred.probs[i]);
    }
  }

  Prediction again = place::infer_scaled(f.g, p, tokens, q, params, pcfg);
  CHECK(again.probs == merged.probs);
}

TEST_CASE("scaled training over one shard equals plain training") {
  Fixture f;
  TrainConfig cfg = f.config();
  Partition p1 = place::partition_graph(f.g, 1, 2);

  auto plain = place::train(f.g, f.comms, f.train, f.val, f.tokens(), f.params(), cfg);
  auto scaled = place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                    f.params(), cfg, p1, 1);

  CHECK(plain.report.train_loss == scaled.report.train_loss);
  CHECK(plain.report.val_f1 == scaled.report.val_f1);
  CHECK(plain.report.best_epoch == scaled.report.best_epoch);
  CHECK(plain.report.best_val_f1 == scaled.report.best_val_f1);
  CHECK(same_tokens(plain.tokens, scaled.tokens));
  CHECK(same_params(plain.params, scaled.params));
}

TEST_CASE("scaled training on two shards learns and reports route sizes") {
  Fixture f;
  TrainConfig cfg = f.config();
  cfg.epochs = 20;
  Partition p = place::partition_graph(f.g, 2, 11);

  // All shards per query: every training step sees either the 4-node home
  // shard or the other clique plus the two query nodes.
  auto res = place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                 f.params(), cfg, p, 2);
  REQUIRE(res.report.train_loss.size() == 20);
  for (double l : res.report.train_loss) CHECK(std::isfinite(l));
  CHECK(res.report.max_route_nodes == 6);
  CHECK(res.report.best_val_f1 > 0.9);

  // Sampled shards: route sizes stay within the same envelope.
  auto sampled = place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                     f.params(), cfg, p, 1);
  CHECK(sampled.report.max_route_nodes >= 4);
  CHECK(sampled.report.max_route_nodes <= 6);
  CHECK(std::isfinite(sampled.report.train_loss.back()));

  // Shard draws are seeded: identical calls give identical histories.
  auto again = place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                   f.params(), cfg, p, 1);
  CHECK(again.report.train_loss == sampled.report.train_loss);
  CHECK(again.report.val_f1 == sampled.report.val_f1);
  CHECK(same_tokens(again.tokens, sampled.tokens));
  CHECK(same_params(again.params, sampled.params));
}

TEST_CASE("scaled entry points validate their inputs") {
  Fixture f;
  TrainConfig cfg = f.config();
  Partition p = place::partition_graph(f.g, 2, 11);

  CHECK_THROWS_AS(place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                      f.params(), cfg, p, 0),
                  Error);

  // A partition of a different graph does not match.
  auto other = place::partition_graph(sbm60().graph, 2, 1);
  CHECK_THROWS_AS(place::train_scaled(f.g, f.comms, f.train, f.val, f.tokens(),
                                      f.params(), cfg, other, 1),
                  Error);
  CHECK_THROWS_AS(place::infer_scaled(f.g, other, f.tokens(), Query{{0}, {}, -1},
                                      f.params(), PromptConfig{}),
                  Error);
}
