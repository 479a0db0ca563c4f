#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "error.hpp"
#include "graph.hpp"
#include "oracles.hpp"

using place::AttributedGraph;
using place::Community;
using place::Dataset;
using place::Error;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("build canonicalizes and validates") {
  // Edges arrive unordered and reversed; they come back sorted with u < v.
  auto g = AttributedGraph::build(4, 2, {{2, 0}, {3, 2}, {1, 0}},
                                  {{1}, {0}, {}, {0, 1}});
  CHECK(g.node_count() == 4);
  CHECK(g.edge_count() == 3);
  CHECK(g.attr_count() == 2);
  CHECK(g.edges() == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {2, 3}});
  CHECK(g.has_edge(2, 0));
  CHECK(!g.has_edge(1, 2));

  CHECK_THROWS_AS(AttributedGraph::build(2, 0, {{0, 0}}, {{}, {}}), Error);
  CHECK_THROWS_AS(AttributedGraph::build(2, 0, {{0, 1}, {1, 0}}, {{}, {}}), Error);
  CHECK_THROWS_AS(AttributedGraph::build(2, 0, {{0, 2}}, {{}, {}}), Error);
  CHECK_THROWS_AS(AttributedGraph::build(2, 1, {}, {{1}, {}}), Error);
  CHECK_THROWS_AS(AttributedGraph::build(2, 1, {}, {{0}}), Error);
}

TEST_CASE("adjacency matches a naive edge scan") {
  place::rng::Engine eng = place::rng::make(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = oracles::random_graph(eng, 30, 4);
    for (int v = 0; v < g.node_count(); ++v) {
      std::set<int> naive;
      for (auto [a, b] : g.edges()) {
        if (a == v) naive.insert(b);
        if (b == v) naive.insert(a);
      }
      auto nb = g.neighbors(v);
      CHECK(std::vector<int>(nb.begin(), nb.end()) ==
            std::vector<int>(naive.begin(), naive.end()));
    }
  }
}

TEST_CASE("attribute index matches a naive scan") {
  place::rng::Engine eng = place::rng::make(12);
  auto g = oracles::random_graph(eng, 40, 5);
  for (int a = 0; a < g.attr_count(); ++a) {
    std::vector<int> naive;
    for (int v = 0; v < g.node_count(); ++v)
      for (int x : g.attrs_of(v))
        if (x == a) naive.push_back(v);
    CHECK(g.nodes_with_attribute(a) == naive);
  }
}

TEST_CASE("features are the binary indicator rows") {
  auto g = AttributedGraph::build(3, 3, {{0, 1}}, {{0, 2}, {}, {1}});
  const auto& f = g.features();
  REQUIRE(f.size() == 9);
  CHECK(f == std::vector<double>{1, 0, 1, 0, 0, 0, 0, 1, 0});
  auto row = g.feature_row(2);
  CHECK(std::vector<double>(row.begin(), row.end()) == std::vector<double>{0, 1, 0});
}

TEST_CASE("duplicate attributes collapse") {
  auto g = AttributedGraph::build(1, 2, {}, {{1, 0, 1}});
  CHECK(g.attrs_of(0) == std::vector<int>{0, 1});
}

TEST_CASE("out-of-range lookups are rejected") {
  auto g = oracles::path5();
  CHECK_THROWS_AS(g.neighbors(-1), Error);
  CHECK_THROWS_AS(g.neighbors(5), Error);
  CHECK_THROWS_AS(g.attrs_of(9), Error);
  CHECK_THROWS_AS(g.nodes_with_attribute(2), Error);
}

TEST_CASE("dataset round-trips through a file") {
  Dataset ds;
  ds.graph = oracles::two_cliques4();
  ds.communities = {Community{{0, 1, 2, 3}}, Community{{4, 5, 6, 7}}};
  std::string path = temp_file("place_test_graph_rt.json");
  place::save_dataset(ds, path, "{\"config_hash\":\"abc\",\"seed\":7}");

  Dataset back = place::load_dataset(path);
  CHECK(back.graph == ds.graph);
  REQUIRE(back.communities.size() == 2);
  CHECK(back.communities[0].members == ds.communities[0].members);
  CHECK(back.communities[1].members == ds.communities[1].members);

  // The header block is present in the file and ignored on load.
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("config_hash") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("string ids are remapped through a persistent sidecar") {
  std::string path = temp_file("place_test_graph_names.json");
  std::string dict = path + ".dict.json";
  std::remove(dict.c_str());
  {
    std::ofstream out(path);
    out << R"({"n":3,"c":2,
               "edges":[["alice","bob"],["bob","carol"]],
               "attrs":[["ml"],["db"],["ml","db"]]})";
  }
  Dataset ds = place::load_dataset(path);
  CHECK(ds.graph.node_count() == 3);
  CHECK(ds.graph.edge_count() == 2);
  // First-seen order: alice=0, bob=1, carol=2; ml=0, db=1.
  CHECK(ds.graph.has_edge(0, 1));
  CHECK(ds.graph.has_edge(1, 2));
  CHECK(ds.graph.attrs_of(2) == std::vector<int>{0, 1});
  CHECK(std::filesystem::exists(dict));

  // A second load reuses the sidecar and yields the same mapping.
  Dataset again = place::load_dataset(path);
  CHECK(again.graph == ds.graph);
  std::remove(path.c_str());
  std::remove(dict.c_str());
}

TEST_CASE("malformed files fail with parse or io errors") {
  CHECK_THROWS_AS(place::load_dataset(temp_file("place_no_such_file.json")), Error);
  std::string path = temp_file("place_test_graph_bad.json");
  {
    std::ofstream out(path);
    out << "{\"n\": 2";
  }
  CHECK_THROWS_AS(place::load_dataset(path), Error);
  {
    std::ofstream out(path);
    out << R"({"n":2,"c":0,"edges":[[0]],"attrs":[[],[]]})";
  }
  CHECK_THROWS_AS(place::load_dataset(path), Error);
  {
    std::ofstream out(path);
    out << R"({"n":2,"c":0,"edges":[]})";
  }
  CHECK_THROWS_AS(place::load_dataset(path), Error);
  std::remove(path.c_str());
}
