#include "graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace place {

using nlohmann::json;

AttributedGraph AttributedGraph::build(int node_count, int attr_count,
                                       std::vector<std::pair<int, int>> edges,
                                       std::vector<std::vector<int>> node_attrs) {
  if (node_count < 0 || attr_count < 0)
    fail(ErrorKind::Validation, "negative node or attribute count");
  if (static_cast<int>(node_attrs.size()) != node_count)
    fail(ErrorKind::Validation,
         "node_attrs length " + std::to_string(node_attrs.size()) +
             " does not match node count " + std::to_string(node_count));

  AttributedGraph g;
  g.n_ = node_count;
  g.c_ = attr_count;

  for (auto& [u, v] : edges) {
    if (u < 0 || u >= node_count || v < 0 || v >= node_count)
      fail(ErrorKind::Validation, "edge endpoint out of range: (" +
                                      std::to_string(u) + "," +
                                      std::to_string(v) + ")");
    if (u == v)
      fail(ErrorKind::Validation, "self-loop on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    fail(ErrorKind::Validation, "duplicate edge in input");
  g.edges_ = std::move(edges);

  for (auto& attrs : node_attrs) {
    std::sort(attrs.begin(), attrs.end());
    attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
    for (int a : attrs)
      if (a < 0 || a >= attr_count)
        fail(ErrorKind::Validation,
             "attribute id out of range: " + std::to_string(a));
  }
  g.node_attrs_ = std::move(node_attrs);

  // CSR adjacency, neighbor lists ascending.
  std::vector<int> degree(node_count, 0);
  for (auto [u, v] : g.edges_) {
    ++degree[u];
    ++degree[v];
  }
  g.adj_offsets_.assign(node_count + 1, 0);
  for (int v = 0; v < node_count; ++v)
    g.adj_offsets_[v + 1] = g.adj_offsets_[v] + degree[v];
  g.adj_.resize(g.adj_offsets_.back());
  std::vector<int> cursor(g.adj_offsets_.begin(), g.adj_offsets_.end() - 1);
  for (auto [u, v] : g.edges_) {
    g.adj_[cursor[u]++] = v;
    g.adj_[cursor[v]++] = u;
  }
  for (int v = 0; v < node_count; ++v)
    std::sort(g.adj_.begin() + g.adj_offsets_[v],
              g.adj_.begin() + g.adj_offsets_[v + 1]);

  g.attr_index_.assign(attr_count, {});
  for (int v = 0; v < node_count; ++v)
    for (int a : g.node_attrs_[v]) g.attr_index_[a].push_back(v);

  g.features_.assign(static_cast<std::size_t>(node_count) * attr_count, 0.0);
  for (int v = 0; v < node_count; ++v)
    for (int a : g.node_attrs_[v])
      g.features_[static_cast<std::size_t>(v) * attr_count + a] = 1.0;

  return g;
}

const std::vector<int>& AttributedGraph::attrs_of(int v) const {
  if (v < 0 || v >= n_)
    fail(ErrorKind::InvalidArgument, "node id out of range: " + std::to_string(v));
  return node_attrs_[v];
}

std::span<const int> AttributedGraph::neighbors(int v) const {
  if (v < 0 || v >= n_)
    fail(ErrorKind::InvalidArgument, "node id out of range: " + std::to_string(v));
  return {adj_.data() + adj_offsets_[v],
          static_cast<std::size_t>(adj_offsets_[v + 1] - adj_offsets_[v])};
}

const std::vector<int>& AttributedGraph::nodes_with_attribute(int a) const {
  if (a < 0 || a >= c_)
    fail(ErrorKind::InvalidArgument,
         "attribute id out of range: " + std::to_string(a));
  return attr_index_[a];
}

bool AttributedGraph::has_edge(int u, int v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::span<const double> AttributedGraph::feature_row(int v) const {
  return {features_.data() + static_cast<std::size_t>(v) * c_,
          static_cast<std::size_t>(c_)};
}

bool AttributedGraph::operator==(const AttributedGraph& other) const {
  return n_ == other.n_ && c_ == other.c_ && edges_ == other.edges_ &&
         node_attrs_ == other.node_attrs_;
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path, int indent = -1) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path);
  out << j.dump(indent) << "\n";
}

// Remaps string ids through the sidecar dictionary, assigning dense ids in
// first-seen order and persisting the mapping next to the graph file.
struct IdDict {
  std::map<std::string, int> nodes;
  std::map<std::string, int> attrs;
  bool dirty = false;

  int map_node(const std::string& name) {
    auto it = nodes.find(name);
    if (it != nodes.end()) return it->second;
    int id = static_cast<int>(nodes.size());
    nodes.emplace(name, id);
    dirty = true;
    return id;
  }
  int map_attr(const std::string& name) {
    auto it = attrs.find(name);
    if (it != attrs.end()) return it->second;
    int id = static_cast<int>(attrs.size());
    attrs.emplace(name, id);
    dirty = true;
    return id;
  }
};

std::string dict_path_for(const std::string& graph_path) {
  return graph_path + ".dict.json";
}

IdDict load_dict(const std::string& graph_path) {
  IdDict dict;
  std::ifstream in(dict_path_for(graph_path));
  if (!in) return dict;
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed dictionary sidecar: ") + e.what());
  }
  auto read_map = [&](const char* key, std::map<std::string, int>& out) {
    if (!j.contains(key)) return;
    const json& m = j.at(key);
    if (!m.is_object())
      fail(ErrorKind::Parse, std::string("malformed dictionary sidecar: \"") +
                                 key + "\" is not an object");
    for (const auto& [k, v] : m.items()) {
      if (!v.is_number_integer())
        fail(ErrorKind::Parse,
             "malformed dictionary sidecar: non-integer id for \"" + k + "\"");
      out[k] = v.get<int>();
    }
  };
  read_map("nodes", dict.nodes);
  read_map("attrs", dict.attrs);
  return dict;
}

void save_dict(const IdDict& dict, const std::string& graph_path) {
  json j;
  j["nodes"] = json::object();
  j["attrs"] = json::object();
  for (auto& [k, v] : dict.nodes) j["nodes"][k] = v;
  for (auto& [k, v] : dict.attrs) j["attrs"][k] = v;
  write_json_file(j, dict_path_for(graph_path));
}

int parse_id(const json& v, const char* what) {
  if (!v.is_number_integer())
    fail(ErrorKind::Parse, std::string("expected integer ") + what + ", got " +
                               v.dump());
  return v.get<int>();
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  json j = read_json_file(path);
  if (!j.is_object()) fail(ErrorKind::Parse, "graph file is not a JSON object");
  for (const char* key : {"n", "c", "edges", "attrs"})
    if (!j.contains(key))
      fail(ErrorKind::Parse, std::string("graph file missing key \"") + key + "\"");

  // Detect string-named ids anywhere in edges/attrs and remap via sidecar.
  bool has_strings = false;
  for (const auto& e : j["edges"])
    for (const auto& x : e)
      if (x.is_string()) has_strings = true;
  for (const auto& row : j["attrs"])
    for (const auto& x : row)
      if (x.is_string()) has_strings = true;

  IdDict dict;
  if (has_strings) dict = load_dict(path);

  auto node_id = [&](const json& v) {
    return v.is_string() ? dict.map_node(v.get<std::string>())
                         : parse_id(v, "node id");
  };
  auto attr_id = [&](const json& v) {
    return v.is_string() ? dict.map_attr(v.get<std::string>())
                         : parse_id(v, "attribute id");
  };

  int n = parse_id(j["n"], "\"n\"");
  int c = parse_id(j["c"], "\"c\"");

  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2)
      fail(ErrorKind::Parse, "edge entry is not a pair: " + e.dump());
    int u = node_id(e[0]);  // sequence the lookups: first-seen order matters
    int v = node_id(e[1]);
    edges.emplace_back(u, v);
  }

  std::vector<std::vector<int>> attrs;
  for (const auto& row : j["attrs"]) {
    std::vector<int> a;
    for (const auto& x : row) a.push_back(attr_id(x));
    attrs.push_back(std::move(a));
  }

  Dataset ds;
  ds.graph = AttributedGraph::build(n, c, std::move(edges), std::move(attrs));

  if (j.contains("communities")) {
    for (const auto& comm : j["communities"]) {
      Community cm;
      for (const auto& v : comm) cm.members.push_back(node_id(v));
      std::sort(cm.members.begin(), cm.members.end());
      cm.members.erase(std::unique(cm.members.begin(), cm.members.end()),
                       cm.members.end());
      if (cm.members.empty())
        fail(ErrorKind::Validation, "empty community in graph file");
      for (int v : cm.members)
        if (v < 0 || v >= n)
          fail(ErrorKind::Validation, "community member out of range");
      ds.communities.push_back(std::move(cm));
    }
  }

  if (dict.dirty) save_dict(dict, path);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path,
                  const std::string& meta_json) {
  json j;
  if (!meta_json.empty()) {
    try {
      j["meta"] = json::parse(meta_json);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("malformed meta JSON: ") + e.what());
    }
  }
  j["n"] = ds.graph.node_count();
  j["c"] = ds.graph.attr_count();
  json edges = json::array();
  for (auto [u, v] : ds.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  json attrs = json::array();
  for (int v = 0; v < ds.graph.node_count(); ++v) attrs.push_back(ds.graph.attrs_of(v));
  j["attrs"] = std::move(attrs);
  if (!ds.communities.empty()) {
    json comms = json::array();
    for (const auto& cm : ds.communities) comms.push_back(cm.members);
    j["communities"] = std::move(comms);
  }
  write_json_file(j, path);
}

}  // namespace place
