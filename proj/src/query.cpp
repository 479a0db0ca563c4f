#include "query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace place {

using nlohmann::json;

Protocol protocol_from_name(const std::string& name) {
  if (name == "afc") return Protocol::AFC;
  if (name == "afn") return Protocol::AFN;
  if (name == "eqa") return Protocol::EQA;
  fail(ErrorKind::InvalidArgument, "unknown query protocol: " + name);
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::AFC: return "afc";
    case Protocol::AFN: return "afn";
    case Protocol::EQA: return "eqa";
  }
  return "?";
}

namespace {

// ceil(ratio * m) guarded against the usual 0.2*50 -> 10.000000000000002
// floating-point overshoot.
int ceil_frac(double ratio, std::size_t m) {
  return static_cast<int>(std::ceil(ratio * static_cast<double>(m) - 1e-9));
}

void check_gen_args(const std::vector<Community>& communities,
                    int nodes_per_query) {
  if (communities.empty())
    fail(ErrorKind::InvalidArgument, "workload generation needs communities");
  if (nodes_per_query < 1 || nodes_per_query > 3)
    fail(ErrorKind::InvalidArgument, "nodes_per_query must lie in [1,3]");
}

Query draw_query(const AttributedGraph& g,
                 const std::vector<Community>& communities, int nodes_per_query,
                 int attrs_per_query, Protocol protocol, rng::Engine& eng) {
  int ci = rng::uniform_int(eng, 0, static_cast<int>(communities.size()) - 1);
  const Community& comm = communities[ci];
  if (static_cast<int>(comm.members.size()) < nodes_per_query)
    fail(ErrorKind::Validation,
         "community " + std::to_string(ci) + " smaller than nodes_per_query");

  Query q;
  q.community_id = ci;
  q.nodes = rng::sample_without_replacement(
      eng, comm.members, static_cast<std::size_t>(nodes_per_query));

  switch (protocol) {
    case Protocol::AFC: {
      std::vector<int> freq(g.attr_count(), 0);
      for (int v : comm.members)
        for (int a : g.attrs_of(v)) ++freq[a];
      std::vector<int> order(g.attr_count());
      for (int a = 0; a < g.attr_count(); ++a) order[a] = a;
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return freq[a] > freq[b]; });
      int take = std::min(attrs_per_query, g.attr_count());
      for (int i = 0; i < take; ++i)
        if (freq[order[i]] > 0) q.attrs.push_back(order[i]);
      std::sort(q.attrs.begin(), q.attrs.end());
      break;
    }
    case Protocol::AFN: {
      std::set<int> u;
      for (int v : q.nodes) u.insert(g.attrs_of(v).begin(), g.attrs_of(v).end());
      q.attrs.assign(u.begin(), u.end());
      break;
    }
    case Protocol::EQA:
      break;
  }
  return q;
}

std::vector<Query> gen_queries(const AttributedGraph& g,
                               const std::vector<Community>& communities,
                               int count, int nodes_per_query,
                               int attrs_per_query, Protocol protocol,
                               std::uint64_t seed) {
  check_gen_args(communities, nodes_per_query);
  if (count < 0) fail(ErrorKind::InvalidArgument, "negative query count");
  auto eng = rng::make(rng::derive(seed, 10));
  std::vector<Query> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(draw_query(g, communities, nodes_per_query, attrs_per_query,
                             protocol, eng));
  return out;
}

}  // namespace

std::vector<Query> gen_afc(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, int attrs_per_query,
                           std::uint64_t seed) {
  if (attrs_per_query < 1)
    fail(ErrorKind::InvalidArgument, "attrs_per_query must be >= 1");
  return gen_queries(g, communities, count, nodes_per_query, attrs_per_query,
                     Protocol::AFC, seed);
}

std::vector<Query> gen_afn(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, std::uint64_t seed) {
  return gen_queries(g, communities, count, nodes_per_query, 0, Protocol::AFN,
                     seed);
}

std::vector<Query> gen_eqa(const AttributedGraph& g,
                           const std::vector<Community>& communities, int count,
                           int nodes_per_query, std::uint64_t seed) {
  return gen_queries(g, communities, count, nodes_per_query, 0, Protocol::EQA,
                     seed);
}

LabeledQuery sample_labels(const AttributedGraph& g, const Query& q,
                           const Community& community, double label_ratio,
                           std::uint64_t seed) {
  if (label_ratio <= 0.0 || label_ratio > 1.0)
    fail(ErrorKind::InvalidArgument, "label_ratio must lie in (0,1]");
  if (q.nodes.empty()) fail(ErrorKind::InvalidArgument, "query has no nodes");

  std::vector<char> in_comm(g.node_count(), 0);
  for (int v : community.members) {
    if (v < 0 || v >= g.node_count())
      fail(ErrorKind::Validation, "community member out of range");
    in_comm[v] = 1;
  }
  std::vector<char> is_query(g.node_count(), 0);
  for (int v : q.nodes) {
    if (v < 0 || v >= g.node_count())
      fail(ErrorKind::Validation, "query node out of range");
    is_query[v] = 1;
  }

  std::vector<int> non_members;
  for (int v = 0; v < g.node_count(); ++v)
    if (!in_comm[v] && !is_query[v]) non_members.push_back(v);
  std::size_t outside = 0;
  for (int v = 0; v < g.node_count(); ++v)
    if (!in_comm[v]) ++outside;
  if (outside == 0)
    fail(ErrorKind::Validation, "community covers the whole graph; no negatives");

  auto eng = rng::make(rng::derive(seed, 11));

  std::size_t k_pos = static_cast<std::size_t>(
      std::min<int>(ceil_frac(label_ratio, community.members.size()),
                    static_cast<int>(community.members.size())));
  std::vector<int> pos = rng::sample_without_replacement(eng, community.members, k_pos);
  for (int v : q.nodes) pos.push_back(v);
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());

  std::size_t k_neg = static_cast<std::size_t>(
      std::min<int>(ceil_frac(label_ratio, outside),
                    static_cast<int>(non_members.size())));
  std::vector<int> neg = rng::sample_without_replacement(eng, non_members, k_neg);

  LabeledQuery lq;
  lq.query = q;
  lq.positives = std::move(pos);
  lq.negatives = std::move(neg);
  return lq;
}

Workload gen_workload(const AttributedGraph& g,
                      const std::vector<Community>& communities,
                      const WorkloadSpec& spec) {
  check_gen_args(communities, spec.nodes_per_query);
  int total = spec.train_count + spec.val_count + spec.test_count;
  if (total <= 0) fail(ErrorKind::InvalidArgument, "empty workload requested");

  auto eng = rng::make(rng::derive(spec.seed, 10));
  std::vector<Query> queries;
  auto less = [](const Query& a, const Query& b) {
    if (a.nodes != b.nodes) return a.nodes < b.nodes;
    if (a.attrs != b.attrs) return a.attrs < b.attrs;
    return a.community_id < b.community_id;
  };
  std::set<Query, decltype(less)> distinct(less);
  long long attempts = 0;
  const long long attempt_cap = 1000LL * total + 1000;
  while (static_cast<int>(queries.size()) < total) {
    if (++attempts > attempt_cap)
      fail(ErrorKind::Validation,
           "could not generate " + std::to_string(total) +
               " distinct queries; graph/community space too small");
    Query q = draw_query(g, communities, spec.nodes_per_query,
                         spec.attrs_per_query, spec.protocol, eng);
    if (distinct.insert(q).second) queries.push_back(std::move(q));
  }

  Workload wl;
  for (int i = 0; i < total; ++i) {
    const Query& q = queries[static_cast<std::size_t>(i)];
    LabeledQuery lq =
        sample_labels(g, q, communities[static_cast<std::size_t>(q.community_id)],
                      spec.label_ratio, rng::derive(spec.seed, 1000 + i));
    if (i < spec.train_count)
      wl.train.push_back(std::move(lq));
    else if (i < spec.train_count + spec.val_count)
      wl.val.push_back(std::move(lq));
    else
      wl.test.push_back(std::move(lq));
  }
  return wl;
}

std::vector<LabeledQuery> load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "malformed JSON in " + path + ": " + e.what());
  }
  if (!j.is_array()) fail(ErrorKind::Parse, "workload file is not a JSON list");

  std::vector<LabeledQuery> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("nodes"))
      fail(ErrorKind::Parse, "workload entry missing \"nodes\"");
    LabeledQuery lq;
    lq.query.nodes = item["nodes"].get<std::vector<int>>();
    lq.query.attrs = item.value("attrs", std::vector<int>{});
    lq.query.community_id = item.value("community", -1);
    lq.positives = item.value("positives", std::vector<int>{});
    lq.negatives = item.value("negatives", std::vector<int>{});
    for (auto* v : {&lq.query.nodes, &lq.query.attrs, &lq.positives, &lq.negatives})
      std::sort(v->begin(), v->end());
    if (lq.query.nodes.empty())
      fail(ErrorKind::Validation, "workload entry with empty query nodes");
    out.push_back(std::move(lq));
  }
  return out;
}

void save_workload(const std::vector<LabeledQuery>& queries,
                   const std::string& path) {
  json j = json::array();
  for (const auto& lq : queries) {
    json item;
    item["nodes"] = lq.query.nodes;
    item["attrs"] = lq.query.attrs;
    item["community"] = lq.query.community_id;
    item["positives"] = lq.positives;
    item["negatives"] = lq.negatives;
    j.push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path);
  out << j.dump() << "\n";
}

}  // namespace place
