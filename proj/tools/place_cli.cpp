// Command-line front end. Links only the shared C library; config documents
// are JSON with sections {data, workload, prompt, encoder, train, scale,
// eval}, flags override file values, and PLACE_OUT_DIR redirects relative
// output paths.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "place/place.h"

namespace {

using nlohmann::json;

int exit_code(place_status st) {
  switch (st) {
    case PLACE_OK: return 0;
    case PLACE_ERR_IO: return 3;
    case PLACE_ERR_PARSE: return 4;
    case PLACE_ERR_VALIDATION: return 5;
    case PLACE_ERR_INVALID_ARGUMENT: return 6;
    case PLACE_ERR_NUMERIC: return 7;
    case PLACE_ERR_INTERNAL: return 8;
  }
  return 8;
}

[[noreturn]] void die(place_status st) {
  std::cerr << "error: " << place_last_error() << "\n";
  std::exit(exit_code(st));
}

void check(place_status st) {
  if (st != PLACE_OK) die(st);
}

[[noreturn]] void die_config(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(5);
}

[[noreturn]] void die_io(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(3);
}

struct GraphDel {
  void operator()(place_graph* g) const { place_graph_free(g); }
};
struct WorkloadDel {
  void operator()(place_workload* w) const { place_workload_free(w); }
};
struct ModelDel {
  void operator()(place_model* m) const { place_model_free(m); }
};
struct PartitionDel {
  void operator()(place_partition* p) const { place_partition_free(p); }
};
using GraphPtr = std::unique_ptr<place_graph, GraphDel>;
using WorkloadPtr = std::unique_ptr<place_workload, WorkloadDel>;
using ModelPtr = std::unique_ptr<place_model, ModelDel>;
using PartitionPtr = std::unique_ptr<place_partition, PartitionDel>;

std::string take(char* s) {
  std::string out = s ? s : "";
  place_string_free(s);
  return out;
}

// Relative outputs land under PLACE_OUT_DIR when it is set.
std::string out_path(const std::string& path) {
  const char* dir = std::getenv("PLACE_OUT_DIR");
  if (!dir || !*dir) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  std::filesystem::path full = std::filesystem::path(dir) / p;
  std::error_code ec;
  if (full.has_parent_path())
    std::filesystem::create_directories(full.parent_path(), ec);
  return full.string();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) die_io("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed config JSON in " << path << ": " << e.what()
              << "\n";
    std::exit(4);
  }
  if (!j.is_object()) die_config("config root must be an object");
  return j;
}

// --set section.key=value; the value is parsed as JSON, falling back to a
// plain string.
void apply_sets(json& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      die_config("--set expects section.key=value, got: " + s);
    std::string path = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    json v;
    try {
      v = json::parse(value);
    } catch (const json::exception&) {
      v = value;
    }
    json* cur = &cfg;
    std::size_t start = 0;
    while (true) {
      auto dot = path.find('.', start);
      std::string key = path.substr(
          start, dot == std::string::npos ? std::string::npos : dot - start);
      if (key.empty()) die_config("--set path has an empty segment: " + s);
      if (dot == std::string::npos) {
        (*cur)[key] = v;
        break;
      }
      json& next = (*cur)[key];
      if (!next.is_object()) next = json::object();
      cur = &next;
      start = dot + 1;
    }
  }
}

std::uint64_t config_seed(const json& cfg) {
  if (!cfg.contains("seed")) return 0;
  const json& v = cfg["seed"];
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    die_config("seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// Header block stamped into every file this tool writes: the hash of the
// effective config document (file + overrides) and the seed.
json meta_for(const json& cfg, std::uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(cfg.dump())));
  return {{"config_hash", buf}, {"seed", seed}};
}

json model_config(const json& cfg) {
  json j = json::object();
  if (cfg.contains("prompt")) j["prompt"] = cfg["prompt"];
  if (cfg.contains("encoder")) j["encoder"] = cfg["encoder"];
  return j;
}

json section_or_empty(const json& cfg, const char* name) {
  if (!cfg.contains(name)) return json::object();
  if (!cfg[name].is_object())
    die_config(std::string("config section \"") + name + "\" must be an object");
  return cfg[name];
}

GraphPtr load_graph(const std::string& path) {
  place_graph* g = nullptr;
  check(place_graph_load(path.c_str(), &g));
  return GraphPtr(g);
}

WorkloadPtr load_queries(const std::string& path) {
  place_workload* w = nullptr;
  check(place_workload_load(path.c_str(), &w));
  return WorkloadPtr(w);
}

PartitionPtr load_part(const std::string& path, const place_graph* g) {
  place_partition* p = nullptr;
  check(place_partition_load(path.c_str(), g, &p));
  return PartitionPtr(p);
}

std::vector<std::int32_t> parse_id_csv(const std::string& text, const char* what) {
  std::vector<std::int32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) die_config(std::string(what) + " list has an empty entry");
    try {
      std::size_t pos = 0;
      int v = std::stoi(item, &pos);
      if (pos != item.size()) throw std::invalid_argument("trailing characters");
      out.push_back(v);
    } catch (const std::exception&) {
      die_config(std::string(what) + " entry is not an integer: " + item);
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) die_io("cannot write file: " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2));
}

// Shared flag state; each subcommand reads what it declared.
struct Args {
  std::string config_path, graph, out, queries, val_queries, model, partition;
  std::string protocol, optimizer, mode, nodes, attrs, pred, truth;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int epochs = 0, shards = 0, shards_per_query = 0, count = 0, community = 0;
  int train_count = 0, val_count = 0, test_count = 0;
  int nodes_per_query = 0, attrs_per_query = 0;
  double lr = 0.0, balance = 0.0, label_ratio = 0.0, threshold = 0.0;
  bool scaled = false;
};

json effective_config(const CLI::App* sub, const Args& a) {
  json cfg = load_config(a.config_path);
  apply_sets(cfg, a.sets);
  if (sub->count("--seed")) cfg["seed"] = a.seed;
  return cfg;
}

void apply_train_flags(const CLI::App* sub, const Args& a, json& cfg) {
  if (sub->count("--epochs")) cfg["train"]["epochs"] = a.epochs;
  if (sub->count("--lr")) cfg["train"]["lr"] = a.lr;
  if (sub->count("--optimizer")) cfg["train"]["optimizer"] = a.optimizer;
}

int cmd_gen_data(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  json data;
  if (cfg.contains("data")) {
    data = cfg["data"];
    if (!data.is_object()) die_config("config section \"data\" must be an object");
  } else {
    data = cfg;
    data.erase("seed");
  }
  if (!data.contains("seed")) data["seed"] = config_seed(cfg);
  if (sub->count("--seed")) data["seed"] = a.seed;

  place_graph* raw = nullptr;
  check(place_graph_generate(data.dump().c_str(), &raw));
  GraphPtr g(raw);

  json meta = meta_for(cfg, data["seed"].get<std::uint64_t>());
  std::string path = out_path(a.out);
  check(place_graph_save(g.get(), path.c_str(), meta.dump().c_str()));

  std::int32_t n = 0, m = 0, c = 0, k = 0;
  check(place_graph_counts(g.get(), &n, &m, &c, &k));
  std::cout << "wrote " << path << ": n=" << n << " m=" << m << " c=" << c
            << " communities=" << k << "\n";
  return 0;
}

int cmd_gen_queries(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  json spec;
  if (cfg.contains("workload")) {
    spec = cfg["workload"];
    if (!spec.is_object())
      die_config("config section \"workload\" must be an object");
  } else {
    // A document with other config sections is a full run config whose
    // workload is all-defaults; anything else is a bare workload spec.
    bool full_config = false;
    for (const char* s : {"data", "prompt", "encoder", "train", "scale", "eval"})
      if (cfg.contains(s)) full_config = true;
    if (full_config) {
      spec = json::object();
    } else {
      spec = cfg;
      spec.erase("seed");
    }
  }
  if (spec.contains("protocols")) {
    if (sub->count("--protocol") ||
        (spec["protocols"].is_array() && spec["protocols"].size() == 1)) {
      if (!sub->count("--protocol")) spec["protocol"] = spec["protocols"][0];
      spec.erase("protocols");
    } else {
      die_config("workload.protocols lists several protocols; pick one with --protocol");
    }
  }
  if (sub->count("--protocol")) spec["protocol"] = a.protocol;
  if (sub->count("--train")) spec["train"] = a.train_count;
  if (sub->count("--val")) spec["val"] = a.val_count;
  if (sub->count("--test")) spec["test"] = a.test_count;
  if (sub->count("--nodes-per-query")) spec["nodes_per_query"] = a.nodes_per_query;
  if (sub->count("--attrs-per-query")) spec["attrs_per_query"] = a.attrs_per_query;
  if (sub->count("--label-ratio")) spec["label_ratio"] = a.label_ratio;
  if (sub->count("--count")) {
    spec["train"] = a.count;
    spec["val"] = 0;
    spec["test"] = 0;
  }
  if (!spec.contains("seed")) spec["seed"] = config_seed(cfg);
  if (sub->count("--seed")) spec["seed"] = a.seed;

  GraphPtr g = load_graph(a.graph);
  place_workload *train = nullptr, *val = nullptr, *test = nullptr;
  check(place_workload_generate(g.get(), spec.dump().c_str(), &train, &val, &test));
  WorkloadPtr tr(train), va(val), te(test);

  auto count_of = [](const place_workload* w) {
    std::int32_t c = 0;
    check(place_workload_count(w, &c));
    return c;
  };
  if (sub->count("--count")) {
    std::string path = out_path(a.out);
    check(place_workload_save(tr.get(), path.c_str()));
    std::cout << "wrote " << path << ": " << count_of(tr.get()) << " queries\n";
  } else {
    std::string base = out_path(a.out);
    std::string paths[3] = {base + ".train.json", base + ".val.json",
                            base + ".test.json"};
    place_workload* splits[3] = {tr.get(), va.get(), te.get()};
    for (int i = 0; i < 3; ++i) {
      check(place_workload_save(splits[i], paths[i].c_str()));
      std::cout << "wrote " << paths[i] << ": " << count_of(splits[i])
                << " queries\n";
    }
  }
  return 0;
}

int cmd_partition(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  json scale = section_or_empty(cfg, "scale");
  int shards = sub->count("--shards") ? a.shards : scale.value("shards", 0);
  if (shards < 1) die_config("--shards (or scale.shards) must be >= 1");
  double balance = sub->count("--balance") ? a.balance : scale.value("balance", 0.1);
  std::uint64_t seed = sub->count("--seed") ? a.seed : config_seed(cfg);

  GraphPtr g = load_graph(a.graph);
  place_partition* raw = nullptr;
  check(place_partition_build(g.get(), shards, seed, balance, &raw));
  PartitionPtr p(raw);

  std::string path = out_path(a.out);
  check(place_partition_save(p.get(), path.c_str(),
                             meta_for(cfg, seed).dump().c_str()));
  std::int32_t s = 0;
  std::int64_t cut = 0;
  check(place_partition_info(p.get(), &s, &cut));
  std::cout << "wrote " << path << ": shards=" << s << " cut=" << cut << "\n";
  return 0;
}

void save_model_and_report(const ModelPtr& m, const std::string& report,
                           const json& meta, const std::string& out_stem) {
  std::string tokens_path = out_path(out_stem + ".tokens.json");
  std::string encoder_path = out_path(out_stem + ".encoder.json");
  std::string report_path = out_path(out_stem + ".report.json");
  check(place_model_save(m.get(), tokens_path.c_str(), encoder_path.c_str(),
                         meta.dump().c_str()));
  json jr;
  try {
    jr = json::parse(report);
  } catch (const json::exception&) {
    jr = json::object();
  }
  jr["meta"] = meta;
  write_json(report_path, jr);
  std::cout << "wrote " << tokens_path << "\n";
  std::cout << "wrote " << encoder_path << "\n";
  std::cout << "wrote " << report_path << "\n";
  if (jr.contains("best_epoch") && jr["best_epoch"].get<int>() >= 0)
    std::cout << "best epoch " << jr["best_epoch"].get<int>() << ", val f1 "
              << jr["best_val_f1"].get<double>() << "\n";
}

int cmd_train(const CLI::App* sub, const Args& a, bool scaled) {
  json cfg = effective_config(sub, a);
  apply_train_flags(sub, a, cfg);
  std::uint64_t seed = config_seed(cfg);

  GraphPtr g = load_graph(a.graph);
  WorkloadPtr train = load_queries(a.queries);
  WorkloadPtr val;
  if (!a.val_queries.empty()) val = load_queries(a.val_queries);

  std::int32_t attrs = 0;
  check(place_graph_counts(g.get(), nullptr, nullptr, &attrs, nullptr));
  place_model* raw = nullptr;
  check(place_model_init(model_config(cfg).dump().c_str(), attrs, seed, &raw));
  ModelPtr m(raw);

  json tcfg = section_or_empty(cfg, "train");
  tcfg["seed"] = seed;

  char* report = nullptr;
  if (scaled) {
    PartitionPtr part = load_part(a.partition, g.get());
    json scale = section_or_empty(cfg, "scale");
    int spq = sub->count("--shards-per-query") ? a.shards_per_query
                                               : scale.value("shards_per_query", 1);
    check(place_train_scaled(m.get(), g.get(), part.get(), train.get(), val.get(),
                             tcfg.dump().c_str(), spq, &report));
  } else {
    check(place_train(m.get(), g.get(), train.get(), val.get(),
                      tcfg.dump().c_str(), &report));
  }
  save_model_and_report(m, take(report), meta_for(cfg, seed), a.out);
  return 0;
}

int cmd_fine_tune(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  apply_train_flags(sub, a, cfg);
  std::uint64_t seed = config_seed(cfg);

  GraphPtr g = load_graph(a.graph);
  place_model* raw = nullptr;
  check(place_model_load((a.model + ".tokens.json").c_str(),
                         (a.model + ".encoder.json").c_str(),
                         model_config(cfg).dump().c_str(), &raw));
  ModelPtr m(raw);

  WorkloadPtr train, val;
  if (!a.queries.empty()) train = load_queries(a.queries);
  if (!a.val_queries.empty()) val = load_queries(a.val_queries);

  json tcfg = section_or_empty(cfg, "train");
  tcfg["seed"] = seed;

  char* report = nullptr;
  check(place_fine_tune(m.get(), g.get(), train.get(), val.get(),
                        tcfg.dump().c_str(), a.mode.c_str(), &report));
  save_model_and_report(m, take(report), meta_for(cfg, seed), a.out);
  return 0;
}

int cmd_infer(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  std::uint64_t seed = config_seed(cfg);
  double threshold = sub->count("--threshold")
                         ? a.threshold
                         : section_or_empty(cfg, "eval").value("threshold", 0.5);
  if (threshold <= 0.0 || threshold >= 1.0)
    die_config("threshold must be in (0, 1)");

  GraphPtr g = load_graph(a.graph);
  place_model* raw = nullptr;
  check(place_model_load((a.model + ".tokens.json").c_str(),
                         (a.model + ".encoder.json").c_str(),
                         model_config(cfg).dump().c_str(), &raw));
  ModelPtr m(raw);

  std::vector<std::int32_t> nodes = parse_id_csv(a.nodes, "query node");
  std::vector<std::int32_t> attrs =
      a.attrs.empty() ? std::vector<std::int32_t>{} : parse_id_csv(a.attrs, "query attribute");
  if (nodes.empty()) die_config("--nodes must list at least one node");

  std::int32_t n = 0;
  check(place_graph_counts(g.get(), &n, nullptr, nullptr, nullptr));
  std::vector<double> probs(static_cast<std::size_t>(n), 0.0);

  if (a.scaled || sub->count("--partition")) {
    if (a.partition.empty()) die_config("--scaled needs --partition");
    PartitionPtr part = load_part(a.partition, g.get());
    check(place_infer_scaled(m.get(), g.get(), part.get(), nodes.data(),
                             static_cast<std::int32_t>(nodes.size()), attrs.data(),
                             static_cast<std::int32_t>(attrs.size()), probs.data()));
  } else {
    check(place_infer(m.get(), g.get(), nodes.data(),
                      static_cast<std::int32_t>(nodes.size()), attrs.data(),
                      static_cast<std::int32_t>(attrs.size()), probs.data()));
  }

  std::vector<int> members;
  for (int v = 0; v < n; ++v)
    if (probs[static_cast<std::size_t>(v)] > threshold) members.push_back(v);

  std::cout << "members:";
  for (int v : members) std::cout << " " << v;
  std::cout << "\nprobs:\n";
  for (int v = 0; v < n; ++v) {
    char line[48];
    std::snprintf(line, sizeof(line), "%d %.6f\n", v,
                  probs[static_cast<std::size_t>(v)]);
    std::cout << line;
  }

  if (!a.out.empty()) {
    json j;
    j["meta"] = meta_for(cfg, seed);
    j["query"] = {{"nodes", nodes}, {"attrs", attrs}};
    j["threshold"] = threshold;
    j["members"] = members;
    j["probs"] = probs;
    std::string path = out_path(a.out);
    write_json(path, j);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

std::vector<std::int32_t> read_node_set(const std::string& path, int community,
                                        bool allow_communities) {
  std::ifstream in(path);
  if (!in) die_io("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON in " << path << ": " << e.what() << "\n";
    std::exit(4);
  }
  const json* list = nullptr;
  if (j.is_object() && j.contains("members")) {
    list = &j["members"];
  } else if (j.is_object() && j.contains("communities")) {
    if (!allow_communities) die_config(path + ": expected a node list");
    const json& comms = j["communities"];
    if (!comms.is_array() || community < 0 ||
        community >= static_cast<int>(comms.size()))
      die_config(path + ": community index out of range");
    list = &comms[static_cast<std::size_t>(community)];
  } else if (j.is_array() && !j.empty() && j[0].is_array()) {
    if (!allow_communities) die_config(path + ": expected a node list");
    if (community < 0 || community >= static_cast<int>(j.size()))
      die_config(path + ": community index out of range");
    list = &j[static_cast<std::size_t>(community)];
  } else if (j.is_array()) {
    list = &j;
  } else {
    die_config(path + ": expected a node list");
  }
  std::vector<std::int32_t> out;
  for (const auto& v : *list) {
    if (!v.is_number_integer()) die_config(path + ": node ids must be integers");
    out.push_back(v.get<std::int32_t>());
  }
  return out;
}

int cmd_eval(const Args& a) {
  std::vector<std::int32_t> pred = read_node_set(a.pred, 0, false);
  std::vector<std::int32_t> truth = read_node_set(a.truth, a.community, true);
  double p = 0.0, r = 0.0, f1 = 0.0;
  check(place_eval(pred.data(), static_cast<std::int32_t>(pred.size()),
                   truth.data(), static_cast<std::int32_t>(truth.size()), &p, &r,
                   &f1));
  char line[96];
  std::snprintf(line, sizeof(line), "precision %.6f\nrecall %.6f\nf1 %.6f\n", p,
                r, f1);
  std::cout << line;
  return 0;
}

int cmd_run_exp(const CLI::App* sub, const Args& a) {
  json cfg = effective_config(sub, a);
  char *report = nullptr, *table = nullptr;
  check(place_run_experiment(cfg.dump().c_str(), &report, &table));
  std::string report_text = take(report);
  std::string table_text = take(table);
  std::cout << table_text;
  if (!a.out.empty()) {
    std::string json_path = out_path(a.out + ".json");
    std::string table_path = out_path(a.out + ".txt");
    write_text(json_path, report_text);
    write_text(table_path, table_text);
    std::cout << "wrote " << json_path << "\n";
    std::cout << "wrote " << table_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Attributed community search: prompt-token training over a relational "
      "graph encoder, with partitioned scaling.\n"
      "Config files are JSON with sections {data, workload, prompt, encoder, "
      "train, scale, eval}; flags override file values; PLACE_OUT_DIR "
      "redirects relative output paths."};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config_path, "JSON config file");
    sub->add_option("--set", a.sets,
                    "override a config value: section.key=value (repeatable)");
    sub->add_option("--seed", a.seed, "random seed");
    return sub;
  };

  CLI::App* gen_data = add_common(
      app.add_subcommand("gen-data", "generate a synthetic attributed graph"));
  gen_data->add_option("--out", a.out, "graph file to write")->required();

  CLI::App* gen_queries = add_common(
      app.add_subcommand("gen-queries", "sample a labeled query workload"));
  gen_queries->add_option("--graph", a.graph, "graph file")->required();
  gen_queries->add_option("--out", a.out,
                          "output stem (writes <stem>.train/.val/.test.json) "
                          "or file with --count")
      ->required();
  gen_queries->add_option("--protocol", a.protocol, "afc, afn, or eqa");
  gen_queries->add_option("--train", a.train_count, "training queries");
  gen_queries->add_option("--val", a.val_count, "validation queries");
  gen_queries->add_option("--test", a.test_count, "test queries");
  gen_queries->add_option("--count", a.count, "single-file mode: total queries");
  gen_queries->add_option("--nodes-per-query", a.nodes_per_query, "1 to 3");
  gen_queries->add_option("--attrs-per-query", a.attrs_per_query,
                          "attribute count for afc");
  gen_queries->add_option("--label-ratio", a.label_ratio, "label fraction (0,1]");

  CLI::App* partition = add_common(
      app.add_subcommand("partition", "split a graph into balanced shards"));
  partition->add_option("--graph", a.graph, "graph file")->required();
  partition->add_option("--out", a.out, "partition file to write")->required();
  partition->add_option("--shards", a.shards, "shard count");
  partition->add_option("--balance", a.balance, "size tolerance (default 0.1)");

  CLI::App* train =
      add_common(app.add_subcommand("train", "train a model on a workload"));
  train->add_option("--graph", a.graph, "graph file")->required();
  train->add_option("--queries", a.queries, "training workload file")->required();
  train->add_option("--val-queries", a.val_queries, "validation workload file");
  train->add_option("--out", a.out, "model stem (writes .tokens/.encoder/.report)")
      ->required();
  train->add_option("--epochs", a.epochs, "training epochs");
  train->add_option("--lr", a.lr, "learning rate for both phases");
  train->add_option("--optimizer", a.optimizer, "adam or sgd");

  CLI::App* train_scaled = add_common(app.add_subcommand(
      "train-scaled", "train across partition shards (divide and conquer)"));
  train_scaled->add_option("--graph", a.graph, "graph file")->required();
  train_scaled->add_option("--partition", a.partition, "partition file")->required();
  train_scaled->add_option("--queries", a.queries, "training workload file")
      ->required();
  train_scaled->add_option("--val-queries", a.val_queries, "validation workload file");
  train_scaled->add_option("--out", a.out,
                           "model stem (writes .tokens/.encoder/.report)")
      ->required();
  train_scaled->add_option("--shards-per-query", a.shards_per_query,
                           "shards sampled per query per epoch");
  train_scaled->add_option("--epochs", a.epochs, "training epochs");
  train_scaled->add_option("--lr", a.lr, "learning rate for both phases");
  train_scaled->add_option("--optimizer", a.optimizer, "adam or sgd");

  CLI::App* infer = add_common(
      app.add_subcommand("infer", "predict the community of a query"));
  infer->add_option("--graph", a.graph, "graph file")->required();
  infer->add_option("--model", a.model, "model stem from train")->required();
  infer->add_option("--nodes", a.nodes, "query nodes, comma-separated")->required();
  infer->add_option("--attrs", a.attrs, "query attributes, comma-separated");
  infer->add_option("--threshold", a.threshold, "membership threshold (default 0.5)");
  infer->add_option("--partition", a.partition, "partition file for --scaled");
  infer->add_flag("--scaled", a.scaled, "shard-wise inference over --partition");
  infer->add_option("--out", a.out, "prediction file to write");

  CLI::App* eval =
      add_common(app.add_subcommand("eval", "score a prediction against truth"));
  eval->add_option("--pred", a.pred, "predicted node set (JSON)")->required();
  eval->add_option("--truth", a.truth, "truth node set or communities (JSON)")
      ->required();
  eval->add_option("--community", a.community,
                   "community index when --truth holds several");

  CLI::App* run_exp = add_common(
      app.add_subcommand("run-exp", "run a full multi-seed experiment"));
  run_exp->add_option("--out", a.out, "report stem (writes .json and .txt)");

  CLI::App* fine_tune = add_common(app.add_subcommand(
      "fine-tune", "adapt a trained model to a new graph or workload"));
  fine_tune->add_option("--graph", a.graph, "graph file")->required();
  fine_tune->add_option("--model", a.model, "model stem to start from")->required();
  fine_tune->add_option("--mode", a.mode, "none, prompt_only, or both")->required();
  fine_tune->add_option("--queries", a.queries, "training workload file");
  fine_tune->add_option("--val-queries", a.val_queries, "validation workload file");
  fine_tune->add_option("--out", a.out, "model stem to write")->required();
  fine_tune->add_option("--epochs", a.epochs, "training epochs");
  fine_tune->add_option("--lr", a.lr, "learning rate for both phases");
  fine_tune->add_option("--optimizer", a.optimizer, "adam or sgd");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen_data->parsed()) return cmd_gen_data(gen_data, a);
  if (gen_queries->parsed()) return cmd_gen_queries(gen_queries, a);
  if (partition->parsed()) return cmd_partition(partition, a);
  if (train->parsed()) return cmd_train(train, a, false);
  if (train_scaled->parsed()) return cmd_train(train_scaled, a, true);
  if (infer->parsed()) return cmd_infer(infer, a);
  if (eval->parsed()) return cmd_eval(a);
  if (run_exp->parsed()) return cmd_run_exp(run_exp, a);
  if (fine_tune->parsed()) return cmd_fine_tune(fine_tune, a);
  return 2;
}
