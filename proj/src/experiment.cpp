#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "encoder.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace place {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void check_keys(const json& s, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = s.begin(); it != s.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return it.key() == k; });
    if (!known)
      fail(ErrorKind::Validation,
           "unknown key \"" + it.key() + "\" in " + where);
  }
}

const json* section(const json& j, const char* name) {
  if (!j.contains(name)) return nullptr;
  const json& s = j[name];
  if (!s.is_object())
    fail(ErrorKind::Validation, std::string("config section \"") + name +
                                    "\" must be an object");
  return &s;
}

int get_int(const json& s, const char* key, int fallback, const std::string& where) {
  if (!s.contains(key)) return fallback;
  if (!s[key].is_number_integer())
    fail(ErrorKind::Validation, where + "." + key + " must be an integer");
  return s[key].get<int>();
}

double get_num(const json& s, const char* key, double fallback,
               const std::string& where) {
  if (!s.contains(key)) return fallback;
  if (!s[key].is_number())
    fail(ErrorKind::Validation, where + "." + key + " must be a number");
  return s[key].get<double>();
}

bool get_bool(const json& s, const char* key, bool fallback,
              const std::string& where) {
  if (!s.contains(key)) return fallback;
  if (!s[key].is_boolean())
    fail(ErrorKind::Validation, where + "." + key + " must be a boolean");
  return s[key].get<bool>();
}

std::string get_str(const json& s, const char* key, const std::string& fallback,
                    const std::string& where) {
  if (!s.contains(key)) return fallback;
  if (!s[key].is_string())
    fail(ErrorKind::Validation, where + "." + key + " must be a string");
  return s[key].get<std::string>();
}

void require_range(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Validation, what);
}

json resolved_config(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  if (!cfg.graph_path.empty()) {
    j["data"] = {{"graph", cfg.graph_path}};
  } else {
    j["data"] = {{"communities", cfg.synth.communities},
                 {"nodes_per_community", cfg.synth.nodes_per_community},
                 {"p_in", cfg.synth.p_in},
                 {"p_out", cfg.synth.p_out},
                 {"signature_attrs", cfg.synth.signature_attrs},
                 {"noise", cfg.synth.noise},
                 {"seed", cfg.synth.seed}};
  }
  json protos = json::array();
  for (Protocol p : cfg.protocols) protos.push_back(protocol_name(p));
  j["workload"] = {{"protocols", protos},
                   {"train", cfg.workload.train_count},
                   {"val", cfg.workload.val_count},
                   {"test", cfg.workload.test_count},
                   {"nodes_per_query", cfg.workload.nodes_per_query},
                   {"attrs_per_query", cfg.workload.attrs_per_query},
                   {"label_ratio", cfg.workload.label_ratio}};
  j["prompt"] = {{"delta", cfg.prompt.delta},
                 {"v_n", cfg.prompt.v_n},
                 {"use_attr_tokens", cfg.prompt.use_attr_tokens},
                 {"use_virt_tokens", cfg.prompt.use_virt_tokens}};
  j["encoder"] = {{"layers", cfg.layers}, {"hidden", cfg.hidden}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"lr_theta", cfg.train.lr_theta},
                {"lr_tau", cfg.train.lr_tau},
                {"optimizer", cfg.train.sgd ? "sgd" : "adam"},
                {"checkpoint_best", cfg.train.checkpoint_best}};
  j["scale"] = {{"shards", cfg.shards},
                {"shards_per_query", cfg.shards_per_query},
                {"balance", cfg.balance}};
  j["eval"] = {{"runs", cfg.runs}, {"threshold", cfg.threshold}};
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object())
    fail(ErrorKind::Validation, "config root must be an object");
  check_keys(j, "config", {"seed", "data", "workload", "prompt", "encoder",
                           "train", "scale", "eval"});

  ExperimentConfig cfg;
  if (j.contains("seed")) {
    const json& sv = j["seed"];
    if (!sv.is_number_integer() || (sv.is_number_integer() && !sv.is_number_unsigned() &&
                                    sv.get<long long>() < 0))
      fail(ErrorKind::Validation, "seed must be a non-negative integer");
    cfg.seed = sv.get<std::uint64_t>();
  }

  if (const json* s = section(j, "data")) {
    if (s->contains("graph")) {
      check_keys(*s, "data", {"graph"});
      cfg.graph_path = get_str(*s, "graph", "", "data");
      require_range(!cfg.graph_path.empty(), "data.graph must be a file path");
    } else {
      check_keys(*s, "data",
                 {"communities", "nodes_per_community", "p_in", "p_out",
                  "signature_attrs", "noise"});
      cfg.synth.communities = get_int(*s, "communities", cfg.synth.communities, "data");
      cfg.synth.nodes_per_community =
          get_int(*s, "nodes_per_community", cfg.synth.nodes_per_community, "data");
      cfg.synth.p_in = get_num(*s, "p_in", cfg.synth.p_in, "data");
      cfg.synth.p_out = get_num(*s, "p_out", cfg.synth.p_out, "data");
      cfg.synth.signature_attrs =
          get_int(*s, "signature_attrs", cfg.synth.signature_attrs, "data");
      cfg.synth.noise = get_num(*s, "noise", cfg.synth.noise, "data");
    }
  }
  cfg.synth.seed = rng::derive(cfg.seed, 50);

  if (const json* s = section(j, "workload")) {
    check_keys(*s, "workload",
               {"protocol", "protocols", "train", "val", "test",
                "nodes_per_query", "attrs_per_query", "label_ratio"});
    if (s->contains("protocol") && s->contains("protocols"))
      fail(ErrorKind::Validation,
           "workload.protocol and workload.protocols are mutually exclusive");
    if (s->contains("protocol")) {
      cfg.protocols = {protocol_from_name(get_str(*s, "protocol", "afc", "workload"))};
    } else if (s->contains("protocols")) {
      const json& arr = (*s)["protocols"];
      if (!arr.is_array() || arr.empty())
        fail(ErrorKind::Validation, "workload.protocols must be a nonempty list");
      cfg.protocols.clear();
      for (const auto& v : arr) {
        if (!v.is_string())
          fail(ErrorKind::Validation, "workload.protocols entries must be strings");
        Protocol p = protocol_from_name(v.get<std::string>());
        if (std::find(cfg.protocols.begin(), cfg.protocols.end(), p) !=
            cfg.protocols.end())
          fail(ErrorKind::Validation, "workload.protocols lists a protocol twice");
        cfg.protocols.push_back(p);
      }
    }
    cfg.workload.train_count = get_int(*s, "train", cfg.workload.train_count, "workload");
    cfg.workload.val_count = get_int(*s, "val", cfg.workload.val_count, "workload");
    cfg.workload.test_count = get_int(*s, "test", cfg.workload.test_count, "workload");
    cfg.workload.nodes_per_query =
        get_int(*s, "nodes_per_query", cfg.workload.nodes_per_query, "workload");
    cfg.workload.attrs_per_query =
        get_int(*s, "attrs_per_query", cfg.workload.attrs_per_query, "workload");
    cfg.workload.label_ratio =
        get_num(*s, "label_ratio", cfg.workload.label_ratio, "workload");
  }

  if (const json* s = section(j, "prompt")) {
    check_keys(*s, "prompt", {"delta", "v_n", "use_attr_tokens", "use_virt_tokens"});
    cfg.prompt.delta = get_num(*s, "delta", cfg.prompt.delta, "prompt");
    cfg.prompt.v_n = get_int(*s, "v_n", cfg.prompt.v_n, "prompt");
    cfg.prompt.use_attr_tokens =
        get_bool(*s, "use_attr_tokens", cfg.prompt.use_attr_tokens, "prompt");
    cfg.prompt.use_virt_tokens =
        get_bool(*s, "use_virt_tokens", cfg.prompt.use_virt_tokens, "prompt");
  }

  if (const json* s = section(j, "encoder")) {
    check_keys(*s, "encoder", {"layers", "hidden"});
    cfg.layers = get_int(*s, "layers", cfg.layers, "encoder");
    cfg.hidden = get_int(*s, "hidden", cfg.hidden, "encoder");
  }

  if (const json* s = section(j, "train")) {
    check_keys(*s, "train",
               {"epochs", "lr", "lr_theta", "lr_tau", "optimizer", "checkpoint_best"});
    cfg.train.epochs = get_int(*s, "epochs", cfg.train.epochs, "train");
    double lr = get_num(*s, "lr", -1.0, "train");
    if (lr >= 0.0) {
      cfg.train.lr_theta = lr;
      cfg.train.lr_tau = lr;
    }
    cfg.train.lr_theta = get_num(*s, "lr_theta", cfg.train.lr_theta, "train");
    cfg.train.lr_tau = get_num(*s, "lr_tau", cfg.train.lr_tau, "train");
    std::string opt = get_str(*s, "optimizer", cfg.train.sgd ? "sgd" : "adam", "train");
    if (opt != "adam" && opt != "sgd")
      fail(ErrorKind::Validation, "train.optimizer must be \"adam\" or \"sgd\"");
    cfg.train.sgd = opt == "sgd";
    cfg.train.checkpoint_best =
        get_bool(*s, "checkpoint_best", cfg.train.checkpoint_best, "train");
  }

  if (const json* s = section(j, "scale")) {
    check_keys(*s, "scale", {"shards", "shards_per_query", "balance"});
    cfg.shards = get_int(*s, "shards", cfg.shards, "scale");
    cfg.shards_per_query =
        get_int(*s, "shards_per_query", cfg.shards_per_query, "scale");
    cfg.balance = get_num(*s, "balance", cfg.balance, "scale");
  }

  if (const json* s = section(j, "eval")) {
    check_keys(*s, "eval", {"runs", "threshold"});
    cfg.runs = get_int(*s, "runs", cfg.runs, "eval");
    cfg.threshold = get_num(*s, "threshold", cfg.threshold, "eval");
  }

  require_range(cfg.workload.train_count >= 1, "workload.train must be >= 1");
  require_range(cfg.workload.val_count >= 0, "workload.val must be >= 0");
  require_range(cfg.workload.test_count >= 1, "workload.test must be >= 1");
  require_range(cfg.workload.nodes_per_query >= 1 && cfg.workload.nodes_per_query <= 3,
                "workload.nodes_per_query must be in [1, 3]");
  require_range(cfg.workload.attrs_per_query >= 1,
                "workload.attrs_per_query must be >= 1");
  require_range(cfg.workload.label_ratio > 0.0 && cfg.workload.label_ratio <= 1.0,
                "workload.label_ratio must be in (0, 1]");
  require_range(cfg.prompt.delta > 0.0 && cfg.prompt.delta < 1.0,
                "prompt.delta must be in (0, 1)");
  require_range(cfg.prompt.v_n >= 1, "prompt.v_n must be >= 1");
  require_range(cfg.layers >= 1, "encoder.layers must be >= 1");
  require_range(cfg.hidden >= 1, "encoder.hidden must be >= 1");
  require_range(cfg.train.epochs >= 1, "train.epochs must be >= 1");
  require_range(cfg.train.lr_theta >= 0.0 && cfg.train.lr_tau >= 0.0,
                "train learning rates must be >= 0");
  require_range(cfg.shards >= 1, "scale.shards must be >= 1");
  require_range(cfg.shards_per_query >= 1, "scale.shards_per_query must be >= 1");
  require_range(cfg.balance >= 0.0 && cfg.balance < 1.0,
                "scale.balance must be in [0, 1)");
  require_range(cfg.runs >= 1, "eval.runs must be >= 1");
  require_range(cfg.threshold > 0.0 && cfg.threshold < 1.0,
                "eval.threshold must be in (0, 1)");

  // The prompt section is the single source for the ablation switches and the
  // edge threshold; mirror them into the trainer settings.
  cfg.train.delta = cfg.prompt.delta;
  cfg.train.use_attr_tokens = cfg.prompt.use_attr_tokens;
  cfg.train.use_virt_tokens = cfg.prompt.use_virt_tokens;

  cfg.resolved_json = resolved_config(cfg).dump();
  cfg.hash = hash_hex(fnv1a64(cfg.resolved_json));
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

namespace {

json parse_flat(const std::string& json_text, const char* what) {
  json j;
  try {
    j = json::parse(json_text.empty() ? "{}" : json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed ") + what + " JSON: " + e.what());
  }
  if (!j.is_object())
    fail(ErrorKind::Validation, std::string(what) + " document must be an object");
  return j;
}

std::uint64_t get_seed(const json& s, std::uint64_t fallback, const char* where) {
  if (!s.contains("seed")) return fallback;
  const json& v = s["seed"];
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<long long>() < 0))
    fail(ErrorKind::Validation, std::string(where) + ".seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

SynthConfig parse_synth_config(const std::string& json_text) {
  json j = parse_flat(json_text, "generator config");
  check_keys(j, "generator config",
             {"communities", "nodes_per_community", "p_in", "p_out",
              "signature_attrs", "noise", "seed"});
  SynthConfig cfg;
  cfg.communities = get_int(j, "communities", cfg.communities, "generator");
  cfg.nodes_per_community =
      get_int(j, "nodes_per_community", cfg.nodes_per_community, "generator");
  cfg.p_in = get_num(j, "p_in", cfg.p_in, "generator");
  cfg.p_out = get_num(j, "p_out", cfg.p_out, "generator");
  cfg.signature_attrs = get_int(j, "signature_attrs", cfg.signature_attrs, "generator");
  cfg.noise = get_num(j, "noise", cfg.noise, "generator");
  cfg.seed = get_seed(j, cfg.seed, "generator");
  return cfg;
}

WorkloadSpec parse_workload_spec(const std::string& json_text) {
  json j = parse_flat(json_text, "workload spec");
  check_keys(j, "workload spec",
             {"protocol", "train", "val", "test", "nodes_per_query",
              "attrs_per_query", "label_ratio", "seed"});
  WorkloadSpec spec;
  spec.protocol = protocol_from_name(get_str(j, "protocol", "afc", "workload"));
  spec.train_count = get_int(j, "train", spec.train_count, "workload");
  spec.val_count = get_int(j, "val", spec.val_count, "workload");
  spec.test_count = get_int(j, "test", spec.test_count, "workload");
  spec.nodes_per_query = get_int(j, "nodes_per_query", spec.nodes_per_query, "workload");
  spec.attrs_per_query = get_int(j, "attrs_per_query", spec.attrs_per_query, "workload");
  spec.label_ratio = get_num(j, "label_ratio", spec.label_ratio, "workload");
  spec.seed = get_seed(j, spec.seed, "workload");
  require_range(spec.train_count >= 0 && spec.val_count >= 0 && spec.test_count >= 0,
                "workload counts must be >= 0");
  require_range(spec.train_count + spec.val_count + spec.test_count >= 1,
                "workload must request at least one query");
  require_range(spec.nodes_per_query >= 1 && spec.nodes_per_query <= 3,
                "workload.nodes_per_query must be in [1, 3]");
  require_range(spec.attrs_per_query >= 1, "workload.attrs_per_query must be >= 1");
  require_range(spec.label_ratio > 0.0 && spec.label_ratio <= 1.0,
                "workload.label_ratio must be in (0, 1]");
  return spec;
}

TrainConfig parse_train_config(const std::string& json_text) {
  json j = parse_flat(json_text, "train config");
  check_keys(j, "train config",
             {"epochs", "lr", "lr_theta", "lr_tau", "optimizer",
              "checkpoint_best", "seed"});
  TrainConfig cfg;
  cfg.epochs = get_int(j, "epochs", cfg.epochs, "train");
  double lr = get_num(j, "lr", -1.0, "train");
  if (lr >= 0.0) {
    cfg.lr_theta = lr;
    cfg.lr_tau = lr;
  }
  cfg.lr_theta = get_num(j, "lr_theta", cfg.lr_theta, "train");
  cfg.lr_tau = get_num(j, "lr_tau", cfg.lr_tau, "train");
  std::string opt = get_str(j, "optimizer", cfg.sgd ? "sgd" : "adam", "train");
  if (opt != "adam" && opt != "sgd")
    fail(ErrorKind::Validation, "train.optimizer must be \"adam\" or \"sgd\"");
  cfg.sgd = opt == "sgd";
  cfg.checkpoint_best = get_bool(j, "checkpoint_best", cfg.checkpoint_best, "train");
  cfg.seed = get_seed(j, cfg.seed, "train");
  require_range(cfg.epochs >= 1, "train.epochs must be >= 1");
  require_range(cfg.lr_theta >= 0.0 && cfg.lr_tau >= 0.0,
                "train learning rates must be >= 0");
  return cfg;
}

namespace {

struct Accum {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

Metrics mean_of(const std::vector<RunMetrics>& runs) {
  Accum a;
  for (const auto& rm : runs) {
    a.p += rm.test.precision;
    a.r += rm.test.recall;
    a.f1 += rm.test.f1;
  }
  double n = static_cast<double>(runs.size());
  return {a.p / n, a.r / n, a.f1 / n};
}

Metrics std_of(const std::vector<RunMetrics>& runs, const Metrics& mean) {
  Accum a;
  for (const auto& rm : runs) {
    a.p += (rm.test.precision - mean.precision) * (rm.test.precision - mean.precision);
    a.r += (rm.test.recall - mean.recall) * (rm.test.recall - mean.recall);
    a.f1 += (rm.test.f1 - mean.f1) * (rm.test.f1 - mean.f1);
  }
  double n = static_cast<double>(runs.size());
  return {std::sqrt(a.p / n), std::sqrt(a.r / n), std::sqrt(a.f1 / n)};
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  Dataset ds = cfg.graph_path.empty() ? generate_synthetic(cfg.synth)
                                      : load_dataset(cfg.graph_path);
  const AttributedGraph& g = ds.graph;
  if (ds.communities.empty())
    fail(ErrorKind::Validation, "dataset has no ground-truth communities");

  Partition part;
  if (cfg.shards > 1)
    part = partition_graph(g, cfg.shards, rng::derive(cfg.seed, 60), cfg.balance);

  ExperimentReport report;
  report.config_hash = cfg.hash;
  report.seed = cfg.seed;
  report.nodes = g.node_count();
  report.edge_total = g.edge_count();
  report.attr_total = g.attr_count();
  report.community_total = static_cast<int>(ds.communities.size());
  report.resolved_config_json = cfg.resolved_json;

  for (std::size_t si = 0; si < cfg.protocols.size(); ++si) {
    ScenarioReport scenario;
    scenario.protocol = cfg.protocols[si];

    WorkloadSpec spec = cfg.workload;
    spec.protocol = scenario.protocol;
    spec.seed = rng::derive(cfg.seed, 70 + si);
    Workload wl = gen_workload(g, ds.communities, spec);
    for (const auto& lq : wl.test) scenario.test_queries.push_back(lq.query);

    for (int run = 0; run < cfg.runs; ++run) {
      RunMetrics rm;
      rm.seed = rng::derive(cfg.seed, 1000 * (si + 1) + static_cast<std::uint64_t>(run));
      PromptTokenStore tokens =
          init_tokens(g.attr_count(), cfg.prompt.v_n, g.attr_count(),
                      rng::derive(rm.seed, 2));
      EncoderParams params = init_encoder({cfg.layers, cfg.hidden, g.attr_count()},
                                          rng::derive(rm.seed, 3));
      TrainConfig tcfg = cfg.train;
      tcfg.seed = rm.seed;

      TrainResult tr =
          cfg.shards > 1
              ? train_scaled(g, ds.communities, wl.train, wl.val,
                             std::move(tokens), std::move(params), tcfg, part,
                             cfg.shards_per_query)
              : train(g, ds.communities, wl.train, wl.val, std::move(tokens),
                      std::move(params), tcfg);
      rm.train_seconds = tr.report.train_seconds;
      rm.best_val_f1 = tr.report.best_val_f1;
      rm.best_epoch = tr.report.best_epoch;
      rm.max_route_nodes = tr.report.max_route_nodes;

      auto started = std::chrono::steady_clock::now();
      PromptConfig pcfg = tcfg.prompt_config();
      Accum acc;
      for (const auto& lq : wl.test) {
        Prediction pred =
            cfg.shards > 1
                ? infer_scaled(g, part, tr.tokens, lq.query, tr.params, pcfg)
                : forward_pass(g, tr.tokens, lq.query, tr.params, pcfg);
        pred.threshold = cfg.threshold;
        Metrics m = prf1(predict_community(pred),
                         detail::ground_truth(ds.communities, lq));
        acc.p += m.precision;
        acc.r += m.recall;
        acc.f1 += m.f1;
      }
      double nt = static_cast<double>(wl.test.size());
      rm.test = {acc.p / nt, acc.r / nt, acc.f1 / nt};
      rm.test_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
              .count();
      scenario.runs.push_back(std::move(rm));
    }

    scenario.mean = mean_of(scenario.runs);
    scenario.stddev = std_of(scenario.runs, scenario.mean);
    for (const auto& rm : scenario.runs) {
      scenario.mean_train_seconds += rm.train_seconds;
      scenario.mean_test_seconds += rm.test_seconds;
    }
    scenario.mean_train_seconds /= static_cast<double>(scenario.runs.size());
    scenario.mean_test_seconds /= static_cast<double>(scenario.runs.size());
    report.scenarios.push_back(std::move(scenario));
  }
  return report;
}

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["meta"] = {{"config_hash", report.config_hash}, {"seed", report.seed}};
  j["graph"] = {{"n", report.nodes},
                {"m", report.edge_total},
                {"c", report.attr_total},
                {"communities", report.community_total}};
  j["config"] = json::parse(report.resolved_config_json);
  json scenarios = json::array();
  for (const auto& sc : report.scenarios) {
    json s;
    s["protocol"] = protocol_name(sc.protocol);
    json runs = json::array();
    for (const auto& rm : sc.runs) {
      json r = {{"seed", rm.seed},
                {"precision", rm.test.precision},
                {"recall", rm.test.recall},
                {"f1", rm.test.f1},
                {"best_val_f1", rm.best_val_f1},
                {"best_epoch", rm.best_epoch},
                {"train_seconds", rm.train_seconds},
                {"test_seconds", rm.test_seconds}};
      if (rm.max_route_nodes > 0) r["max_route_nodes"] = rm.max_route_nodes;
      runs.push_back(std::move(r));
    }
    s["runs"] = std::move(runs);
    s["mean"] = {{"precision", sc.mean.precision},
                 {"recall", sc.mean.recall},
                 {"f1", sc.mean.f1}};
    s["std"] = {{"precision", sc.stddev.precision},
                {"recall", sc.stddev.recall},
                {"f1", sc.stddev.f1}};
    s["mean_train_seconds"] = sc.mean_train_seconds;
    s["mean_test_seconds"] = sc.mean_test_seconds;
    json queries = json::array();
    for (const auto& q : sc.test_queries)
      queries.push_back({{"nodes", q.nodes}, {"attrs", q.attrs}});
    s["test_queries"] = std::move(queries);
    scenarios.push_back(std::move(s));
  }
  j["scenarios"] = std::move(scenarios);
  return j.dump(2);
}

std::string report_table(const ExperimentReport& report) {
  std::ostringstream out;
  out << "# config_hash " << report.config_hash << "  seed " << report.seed << "\n";
  out << "# graph n=" << report.nodes << " m=" << report.edge_total
      << " c=" << report.attr_total << " communities=" << report.community_total
      << "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-19s %-19s %-19s %10s %9s\n",
                "scenario", "precision", "recall", "f1", "train_s", "test_s");
  out << line;
  for (const auto& sc : report.scenarios) {
    auto cell = [](double mean, double sd) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", mean, sd);
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-10s %-19s %-19s %-19s %10.2f %9.3f\n",
                  protocol_name(sc.protocol),
                  cell(sc.mean.precision, sc.stddev.precision).c_str(),
                  cell(sc.mean.recall, sc.stddev.recall).c_str(),
                  cell(sc.mean.f1, sc.stddev.f1).c_str(), sc.mean_train_seconds,
                  sc.mean_test_seconds);
    out << line;
  }
  return out.str();
}

}  // namespace place
