#include "place/place.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "encoder.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "graph.hpp"
#include "partition.hpp"
#include "prompt.hpp"
#include "query.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "trainer.hpp"

struct place_graph {
  place::Dataset ds;
};
struct place_workload {
  std::vector<place::LabeledQuery> queries;
};
struct place_partition {
  place::Partition p;
};
struct place_model {
  place::PromptTokenStore tokens;
  place::EncoderParams params;
  place::PromptConfig prompt;
  std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_last_error;

place_status from_kind(place::ErrorKind kind) {
  switch (kind) {
    case place::ErrorKind::InvalidArgument: return PLACE_ERR_INVALID_ARGUMENT;
    case place::ErrorKind::Parse: return PLACE_ERR_PARSE;
    case place::ErrorKind::Io: return PLACE_ERR_IO;
    case place::ErrorKind::Validation: return PLACE_ERR_VALIDATION;
    case place::ErrorKind::Numeric: return PLACE_ERR_NUMERIC;
    case place::ErrorKind::Internal: return PLACE_ERR_INTERNAL;
  }
  return PLACE_ERR_INTERNAL;
}

template <typename F>
place_status guarded(F&& fn) {
  try {
    fn();
    return PLACE_OK;
  } catch (const place::Error& e) {
    g_last_error = e.what();
    return from_kind(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PLACE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PLACE_ERR_INTERNAL;
  }
}

place_status invalid(const std::string& msg) {
  g_last_error = msg;
  return PLACE_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string text_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

std::vector<int> id_list(const int32_t* ids, int32_t count, const char* what) {
  if (count < 0) place::fail(place::ErrorKind::InvalidArgument,
                             std::string(what) + " count must be >= 0");
  if (count > 0 && !ids)
    place::fail(place::ErrorKind::InvalidArgument,
                std::string(what) + " array is null");
  std::vector<int> out(ids, ids + count);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string train_report_json(const place::TrainReport& report) {
  nlohmann::json j;
  j["train_loss"] = report.train_loss;
  j["val_f1"] = report.val_f1;
  j["best_epoch"] = report.best_epoch;
  j["best_val_f1"] = report.best_val_f1;
  j["train_seconds"] = report.train_seconds;
  j["max_route_nodes"] = report.max_route_nodes;
  return j.dump();
}

const std::vector<place::LabeledQuery> kNoQueries;

const std::vector<place::LabeledQuery>& queries_or_empty(const place_workload* w) {
  return w ? w->queries : kNoQueries;
}

place::TrainConfig make_train_config(const char* json_text,
                                     const place::PromptConfig& prompt) {
  place::TrainConfig cfg = place::parse_train_config(text_or_empty(json_text));
  cfg.delta = prompt.delta;
  cfg.use_attr_tokens = prompt.use_attr_tokens;
  cfg.use_virt_tokens = prompt.use_virt_tokens;
  return cfg;
}

void finish_training(place_model* m, place::TrainResult&& result,
                     char** report_json) {
  m->tokens = std::move(result.tokens);
  m->params = std::move(result.params);
  if (report_json) *report_json = dup_string(train_report_json(result.report));
}

}  // namespace

extern "C" {

const char* place_last_error(void) { return g_last_error.c_str(); }

void place_string_free(char* s) { std::free(s); }

place_status place_graph_load(const char* path, place_graph** out) {
  if (!path || !out) return invalid("place_graph_load: null argument");
  return guarded([&] {
    auto g = std::make_unique<place_graph>();
    g->ds = place::load_dataset(path);
    *out = g.release();
  });
}

place_status place_graph_generate(const char* config_json, place_graph** out) {
  if (!out) return invalid("place_graph_generate: null output");
  return guarded([&] {
    place::SynthConfig cfg = place::parse_synth_config(text_or_empty(config_json));
    auto g = std::make_unique<place_graph>();
    g->ds = place::generate_synthetic(cfg);
    *out = g.release();
  });
}

place_status place_graph_save(const place_graph* g, const char* path,
                              const char* meta_json) {
  if (!g || !path) return invalid("place_graph_save: null argument");
  return guarded([&] { place::save_dataset(g->ds, path, text_or_empty(meta_json)); });
}

place_status place_graph_counts(const place_graph* g, int32_t* nodes,
                                int32_t* edges, int32_t* attrs,
                                int32_t* communities) {
  if (!g) return invalid("place_graph_counts: null graph");
  if (nodes) *nodes = g->ds.graph.node_count();
  if (edges) *edges = g->ds.graph.edge_count();
  if (attrs) *attrs = g->ds.graph.attr_count();
  if (communities) *communities = static_cast<int32_t>(g->ds.communities.size());
  return PLACE_OK;
}

void place_graph_free(place_graph* g) { delete g; }

place_status place_workload_generate(const place_graph* g, const char* spec_json,
                                     place_workload** train, place_workload** val,
                                     place_workload** test) {
  if (!g) return invalid("place_workload_generate: null graph");
  return guarded([&] {
    place::WorkloadSpec spec = place::parse_workload_spec(text_or_empty(spec_json));
    place::Workload wl = place::gen_workload(g->ds.graph, g->ds.communities, spec);
    if (train) *train = new place_workload{std::move(wl.train)};
    if (val) *val = new place_workload{std::move(wl.val)};
    if (test) *test = new place_workload{std::move(wl.test)};
  });
}

place_status place_workload_load(const char* path, place_workload** out) {
  if (!path || !out) return invalid("place_workload_load: null argument");
  return guarded([&] { *out = new place_workload{place::load_workload(path)}; });
}

place_status place_workload_save(const place_workload* w, const char* path) {
  if (!w || !path) return invalid("place_workload_save: null argument");
  return guarded([&] { place::save_workload(w->queries, path); });
}

place_status place_workload_count(const place_workload* w, int32_t* count) {
  if (!w || !count) return invalid("place_workload_count: null argument");
  *count = static_cast<int32_t>(w->queries.size());
  return PLACE_OK;
}

void place_workload_free(place_workload* w) { delete w; }

place_status place_partition_build(const place_graph* g, int32_t shards,
                                   uint64_t seed, double balance,
                                   place_partition** out) {
  if (!g || !out) return invalid("place_partition_build: null argument");
  return guarded([&] {
    *out = new place_partition{
        place::partition_graph(g->ds.graph, shards, seed, balance)};
  });
}

place_status place_partition_load(const char* path, const place_graph* g,
                                  place_partition** out) {
  if (!path || !g || !out) return invalid("place_partition_load: null argument");
  return guarded([&] {
    *out = new place_partition{place::load_partition(path, g->ds.graph)};
  });
}

place_status place_partition_save(const place_partition* p, const char* path,
                                  const char* meta_json) {
  if (!p || !path) return invalid("place_partition_save: null argument");
  return guarded([&] {
    place::save_partition(p->p, path, text_or_empty(meta_json));
  });
}

place_status place_partition_info(const place_partition* p, int32_t* shards,
                                  int64_t* cut) {
  if (!p) return invalid("place_partition_info: null partition");
  if (shards) *shards = p->p.s;
  if (cut) *cut = p->p.cut;
  return PLACE_OK;
}

void place_partition_free(place_partition* p) { delete p; }

place_status place_model_init(const char* config_json, int32_t attr_count,
                              uint64_t seed, place_model** out) {
  if (!out) return invalid("place_model_init: null output");
  return guarded([&] {
    place::ExperimentConfig cfg =
        place::parse_experiment_config(config_json ? config_json : "{}");
    auto m = std::make_unique<place_model>();
    m->prompt = cfg.prompt;
    m->seed = seed;
    m->tokens = place::init_tokens(attr_count, cfg.prompt.v_n, attr_count,
                                   place::rng::derive(seed, 2));
    m->params = place::init_encoder({cfg.layers, cfg.hidden, attr_count},
                                    place::rng::derive(seed, 3));
    *out = m.release();
  });
}

place_status place_model_load(const char* tokens_path, const char* encoder_path,
                              const char* config_json, place_model** out) {
  if (!tokens_path || !encoder_path || !out)
    return invalid("place_model_load: null argument");
  return guarded([&] {
    auto m = std::make_unique<place_model>();
    m->tokens = place::load_tokens(tokens_path);
    m->params = place::load_encoder(encoder_path);
    if (m->tokens.dim() != m->params.cfg.d_in)
      place::fail(place::ErrorKind::Validation,
                  "token and encoder checkpoints disagree on the input width");
    place::ExperimentConfig cfg =
        place::parse_experiment_config(config_json ? config_json : "{}");
    m->prompt = cfg.prompt;
    m->prompt.v_n = m->tokens.virt_count();
    *out = m.release();
  });
}

place_status place_model_save(const place_model* m, const char* tokens_path,
                              const char* encoder_path, const char* meta_json) {
  if (!m || !tokens_path || !encoder_path)
    return invalid("place_model_save: null argument");
  return guarded([&] {
    place::save_tokens(m->tokens, m->seed, tokens_path, text_or_empty(meta_json));
    place::save_encoder(m->params, encoder_path, text_or_empty(meta_json));
  });
}

void place_model_free(place_model* m) { delete m; }

place_status place_train(place_model* m, const place_graph* g,
                         const place_workload* train_queries,
                         const place_workload* val_queries,
                         const char* train_config_json, char** report_json) {
  if (!m || !g || !train_queries) return invalid("place_train: null argument");
  return guarded([&] {
    place::TrainConfig cfg = make_train_config(train_config_json, m->prompt);
    place::TrainResult result =
        place::train(g->ds.graph, g->ds.communities, train_queries->queries,
                     queries_or_empty(val_queries), m->tokens, m->params, cfg);
    finish_training(m, std::move(result), report_json);
  });
}

place_status place_train_scaled(place_model* m, const place_graph* g,
                                const place_partition* p,
                                const place_workload* train_queries,
                                const place_workload* val_queries,
                                const char* train_config_json,
                                int32_t shards_per_query, char** report_json) {
  if (!m || !g || !p || !train_queries)
    return invalid("place_train_scaled: null argument");
  return guarded([&] {
    place::TrainConfig cfg = make_train_config(train_config_json, m->prompt);
    place::TrainResult result = place::train_scaled(
        g->ds.graph, g->ds.communities, train_queries->queries,
        queries_or_empty(val_queries), m->tokens, m->params, cfg, p->p,
        shards_per_query);
    finish_training(m, std::move(result), report_json);
  });
}

place_status place_fine_tune(place_model* m, const place_graph* g,
                             const place_workload* train_queries,
                             const place_workload* val_queries,
                             const char* train_config_json, const char* mode,
                             char** report_json) {
  if (!m || !g || !mode) return invalid("place_fine_tune: null argument");
  return guarded([&] {
    place::FineTuneMode ft = place::fine_tune_mode_from_name(mode);
    if (ft != place::FineTuneMode::None && !train_queries)
      place::fail(place::ErrorKind::InvalidArgument,
                  "fine-tune mode \"" + std::string(mode) + "\" needs training queries");
    place::TrainConfig cfg = make_train_config(train_config_json, m->prompt);
    place::TrainResult result = place::fine_tune(
        g->ds.graph, g->ds.communities, queries_or_empty(train_queries),
        queries_or_empty(val_queries), m->tokens, m->params, cfg, ft);
    finish_training(m, std::move(result), report_json);
  });
}

place_status place_infer(const place_model* m, const place_graph* g,
                         const int32_t* query_nodes, int32_t query_node_count,
                         const int32_t* query_attrs, int32_t query_attr_count,
                         double* probs) {
  if (!m || !g || !probs) return invalid("place_infer: null argument");
  return guarded([&] {
    place::Query q;
    q.nodes = id_list(query_nodes, query_node_count, "query node");
    q.attrs = id_list(query_attrs, query_attr_count, "query attribute");
    place::Prediction pred =
        place::forward_pass(g->ds.graph, m->tokens, q, m->params, m->prompt);
    std::copy(pred.probs.begin(), pred.probs.end(), probs);
  });
}

place_status place_infer_scaled(const place_model* m, const place_graph* g,
                                const place_partition* p,
                                const int32_t* query_nodes,
                                int32_t query_node_count,
                                const int32_t* query_attrs,
                                int32_t query_attr_count, double* probs) {
  if (!m || !g || !p || !probs) return invalid("place_infer_scaled: null argument");
  return guarded([&] {
    place::Query q;
    q.nodes = id_list(query_nodes, query_node_count, "query node");
    q.attrs = id_list(query_attrs, query_attr_count, "query attribute");
    place::Prediction pred = place::infer_scaled(g->ds.graph, p->p, m->tokens, q,
                                                 m->params, m->prompt);
    std::copy(pred.probs.begin(), pred.probs.end(), probs);
  });
}

place_status place_eval(const int32_t* predicted, int32_t predicted_count,
                        const int32_t* truth, int32_t truth_count,
                        double* precision, double* recall, double* f1) {
  return guarded([&] {
    place::Metrics m = place::prf1(id_list(predicted, predicted_count, "predicted"),
                                   id_list(truth, truth_count, "truth"));
    if (precision) *precision = m.precision;
    if (recall) *recall = m.recall;
    if (f1) *f1 = m.f1;
  });
}

place_status place_config_hash(const char* config_json, char** hash_out) {
  if (!hash_out) return invalid("place_config_hash: null output");
  return guarded([&] {
    place::ExperimentConfig cfg =
        place::parse_experiment_config(config_json ? config_json : "{}");
    *hash_out = dup_string(cfg.hash);
  });
}

place_status place_run_experiment(const char* config_json, char** report_json,
                                  char** table_text) {
  if (!config_json || !report_json)
    return invalid("place_run_experiment: null argument");
  return guarded([&] {
    place::ExperimentConfig cfg = place::parse_experiment_config(config_json);
    place::ExperimentReport report = place::run_experiment(cfg);
    *report_json = dup_string(place::report_to_json(report));
    if (table_text) *table_text = dup_string(place::report_table(report));
  });
}

}  // extern "C"
