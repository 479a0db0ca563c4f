/* C interface to the community-search library. All functions return a
 * place_status; on failure place_last_error() describes the problem for the
 * calling thread. Objects are opaque handles released with the matching
 * _free function. Strings returned through char** outputs are heap-allocated
 * and must be released with place_string_free. */

#ifndef PLACE_PLACE_H
#define PLACE_PLACE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum place_status {
  PLACE_OK = 0,
  PLACE_ERR_INVALID_ARGUMENT = 1,
  PLACE_ERR_PARSE = 2,
  PLACE_ERR_IO = 3,
  PLACE_ERR_VALIDATION = 4,
  PLACE_ERR_NUMERIC = 5,
  PLACE_ERR_INTERNAL = 6
} place_status;

/* Message of the most recent failing call on this thread; never NULL. */
const char* place_last_error(void);

void place_string_free(char* s);

typedef struct place_graph place_graph;
typedef struct place_workload place_workload;
typedef struct place_model place_model;
typedef struct place_partition place_partition;

/* ---- graphs ------------------------------------------------------------ */

place_status place_graph_load(const char* path, place_graph** out);

/* config_json: {"communities", "nodes_per_community", "p_in", "p_out",
 * "signature_attrs", "noise", "seed"}; all keys optional. */
place_status place_graph_generate(const char* config_json, place_graph** out);

/* meta_json (nullable) is embedded under a "meta" key in the file. */
place_status place_graph_save(const place_graph* g, const char* path,
                              const char* meta_json);

place_status place_graph_counts(const place_graph* g, int32_t* nodes,
                                int32_t* edges, int32_t* attrs,
                                int32_t* communities);

void place_graph_free(place_graph* g);

/* ---- query workloads --------------------------------------------------- */

/* spec_json: {"protocol": "afc"|"afn"|"eqa", "train", "val", "test",
 * "nodes_per_query", "attrs_per_query", "label_ratio", "seed"}. The three
 * splits are returned through the three out-parameters; pass NULL to drop a
 * split. */
place_status place_workload_generate(const place_graph* g, const char* spec_json,
                                     place_workload** train,
                                     place_workload** val,
                                     place_workload** test);

place_status place_workload_load(const char* path, place_workload** out);
place_status place_workload_save(const place_workload* w, const char* path);
place_status place_workload_count(const place_workload* w, int32_t* count);
void place_workload_free(place_workload* w);

/* ---- partitions -------------------------------------------------------- */

place_status place_partition_build(const place_graph* g, int32_t shards,
                                   uint64_t seed, double balance,
                                   place_partition** out);
place_status place_partition_load(const char* path, const place_graph* g,
                                  place_partition** out);
place_status place_partition_save(const place_partition* p, const char* path,
                                  const char* meta_json);
place_status place_partition_info(const place_partition* p, int32_t* shards,
                                  int64_t* cut);
void place_partition_free(place_partition* p);

/* ---- models ------------------------------------------------------------ */

/* A model bundles the prompt tokens, the encoder weights, and the prompt
 * settings (edge threshold delta, virtual-token count, ablation switches).
 * config_json uses the experiment-config sections {"prompt": {...},
 * "encoder": {...}}; NULL or "{}" selects the defaults. */
place_status place_model_init(const char* config_json, int32_t attr_count,
                              uint64_t seed, place_model** out);

/* Loads token and encoder checkpoints; config_json (nullable) restores the
 * prompt settings, which are not part of the checkpoint files. */
place_status place_model_load(const char* tokens_path, const char* encoder_path,
                              const char* config_json, place_model** out);

place_status place_model_save(const place_model* m, const char* tokens_path,
                              const char* encoder_path, const char* meta_json);

void place_model_free(place_model* m);

/* ---- training ---------------------------------------------------------- */

/* train_config_json: {"epochs", "lr", "lr_theta", "lr_tau", "optimizer":
 * "adam"|"sgd", "checkpoint_best", "seed"}; NULL selects the defaults. The
 * model is updated in place with the trained (best-validation) state.
 * report_json (nullable out) receives {"train_loss": [...], "val_f1": [...],
 * "best_epoch", "best_val_f1", "train_seconds", "max_route_nodes"}. */
place_status place_train(place_model* m, const place_graph* g,
                         const place_workload* train_queries,
                         const place_workload* val_queries,
                         const char* train_config_json, char** report_json);

place_status place_train_scaled(place_model* m, const place_graph* g,
                                const place_partition* p,
                                const place_workload* train_queries,
                                const place_workload* val_queries,
                                const char* train_config_json,
                                int32_t shards_per_query, char** report_json);

/* mode: "none" (evaluate only), "prompt_only" (tokens step, encoder frozen),
 * or "both". */
place_status place_fine_tune(place_model* m, const place_graph* g,
                             const place_workload* train_queries,
                             const place_workload* val_queries,
                             const char* train_config_json, const char* mode,
                             char** report_json);

/* ---- inference and evaluation ------------------------------------------ */

/* probs must hold node_count doubles; membership is probability > threshold
 * (0.5 unless overridden at the call site). */
place_status place_infer(const place_model* m, const place_graph* g,
                         const int32_t* query_nodes, int32_t query_node_count,
                         const int32_t* query_attrs, int32_t query_attr_count,
                         double* probs);

place_status place_infer_scaled(const place_model* m, const place_graph* g,
                                const place_partition* p,
                                const int32_t* query_nodes,
                                int32_t query_node_count,
                                const int32_t* query_attrs,
                                int32_t query_attr_count, double* probs);

place_status place_eval(const int32_t* predicted, int32_t predicted_count,
                        const int32_t* truth, int32_t truth_count,
                        double* precision, double* recall, double* f1);

/* ---- experiments ------------------------------------------------------- */

/* Resolves a full experiment config (defaults applied) and returns the
 * FNV-1a hash of the canonical form as a hex string. */
place_status place_config_hash(const char* config_json, char** hash_out);

/* Runs the experiment described by config_json. report_json receives the
 * full JSON report; table_text (nullable) the aligned-column summary. */
place_status place_run_experiment(const char* config_json, char** report_json,
                                  char** table_text);

#ifdef __cplusplus
}
#endif

#endif /* PLACE_PLACE_H */
