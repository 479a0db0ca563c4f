#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graph.hpp"
#include "metrics.hpp"
#include "partition.hpp"
#include "query.hpp"
#include "synth.hpp"
#include "trainer.hpp"

namespace place {

// Fully resolved experiment settings. Parsed from a JSON document with
// sections {data, workload, prompt, encoder, train, scale, eval}; every key
// is optional and defaults to the module defaults, unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  // data: either a graph file or the synthetic generator settings.
  std::string graph_path;  // empty -> generate
  SynthConfig synth;

  // workload: one scenario per protocol, sharing counts and ratios.
  std::vector<Protocol> protocols{Protocol::AFC};
  WorkloadSpec workload;

  PromptConfig prompt;

  int layers = 3;
  int hidden = 128;

  TrainConfig train;

  // scale: shards == 1 trains on the whole graph.
  int shards = 1;
  int shards_per_query = 1;
  double balance = 0.1;

  // eval
  int runs = 3;
  double threshold = 0.5;

  std::string resolved_json;  // canonical dump of the settings above
  std::string hash;           // FNV-1a 64 of resolved_json, hex
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Flat single-purpose documents used by the C API and CLI. Unknown keys are
// rejected; absent keys fall back to the defaults above.
SynthConfig parse_synth_config(const std::string& json_text);
WorkloadSpec parse_workload_spec(const std::string& json_text);
TrainConfig parse_train_config(const std::string& json_text);

std::uint64_t fnv1a64(std::string_view s);
std::string hash_hex(std::uint64_t h);

struct RunMetrics {
  std::uint64_t seed = 0;  // derived per-run seed
  Metrics test;            // macro-averaged over the test queries
  double best_val_f1 = 0.0;
  int best_epoch = -1;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
  int max_route_nodes = 0;
};

struct ScenarioReport {
  Protocol protocol = Protocol::AFC;
  std::vector<RunMetrics> runs;
  Metrics mean, stddev;  // population std over the runs
  double mean_train_seconds = 0.0;
  double mean_test_seconds = 0.0;
  std::vector<Query> test_queries;
};

struct ExperimentReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int nodes = 0, edge_total = 0, attr_total = 0, community_total = 0;
  std::vector<ScenarioReport> scenarios;
  std::string resolved_config_json;
};

// Trains per scenario and per run seed, evaluates the test split against the
// ground-truth communities, and aggregates mean and standard deviation.
// Identical configs produce identical metric values.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string report_to_json(const ExperimentReport& report);
// Aligned-column table, one row per scenario: P, R, F1 as mean +/- std.
std::string report_table(const ExperimentReport& report);

}  // namespace place
