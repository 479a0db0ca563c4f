#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "experiment.hpp"

using nlohmann::json;
using place::Error;
using place::ErrorKind;
using place::ExperimentConfig;
using place::ExperimentReport;
using place::Protocol;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Message of the Error a config document provokes; empty if none is thrown.
std::string parse_error(const std::string& text, ErrorKind* kind = nullptr) {
  try {
    place::parse_experiment_config(text);
  } catch (const Error& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return "";
}

// Small, fast experiment: two clean communities, shallow encoder.
std::string small_config(const std::string& extra = "") {
  std::string base = R"({
    "seed": 9,
    "data": {"communities": 2, "nodes_per_community": 12, "p_in": 0.6,
             "p_out": 0.05, "signature_attrs": 2, "noise": 0.0},
    "workload": {"train": 3, "val": 2, "test": 3, "nodes_per_query": 2,
                 "attrs_per_query": 1, "label_ratio": 1.0},
    "encoder": {"layers": 2, "hidden": 8},
    "train": {"epochs": 15, "lr": 0.02},
    "eval": {"runs": 3})";
  return base + (extra.empty() ? "" : ",\n    " + extra) + "\n  }";
}

// Reports are compared with wall-clock fields removed.
json strip_timing(const std::string& report_json) {
  json j = json::parse(report_json);
  for (auto& sc : j["scenarios"]) {
    sc.erase("mean_train_seconds");
    sc.erase("mean_test_seconds");
    for (auto& run : sc["runs"]) {
      run.erase("train_seconds");
      run.erase("test_seconds");
    }
  }
  return j;
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(place::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(place::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(place::fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(place::hash_hex(0) == "0000000000000000");
  CHECK(place::hash_hex(place::fnv1a64("")) == "cbf29ce484222325");
}

TEST_CASE("an empty config resolves to the documented defaults") {
  ExperimentConfig cfg = place::parse_experiment_config("{}");
  CHECK(cfg.seed == 0);
  CHECK(cfg.graph_path.empty());
  CHECK(cfg.protocols == std::vector<Protocol>{Protocol::AFC});
  CHECK(cfg.workload.train_count == 20);
  CHECK(cfg.workload.val_count == 10);
  CHECK(cfg.workload.test_count == 10);
  CHECK(cfg.workload.nodes_per_query == 2);
  CHECK(cfg.workload.attrs_per_query == 3);
  CHECK(cfg.workload.label_ratio == 1.0);
  CHECK(cfg.prompt.delta == 0.6);
  CHECK(cfg.prompt.v_n == 1);
  CHECK(cfg.prompt.use_attr_tokens);
  CHECK(cfg.prompt.use_virt_tokens);
  CHECK(cfg.layers == 3);
  CHECK(cfg.hidden == 128);
  CHECK(cfg.train.epochs == 200);
  CHECK(cfg.train.lr_theta == 1e-4);
  CHECK(cfg.train.lr_tau == 1e-4);
  CHECK(!cfg.train.sgd);
  CHECK(cfg.train.checkpoint_best);
  CHECK(cfg.shards == 1);
  CHECK(cfg.shards_per_query == 1);
  CHECK(cfg.balance == 0.1);
  CHECK(cfg.runs == 3);
  CHECK(cfg.threshold == 0.5);

  // The hash is the FNV-1a of the canonical dump, so equal settings hash
  // equally no matter how the document was written.
  CHECK(cfg.hash == place::hash_hex(place::fnv1a64(cfg.resolved_json)));
  CHECK(place::parse_experiment_config(" {\n} ").hash == cfg.hash);
  CHECK(place::parse_experiment_config(R"({"eval": {"runs": 3}})").hash == cfg.hash);
  CHECK(place::parse_experiment_config(R"({"eval": {"runs": 4}})").hash != cfg.hash);
}

TEST_CASE("explicit settings land in their fields") {
  ExperimentConfig cfg = place::parse_experiment_config(R"({
    "seed": 7,
    "data": {"communities": 3, "nodes_per_community": 20, "p_in": 0.5,
             "p_out": 0.01, "signature_attrs": 2, "noise": 0.0},
    "workload": {"protocols": ["afc", "eqa"], "train": 4, "val": 2, "test": 3,
                 "nodes_per_query": 1, "attrs_per_query": 2, "label_ratio": 0.5},
    "prompt": {"delta": 0.55, "v_n": 2, "use_attr_tokens": false},
    "encoder": {"layers": 2, "hidden": 16},
    "train": {"epochs": 30, "lr": 0.01, "optimizer": "sgd", "checkpoint_best": false},
    "scale": {"shards": 2, "shards_per_query": 1, "balance": 0.2},
    "eval": {"runs": 2, "threshold": 0.4}
  })");
  CHECK(cfg.seed == 7);
  CHECK(cfg.synth.communities == 3);
  CHECK(cfg.synth.nodes_per_community == 20);
  CHECK(cfg.synth.p_in == 0.5);
  CHECK(cfg.synth.noise == 0.0);
  CHECK(cfg.protocols == std::vector<Protocol>{Protocol::AFC, Protocol::EQA});
  CHECK(cfg.workload.train_count == 4);
  CHECK(cfg.workload.label_ratio == 0.5);
  CHECK(cfg.prompt.delta == 0.55);
  CHECK(cfg.prompt.v_n == 2);
  CHECK(!cfg.prompt.use_attr_tokens);
  CHECK(cfg.layers == 2);
  CHECK(cfg.hidden == 16);
  CHECK(cfg.train.epochs == 30);
  CHECK(cfg.train.sgd);
  CHECK(!cfg.train.checkpoint_best);
  CHECK(cfg.shards == 2);
  CHECK(cfg.balance == 0.2);
  CHECK(cfg.runs == 2);
  CHECK(cfg.threshold == 0.4);

  // The prompt section drives the trainer's ablation switches and threshold.
  CHECK(cfg.train.delta == 0.55);
  CHECK(!cfg.train.use_attr_tokens);
  CHECK(cfg.train.use_virt_tokens);

  // "lr" sets both rates; the specific keys override it.
  CHECK(cfg.train.lr_theta == 0.01);
  CHECK(cfg.train.lr_tau == 0.01);
  auto split = place::parse_experiment_config(
      R"({"train": {"lr": 0.01, "lr_tau": 0.005}})");
  CHECK(split.train.lr_theta == 0.01);
  CHECK(split.train.lr_tau == 0.005);
}

TEST_CASE("unknown keys are rejected with their location") {
  CHECK(parse_error(R"({"bogus": 1})").find("unknown key \"bogus\" in config") !=
        std::string::npos);
  CHECK(parse_error(R"({"data": {"p_inn": 0.1}})").find("unknown key \"p_inn\" in data") !=
        std::string::npos);
  CHECK(parse_error(R"({"workload": {"ratio": 0.5}})").find("in workload") !=
        std::string::npos);
  CHECK(parse_error(R"({"train": {"momentum": 0.9}})").find("in train") !=
        std::string::npos);
  CHECK(parse_error(R"({"eval": {"metric": "f1"}})").find("in eval") !=
        std::string::npos);

  // A graph path excludes the generator settings.
  CHECK(parse_error(R"({"data": {"graph": "g.json", "p_in": 0.2}})")
            .find("unknown key \"p_in\" in data") != std::string::npos);
  CHECK(parse_error(R"({"data": {"graph": ""}})").find("file path") !=
        std::string::npos);
}

TEST_CASE("config validation rejects out-of-range settings") {
  for (const char* bad : {
           R"({"workload": {"protocols": []}})",
           R"({"workload": {"protocols": ["afc", "afc"]}})",
           R"({"workload": {"protocol": "afc", "protocols": ["eqa"]}})",
           R"({"workload": {"protocol": "xyz"}})",
           R"({"workload": {"nodes_per_query": 4}})",
           R"({"workload": {"label_ratio": 0.0}})",
           R"({"workload": {"train": 0}})",
           R"({"prompt": {"delta": 1.0}})",
           R"({"prompt": {"v_n": 0}})",
           R"({"encoder": {"layers": 0}})",
           R"({"train": {"epochs": 0}})",
           R"({"train": {"optimizer": "momentum"}})",
           R"({"train": {"lr": "fast"}})",
           R"({"scale": {"shards": 0}})",
           R"({"scale": {"balance": 1.0}})",
           R"({"eval": {"runs": 0}})",
           R"({"eval": {"threshold": 1.0}})",
           R"({"seed": -1})",
           R"({"seed": 1.5})",
           R"([])",
       }) {
    CAPTURE(bad);
    CHECK_THROWS_AS(place::parse_experiment_config(bad), Error);
  }

  ErrorKind kind = ErrorKind::Internal;
  CHECK(!parse_error("{nope", &kind).empty());
  CHECK(kind == ErrorKind::Parse);
  CHECK(!parse_error(R"({"eval": {"runs": 0}})", &kind).empty());
  CHECK(kind == ErrorKind::Validation);
}

TEST_CASE("flat config documents parse with the same rules") {
  auto synth = place::parse_synth_config("");
  CHECK(synth.communities == 4);
  CHECK(synth.nodes_per_community == 60);
  synth = place::parse_synth_config(
      R"({"communities": 2, "p_in": 0.3, "seed": 5})");
  CHECK(synth.communities == 2);
  CHECK(synth.p_in == 0.3);
  CHECK(synth.seed == 5);
  CHECK_THROWS_AS(place::parse_synth_config(R"({"pin": 0.3})"), Error);

  auto wl = place::parse_workload_spec(R"({"protocol": "eqa", "test": 5})");
  CHECK(wl.protocol == Protocol::EQA);
  CHECK(wl.test_count == 5);
  CHECK(wl.train_count == 20);
  CHECK_THROWS_AS(place::parse_workload_spec(R"({"nodes_per_query": 0})"), Error);
  CHECK_THROWS_AS(
      place::parse_workload_spec(R"({"train": 0, "val": 0, "test": 0})"), Error);

  auto tr = place::parse_train_config(R"({"lr": 0.05, "optimizer": "sgd"})");
  CHECK(tr.lr_theta == 0.05);
  CHECK(tr.lr_tau == 0.05);
  CHECK(tr.sgd);
  CHECK_THROWS_AS(place::parse_train_config(R"({"schedule": "cosine"})"), Error);
}

TEST_CASE("config files load like inline documents") {
  std::string path = temp_file("place_test_expcfg.json");
  {
    std::ofstream out(path);
    out << small_config();
  }
  ExperimentConfig from_file = place::load_experiment_config(path);
  ExperimentConfig inline_cfg = place::parse_experiment_config(small_config());
  CHECK(from_file.hash == inline_cfg.hash);
  std::filesystem::remove(path);

  ErrorKind kind = ErrorKind::Internal;
  try {
    place::load_experiment_config(temp_file("place_test_absent_cfg.json"));
  } catch (const Error& e) {
    kind = e.kind();
  }
  CHECK(kind == ErrorKind::Io);
}

TEST_CASE("experiment runs aggregate mean and population deviation") {
  ExperimentConfig cfg = place::parse_experiment_config(small_config());
  ExperimentReport report = place::run_experiment(cfg);

  CHECK(report.config_hash == cfg.hash);
  CHECK(report.seed == 9);
  CHECK(report.nodes == 24);
  CHECK(report.attr_total == 4);
  CHECK(report.community_total == 2);
  REQUIRE(report.scenarios.size() == 1);
  const auto& sc = report.scenarios[0];
  CHECK(sc.protocol == Protocol::AFC);
  REQUIRE(sc.runs.size() == 3);
  CHECK(sc.test_queries.size() == 3);

  double mp = 0, mr = 0, mf = 0;
  for (const auto& rm : sc.runs) {
    CHECK(rm.test.precision >= 0.0);
    CHECK(rm.test.precision <= 1.0);
    CHECK(rm.test.f1 >= 0.0);
    CHECK(rm.test.f1 <= 1.0);
    CHECK(rm.best_epoch >= 0);
    mp += rm.test.precision;
    mr += rm.test.recall;
    mf += rm.test.f1;
  }
  mp /= 3.0;
  mr /= 3.0;
  mf /= 3.0;
  CHECK(sc.mean.precision == doctest::Approx(mp).epsilon(1e-12));
  CHECK(sc.mean.recall == doctest::Approx(mr).epsilon(1e-12));
  CHECK(sc.mean.f1 == doctest::Approx(mf).epsilon(1e-12));

  double vp = 0, vr = 0, vf = 0;
  for (const auto& rm : sc.runs) {
    vp += (rm.test.precision - mp) * (rm.test.precision - mp);
    vr += (rm.test.recall - mr) * (rm.test.recall - mr);
    vf += (rm.test.f1 - mf) * (rm.test.f1 - mf);
  }
  CHECK(sc.stddev.precision == doctest::Approx(std::sqrt(vp / 3.0)).epsilon(1e-12));
  CHECK(sc.stddev.recall == doctest::Approx(std::sqrt(vr / 3.0)).epsilon(1e-12));
  CHECK(sc.stddev.f1 == doctest::Approx(std::sqrt(vf / 3.0)).epsilon(1e-12));

  // Run seeds differ, so the three runs are genuine restarts.
  CHECK(sc.runs[0].seed != sc.runs[1].seed);
  CHECK(sc.runs[1].seed != sc.runs[2].seed);

  // On this clean graph the learned model should be far from random.
  CHECK(sc.mean.f1 > 0.6);
}

TEST_CASE("identical configs produce identical metric values") {
  ExperimentConfig cfg = place::parse_experiment_config(small_config());
  ExperimentReport a = place::run_experiment(cfg);
  ExperimentReport b =
      place::run_experiment(place::parse_experiment_config(small_config()));
  CHECK(strip_timing(place::report_to_json(a)) ==
        strip_timing(place::report_to_json(b)));
}

TEST_CASE("each protocol gets its own scenario over the same dataset") {
  ExperimentConfig cfg = place::parse_experiment_config(R"({
    "seed": 9,
    "data": {"communities": 2, "nodes_per_community": 12, "p_in": 0.6,
             "p_out": 0.05, "signature_attrs": 2, "noise": 0.0},
    "workload": {"protocols": ["afc", "eqa"], "train": 3, "val": 1, "test": 2,
                 "nodes_per_query": 2, "attrs_per_query": 1, "label_ratio": 1.0},
    "encoder": {"layers": 2, "hidden": 8},
    "train": {"epochs": 10, "lr": 0.02},
    "eval": {"runs": 1}
  })");
  ExperimentReport report = place::run_experiment(cfg);
  REQUIRE(report.scenarios.size() == 2);
  CHECK(report.scenarios[0].protocol == Protocol::AFC);
  CHECK(report.scenarios[1].protocol == Protocol::EQA);
  for (const auto& q : report.scenarios[0].test_queries) CHECK(!q.attrs.empty());
  for (const auto& q : report.scenarios[1].test_queries) CHECK(q.attrs.empty());
}

TEST_CASE("scaled experiments run through the partition") {
  ExperimentConfig cfg = place::parse_experiment_config(R"({
    "seed": 4,
    "data": {"communities": 2, "nodes_per_community": 12, "p_in": 0.6,
             "p_out": 0.05, "signature_attrs": 2, "noise": 0.0},
    "workload": {"train": 3, "val": 1, "test": 2, "nodes_per_query": 2,
                 "attrs_per_query": 1, "label_ratio": 1.0},
    "encoder": {"layers": 2, "hidden": 8},
    "train": {"epochs": 10, "lr": 0.02},
    "scale": {"shards": 2, "shards_per_query": 2},
    "eval": {"runs": 1}
  })");
  ExperimentReport report = place::run_experiment(cfg);
  REQUIRE(report.scenarios.size() == 1);
  REQUIRE(report.scenarios[0].runs.size() == 1);
  const auto& rm = report.scenarios[0].runs[0];
  CHECK(rm.max_route_nodes > 0);
  CHECK(rm.max_route_nodes <= report.nodes + 2);
  CHECK(std::isfinite(rm.test.f1));
}

TEST_CASE("report serialization carries the run table") {
  ExperimentConfig cfg = place::parse_experiment_config(R"({
    "seed": 2,
    "data": {"communities": 2, "nodes_per_community": 10, "p_in": 0.7,
             "p_out": 0.05, "signature_attrs": 2, "noise": 0.0},
    "workload": {"train": 2, "val": 1, "test": 2, "nodes_per_query": 1,
                 "attrs_per_query": 1, "label_ratio": 1.0},
    "encoder": {"layers": 2, "hidden": 8},
    "train": {"epochs": 8, "lr": 0.02},
    "eval": {"runs": 2}
  })");
  ExperimentReport report = place::run_experiment(cfg);

  json j = json::parse(place::report_to_json(report));
  CHECK(j["meta"]["config_hash"] == cfg.hash);
  CHECK(j["meta"]["seed"] == 2);
  CHECK(j["graph"]["n"] == 20);
  CHECK(j["config"] == json::parse(cfg.resolved_json));
  REQUIRE(j["scenarios"].size() == 1);
  CHECK(j["scenarios"][0]["runs"].size() == 2);
  CHECK(j["scenarios"][0].contains("mean"));
  CHECK(j["scenarios"][0].contains("std"));
  CHECK(j["scenarios"][0]["test_queries"].size() == 2);

  std::string table = place::report_table(report);
  CHECK(table.find("afc") != std::string::npos);
  CHECK(table.find("+/-") != std::string::npos);
  CHECK(table.find(cfg.hash) != std::string::npos);
  CHECK(table.find("scenario") != std::string::npos);
}
