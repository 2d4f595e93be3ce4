#include <set>
#include <sstream>

#include "doctest.h"
#include "experiment.hpp"
#include "iclpara/error.hpp"
#include "iclpara/runner.hpp"
#include "iclpara/util.hpp"
#include "json.hpp"
#include "testing.hpp"

using namespace iclpara;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (!trim(line).empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST_CASE("demo_copy over gold duplicates reaches BLEU 100") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_duplicate_corpus(12, 30), dir.path(), MockMode::demo_copy);
  cfg.strategy.n = 2;
  const auto r = run_experiment(cfg);
  CHECK(r.failures == 0);
  CHECK(r.query_count == 12);
  CHECK(r.pool_size == 42);
  CHECK(r.report.corpus.bleu == 100.0);
  CHECK(r.report.corpus.rouge == doctest::Approx(100.0));

  for (const char* f : {"config.json", "generations.jsonl", "metrics.json", "report.csv", "failures.json"}) {
    CHECK(fs::exists(cfg.output_dir / f));
  }
  const auto gens = read_jsonl(cfg.output_dir / "generations.jsonl");
  REQUIRE(gens.size() == 12);
  for (const auto& g : gens) {
    const std::string q = g["query_id"];
    CHECK(g["demos"][0]["id"] == "train-dup-" + q.substr(5));
    CHECK(g["demos"].size() == 2);
  }
  const auto metrics = json::parse(read_file(cfg.output_dir / "metrics.json"));
  CHECK(metrics["run"]["label"] == r.label);
  CHECK(metrics["metrics"]["bleu_debug"]["precisions"][3] == 1.0);
}

TEST_CASE("echo output keeps the source toxicity") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_toxicity_corpus(), dir.path(), MockMode::echo);
  const auto r = run_experiment(cfg);
  REQUIRE(r.report.source_toxicity_mean);
  CHECK(*r.report.source_toxicity_mean == doctest::Approx(40.0));
  CHECK(r.report.corpus.toxicity_mean == *r.report.source_toxicity_mean);
  CHECK(*r.report.reference_toxicity_mean == doctest::Approx(0.0));

  auto clean = cfg;
  clean.backend.mock_mode = MockMode::lexicon_clean;
  clean.output_dir = dir / "clean";
  CHECK(run_experiment(clean).report.corpus.toxicity_mean == 0.0);
}

TEST_CASE("invalid experiments fail before generation") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(20, 5), dir.path());
  cfg.strategy.n = 0;
  cfg.instruction.reset();
  CHECK_THROWS_AS(run_experiment(cfg), InputError);
  CHECK_FALSE(fs::exists(cfg.output_dir / "generations.jsonl"));

  auto no_test = testing::mock_experiment(testing::make_split_corpus(20, 0), dir.path());
  CHECK_THROWS_AS(run_experiment(no_test), InputError);

  auto missing = cfg;
  missing.corpus.path = dir / "nope.csv";
  CHECK_THROWS_AS(run_experiment(missing), InputError);
}

TEST_CASE("remote backend without credentials fails before any request") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(20, 5), dir.path());
  cfg.backend.kind = BackendKind::openai;
  cfg.backend.backend_id = "remote";
  cfg.backend.endpoint = "http://127.0.0.1:1/v1";
  cfg.backend.auth_env = "ICLPARA_SURELY_UNSET_VAR";
  ::unsetenv("ICLPARA_SURELY_UNSET_VAR");
  CHECK_THROWS_AS(run_experiment(cfg), AuthError);
  CHECK_FALSE(fs::exists(cfg.output_dir));
}

TEST_CASE("failed generations abort the run past the threshold") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(20, 5), dir.path(), MockMode::demo_copy);
  cfg.strategy.n = 0;  // demo_copy has nothing to copy
  CHECK_THROWS_AS(run_experiment(cfg), RunAborted);
  CHECK(fs::exists(cfg.output_dir / "failures.json"));
  CHECK_FALSE(fs::exists(cfg.output_dir / "metrics.json"));
  const auto failures = json::parse(read_file(cfg.output_dir / "failures.json"));
  CHECK(failures.size() == 5);

  cfg.failure_threshold = 1.0;
  cfg.output_dir = dir / "tolerant";
  // Every generation failed, so nothing is left to score.
  CHECK_THROWS_AS(run_experiment(cfg), InputError);

  cfg.backend.mock_fallback = MockMode::echo;
  cfg.output_dir = dir / "fallback";
  const auto r = run_experiment(cfg);
  CHECK(r.failures == 0);
}

TEST_CASE("dry run writes a prompt manifest and no generations") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(30, 4), dir.path());
  cfg.strategy.n = 3;
  const auto r = run_experiment(cfg, RunOptions{true});
  CHECK(r.dry_run);
  CHECK_FALSE(fs::exists(cfg.output_dir / "generations.jsonl"));
  CHECK_FALSE(fs::exists(cfg.output_dir / "metrics.json"));
  CHECK_FALSE(fs::exists(effective_cache_path(cfg)));
  const auto lines = read_jsonl(cfg.output_dir / "prompts.jsonl");
  REQUIRE(lines.size() == 4);
  for (const auto& l : lines) {
    CHECK(l["demo_count"] == 3);
    CHECK(l["prompt_hash"].get<std::string>().size() == 64);
  }
}

TEST_CASE("warm cache reproduces runs without backend calls") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(40, 8), dir.path());
  cfg.strategy = {SelectionKind::random, DemoOrder::as_drawn, 3, 1};
  auto first = RunResources::prepare(cfg);
  run_experiment(cfg, first);
  CHECK(first.client->backend_calls() == 8);
  const auto metrics = read_file(cfg.output_dir / "metrics.json");
  std::vector<std::string> outputs;
  for (const auto& g : read_jsonl(cfg.output_dir / "generations.jsonl")) outputs.push_back(g["raw_output"]);

  auto second = RunResources::prepare(cfg);
  run_experiment(cfg, second);
  CHECK(second.client->backend_calls() == 0);
  CHECK(read_file(cfg.output_dir / "metrics.json") == metrics);
  std::vector<std::string> again;
  for (const auto& g : read_jsonl(cfg.output_dir / "generations.jsonl")) {
    CHECK(g["cached"] == true);
    CHECK(g["latency_ms"] == 0.0);
    again.push_back(g["raw_output"]);
  }
  CHECK(again == outputs);
}

TEST_CASE("runs do not depend on the worker count") {
  testing::TempDir dir;
  auto cfg = testing::mock_experiment(testing::make_split_corpus(40, 12), dir.path());
  cfg.strategy = {SelectionKind::random, DemoOrder::as_drawn, 2, 1};
  cfg.jobs = 1;
  cfg.cache = dir / "c1.jsonl";
  run_experiment(cfg);
  const auto one = read_file(cfg.output_dir / "metrics.json");
  cfg.jobs = 8;
  cfg.cache = dir / "c8.jsonl";
  run_experiment(cfg);
  CHECK(read_file(cfg.output_dir / "metrics.json") == one);
}

TEST_CASE("demo-count sweep with the wide preset") {
  testing::TempDir dir;
  auto base = testing::mock_experiment(testing::make_split_corpus(60, 5), dir.path());
  const auto spec = sweep_from_json(base, json{{"axis", "demo_count"}, {"values", "wide"}});
  CHECK(spec.demo_counts == demo_count_preset_wide());
  const auto results = run_sweep(spec);
  REQUIRE(results.size() == 6);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < results.size(); ++i) {
    CHECK_FALSE(results[i].error);
    CHECK(results[i].config.strategy.n == spec.demo_counts[i]);
    labels.insert(results[i].label);
  }
  CHECK(labels.size() == 6);
  CHECK(fs::exists(base.output_dir / "report.csv"));
  CHECK(fs::exists(base.output_dir / "sweep.json"));
  CHECK(fs::exists(base.output_dir / "generation_cache.jsonl"));
  const auto plot = read_file(base.output_dir / "plotdata" / "metric_vs_demo_count.csv");
  CHECK(split_lines(plot).size() >= 7);
  CHECK(read_file(base.output_dir / "report.csv").rfind("system,BLEU,BERT-F1,ROUGE,CIDEr,Toxicity,Quality", 0) == 0);
}

TEST_CASE("fraction sweep shrinks the pool") {
  testing::TempDir dir;
  auto base = testing::mock_experiment(testing::make_split_corpus(200, 4), dir.path());
  const auto spec = sweep_from_json(base, json{{"axis", "fraction"}, {"values", {1.0, 0.5, 0.1}}});
  const auto results = run_sweep(spec);
  REQUIRE(results.size() == 3);
  CHECK(results[0].pool_size == 200);
  CHECK(results[1].pool_size == 100);
  CHECK(results[2].pool_size == 20);
  CHECK(fs::exists(base.output_dir / "plotdata" / "metric_vs_fraction.csv"));
}

TEST_CASE("strategy sweep covers the five canonical strategies") {
  testing::TempDir dir;
  auto base = testing::mock_experiment(testing::make_split_corpus(30, 4), dir.path());
  json values = json::array();
  for (const auto& s : canonical_strategies(2)) values.push_back(strategy_label(s));
  const auto spec = sweep_from_json(base, json{{"axis", "strategy"}, {"values", values}});
  const auto results = run_sweep(spec);
  REQUIRE(results.size() == 5);
  std::set<std::string> seen;
  for (const auto& r : results) {
    CHECK_FALSE(r.error);
    seen.insert(strategy_label(r.config.strategy));
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("sweep keeps going when one run fails") {
  testing::TempDir dir;
  auto base = testing::mock_experiment(testing::make_split_corpus(30, 4), dir.path());
  base.instruction.reset();
  const auto spec = sweep_from_json(base, json{{"axis", "n"}, {"values", {0, 2}}});
  const auto results = run_sweep(spec);
  REQUIRE(results.size() == 2);
  CHECK(results[0].error);
  CHECK_FALSE(results[1].error);
  const auto manifest = json::parse(read_file(base.output_dir / "sweep.json"));
  CHECK_FALSE(manifest["runs"][0]["error"].is_null());
}

TEST_CASE("sweep spec validation") {
  ExperimentConfig base;
  CHECK_THROWS_AS(sweep_from_json(base, json{{"axis", "color"}, {"values", {1}}}), InputError);
  CHECK_THROWS_AS(sweep_from_json(base, json{{"axis", "n"}, {"values", json::array()}}), InputError);
  CHECK_THROWS_AS(sweep_from_json(base, json{{"axis", "n"}, {"values", "huge"}}), InputError);
  CHECK_THROWS_AS(sweep_from_json(base, json{{"axis", "n"}, {"values", {"x"}}}), InputError);
  CHECK_THROWS_AS(sweep_from_json(base, json{{"axis", "n"}, {"values", {1}}, {"extra", 1}}), InputError);
  CHECK(sweep_from_json(base, json{{"axis", "n"}, {"values", "fine"}}).demo_counts == demo_count_preset_fine());
  CHECK(parse_sweep_axis("train_fraction") == SweepAxis::fraction);
}

TEST_CASE("aggregate reports p-values against a baseline") {
  testing::TempDir dir;
  auto base = testing::mock_experiment(testing::make_duplicate_corpus(10, 10), dir.path(), MockMode::demo_copy);
  base.backend.mock_fallback = MockMode::echo;
  const auto spec = sweep_from_json(base, json{{"axis", "n"}, {"values", {0, 1}}});
  const auto results = run_sweep(spec);
  REQUIRE(results.size() == 2);

  AggregateOptions opts;
  opts.baseline = results[0].label;
  auto tables = aggregate(results, opts);
  auto rows = split_lines(tables.table_csv);
  REQUIRE(rows.size() >= 3);
  CHECK(rows[2].find(",sentence_bleu") != std::string::npos);

  for (const auto& r : results) {
    for (int i = 0; i < 6; ++i) {
      opts.human_scores.push_back({"test-" + std::to_string(i), r.label, r.config.strategy.n == 0 ? 1 : 5,
                                   Rubric::offensive_generic});
    }
  }
  tables = aggregate(results, opts);
  rows = split_lines(tables.table_csv);
  CHECK(rows[1].find("1.00±0.00") != std::string::npos);
  CHECK(rows[2].find("5.00±0.00") != std::string::npos);
  CHECK(rows[2].find(",quality") != std::string::npos);

  opts.baseline = "nobody";
  CHECK_THROWS_AS(aggregate(results, opts), InputError);

  const auto loaded = load_run(results[1].run_dir);
  CHECK(loaded.label == results[1].label);
  CHECK(loaded.report.corpus.bleu == doctest::Approx(results[1].report.corpus.bleu));
  CHECK_THROWS_AS(load_run(dir / "missing"), InputError);
}

TEST_CASE("external outputs are checked against the test split") {
  testing::TempDir dir;
  const auto corpus = testing::make_toxicity_corpus();
  std::string csv = "id,hypothesis\n";
  for (int i = 0; i < 10; ++i) csv += "test-" + std::to_string(i) + ",you are kind\n";
  write_file(dir / "ok.csv", csv);
  const auto set = ingest_external_outputs(dir / "ok.csv", "baseline-x", corpus);
  CHECK(set.hypotheses.size() == 10);

  std::string partial = "id,hypothesis\n";
  for (int i = 3; i < 10; ++i) partial += "test-" + std::to_string(i) + ",hello\n";
  write_file(dir / "partial.csv", partial);
  CHECK_THROWS_WITH_AS(ingest_external_outputs(dir / "partial.csv", "x", corpus),
                       doctest::Contains("missing 3 id(s): test-0, test-1, test-2"), InputError);

  write_file(dir / "dup.csv", csv + "test-4,again\n");
  CHECK_THROWS_WITH_AS(ingest_external_outputs(dir / "dup.csv", "x", corpus),
                       doctest::Contains("duplicate id 'test-4'"), InputError);

  write_file(dir / "cols.csv", "id,text\ntest-0,a\n");
  CHECK_THROWS_AS(ingest_external_outputs(dir / "cols.csv", "x", corpus), InputError);

  LexiconToxicityScorer tox(Lexicon::parse(testing::kToxicLexicon));
  HashingTokenEmbedder emb;
  const auto report = score_hypotheses(set, corpus, tox, emb);
  CHECK(report.count == 10);
  CHECK(report.corpus.toxicity_mean == 0.0);
  const auto r = write_scored_system(set, report, dir / "sys");
  const auto loaded = load_run(dir / "sys");
  CHECK(loaded.external);
  CHECK(loaded.label == "baseline-x");
  CHECK(r.external);
}
