#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iclpara/config.hpp"
#include "iclpara/metrics.hpp"

namespace iclpara {

// Loaded corpus, embeddings, backend client, cache and scorers. A sweep
// prepares these once and shares them across its runs.
struct RunResources {
  Corpus corpus;
  std::optional<EmbeddingStore> store;
  std::unique_ptr<GenerationClient> client;  // absent for dry runs
  std::shared_ptr<GenerationCache> cache;
  std::unique_ptr<ToxicityScorer> toxicity;
  std::unique_ptr<EmbeddingProvider> token_provider;
  std::unique_ptr<TokenEmbedder> token_embedder;

  // Throws AuthError before any request when a remote backend lacks credentials.
  static RunResources prepare(const ExperimentConfig& config, bool dry_run = false);
};

struct RunOptions {
  bool dry_run = false;
};

struct RunResult {
  std::string label;
  std::string config_digest;
  ExperimentConfig config;
  std::filesystem::path run_dir;
  std::filesystem::path generations_path;
  MetricReport report;
  double wall_time_ms = 0.0;
  std::size_t pool_size = 0;
  std::size_t query_count = 0;
  std::size_t failures = 0;
  bool dry_run = false;
  bool experimental = false;
  bool external = false;  // scored from ingested outputs rather than generated
  std::string axis;        // sweep axis name, empty for single runs
  std::string axis_value;  // display form of the axis value
  std::optional<std::string> error;  // set when a sweep run failed in isolation
};

// For every test query: subsample the pool, select and order demos, render,
// generate, parse; then score all hypotheses and persist the run directory
// (config.json, generations.jsonl, metrics.json, report.csv, failures.json).
// Throws InputError for invalid configs before any generation and RunAborted
// when more than `failure_threshold` of the generations fail.
RunResult run_experiment(const ExperimentConfig& config, RunResources& resources,
                         const RunOptions& options = {});
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

enum class SweepAxis { demo_count, strategy, instruction, fraction, context };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepSpec {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::demo_count;
  std::vector<int> demo_counts;
  std::vector<SelectionStrategy> strategies;
  std::vector<std::optional<std::string>> instructions;
  std::vector<double> fractions;
  std::vector<bool> contexts;

  std::size_t size() const;
};

std::vector<int> demo_count_preset_wide();  // 0, 1, 10, 20, 30, 40
std::vector<int> demo_count_preset_fine();  // 0, 1, 2, 4, 6, 8, 10

// Builds a spec from {"axis": ..., "values": [...]} (values may also be
// "wide"/"fine" for demo counts).
SweepSpec sweep_from_json(const ExperimentConfig& base, const nlohmann::json& sweep);

// One result per axis value, in the given order, sharing one generation cache
// (<base.output_dir>/generation_cache.jsonl unless base.cache is set). A failing
// run is recorded with `error` and the others proceed. Aggregate tables are
// written to base.output_dir.
std::vector<RunResult> run_sweep(const SweepSpec& spec, const RunOptions& options = {});

struct AggregateOptions {
  std::vector<HumanScore> human_scores;
  std::optional<std::string> baseline;  // label of the system p-values compare against
};

struct ReportTables {
  std::string table_csv;                     // system, BLEU, BERT-F1, ROUGE, CIDEr, Toxicity, Quality, p_value
  std::map<std::string, std::string> plots;  // file name -> CSV
};

ReportTables aggregate(const std::vector<RunResult>& results, const AggregateOptions& options = {});
void write_report(const ReportTables& tables, const std::filesystem::path& out_dir);

// Rebuilds a RunResult from a run directory written by run_experiment or
// write_scored_system.
RunResult load_run(const std::filesystem::path& run_dir);

struct HypothesisSet {
  std::string system_id;
  std::map<std::string, std::string> hypotheses;  // test id -> text
};

// CSV with header id,hypothesis covering exactly the test split.
HypothesisSet ingest_external_outputs(const std::filesystem::path& path, const std::string& system_id,
                                      const Corpus& corpus);
MetricReport score_hypotheses(const HypothesisSet& hypotheses, const Corpus& corpus,
                              ToxicityScorer& toxicity, TokenEmbedder& token_embedder);
// Writes a run-like directory (config.json, metrics.json, report.csv) so the
// external system can be reported next to ICL runs.
RunResult write_scored_system(const HypothesisSet& hypotheses, const MetricReport& report,
                              const std::filesystem::path& out_dir);

std::unique_ptr<ToxicityScorer> make_toxicity_scorer(const ToxicityConfig& config);

}  // namespace iclpara
