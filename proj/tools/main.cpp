// iclpara command-line entry point: ingest, embed, run, sweep, score, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iclpara/config.hpp"
#include "iclpara/csv.hpp"
#include "iclpara/error.hpp"
#include "iclpara/runner.hpp"
#include "iclpara/util.hpp"

namespace fs = std::filesystem;
using namespace iclpara;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitAbort = 3;
constexpr int kExitAuth = 4;

fs::path absolute_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal(); }

struct MappingFlags {
  std::string id, source, target, context_1, context_2, context, split, default_split;

  void add_to(CLI::App* app) {
    app->add_option("--id-column", id, "Column/key holding sample ids");
    app->add_option("--source-column", source, "Column/key holding the offensive sentence");
    app->add_option("--target-column", target, "Column/key holding the gold paraphrase");
    app->add_option("--context-1-column", context_1, "CSV column for the first context turn");
    app->add_option("--context-2-column", context_2, "CSV column for the second context turn");
    app->add_option("--context-key", context, "JSONL key holding the context array");
    app->add_option("--split-column", split, "Column/key holding the split name");
    app->add_option("--default-split", default_split, "Split for rows without one (train, validation, test)");
  }

  void apply(ColumnMapping& m) const {
    if (!id.empty()) m.id = id;
    if (!source.empty()) m.source = source;
    if (!target.empty()) m.target = target;
    if (!context_1.empty()) m.context_1 = context_1;
    if (!context_2.empty()) m.context_2 = context_2;
    if (!context.empty()) m.context = context;
    if (!split.empty()) m.split = split;
    if (!default_split.empty()) m.default_split = parse_split(default_split);
  }
};

// Flags shared by run and sweep; each overrides the config file value.
struct ExperimentFlags {
  std::string config;
  std::string corpus;
  std::string format;
  std::string backend;
  std::string out;
  std::string name;
  std::string instruction;
  std::string strategy;
  std::optional<int> n;
  std::optional<double> fraction;
  std::optional<std::uint64_t> seed;
  std::optional<bool> context;
  std::string lexicon;
  std::string toxicity_lexicon;
  std::string store;
  std::string cache;
  bool dry_run = false;
  MappingFlags mapping;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config, "Experiment config file (.json or .toml)");
    app->add_option("--corpus", corpus, "Corpus file (overrides corpus.path)");
    app->add_option("--format", format, "Corpus format: csv or jsonl");
    app->add_option("--backend", backend,
                    "Backend id; 'mock' or 'mock:<echo|lexicon_clean|demo_copy>' selects the offline mock");
    app->add_option("-o,--out", out, "Output directory");
    app->add_option("--name", name, "System label used in reports");
    app->add_option("--instruction", instruction, "Catalog instruction id, or 'none'");
    app->add_option("--strategy", strategy, "Selection strategy label or kind:order");
    app->add_option("-n,--demos", n, "Number of demonstrations");
    app->add_option("--fraction", fraction, "Fraction of the train split used as the demo pool");
    app->add_option("--seed", seed, "Run seed");
    app->add_flag("--context,!--no-context", context, "Include dialogue context turns");
    app->add_option("--lexicon", lexicon, "Lexicon for the mock lexicon_clean mode");
    app->add_option("--toxicity-lexicon", toxicity_lexicon, "Lexicon for the offline toxicity scorer");
    app->add_option("--store", store, "Precomputed embedding store (from `embed`)");
    app->add_option("--cache", cache, "Generation cache file");
    app->add_flag("--dry-run", dry_run, "Render and hash prompts without generating");
    mapping.add_to(app);
  }

  ExperimentConfig build(std::optional<std::size_t> jobs, nlohmann::json* doc_out = nullptr) const {
    ExperimentConfig cfg;
    nlohmann::json doc = nlohmann::json::object();
    fs::path base = fs::current_path();
    if (!config.empty()) {
      const fs::path p = absolute_path(config);
      doc = load_config_document(p);
      base = p.parent_path();
    }
    cfg = experiment_from_json(doc, base);
    if (doc_out) *doc_out = doc;
    if (cfg.output_dir.is_relative()) cfg.output_dir = (base / cfg.output_dir).lexically_normal();

    if (!corpus.empty()) cfg.corpus.path = absolute_path(corpus);
    if (!format.empty()) cfg.corpus.format = parse_format(format);
    mapping.apply(cfg.corpus.mapping);
    if (!backend.empty()) {
      if (backend == "mock" || starts_with(backend, "mock:")) {
        cfg.backend.kind = BackendKind::mock;
        cfg.backend.backend_id = "mock";
        if (backend.size() > 5) cfg.backend.mock_mode = parse_mock_mode(backend.substr(5));
      } else {
        cfg.backend.backend_id = backend;
      }
    }
    if (!lexicon.empty()) cfg.backend.lexicon_path = absolute_path(lexicon);
    if (!out.empty()) cfg.output_dir = absolute_path(out);
    if (!name.empty()) cfg.name = name;
    if (!instruction.empty()) {
      if (to_lower(instruction) == "none") {
        cfg.instruction.reset();
      } else {
        catalog_lookup(instruction);
        cfg.instruction = instruction;
      }
    }
    if (!strategy.empty()) {
      const int keep = cfg.strategy.n;
      cfg.strategy = parse_strategy(strategy);
      cfg.strategy.n = keep;
    }
    if (n) cfg.strategy.n = *n;
    if (fraction) cfg.train_fraction = *fraction;
    if (seed) cfg.seed = *seed;
    cfg.strategy.seed = cfg.seed;
    if (context) cfg.with_context = *context;
    if (!toxicity_lexicon.empty()) {
      cfg.toxicity.scorer = "lexicon";
      cfg.toxicity.lexicon = absolute_path(toxicity_lexicon);
    }
    if (!store.empty()) cfg.embedding.store = absolute_path(store);
    if (!cache.empty()) cfg.cache = absolute_path(cache);
    if (jobs) cfg.jobs = *jobs;

    validate(cfg.strategy);
    cfg.backend.validate();
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
      throw InputError("train fraction must lie in (0, 1]");
    }
    if (cfg.jobs == 0) throw InputError("--jobs must be at least 1");
    if (cfg.corpus.path.empty()) throw InputError("no corpus given (set corpus.path or pass --corpus)");
    return cfg;
  }
};

std::string summary(const MetricReport& m) {
  return "BLEU=" + format_fixed(m.corpus.bleu, 2) + " BERT-F1=" + format_fixed(m.corpus.bert_f1, 2) +
         " ROUGE=" + format_fixed(m.corpus.rouge, 2) + " CIDEr=" + format_fixed(m.corpus.cider, 3) +
         " Toxicity=" + format_fixed(m.corpus.toxicity_mean, 2);
}

Corpus load_with(const std::string& input, const std::string& format, const MappingFlags& flags) {
  ColumnMapping mapping;
  flags.apply(mapping);
  const fs::path p(input);
  const CorpusFormat fmt = format.empty() ? format_from_path(p) : parse_format(format);
  return load_corpus(p, fmt, mapping);
}

std::vector<HumanScore> load_all_scores(const std::vector<std::string>& files) {
  std::vector<HumanScore> all;
  for (const auto& f : files) {
    auto part = load_human_scores(f);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

std::string human_csv(const std::vector<HumanScore>& scores) {
  std::string out = "sample_id,system_id,score,rubric_id\n";
  for (const auto& h : scores) {
    out += csv::join({h.sample_id, h.system_id, std::to_string(h.score), std::string(to_string(h.rubric))}) + "\n";
  }
  return out;
}

int run_app(int argc, char** argv) {
  CLI::App app{"In-context paraphrasing of offensive content: corpus tools, runs, sweeps and reports", "iclpara"};
  app.set_version_flag("--version", std::string(ICLPARA_VERSION), "Print the version and exit");
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::size_t> jobs;
  app.add_option("-j,--jobs", jobs, "Worker threads / in-flight requests")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus, print split counts, optionally rewrite it");
  std::string ingest_input, ingest_format, ingest_out, ingest_out_format;
  MappingFlags ingest_map;
  ingest->add_option("-i,--input", ingest_input, "Corpus file (CSV or JSONL)")->required();
  ingest->add_option("--format", ingest_format, "Input format: csv or jsonl (default: from extension)");
  ingest->add_option("-o,--out", ingest_out, "Write the validated corpus here");
  ingest->add_option("--out-format", ingest_out_format, "Output format (default: from --out extension)");
  ingest_map.add_to(ingest);

  // embed
  auto* embed = app.add_subcommand("embed", "Embed a corpus into a vector store file");
  std::string embed_input, embed_format, embed_out, embed_provider = "hashing", embed_endpoint, embed_model,
                                                     embed_field = "source";
  std::size_t embed_dim = 256, embed_batch = 32;
  MappingFlags embed_map;
  embed->add_option("-i,--input,--corpus", embed_input, "Corpus file")->required();
  embed->add_option("--format", embed_format, "Input format: csv or jsonl");
  embed->add_option("-o,--out", embed_out, "Store output path (JSONL)")->required();
  embed->add_option("--provider", embed_provider, "hashing or http")->capture_default_str();
  embed->add_option("--dimension", embed_dim, "Hashing provider dimension")->capture_default_str();
  embed->add_option("--endpoint", embed_endpoint, "HTTP embedding endpoint");
  embed->add_option("--model-id", embed_model, "Provider id recorded in the store for http");
  embed->add_option("--field", embed_field, "Text to embed: source or target")->capture_default_str();
  embed->add_option("--batch-size", embed_batch, "Texts per provider request")->capture_default_str();
  embed_map.add_to(embed);

  // run
  auto* run = app.add_subcommand("run", "Run one experiment configuration");
  ExperimentFlags run_flags;
  run_flags.add_to(run);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a sweep axis");
  ExperimentFlags sweep_flags;
  sweep_flags.add_to(sweep);
  std::string sweep_axis, sweep_values, sweep_preset;
  sweep->add_option("--axis", sweep_axis, "demo_count, strategy, instruction, fraction or context");
  sweep->add_option("--values", sweep_values, "Comma-separated axis values");
  sweep->add_option("--preset", sweep_preset, "Demo-count preset: wide (0,1,10,20,30,40) or fine (0,1,2,4,6,8,10)");

  // score
  auto* score = app.add_subcommand("score", "Score external outputs and/or attach human scores to runs");
  std::string score_corpus, score_format, score_hyps, score_system, score_out, score_config, score_tox;
  std::vector<std::string> score_runs, score_human;
  MappingFlags score_map;
  score->add_option("--corpus", score_corpus, "Corpus whose test split the hypotheses cover");
  score->add_option("--format", score_format, "Corpus format: csv or jsonl");
  score->add_option("--hypotheses", score_hyps, "CSV with header id,hypothesis");
  score->add_option("--system", score_system, "System id for the external outputs");
  score->add_option("-o,--out", score_out, "Output directory for the scored system");
  score->add_option("-c,--config", score_config, "Config file supplying toxicity/bertscore settings");
  score->add_option("--toxicity-lexicon", score_tox, "Lexicon for the offline toxicity scorer");
  score->add_option("--run", score_runs, "Run directory to attach human scores to (repeatable)");
  score->add_option("--human", score_human, "Human score CSV: sample_id,system_id,score,rubric_id (repeatable)");
  score_map.add_to(score);

  // report
  auto* report = app.add_subcommand("report", "Aggregate run directories into report.csv and plot data");
  std::vector<std::string> report_runs, report_human;
  std::string report_baseline, report_out;
  report->add_option("--runs", report_runs, "Run directories")->required();
  report->add_option("--baseline", report_baseline, "Baseline system label or run directory");
  report->add_option("-o,--out", report_out, "Output directory")->required();
  report->add_option("--human", report_human, "Human score CSV (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (*ingest) {
    const Corpus corpus = load_with(ingest_input, ingest_format, ingest_map);
    if (!ingest_out.empty()) {
      const fs::path out(ingest_out);
      const CorpusFormat fmt = ingest_out_format.empty() ? format_from_path(out) : parse_format(ingest_out_format);
      write_corpus(corpus, out, fmt);
    }
    const SplitCounts c = split_counts(corpus);
    std::string line = "train=" + std::to_string(c.train);
    if (c.validation) line += " validation=" + std::to_string(c.validation);
    line += " test=" + std::to_string(c.test);
    std::cout << line << "\n";
    return kExitOk;
  }

  if (*embed) {
    const Corpus corpus = load_with(embed_input, embed_format, embed_map);
    std::unique_ptr<EmbeddingProvider> provider;
    if (embed_provider == "http") {
      if (embed_endpoint.empty()) throw InputError("--endpoint is required for the http provider");
      provider = std::make_unique<HttpEmbeddingProvider>(embed_endpoint,
                                                         embed_model.empty() ? "sentence-embedder" : embed_model);
    } else if (embed_provider == "hashing") {
      provider = std::make_unique<HashingEmbeddingProvider>(embed_dim);
    } else {
      throw InputError("--provider must be hashing or http");
    }
    EmbedOptions opts;
    opts.batch_size = embed_batch;
    if (jobs) opts.max_in_flight = *jobs;
    const EmbeddingStore store = embed_corpus(corpus, *provider, parse_embed_field(embed_field), opts);
    save_store(store, embed_out);
    std::cout << "embedded=" << store.size() << " dimension=" << store.dimension()
              << " provider=" << store.provider_id() << "\n";
    return kExitOk;
  }

  if (*run) {
    const ExperimentConfig cfg = run_flags.build(jobs);
    RunOptions opts;
    opts.dry_run = run_flags.dry_run;
    const RunResult r = run_experiment(cfg, opts);
    if (r.dry_run) {
      std::cout << "dry run: " << r.query_count << " prompts hashed -> " << (r.run_dir / "prompts.jsonl").string()
                << "\n";
    } else {
      std::cout << r.label << ": " << summary(r.report) << " failures=" << r.failures << "\n";
      std::cerr << "run dir " << r.run_dir.string() << " (" << format_fixed(r.wall_time_ms / 1000.0, 2) << " s)\n";
    }
    if (r.experimental) std::cerr << "note: context prompts with this model are tagged experimental\n";
    return kExitOk;
  }

  if (*sweep) {
    nlohmann::json doc;
    const ExperimentConfig cfg = sweep_flags.build(jobs, &doc);
    nlohmann::json sweep_doc = doc.contains("sweep") ? doc["sweep"] : nlohmann::json::object();
    if (!sweep_axis.empty()) sweep_doc["axis"] = sweep_axis;
    if (!sweep_preset.empty()) {
      sweep_doc["axis"] = "demo_count";
      sweep_doc["values"] = sweep_preset;
    } else if (!sweep_values.empty()) {
      const SweepAxis axis = parse_sweep_axis(sweep_doc.value("axis", std::string("demo_count")));
      nlohmann::json values = nlohmann::json::array();
      std::stringstream ss(sweep_values);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
          switch (axis) {
            case SweepAxis::demo_count: values.push_back(std::stoi(item)); break;
            case SweepAxis::fraction: values.push_back(std::stod(item)); break;
            case SweepAxis::context: values.push_back(to_lower(item) == "true" || item == "1" || item == "on"); break;
            default: values.push_back(item); break;
          }
        } catch (const std::logic_error&) {
          throw InputError("--values: cannot parse '" + item + "'");
        }
      }
      sweep_doc["values"] = values;
    }
    const SweepSpec spec = sweep_from_json(cfg, sweep_doc);
    RunOptions opts;
    opts.dry_run = sweep_flags.dry_run;
    const auto results = run_sweep(spec, opts);
    bool any_failed = false;
    for (const auto& r : results) {
      if (r.error) {
        any_failed = true;
        std::cout << r.axis << "=" << r.axis_value << ": FAILED: " << *r.error << "\n";
      } else if (r.dry_run) {
        std::cout << r.axis << "=" << r.axis_value << ": " << r.query_count << " prompts hashed\n";
      } else {
        std::cout << r.axis << "=" << r.axis_value << ": " << summary(r.report) << "\n";
      }
    }
    return any_failed ? kExitAbort : kExitOk;
  }

  if (*score) {
    if (score_hyps.empty() && score_runs.empty()) {
      throw InputError("score needs --hypotheses (external outputs) or --run (to attach human scores)");
    }
    const std::vector<HumanScore> human = load_all_scores(score_human);
    auto attach = [&](const fs::path& dir, const std::string& label) {
      std::vector<HumanScore> mine;
      for (const auto& h : human) {
        if (h.system_id == label) mine.push_back(h);
      }
      if (mine.empty()) {
        std::cerr << "no human scores for system '" << label << "'\n";
        return;
      }
      write_file(dir / "human_scores.csv", human_csv(mine));
      std::vector<double> v;
      for (const auto& h : mine) v.push_back(h.score);
      const QualityStats q = quality_stats(v);
      std::cout << label << ": quality=" << format_fixed(q.mean, 2) << "±" << format_fixed(q.stddev, 2)
                << " (n=" << q.count << ")\n";
    };
    if (!score_hyps.empty()) {
      if (score_corpus.empty() || score_system.empty() || score_out.empty()) {
        throw InputError("--hypotheses requires --corpus, --system and --out");
      }
      ExperimentConfig cfg;
      if (!score_config.empty()) {
        const fs::path p = absolute_path(score_config);
        cfg = experiment_from_json(load_config_document(p), p.parent_path());
      }
      if (!score_tox.empty()) {
        cfg.toxicity.scorer = "lexicon";
        cfg.toxicity.lexicon = absolute_path(score_tox);
      }
      const Corpus corpus = load_with(score_corpus, score_format, score_map);
      const HypothesisSet hyps = ingest_external_outputs(score_hyps, score_system, corpus);
      auto tox = make_toxicity_scorer(cfg.toxicity);
      std::unique_ptr<EmbeddingProvider> token_provider;
      std::unique_ptr<TokenEmbedder> embedder;
      if (cfg.bertscore.embedder == "http") {
        token_provider = std::make_unique<HttpEmbeddingProvider>(cfg.bertscore.endpoint, "token-embedder");
        embedder = std::make_unique<ProviderTokenEmbedder>(*token_provider);
      } else {
        embedder = std::make_unique<HashingTokenEmbedder>(cfg.bertscore.dimension);
      }
      const MetricReport rep = score_hypotheses(hyps, corpus, *tox, *embedder);
      const RunResult r = write_scored_system(hyps, rep, score_out);
      std::cout << r.label << ": " << summary(rep) << "\n";
      if (!human.empty()) attach(r.run_dir, r.label);
    }
    for (const auto& d : score_runs) {
      const RunResult r = load_run(d);
      if (human.empty()) throw InputError("--run requires at least one --human score file");
      attach(r.run_dir, r.label);
    }
    return kExitOk;
  }

  if (*report) {
    if (report_runs.empty()) throw InputError("no run directories given");
    std::vector<RunResult> results;
    std::vector<HumanScore> human = load_all_scores(report_human);
    for (const auto& d : report_runs) {
      results.push_back(load_run(d));
      const fs::path hs = fs::path(d) / "human_scores.csv";
      if (fs::exists(hs)) {
        auto part = load_human_scores(hs);
        human.insert(human.end(), part.begin(), part.end());
      }
    }
    AggregateOptions opts;
    opts.human_scores = std::move(human);
    if (!report_baseline.empty()) {
      std::string label = report_baseline;
      for (std::size_t i = 0; i < report_runs.size(); ++i) {
        if (fs::exists(report_baseline) && fs::equivalent(report_runs[i], report_baseline)) {
          label = results[i].label;
        }
      }
      opts.baseline = label;
    }
    const ReportTables tables = aggregate(results, opts);
    write_report(tables, report_out);
    std::cout << "report: " << results.size() << " systems -> " << (fs::path(report_out) / "report.csv").string()
              << "\n";
    return kExitOk;
  }
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << "\n";
    return kExitAuth;
  } catch (const RunAborted& e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return kExitAbort;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
