#include "iclpara/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "iclpara/csv.hpp"
#include "iclpara/error.hpp"
#include "iclpara/util.hpp"

namespace iclpara {

using nlohmann::json;
using nlohmann::ordered_json;

namespace fs = std::filesystem;

namespace {

struct QueryOutcome {
  DemoSet demos;
  RenderedPrompt prompt;
  std::optional<GenerationRecord> record;
  std::string error;
};

bool is_experimental(const ExperimentConfig& c) {
  if (!c.with_context) return false;
  auto mentions = [](std::string_view s) { return to_lower(s).find("vicuna") != std::string::npos; };
  return mentions(c.backend.backend_id) || (c.instruction && mentions(*c.instruction));
}

ordered_json demos_json(const DemoSet& set) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : set.demos) {
    ordered_json e;
    e["id"] = d.sample.id;
    e["score"] = d.score ? ordered_json(*d.score) : ordered_json(nullptr);
    arr.push_back(e);
  }
  return arr;
}

std::string jsonl(const std::vector<ordered_json>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l.dump();
    out += '\n';
  }
  return out;
}

ordered_json run_section(const RunResult& r, std::size_t scored, std::size_t unlabeled) {
  ordered_json j;
  j["label"] = r.label;
  j["config_digest"] = r.config_digest;
  j["external"] = r.external;
  j["demo_count"] = r.config.strategy.n;
  j["strategy"] = strategy_label(r.config.strategy);
  j["instruction"] = r.config.instruction ? ordered_json(*r.config.instruction) : ordered_json(nullptr);
  j["with_context"] = r.config.with_context;
  j["train_fraction"] = r.config.train_fraction;
  j["pool_size"] = r.pool_size;
  j["query_count"] = r.query_count;
  j["scored_count"] = scored;
  j["unlabeled_count"] = unlabeled;
  j["failures"] = r.failures;
  j["experimental"] = r.experimental;
  return j;
}

void write_metrics(const RunResult& r, std::size_t scored, std::size_t unlabeled) {
  ordered_json j;
  j["run"] = run_section(r, scored, unlabeled);
  j["metrics"] = to_json(r.report, true);
  write_file(r.run_dir / "metrics.json", j.dump(2) + "\n");
  write_report(aggregate({r}), r.run_dir);
}

MetricReport report_from_json(const json& j) {
  MetricReport m;
  m.count = j.at("count").get<std::size_t>();
  const auto& c = j.at("corpus");
  m.corpus.bleu = c.at("bleu").get<double>();
  m.corpus.bert_f1 = c.at("bert_f1").get<double>();
  m.corpus.rouge = c.at("rouge").get<double>();
  m.corpus.cider = c.at("cider").get<double>();
  m.corpus.toxicity_mean = c.at("toxicity_mean").get<double>();
  if (j.contains("source_toxicity_mean")) m.source_toxicity_mean = j["source_toxicity_mean"].get<double>();
  if (j.contains("reference_toxicity_mean")) {
    m.reference_toxicity_mean = j["reference_toxicity_mean"].get<double>();
  }
  m.bleu_detail.score = m.corpus.bleu;
  if (j.contains("bleu_debug")) {
    const auto& d = j["bleu_debug"];
    m.bleu_detail.precisions = d.at("precisions").get<std::array<double, kBleuOrder>>();
    m.bleu_detail.stats.matches = d.at("matches").get<std::array<std::size_t, kBleuOrder>>();
    m.bleu_detail.stats.totals = d.at("totals").get<std::array<std::size_t, kBleuOrder>>();
    m.bleu_detail.stats.hyp_length = d.at("hyp_length").get<std::size_t>();
    m.bleu_detail.stats.ref_length = d.at("ref_length").get<std::size_t>();
    m.bleu_detail.brevity_penalty = d.at("brevity_penalty").get<double>();
  }
  for (const auto& [id, s] : j.at("per_sample").items()) {
    SampleScores ss;
    ss.bleu_smoothed = s.at("bleu_smoothed").get<double>();
    ss.rouge_l_f1 = s.at("rouge_l_f1").get<double>();
    ss.cider = s.at("cider").get<double>();
    ss.bert_f1 = s.at("bert_f1").get<double>();
    ss.toxicity = s.at("toxicity").get<double>();
    m.per_sample.emplace(id, ss);
  }
  return m;
}

std::string fixed2(double v) { return format_fixed(v, 2); }
std::string fixed4(double v) { return format_fixed(v, 4); }

std::vector<std::string> metric_cells(const MetricReport& m) {
  return {fixed4(m.corpus.bleu), fixed4(m.corpus.bert_f1), fixed4(m.corpus.rouge), fixed4(m.corpus.cider),
          fixed4(m.corpus.toxicity_mean)};
}

std::string csv_line(const std::vector<std::string>& fields) { return csv::join(fields) + "\n"; }

std::vector<double> per_sample_bleu(const MetricReport& m) {
  std::vector<double> out;
  out.reserve(m.per_sample.size());
  for (const auto& [id, s] : m.per_sample) out.push_back(s.bleu_smoothed);
  return out;
}

std::string slug(std::string_view s) {
  std::string out;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '.' || ch == '-' || ch == '_') {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}

}  // namespace

std::unique_ptr<ToxicityScorer> make_toxicity_scorer(const ToxicityConfig& config) {
  if (config.scorer == "http") return std::make_unique<HttpToxicityScorer>(config.endpoint);
  if (config.scorer != "lexicon") throw InputError("unknown toxicity scorer '" + config.scorer + "'");
  Lexicon lex = config.lexicon.empty() ? Lexicon{} : Lexicon::load(config.lexicon);
  return std::make_unique<LexiconToxicityScorer>(std::move(lex));
}

RunResources RunResources::prepare(const ExperimentConfig& config, bool dry_run) {
  if (config.corpus.path.empty()) throw InputError("config has no corpus path");
  RunResources r;
  if (!dry_run) r.client = std::make_unique<GenerationClient>(config.backend);
  const CorpusFormat fmt = config.corpus.format ? *config.corpus.format : format_from_path(config.corpus.path);
  r.corpus = load_corpus(config.corpus.path, fmt, config.corpus.mapping);

  if (!config.embedding.store.empty()) {
    r.store = load_store(config.embedding.store);
  } else {
    std::unique_ptr<EmbeddingProvider> provider;
    if (config.embedding.provider == "http") {
      provider = std::make_unique<HttpEmbeddingProvider>(config.embedding.endpoint, config.embedding.model_id);
    } else {
      provider = std::make_unique<HashingEmbeddingProvider>(config.embedding.dimension);
    }
    r.store = embed_corpus(r.corpus, *provider, config.embedding.field,
                           {config.embedding.batch_size, config.embedding.max_in_flight});
  }

  if (!dry_run) r.cache = std::make_shared<GenerationCache>(effective_cache_path(config));
  r.toxicity = make_toxicity_scorer(config.toxicity);
  if (config.bertscore.embedder == "http") {
    r.token_provider = std::make_unique<HttpEmbeddingProvider>(config.bertscore.endpoint, "token-embedder");
    r.token_embedder = std::make_unique<ProviderTokenEmbedder>(*r.token_provider);
  } else {
    r.token_embedder = std::make_unique<HashingTokenEmbedder>(config.bertscore.dimension);
  }
  return r;
}

RunResult run_experiment(const ExperimentConfig& config, RunResources& res, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(config.strategy);
  if (config.strategy.n == 0 && !config.instruction) {
    throw InputError("n=0 without an instruction leaves the prompt with nothing but the query");
  }
  if (!(config.train_fraction > 0.0 && config.train_fraction <= 1.0)) {
    throw InputError("train_fraction must lie in (0, 1]");
  }
  std::optional<Instruction> instruction;
  if (config.instruction) instruction = catalog_lookup(*config.instruction);
  if (!options.dry_run && (!res.client || !res.cache)) {
    throw Error("resources were prepared for a dry run");
  }
  if (!res.store) throw Error("resources have no embedding store");

  RunResult result;
  result.config = config;
  result.label = run_label(config);
  result.config_digest = config_digest(config);
  result.run_dir = config.output_dir;
  result.dry_run = options.dry_run;
  result.experimental = is_experimental(config);

  const Corpus sub = subsample_train(res.corpus, {config.train_fraction, config.seed});
  const std::vector<SamplePair> pool = sub.split(Split::train);
  const std::vector<SamplePair> queries = sub.split(Split::test);
  if (queries.empty()) throw InputError("corpus has no test samples to paraphrase");
  result.pool_size = pool.size();
  result.query_count = queries.size();

  const TemplateKind tk =
      config.backend.api_style == ApiStyle::chat ? TemplateKind::chat : TemplateKind::completion;

  std::vector<QueryOutcome> outcomes(queries.size());
  std::vector<std::exception_ptr> fatal(queries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      const SamplePair& q = queries[i];
      QueryOutcome& out = outcomes[i];
      try {
        SelectionStrategy st = config.strategy;
        st.seed = query_seed(config.seed, q.id);
        out.demos = select_demos(q, pool, *res.store, st);
        PromptSpec spec{instruction, out.demos, q, config.with_context, tk};
        out.prompt = render(spec);
      } catch (...) {
        fatal[i] = std::current_exception();
        stop = true;
        return;
      }
      if (options.dry_run) continue;
      try {
        out.record = res.client->generate(out.prompt, q.id, *res.cache);
      } catch (const AuthError&) {
        fatal[i] = std::current_exception();
        stop = true;
        return;
      } catch (const GenerationFailure& e) {
        out.error = e.what();
      } catch (const BackendError& e) {
        out.error = e.what();
      } catch (...) {
        fatal[i] = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.jobs, queries.size()));
  std::vector<std::thread> pool_threads;
  for (std::size_t t = 1; t < threads; ++t) pool_threads.emplace_back(worker);
  worker();
  for (auto& t : pool_threads) t.join();
  for (const auto& e : fatal) {
    if (e) std::rethrow_exception(e);
  }

  fs::create_directories(result.run_dir);
  write_file(result.run_dir / "config.json", to_json(config).dump(2) + "\n");

  if (options.dry_run) {
    std::vector<ordered_json> lines;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      ordered_json l;
      l["query_id"] = queries[i].id;
      l["prompt_hash"] = outcomes[i].prompt.hash;
      l["template"] = to_string(outcomes[i].prompt.template_kind);
      l["demo_count"] = outcomes[i].prompt.demo_count;
      l["token_estimate"] = outcomes[i].prompt.token_estimate;
      l["demos"] = demos_json(outcomes[i].demos);
      lines.push_back(l);
    }
    write_file(result.run_dir / "prompts.jsonl", jsonl(lines));
    fs::remove(result.run_dir / "generations.jsonl");
    result.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

  std::vector<ordered_json> gen_lines;
  ordered_json failures = ordered_json::array();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.record) {
      ordered_json l = to_json(*o.record);
      l["strategy"] = strategy_label(o.demos.strategy);
      l["demos"] = demos_json(o.demos);
      gen_lines.push_back(l);
    } else {
      ordered_json f;
      f["query_id"] = queries[i].id;
      f["prompt_hash"] = o.prompt.hash;
      f["error"] = o.error;
      failures.push_back(f);
    }
  }
  result.failures = failures.size();
  result.generations_path = result.run_dir / "generations.jsonl";
  write_file(result.generations_path, jsonl(gen_lines));
  write_file(result.run_dir / "failures.json", failures.dump(2) + "\n");

  const double allowed = config.failure_threshold * static_cast<double>(queries.size());
  if (static_cast<double>(result.failures) > allowed) {
    fs::remove(result.run_dir / "metrics.json");
    throw RunAborted(std::to_string(result.failures) + " of " + std::to_string(queries.size()) +
                     " generations failed (threshold " + format_general(config.failure_threshold * 100, 6) +
                     "%); partial results kept in " + result.run_dir.string());
  }

  std::vector<EvaluationItem> items;
  std::size_t unlabeled = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!outcomes[i].record) continue;
    if (!queries[i].target) {
      ++unlabeled;
      continue;
    }
    items.push_back({queries[i].id, outcomes[i].record->parsed_paraphrase, *queries[i].target, queries[i].source});
  }
  if (items.empty()) throw InputError("no labeled test samples were generated; nothing to score");
  result.report = evaluate(items, *res.toxicity, *res.token_embedder);
  write_metrics(result, items.size(), unlabeled);

  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  RunResources res = RunResources::prepare(config, options.dry_run);
  return run_experiment(config, res, options);
}

// ---- Sweeps ---------------------------------------------------------------

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::demo_count: return "demo_count";
    case SweepAxis::strategy: return "strategy";
    case SweepAxis::instruction: return "instruction";
    case SweepAxis::fraction: return "fraction";
    case SweepAxis::context: return "context";
  }
  return "demo_count";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "demo_count" || t == "n" || t == "demos") return SweepAxis::demo_count;
  if (t == "strategy") return SweepAxis::strategy;
  if (t == "instruction") return SweepAxis::instruction;
  if (t == "fraction" || t == "train_fraction") return SweepAxis::fraction;
  if (t == "context" || t == "with_context") return SweepAxis::context;
  throw InputError("unknown sweep axis '" + std::string(text) +
                   "' (expected demo_count, strategy, instruction, fraction or context)");
}

std::size_t SweepSpec::size() const {
  switch (axis) {
    case SweepAxis::demo_count: return demo_counts.size();
    case SweepAxis::strategy: return strategies.size();
    case SweepAxis::instruction: return instructions.size();
    case SweepAxis::fraction: return fractions.size();
    case SweepAxis::context: return contexts.size();
  }
  return 0;
}

std::vector<int> demo_count_preset_wide() { return {0, 1, 10, 20, 30, 40}; }
std::vector<int> demo_count_preset_fine() { return {0, 1, 2, 4, 6, 8, 10}; }

SweepSpec sweep_from_json(const ExperimentConfig& base, const json& sweep) {
  if (!sweep.is_object()) throw InputError("sweep: expected an object with axis and values");
  for (const auto& [k, v] : sweep.items()) {
    if (k != "axis" && k != "values") throw InputError("sweep: unknown key '" + k + "'");
  }
  SweepSpec spec;
  spec.base = base;
  if (!sweep.contains("axis") || !sweep["axis"].is_string()) throw InputError("sweep.axis is required");
  spec.axis = parse_sweep_axis(sweep["axis"].get<std::string>());
  if (!sweep.contains("values")) throw InputError("sweep.values is required");
  const json& values = sweep["values"];
  try {
    switch (spec.axis) {
      case SweepAxis::demo_count:
        if (values.is_string()) {
          const std::string p = to_lower(values.get<std::string>());
          if (p == "wide") {
            spec.demo_counts = demo_count_preset_wide();
          } else if (p == "fine") {
            spec.demo_counts = demo_count_preset_fine();
          } else {
            throw InputError("sweep.values: unknown preset '" + p + "' (expected wide or fine)");
          }
        } else {
          spec.demo_counts = values.get<std::vector<int>>();
        }
        break;
      case SweepAxis::strategy:
        for (const auto& v : values) {
          SelectionStrategy st = parse_strategy(v.get<std::string>());
          st.n = base.strategy.n;
          st.seed = base.seed;
          spec.strategies.push_back(st);
        }
        break;
      case SweepAxis::instruction:
        for (const auto& v : values) {
          if (v.is_null()) {
            spec.instructions.emplace_back();
            continue;
          }
          std::string key = v.get<std::string>();
          if (key.empty() || to_lower(key) == "none") {
            spec.instructions.emplace_back();
          } else {
            catalog_lookup(key);
            spec.instructions.emplace_back(key);
          }
        }
        break;
      case SweepAxis::fraction: spec.fractions = values.get<std::vector<double>>(); break;
      case SweepAxis::context: spec.contexts = values.get<std::vector<bool>>(); break;
    }
  } catch (const json::exception&) {
    throw InputError("sweep.values: wrong value type for axis " + std::string(to_string(spec.axis)));
  }
  if (spec.size() == 0) throw InputError("sweep.values is empty");
  return spec;
}

std::vector<RunResult> run_sweep(const SweepSpec& spec, const RunOptions& options) {
  const std::size_t count = spec.size();
  if (count == 0) throw InputError("sweep has no axis values");
  for (int n : spec.demo_counts) {
    if (spec.axis == SweepAxis::demo_count && n < 0) throw InputError("demo counts must be non-negative");
  }
  for (double f : spec.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw InputError("sweep fractions must lie in (0, 1]");
  }

  ExperimentConfig base = spec.base;
  if (base.cache.empty()) base.cache = base.output_dir / "generation_cache.jsonl";
  RunResources res = RunResources::prepare(base, options.dry_run);

  std::vector<RunResult> results;
  for (std::size_t i = 0; i < count; ++i) {
    ExperimentConfig cfg = base;
    std::string value;
    std::string dir;
    switch (spec.axis) {
      case SweepAxis::demo_count:
        cfg.strategy.n = spec.demo_counts[i];
        value = std::to_string(cfg.strategy.n);
        dir = "n" + value;
        break;
      case SweepAxis::strategy:
        cfg.strategy = spec.strategies[i];
        value = strategy_label(cfg.strategy);
        dir = std::string(to_string(cfg.strategy.kind)) + "-" + std::string(to_string(cfg.strategy.order));
        break;
      case SweepAxis::instruction:
        cfg.instruction = spec.instructions[i];
        value = cfg.instruction ? *cfg.instruction : "none";
        dir = value;
        break;
      case SweepAxis::fraction:
        cfg.train_fraction = spec.fractions[i];
        value = format_general(cfg.train_fraction, 6);
        dir = "f" + value;
        break;
      case SweepAxis::context:
        cfg.with_context = spec.contexts[i];
        value = cfg.with_context ? "true" : "false";
        dir = cfg.with_context ? "context" : "no-context";
        break;
    }
    char prefix[24];
    std::snprintf(prefix, sizeof prefix, "%02zu-", i);
    cfg.output_dir = base.output_dir / "runs" / (prefix + slug(dir));
    if (!base.name.empty()) cfg.name = base.name + " [" + std::string(to_string(spec.axis)) + "=" + value + "]";

    RunResult r;
    try {
      r = run_experiment(cfg, res, options);
    } catch (const Error& e) {
      r = RunResult{};
      r.config = cfg;
      r.label = run_label(cfg);
      r.config_digest = config_digest(cfg);
      r.run_dir = cfg.output_dir;
      r.error = e.what();
    }
    r.axis = std::string(to_string(spec.axis));
    r.axis_value = value;
    results.push_back(std::move(r));
  }

  if (!options.dry_run) {
    std::vector<RunResult> ok;
    for (const auto& r : results) {
      if (!r.error) ok.push_back(r);
    }
    if (!ok.empty()) write_report(aggregate(ok), base.output_dir);
  }

  ordered_json manifest;
  manifest["axis"] = to_string(spec.axis);
  ordered_json runs = ordered_json::array();
  for (const auto& r : results) {
    ordered_json e;
    e["value"] = r.axis_value;
    e["label"] = r.label;
    e["config_digest"] = r.config_digest;
    e["run_dir"] = fs::relative(r.run_dir, base.output_dir).generic_string();
    e["error"] = r.error ? ordered_json(*r.error) : ordered_json(nullptr);
    runs.push_back(e);
  }
  manifest["runs"] = runs;
  write_file(base.output_dir / "sweep.json", manifest.dump(2) + "\n");
  return results;
}

// ---- Aggregation ----------------------------------------------------------

ReportTables aggregate(const std::vector<RunResult>& results, const AggregateOptions& options) {
  ReportTables out;
  std::map<std::string, std::vector<double>> quality;
  for (const auto& h : options.human_scores) quality[h.system_id].push_back(static_cast<double>(h.score));

  const RunResult* baseline = nullptr;
  if (options.baseline) {
    for (const auto& r : results) {
      if (r.label == *options.baseline) baseline = &r;
    }
    if (!baseline) throw InputError("baseline '" + *options.baseline + "' is not among the reported systems");
  }
  auto quality_of = [&](const RunResult& r) -> const std::vector<double>* {
    auto it = quality.find(r.label);
    return it == quality.end() ? nullptr : &it->second;
  };

  std::string table = csv_line({"system", "BLEU", "BERT-F1", "ROUGE", "CIDEr", "Toxicity", "Quality",
                                "p_value", "p_basis"});
  for (const auto& r : results) {
    std::vector<std::string> row{r.label};
    for (const auto& c : metric_cells(r.report)) row.push_back(c);
    const auto* q = quality_of(r);
    if (q && !q->empty()) {
      const QualityStats s = quality_stats(*q);
      row.push_back(fixed2(s.mean) + "±" + fixed2(s.stddev));
    } else {
      row.emplace_back();
    }
    if (baseline && &r != baseline) {
      const auto* bq = quality_of(*baseline);
      if (q && bq && !q->empty() && !bq->empty()) {
        row.push_back(format_general(mann_whitney(*q, *bq).p_value, 4));
        row.emplace_back("quality");
      } else {
        const auto a = per_sample_bleu(r.report);
        const auto b = per_sample_bleu(baseline->report);
        if (!a.empty() && !b.empty()) {
          row.push_back(format_general(mann_whitney(a, b).p_value, 4));
          row.emplace_back("sentence_bleu");
        } else {
          row.emplace_back();
          row.emplace_back();
        }
      }
    } else {
      row.emplace_back();
      row.emplace_back();
    }
    table += csv_line(row);
  }
  out.table_csv = std::move(table);

  std::vector<const RunResult*> internal;
  for (const auto& r : results) {
    if (!r.external) internal.push_back(&r);
  }
  const std::vector<std::string> metric_header{"BLEU", "BERT-F1", "ROUGE", "CIDEr", "Toxicity"};

  std::set<int> ns;
  for (const auto* r : internal) ns.insert(r->config.strategy.n);
  if (ns.size() >= 2) {
    auto sorted = internal;
    std::stable_sort(sorted.begin(), sorted.end(), [](const RunResult* a, const RunResult* b) {
      return a->config.strategy.n < b->config.strategy.n;
    });
    std::vector<std::string> header{"n", "system"};
    header.insert(header.end(), metric_header.begin(), metric_header.end());
    std::string csv = csv_line(header);
    for (const auto* r : sorted) {
      std::vector<std::string> row{std::to_string(r->config.strategy.n), r->label};
      for (const auto& c : metric_cells(r->report)) row.push_back(c);
      csv += csv_line(row);
    }
    out.plots["metric_vs_demo_count.csv"] = std::move(csv);
  }

  std::set<double> fractions;
  for (const auto* r : internal) fractions.insert(r->config.train_fraction);
  if (fractions.size() >= 2) {
    auto sorted = internal;
    std::stable_sort(sorted.begin(), sorted.end(), [](const RunResult* a, const RunResult* b) {
      return a->config.train_fraction < b->config.train_fraction;
    });
    std::vector<std::string> header{"fraction", "pool_size", "system"};
    header.insert(header.end(), metric_header.begin(), metric_header.end());
    std::string csv = csv_line(header);
    for (const auto* r : sorted) {
      std::vector<std::string> row{format_general(r->config.train_fraction, 6), std::to_string(r->pool_size),
                                   r->label};
      for (const auto& c : metric_cells(r->report)) row.push_back(c);
      csv += csv_line(row);
    }
    out.plots["metric_vs_fraction.csv"] = std::move(csv);
  }

  std::string tox = csv_line({"system", "Toxicity", "source_toxicity", "reference_toxicity"});
  for (const auto& r : results) {
    tox += csv_line({r.label, fixed4(r.report.corpus.toxicity_mean),
                     r.report.source_toxicity_mean ? fixed4(*r.report.source_toxicity_mean) : "",
                     r.report.reference_toxicity_mean ? fixed4(*r.report.reference_toxicity_mean) : ""});
  }
  out.plots["toxicity_vs_configuration.csv"] = std::move(tox);
  return out;
}

void write_report(const ReportTables& tables, const fs::path& out_dir) {
  write_file(out_dir / "report.csv", tables.table_csv);
  for (const auto& [name, csv] : tables.plots) write_file(out_dir / "plotdata" / name, csv);
}

RunResult load_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw InputError("run directory not found: " + run_dir.string());
  const fs::path metrics_path = run_dir / "metrics.json";
  if (!fs::exists(metrics_path)) {
    throw InputError(run_dir.string() + ": no metrics.json (dry run or aborted run?)");
  }
  RunResult r;
  r.run_dir = run_dir;
  try {
    const json j = json::parse(read_file(metrics_path));
    const json& run = j.at("run");
    r.label = run.at("label").get<std::string>();
    r.config_digest = run.at("config_digest").get<std::string>();
    r.external = run.value("external", false);
    r.config.strategy.n = run.at("demo_count").get<int>();
    r.config.train_fraction = run.at("train_fraction").get<double>();
    r.config.with_context = run.value("with_context", false);
    if (run.contains("instruction") && run["instruction"].is_string()) {
      r.config.instruction = run["instruction"].get<std::string>();
    }
    r.pool_size = run.at("pool_size").get<std::size_t>();
    r.query_count = run.at("query_count").get<std::size_t>();
    r.failures = run.at("failures").get<std::size_t>();
    r.experimental = run.value("experimental", false);
    r.report = report_from_json(j.at("metrics"));
  } catch (const json::exception& e) {
    throw InputError(metrics_path.string() + ": malformed metrics file: " + e.what());
  }
  if (fs::exists(run_dir / "generations.jsonl")) r.generations_path = run_dir / "generations.jsonl";
  return r;
}

// ---- External systems -----------------------------------------------------

HypothesisSet ingest_external_outputs(const fs::path& path, const std::string& system_id,
                                      const Corpus& corpus) {
  if (system_id.empty()) throw InputError("external system id must not be empty");
  std::istringstream in(read_file(path));
  std::vector<csv::Row> rows;
  try {
    rows = csv::read(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (rows.empty()) throw InputError(path.string() + ": empty file (expected header id,hypothesis)");
  const auto& header = rows.front().fields;
  auto col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw InputError(path.string() + ": missing column '" + std::string(name) + "' (expected header id,hypothesis)");
  };
  const std::size_t id_col = col("id");
  const std::size_t hyp_col = col("hypothesis");

  HypothesisSet set;
  set.system_id = system_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != header.size()) {
      throw InputError(path.string() + ": line " + std::to_string(row.line) + " has " +
                       std::to_string(row.fields.size()) + " fields, header has " + std::to_string(header.size()));
    }
    std::string id = trim(row.fields[id_col]);
    if (!set.hypotheses.emplace(id, row.fields[hyp_col]).second) {
      throw InputError(path.string() + ": duplicate id '" + id + "' (line " + std::to_string(row.line) + ")");
    }
  }

  std::vector<std::string> missing;
  std::set<std::string> test_ids;
  for (const auto& s : corpus.samples) {
    if (s.split != Split::test) continue;
    test_ids.insert(s.id);
    if (!set.hypotheses.contains(s.id)) missing.push_back(s.id);
  }
  std::vector<std::string> unknown;
  for (const auto& [id, h] : set.hypotheses) {
    if (!test_ids.contains(id)) unknown.push_back(id);
  }
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = path.string() + ": ids do not match the test split";
    if (!missing.empty()) {
      msg += "; missing " + std::to_string(missing.size()) + " id(s): " + join_ids(missing);
    }
    if (!unknown.empty()) {
      msg += "; " + std::to_string(unknown.size()) + " id(s) not in the test split: " + join_ids(unknown);
    }
    throw InputError(msg);
  }
  return set;
}

MetricReport score_hypotheses(const HypothesisSet& hypotheses, const Corpus& corpus, ToxicityScorer& toxicity,
                              TokenEmbedder& token_embedder) {
  std::vector<EvaluationItem> items;
  for (const auto& s : corpus.samples) {
    if (s.split != Split::test || !s.target) continue;
    auto it = hypotheses.hypotheses.find(s.id);
    if (it == hypotheses.hypotheses.end()) throw InputError("no hypothesis for test id '" + s.id + "'");
    items.push_back({s.id, it->second, *s.target, s.source});
  }
  if (items.empty()) throw InputError("test split has no labeled samples to score against");
  return evaluate(items, toxicity, token_embedder);
}

RunResult write_scored_system(const HypothesisSet& hypotheses, const MetricReport& report, const fs::path& out_dir) {
  RunResult r;
  r.label = hypotheses.system_id;
  r.external = true;
  r.run_dir = out_dir;
  r.report = report;
  r.query_count = hypotheses.hypotheses.size();
  std::string digest_input;
  for (const auto& [id, h] : hypotheses.hypotheses) digest_input += id + "\t" + h + "\n";
  r.config_digest = sha256_hex(digest_input);

  ordered_json cfg;
  cfg["name"] = hypotheses.system_id;
  cfg["external"] = true;
  write_file(out_dir / "config.json", cfg.dump(2) + "\n");
  std::vector<ordered_json> lines;
  for (const auto& [id, h] : hypotheses.hypotheses) {
    ordered_json l;
    l["query_id"] = id;
    l["backend_id"] = hypotheses.system_id;
    l["parsed_paraphrase"] = h;
    lines.push_back(l);
  }
  r.generations_path = out_dir / "generations.jsonl";
  write_file(r.generations_path, jsonl(lines));
  write_metrics(r, report.count, r.query_count - report.count);
  return r;
}

}  // namespace iclpara
