#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iclpara/config.hpp"
#include "iclpara/corpus.hpp"
#include "iclpara/error.hpp"
#include "iclpara/metrics.hpp"
#include "iclpara/prompting.hpp"
#include "iclpara/runner.hpp"
#include "iclpara/selection.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace iclpara;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get_ref<const std::string&>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return std::move(out);
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return std::move(out);
    }
    default: return py::none();
  }
}

json from_py(const py::handle& h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    json out = json::object();
    for (const auto& [k, v] : h.cast<py::dict>()) out[py::str(k).cast<std::string>()] = from_py(v);
    return out;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    json out = json::array();
    for (const auto& v : h) out.push_back(from_py(v));
    return out;
  }
  if (py::hasattr(h, "__fspath__")) return py::str(h.attr("__fspath__")()).cast<std::string>();
  throw py::type_error("unsupported value in config: " + py::repr(h).cast<std::string>());
}

// A config is a dict, or a path to a .json/.toml file.
ExperimentConfig config_from(const py::object& config, const std::string& base_dir) {
  if (py::isinstance<py::dict>(config)) return experiment_from_json(from_py(config), base_dir);
  const std::filesystem::path p = py::str(config).cast<std::string>();
  return experiment_from_json(load_config_document(p), base_dir.empty() ? p.parent_path() : std::filesystem::path(base_dir));
}

json result_json(const RunResult& r) {
  json j;
  j["label"] = r.label;
  j["config_digest"] = r.config_digest;
  j["run_dir"] = r.run_dir.string();
  j["pool_size"] = r.pool_size;
  j["query_count"] = r.query_count;
  j["failures"] = r.failures;
  j["dry_run"] = r.dry_run;
  j["experimental"] = r.experimental;
  j["axis"] = r.axis;
  j["axis_value"] = r.axis_value;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  j["metrics"] = r.dry_run || r.error ? json(nullptr) : json::parse(to_json(r.report, true).dump());
  return j;
}

std::vector<TokenPair> token_pairs(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) throw InputError("hypotheses and references differ in length");
  std::vector<TokenPair> out;
  for (std::size_t i = 0; i < hyps.size(); ++i) out.emplace_back(tokenize(hyps[i]), tokenize(refs[i]));
  return out;
}

py::dict sample_dict(const SamplePair& s) {
  py::dict d;
  d["id"] = s.id;
  d["source"] = s.source;
  d["target"] = s.target ? py::object(py::str(*s.target)) : py::none();
  d["context"] = s.context;
  d["split"] = std::string(to_string(s.split));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "In-context paraphrasing toolkit: metrics, prompts, corpora and experiment runs";
  m.attr("__version__") = ICLPARA_VERSION;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<GenerationFailure>(m, "GenerationFailure", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());
  py::register_exception<AuthError>(m, "AuthError", base.ptr());
  py::register_exception<RunAborted>(m, "RunAborted", base.ptr());

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));

  m.def(
      "corpus_bleu",
      [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
        const auto d = corpus_bleu_detailed(token_pairs(hyps, refs));
        py::dict out;
        out["score"] = d.score;
        out["precisions"] = d.precisions;
        out["matches"] = d.stats.matches;
        out["totals"] = d.stats.totals;
        out["brevity_penalty"] = d.brevity_penalty;
        return out;
      },
      py::arg("hypotheses"), py::arg("references"));

  m.def(
      "sentence_bleu",
      [](const std::string& hyp, const std::string& ref, double epsilon) {
        return sentence_bleu_smoothed(tokenize(hyp), tokenize(ref), epsilon);
      },
      py::arg("hypothesis"), py::arg("reference"), py::arg("epsilon") = 0.1);

  m.def(
      "rouge_l",
      [](const std::string& hyp, const std::string& ref) {
        const auto r = rouge_l(tokenize(hyp), tokenize(ref));
        return py::make_tuple(r.precision, r.recall, r.f1);
      },
      py::arg("hypothesis"), py::arg("reference"));

  m.def(
      "cider",
      [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs, double sigma) {
        const auto r = cider(token_pairs(hyps, refs), sigma);
        return py::make_tuple(r.score, r.per_pair);
      },
      py::arg("hypotheses"), py::arg("references"), py::arg("sigma") = 6.0);

  m.def(
      "bert_f1",
      [](const std::string& hyp, const std::string& ref, std::size_t dimension) {
        HashingTokenEmbedder e(dimension);
        const auto r = bert_f1(e.embed_tokens(tokenize(hyp)), e.embed_tokens(tokenize(ref)));
        return py::make_tuple(r.precision, r.recall, r.f1);
      },
      py::arg("hypothesis"), py::arg("reference"), py::arg("dimension") = 64);

  m.def(
      "mann_whitney",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = mann_whitney(a, b);
        py::dict out;
        out["u"] = r.u;
        out["p_value"] = r.p_value;
        out["exact"] = r.exact;
        return out;
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "lexicon_toxicity",
      [](const std::vector<std::string>& texts, const std::string& lexicon) {
        LexiconToxicityScorer scorer(Lexicon::parse(lexicon));
        return toxicity_batch(texts, scorer);
      },
      py::arg("texts"), py::arg("lexicon"), "Lexicon text holds one word per line; '#' starts a comment.");

  m.def("instruction_catalog", [] {
    py::list out;
    for (const auto& i : instruction_catalog()) {
      py::dict d;
      d["id"] = i.id;
      d["text"] = i.text;
      d["dataset"] = i.dataset_hint;
      out.append(d);
    }
    return out;
  });
  m.def("catalog_lookup", [](const std::string& id) { return catalog_lookup(id).text; }, py::arg("id"));

  m.def(
      "render_prompt",
      [](const std::string& query, const std::vector<py::dict>& demos, std::optional<std::string> instruction,
         std::vector<std::string> query_context, bool with_context, const std::string& template_kind) {
        PromptSpec spec;
        if (instruction) spec.instruction = catalog_lookup(*instruction);
        int i = 0;
        for (const auto& d : demos) {
          Demo demo;
          demo.sample.id = d.contains("id") ? d["id"].cast<std::string>() : "demo-" + std::to_string(i);
          demo.sample.source = d["source"].cast<std::string>();
          demo.sample.target = d["target"].cast<std::string>();
          if (d.contains("context")) demo.sample.context = d["context"].cast<std::vector<std::string>>();
          spec.demos.demos.push_back(std::move(demo));
          ++i;
        }
        spec.query = {"query", query, std::nullopt, std::move(query_context), Split::test};
        spec.with_context = with_context;
        spec.template_kind = parse_template_kind(template_kind);
        const auto p = render(spec);
        py::dict out;
        out["text"] = p.text;
        py::list messages;
        for (const auto& msg : p.messages) {
          py::dict md;
          md["role"] = msg.role;
          md["content"] = msg.content;
          messages.append(md);
        }
        out["messages"] = messages;
        out["hash"] = p.hash;
        out["token_estimate"] = p.token_estimate;
        out["demo_count"] = p.demo_count;
        return out;
      },
      py::arg("query"), py::arg("demos") = std::vector<py::dict>{}, py::arg("instruction") = std::nullopt,
      py::arg("query_context") = std::vector<std::string>{}, py::arg("with_context") = false,
      py::arg("template") = "completion");

  m.def(
      "load_corpus",
      [](const std::filesystem::path& path, std::optional<std::string> format) {
        const Corpus c = load_corpus(path, format ? parse_format(*format) : format_from_path(path));
        py::list samples;
        for (const auto& s : c.samples) samples.append(sample_dict(s));
        return samples;
      },
      py::arg("path"), py::arg("format") = std::nullopt);

  m.def(
      "split_counts",
      [](const std::filesystem::path& path) {
        const auto c = split_counts(load_corpus(path, format_from_path(path)));
        py::dict out;
        out["train"] = c.train;
        out["validation"] = c.validation;
        out["test"] = c.test;
        return out;
      },
      py::arg("path"));

  m.def("subsample_size", &subsample_size, py::arg("fraction"), py::arg("train_size"));

  m.def(
      "strategy_labels", [](int n) {
        std::vector<std::string> out;
        for (const auto& s : canonical_strategies(n)) out.push_back(strategy_label(s));
        return out;
      },
      py::arg("n") = 0);

  m.def(
      "config_digest", [](const py::object& config, const std::string& base_dir) {
        return config_digest(config_from(config, base_dir));
      },
      py::arg("config"), py::arg("base_dir") = "");

  m.def(
      "run_experiment",
      [](const py::object& config, bool dry_run, const std::string& base_dir) {
        const ExperimentConfig cfg = config_from(config, base_dir);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, RunOptions{dry_run});
        }
        return to_py(result_json(r));
      },
      py::arg("config"), py::arg("dry_run") = false, py::arg("base_dir") = "");

  m.def(
      "run_sweep",
      [](const py::object& config, const std::string& axis, const py::object& values, bool dry_run,
         const std::string& base_dir) {
        const ExperimentConfig cfg = config_from(config, base_dir);
        const SweepSpec spec = sweep_from_json(cfg, json{{"axis", axis}, {"values", from_py(values)}});
        std::vector<RunResult> results;
        {
          py::gil_scoped_release release;
          results = run_sweep(spec, RunOptions{dry_run});
        }
        py::list out;
        for (const auto& r : results) out.append(to_py(result_json(r)));
        return out;
      },
      py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("dry_run") = false, py::arg("base_dir") = "");

  m.def(
      "report",
      [](const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
         std::optional<std::string> baseline) {
        std::vector<RunResult> runs;
        for (const auto& d : run_dirs) runs.push_back(load_run(d));
        AggregateOptions opts;
        opts.baseline = baseline;
        const auto tables = aggregate(runs, opts);
        write_report(tables, out_dir);
        return tables.table_csv;
      },
      py::arg("run_dirs"), py::arg("out_dir"), py::arg("baseline") = std::nullopt);
}
