#include "iclpara/config.hpp"

#include <set>

#include "iclpara/error.hpp"
#include "iclpara/prompting.hpp"
#include "iclpara/util.hpp"
#include "toml.hpp"

namespace iclpara {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads keys out of one JSON object and rejects the ones nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InputError(where_ + ": expected an object");
  }

  template <class T>
  bool read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return false;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw InputError(where_ + "." + key + ": wrong value type");
    }
    return true;
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw InputError(where_ + ": unknown key '" + k + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

void read_path(Fields& f, const std::string& key, std::filesystem::path& out,
               const std::filesystem::path& base) {
  std::string s;
  if (f.read(key, s)) out = resolve(s, base);
}

// Converts enum-parse failures into errors that name the offending key.
template <class Fn>
auto parse_field(const Fields& f, const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError(f.where() + "." + key + ": " + e.what());
  }
}

void read_corpus(const json& j, CorpusRef& c, const std::filesystem::path& base) {
  Fields f(j, "corpus");
  read_path(f, "path", c.path, base);
  std::string s;
  if (f.read("format", s)) c.format = parse_field(f, "format", [&] { return parse_format(s); });
  f.read("id_column", c.mapping.id);
  f.read("source_column", c.mapping.source);
  f.read("target_column", c.mapping.target);
  f.read("context_1_column", c.mapping.context_1);
  f.read("context_2_column", c.mapping.context_2);
  f.read("context_key", c.mapping.context);
  f.read("split_column", c.mapping.split);
  if (f.read("default_split", s)) {
    c.mapping.default_split = parse_field(f, "default_split", [&] { return parse_split(s); });
  }
  f.finish();
}

void read_embedding(const json& j, EmbeddingConfig& e, const std::filesystem::path& base) {
  Fields f(j, "embedding");
  f.read("provider", e.provider);
  f.read("dimension", e.dimension);
  f.read("endpoint", e.endpoint);
  f.read("model_id", e.model_id);
  read_path(f, "store", e.store, base);
  std::string s;
  if (f.read("field", s)) e.field = parse_field(f, "field", [&] { return parse_embed_field(s); });
  f.read("batch_size", e.batch_size);
  f.read("max_in_flight", e.max_in_flight);
  f.finish();
  if (e.provider != "hashing" && e.provider != "http") {
    throw InputError("embedding.provider: expected hashing or http, got '" + e.provider + "'");
  }
}

void read_backend(const json& j, BackendConfig& b, const std::filesystem::path& base) {
  Fields f(j, "backend");
  std::string s;
  if (f.read("kind", s)) b.kind = parse_field(f, "kind", [&] { return parse_backend_kind(s); });
  f.read("backend_id", b.backend_id);
  f.read("endpoint", b.endpoint);
  if (f.read("api_style", s)) b.api_style = parse_field(f, "api_style", [&] { return parse_api_style(s); });
  f.read("auth_env", b.auth_env);
  f.read("temperature", b.decode.temperature);
  f.read("max_tokens", b.decode.max_tokens);
  f.read("stop", b.decode.stop);
  f.read("max_retries", b.retry.max_retries);
  long long ms = 0;
  if (f.read("base_delay_ms", ms)) b.retry.base_delay = std::chrono::milliseconds(ms);
  if (f.read("max_delay_ms", ms)) b.retry.max_delay = std::chrono::milliseconds(ms);
  if (f.read("timeout_ms", ms)) b.timeout = std::chrono::milliseconds(ms);
  f.read("max_in_flight", b.max_in_flight);
  if (f.read("mock_mode", s)) b.mock_mode = parse_field(f, "mock_mode", [&] { return parse_mock_mode(s); });
  if (f.read("mock_fallback", s)) {
    b.mock_fallback = parse_field(f, "mock_fallback", [&] { return parse_mock_mode(s); });
  }
  read_path(f, "lexicon", b.lexicon_path, base);
  f.finish();
  b.validate();
}

void read_strategy(const json& j, SelectionStrategy& st) {
  if (j.is_string()) {
    int n = st.n;
    st = parse_strategy(j.get<std::string>());
    st.n = n;
    return;
  }
  Fields f(j, "strategy");
  std::string s;
  bool order_given = false;
  if (f.read("label", s)) st = parse_strategy(s);
  if (f.read("kind", s)) {
    st.kind = parse_field(f, "kind", [&] { return parse_selection_kind(s); });
  }
  if (f.read("order", s)) {
    st.order = parse_field(f, "order", [&] { return parse_demo_order(s); });
    order_given = true;
  }
  if (!order_given && st.kind == SelectionKind::random && !j.contains("label")) {
    st.order = DemoOrder::as_drawn;
  }
  f.read("n", st.n);
  f.finish();
}

void read_toxicity(const json& j, ToxicityConfig& t, const std::filesystem::path& base) {
  Fields f(j, "toxicity");
  f.read("scorer", t.scorer);
  read_path(f, "lexicon", t.lexicon, base);
  f.read("endpoint", t.endpoint);
  f.finish();
  if (t.scorer != "lexicon" && t.scorer != "http") {
    throw InputError("toxicity.scorer: expected lexicon or http, got '" + t.scorer + "'");
  }
  if (t.scorer == "http" && t.endpoint.empty()) throw InputError("toxicity.endpoint is required for http");
}

void read_bertscore(const json& j, TokenEmbeddingConfig& t) {
  Fields f(j, "bertscore");
  f.read("embedder", t.embedder);
  f.read("dimension", t.dimension);
  f.read("endpoint", t.endpoint);
  f.finish();
  if (t.embedder != "hashing" && t.embedder != "http") {
    throw InputError("bertscore.embedder: expected hashing or http, got '" + t.embedder + "'");
  }
  if (t.embedder == "http" && t.endpoint.empty()) throw InputError("bertscore.endpoint is required for http");
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* d = node.as_floating_point()) return d->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw InputError("unsupported TOML value type (dates and times are not accepted)");
}

ordered_json results_json(const ExperimentConfig& c) {
  ordered_json j = to_json(c);
  j.erase("name");
  j.erase("output_dir");
  j.erase("cache");
  j.erase("jobs");
  return j;
}

}  // namespace

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;

  ordered_json corpus;
  corpus["path"] = path_string(c.corpus.path);
  corpus["format"] = c.corpus.format ? ordered_json(to_string(*c.corpus.format)) : ordered_json(nullptr);
  corpus["id_column"] = c.corpus.mapping.id;
  corpus["source_column"] = c.corpus.mapping.source;
  corpus["target_column"] = c.corpus.mapping.target;
  corpus["context_1_column"] = c.corpus.mapping.context_1;
  corpus["context_2_column"] = c.corpus.mapping.context_2;
  corpus["context_key"] = c.corpus.mapping.context;
  corpus["split_column"] = c.corpus.mapping.split;
  corpus["default_split"] = to_string(c.corpus.mapping.default_split);
  j["corpus"] = corpus;

  ordered_json emb;
  emb["provider"] = c.embedding.provider;
  emb["dimension"] = c.embedding.dimension;
  emb["endpoint"] = c.embedding.endpoint;
  emb["model_id"] = c.embedding.model_id;
  emb["store"] = path_string(c.embedding.store);
  emb["field"] = c.embedding.field == EmbedField::source ? "source" : "target";
  emb["batch_size"] = c.embedding.batch_size;
  emb["max_in_flight"] = c.embedding.max_in_flight;
  j["embedding"] = emb;

  const BackendConfig& b = c.backend;
  ordered_json be;
  be["kind"] = to_string(b.kind);
  be["backend_id"] = b.backend_id;
  be["endpoint"] = b.endpoint;
  be["api_style"] = to_string(b.api_style);
  be["auth_env"] = b.auth_env;
  be["temperature"] = b.decode.temperature;
  be["max_tokens"] = b.decode.max_tokens;
  be["stop"] = b.decode.stop;
  be["max_retries"] = b.retry.max_retries;
  be["base_delay_ms"] = b.retry.base_delay.count();
  be["max_delay_ms"] = b.retry.max_delay.count();
  be["timeout_ms"] = b.timeout.count();
  be["max_in_flight"] = b.max_in_flight;
  be["mock_mode"] = to_string(b.mock_mode);
  be["mock_fallback"] = b.mock_fallback ? ordered_json(to_string(*b.mock_fallback)) : ordered_json(nullptr);
  be["lexicon"] = path_string(b.lexicon_path);
  j["backend"] = be;

  j["instruction"] = c.instruction ? ordered_json(*c.instruction) : ordered_json(nullptr);
  ordered_json st;
  st["kind"] = to_string(c.strategy.kind);
  st["order"] = to_string(c.strategy.order);
  st["n"] = c.strategy.n;
  j["strategy"] = st;
  j["with_context"] = c.with_context;
  j["train_fraction"] = c.train_fraction;
  j["seed"] = c.seed;
  j["output_dir"] = path_string(c.output_dir);
  j["cache"] = path_string(c.cache);

  ordered_json tox;
  tox["scorer"] = c.toxicity.scorer;
  tox["lexicon"] = path_string(c.toxicity.lexicon);
  tox["endpoint"] = c.toxicity.endpoint;
  j["toxicity"] = tox;

  ordered_json bs;
  bs["embedder"] = c.bertscore.embedder;
  bs["dimension"] = c.bertscore.dimension;
  bs["endpoint"] = c.bertscore.endpoint;
  j["bertscore"] = bs;

  j["jobs"] = c.jobs;
  j["failure_threshold"] = c.failure_threshold;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  Fields f(j, "config");
  f.read("name", c.name);
  if (const json* s = f.sub("corpus")) read_corpus(*s, c.corpus, base_dir);
  if (const json* s = f.sub("embedding")) read_embedding(*s, c.embedding, base_dir);
  if (const json* s = f.sub("backend")) read_backend(*s, c.backend, base_dir);
  if (const json* s = f.sub("instruction")) {
    if (!s->is_string()) throw InputError("config.instruction: expected a catalog id or \"none\"");
    std::string key = s->get<std::string>();
    if (key.empty() || to_lower(key) == "none") {
      c.instruction.reset();
    } else {
      catalog_lookup(key);  // fail early on unknown keys
      c.instruction = key;
    }
  }
  if (const json* s = f.sub("strategy")) read_strategy(*s, c.strategy);
  f.read("with_context", c.with_context);
  f.read("train_fraction", c.train_fraction);
  f.read("seed", c.seed);
  read_path(f, "output_dir", c.output_dir, base_dir);
  if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = (base_dir / c.output_dir).lexically_normal();
  read_path(f, "cache", c.cache, base_dir);
  if (const json* s = f.sub("toxicity")) read_toxicity(*s, c.toxicity, base_dir);
  if (const json* s = f.sub("bertscore")) read_bertscore(*s, c.bertscore);
  f.read("jobs", c.jobs);
  f.read("failure_threshold", c.failure_threshold);
  f.sub("sweep");  // consumed by sweep_from_json
  f.finish();

  c.strategy.seed = c.seed;
  validate(c.strategy);
  if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) {
    throw InputError("config.train_fraction must lie in (0, 1]");
  }
  if (c.jobs == 0) throw InputError("config.jobs must be at least 1");
  if (!(c.failure_threshold >= 0.0 && c.failure_threshold <= 1.0)) {
    throw InputError("config.failure_threshold must lie in [0, 1]");
  }
  return c;
}

std::string config_digest(const ExperimentConfig& config) {
  return sha256_hex(results_json(config).dump());
}

std::string run_label(const ExperimentConfig& c) {
  if (!c.name.empty()) return c.name;
  std::string label = c.backend.backend_id + " | " + strategy_label(c.strategy) +
                      " | n=" + std::to_string(c.strategy.n) + " | " +
                      (c.instruction ? *c.instruction : std::string("no instruction"));
  if (c.with_context) label += " | context";
  if (c.train_fraction < 1.0) label += " | fraction=" + format_general(c.train_fraction, 6);
  return label;
}

std::filesystem::path effective_cache_path(const ExperimentConfig& c) {
  return c.cache.empty() ? c.output_dir / "generation_cache.jsonl" : c.cache;
}

json parse_toml(std::string_view text) {
  try {
    toml::table table = toml::parse(text);
    return toml_to_json(table);
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw InputError("TOML parse error at line " + std::to_string(src.begin.line) + ": " +
                     std::string(e.description()));
  }
}

json load_config_document(const std::filesystem::path& path) {
  std::string text = read_file(path);
  std::string ext = to_lower(path.extension().string());
  try {
    if (ext == ".toml") return parse_toml(text);
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace iclpara
