#include "iclpara/genclient.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "iclpara/error.hpp"
#include "iclpara/http.hpp"
#include "iclpara/util.hpp"

namespace iclpara {

using nlohmann::json;

namespace {

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string after_sentence_label(std::string_view block) {
  // The sentence follows the last line-initial "Sentence: " in the block.
  constexpr std::string_view label = "Sentence: ";
  std::size_t pos = std::string_view::npos;
  for (std::size_t p = block.find(label); p != std::string_view::npos;
       p = block.find(label, p + 1)) {
    if (p == 0 || block[p - 1] == '\n') pos = p;
  }
  if (pos == std::string_view::npos) return std::string(block);
  return std::string(block.substr(pos + label.size()));
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::mock ? "mock" : "openai";
}

std::string_view to_string(ApiStyle style) {
  return style == ApiStyle::completion ? "completion" : "chat";
}

std::string_view to_string(MockMode mode) {
  switch (mode) {
    case MockMode::echo: return "echo";
    case MockMode::lexicon_clean: return "lexicon_clean";
    case MockMode::demo_copy: return "demo_copy";
  }
  return "echo";
}

BackendKind parse_backend_kind(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "mock") return BackendKind::mock;
  if (t == "openai" || t == "remote" || t == "http") return BackendKind::openai;
  throw InputError("unknown backend kind '" + std::string(text) + "'");
}

ApiStyle parse_api_style(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "completion") return ApiStyle::completion;
  if (t == "chat") return ApiStyle::chat;
  throw InputError("unknown api style '" + std::string(text) + "'");
}

MockMode parse_mock_mode(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "echo") return MockMode::echo;
  if (t == "lexicon_clean") return MockMode::lexicon_clean;
  if (t == "demo_copy") return MockMode::demo_copy;
  throw InputError("unknown mock mode '" + std::string(text) + "'");
}

std::string DecodeParams::digest() const {
  nlohmann::ordered_json j;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["stop"] = stop;
  return sha256_hex(j.dump());
}

void BackendConfig::validate() const {
  if (backend_id.empty()) throw InputError("backend_id must not be empty");
  if (decode.temperature < 0.0) throw InputError("temperature must be >= 0");
  if (decode.max_tokens <= 0) throw InputError("max_tokens must be positive");
  if (retry.max_retries < 0) throw InputError("max_retries must be >= 0");
  if (max_in_flight == 0) throw InputError("max_in_flight must be at least 1");
  if (kind == BackendKind::openai) {
    if (endpoint.empty()) throw InputError("remote backend '" + backend_id + "' needs an endpoint");
    http::parse_url(endpoint);
  }
  if (kind == BackendKind::mock && mock_mode == MockMode::lexicon_clean && lexicon_path.empty()) {
    throw InputError("lexicon_clean mock mode needs a lexicon_path");
  }
}

std::string BackendConfig::cache_identity() const {
  if (kind != BackendKind::mock) return backend_id;
  std::string id = backend_id + ":mock:" + std::string(to_string(mock_mode));
  if (mock_fallback) id += "+" + std::string(to_string(*mock_fallback));
  if (!lexicon_path.empty()) id += "@" + lexicon_path.string();
  return id;
}

Lexicon Lexicon::parse(std::string_view text) {
  std::set<std::string, std::less<>> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    words.insert(to_lower(t));
  }
  return Lexicon(std::move(words));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

nlohmann::ordered_json to_json(const GenerationRecord& r) {
  nlohmann::ordered_json j;
  j["query_id"] = r.query_id;
  j["prompt_hash"] = r.prompt_hash;
  j["backend_id"] = r.backend_id;
  j["decode"] = {{"temperature", r.decode.temperature},
                 {"max_tokens", r.decode.max_tokens},
                 {"stop", r.decode.stop}};
  j["raw_output"] = r.raw_output;
  j["parsed_paraphrase"] = r.parsed_paraphrase;
  j["latency_ms"] = r.latency_ms;
  j["cached"] = r.cached;
  j["retries"] = r.retries;
  return j;
}

PromptParts extract_prompt_parts(const RenderedPrompt& prompt) {
  PromptParts parts;
  if (prompt.template_kind == TemplateKind::chat) {
    for (const auto& m : prompt.messages) {
      if (m.role == "assistant" && !parts.first_demo_target) parts.first_demo_target = m.content;
      if (m.role == "user") parts.query = after_sentence_label(m.content);
    }
    return parts;
  }
  std::string_view text = prompt.text;
  constexpr std::string_view tail = "\nParaphrase:";
  if (text.size() >= tail.size() && text.substr(text.size() - tail.size()) == tail) {
    text.remove_suffix(tail.size());
  }
  parts.query = after_sentence_label(text);
  constexpr std::string_view demo_label = "Paraphrase: ";
  for (std::size_t p = text.find(demo_label); p != std::string_view::npos;
       p = text.find(demo_label, p + 1)) {
    if (p != 0 && text[p - 1] != '\n') continue;
    const auto start = p + demo_label.size();
    const auto end = text.find('\n', start);
    parts.first_demo_target = std::string(text.substr(start, end == std::string_view::npos
                                                                 ? std::string_view::npos
                                                                 : end - start));
    break;
  }
  return parts;
}

std::string mock_paraphrase(std::string_view query, MockMode mode, const Lexicon& lexicon,
                            std::optional<std::string_view> first_demo_target) {
  switch (mode) {
    case MockMode::echo:
      return std::string(query);
    case MockMode::demo_copy:
      if (!first_demo_target) {
        throw GenerationFailure("demo_copy mock needs at least one demonstration");
      }
      return std::string(*first_demo_target);
    case MockMode::lexicon_clean: break;
  }

  std::istringstream words{std::string(query)};
  std::string word;
  std::string joined;
  while (words >> word) {
    std::size_t b = 0;
    std::size_t e = word.size();
    while (b < e && is_ascii_punct(word[b])) ++b;
    while (e > b && is_ascii_punct(word[e - 1])) --e;
    if (b < e && lexicon.contains(to_lower(std::string_view(word).substr(b, e - b)))) {
      word = word.substr(0, b) + word.substr(e);
    }
    if (word.empty()) continue;
    if (!joined.empty()) joined += ' ';
    joined += word;
  }
  std::string out;
  for (char c : joined) {
    if (c != ' ' && is_ascii_punct(c) && std::string_view(",.!?;:").find(c) != std::string_view::npos) {
      while (!out.empty() && out.back() == ' ') out.pop_back();
    }
    out.push_back(c);
  }
  std::size_t lead = 0;
  while (lead < out.size() && (out[lead] == ' ' || out[lead] == ',' || out[lead] == ';' ||
                               out[lead] == ':')) {
    ++lead;
  }
  return trim(std::string_view(out).substr(lead));
}

GenerationCache::GenerationCache(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(*file_, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      entries_.emplace(j.at("key").get<std::string>(), j.at("raw_output").get<std::string>());
    } catch (const json::exception& e) {
      throw InputError("corrupt cache file " + file_->string() + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string GenerationCache::key(const RenderedPrompt& prompt, std::string_view backend_id,
                                 const DecodeParams& decode) {
  return sha256_hex(prompt.hash + "\n" + std::string(backend_id) + "\n" + decode.digest());
}

std::optional<std::string> GenerationCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool GenerationCache::put(const std::string& key, const std::string& raw_output) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, raw_output).second) return false;
  if (file_) {
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    if (!out) throw InputError("cannot append to cache file " + file_->string());
    nlohmann::ordered_json j;
    j["key"] = key;
    j["raw_output"] = raw_output;
    out << j.dump() << '\n';
  }
  return true;
}

void GenerationCache::compact() {
  std::lock_guard lock(mu_);
  if (!file_) return;
  std::string out;
  for (const auto& [k, v] : entries_) {
    nlohmann::ordered_json j;
    j["key"] = k;
    j["raw_output"] = v;
    out += j.dump();
    out += '\n';
  }
  write_file(*file_, out);
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

GenerationClient::GenerationClient(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind == BackendKind::mock && !config_.lexicon_path.empty()) {
    lexicon_ = Lexicon::load(config_.lexicon_path);
  }
  if (config_.kind == BackendKind::openai && !config_.auth_env.empty()) {
    const char* token = std::getenv(config_.auth_env.c_str());
    if (!token || !*token) {
      throw AuthError("environment variable " + config_.auth_env + " is not set for backend '" +
                      config_.backend_id + "'");
    }
    bearer_ = token;
  }
}

std::string GenerationClient::call_mock(const RenderedPrompt& prompt) const {
  const auto parts = extract_prompt_parts(prompt);
  auto mode = config_.mock_mode;
  if (mode == MockMode::demo_copy && !parts.first_demo_target && config_.mock_fallback) {
    mode = *config_.mock_fallback;
  }
  std::optional<std::string_view> demo;
  if (parts.first_demo_target) demo = *parts.first_demo_target;
  return mock_paraphrase(parts.query, mode, lexicon_, demo);
}

std::string GenerationClient::call_remote(const RenderedPrompt& prompt, int& retries) {
  const bool chat = config_.api_style == ApiStyle::chat;
  if (chat != (prompt.template_kind == TemplateKind::chat)) {
    throw InputError("prompt template '" + std::string(to_string(prompt.template_kind)) +
                     "' does not match api style '" + std::string(to_string(config_.api_style)) +
                     "'");
  }
  nlohmann::ordered_json body;
  body["model"] = config_.backend_id;
  if (chat) {
    auto messages = json::array();
    for (const auto& m : prompt.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = messages;
  } else {
    body["prompt"] = prompt.text;
  }
  body["temperature"] = config_.decode.temperature;
  body["max_tokens"] = config_.decode.max_tokens;
  body["stop"] = config_.decode.stop;

  std::map<std::string, std::string> headers;
  if (!bearer_.empty()) headers["Authorization"] = "Bearer " + bearer_;
  const auto url = config_.endpoint + (chat ? "/chat/completions" : "/completions");
  auto& limiter = http::shared_limiter(config_.endpoint, config_.max_in_flight);

  http::Response res;
  for (int attempt = 0;; ++attempt) {
    {
      http::LimiterSlot slot(limiter);
      ++calls_;
      res = http::post_json(url, body.dump(), headers, config_.timeout);
    }
    if (res.status == 200) break;
    if (res.status == 401 || res.status == 403) {
      throw AuthError("backend '" + config_.backend_id + "' rejected credentials (HTTP " +
                      std::to_string(res.status) + ")");
    }
    if (!http::is_transient(res)) {
      throw BackendError("backend '" + config_.backend_id + "' returned HTTP " +
                         std::to_string(res.status) + ": " + http::excerpt(res.body));
    }
    if (attempt >= config_.retry.max_retries) {
      throw BackendError("backend '" + config_.backend_id + "' failed after " +
                         std::to_string(attempt + 1) + " attempts; last " +
                         (res.status ? "HTTP " + std::to_string(res.status) : res.transport_error));
    }
    ++retries;
    const auto factor = std::ldexp(1.0, attempt);
    const auto delay = std::min<double>(static_cast<double>(config_.retry.max_delay.count()),
                                        static_cast<double>(config_.retry.base_delay.count()) * factor);
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay)));
  }

  try {
    const auto j = json::parse(res.body);
    const auto& choice = j.at("choices").at(0);
    if (chat) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError("malformed response from backend '" + config_.backend_id + "' (" +
                       e.what() + "): " + http::excerpt(res.body));
  }
}

GenerationRecord GenerationClient::generate(const RenderedPrompt& prompt, std::string_view query_id,
                                            GenerationCache& cache) {
  GenerationRecord rec;
  rec.query_id = std::string(query_id);
  rec.prompt_hash = prompt.hash;
  rec.backend_id = config_.backend_id;
  rec.decode = config_.decode;

  const auto key = GenerationCache::key(prompt, config_.cache_identity(), config_.decode);
  const auto start = std::chrono::steady_clock::now();
  if (auto hit = cache.get(key)) {
    rec.raw_output = std::move(*hit);
    rec.cached = true;
  } else {
    if (config_.kind == BackendKind::mock) {
      ++calls_;
      rec.raw_output = call_mock(prompt);
    } else {
      rec.raw_output = call_remote(prompt, rec.retries);
    }
    cache.put(key, rec.raw_output);
    rec.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  rec.parsed_paraphrase = parse_completion(rec.raw_output);
  return rec;
}

GenerationRecord generate(const RenderedPrompt& prompt, const BackendConfig& config,
                          GenerationCache& cache, std::string_view query_id) {
  GenerationClient client(config);
  return client.generate(prompt, query_id, cache);
}

}  // namespace iclpara
