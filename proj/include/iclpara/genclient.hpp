#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "iclpara/prompting.hpp"
#include "json.hpp"

namespace iclpara {

enum class BackendKind { mock, openai };
enum class ApiStyle { completion, chat };
enum class MockMode { echo, lexicon_clean, demo_copy };

std::string_view to_string(BackendKind kind);
std::string_view to_string(ApiStyle style);
std::string_view to_string(MockMode mode);
BackendKind parse_backend_kind(std::string_view text);
ApiStyle parse_api_style(std::string_view text);
MockMode parse_mock_mode(std::string_view text);

// Defaults favour reproducibility: greedy decoding and a stop at the next demo slot.
struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 256;
  std::vector<std::string> stop{"\nSentence:"};

  std::string digest() const;
  bool operator==(const DecodeParams&) const = default;
};

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string backend_id = "mock";
  std::string endpoint;  // OpenAI-compatible base URL, e.g. http://host:8000/v1
  ApiStyle api_style = ApiStyle::completion;
  DecodeParams decode;
  std::string auth_env;  // name of the env var holding the bearer token; empty = no auth
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};

  MockMode mock_mode = MockMode::echo;
  // Used by demo_copy when the prompt has no demonstrations.
  std::optional<MockMode> mock_fallback;
  std::filesystem::path lexicon_path;

  // Throws InputError for inconsistent settings.
  void validate() const;
  // backend_id plus, for mocks, the mode settings; part of every cache key.
  std::string cache_identity() const;
};

// Offensive-word list: one lowercase token per line; blank lines and '#' comments ignored.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::set<std::string, std::less<>> words) : words_(std::move(words)) {}
  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);

  bool contains(std::string_view token) const { return words_.contains(token); }
  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

struct GenerationRecord {
  std::string query_id;
  std::string prompt_hash;
  std::string backend_id;
  DecodeParams decode;
  std::string raw_output;
  std::string parsed_paraphrase;
  double latency_ms = 0.0;  // 0 for cache hits
  bool cached = false;
  int retries = 0;
};

nlohmann::ordered_json to_json(const GenerationRecord& record);

struct PromptParts {
  std::string query;
  std::optional<std::string> first_demo_target;
};

// Recovers the query sentence and first demo target from a rendered prompt.
PromptParts extract_prompt_parts(const RenderedPrompt& prompt);

// echo: query unchanged. lexicon_clean: drop lexicon words, keep attached
// punctuation, normalize spacing. demo_copy: the first demo's target
// (GenerationFailure without one).
std::string mock_paraphrase(std::string_view query, MockMode mode, const Lexicon& lexicon = {},
                            std::optional<std::string_view> first_demo_target = std::nullopt);

// Persistent raw-output cache. The first write for a key wins; later writes
// are ignored. Backed by an append-only JSONL file when a path is given.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(std::filesystem::path file);

  static std::string key(const RenderedPrompt& prompt, std::string_view backend_id,
                         const DecodeParams& decode);

  std::optional<std::string> get(const std::string& key) const;
  // Returns false when the key was already present.
  bool put(const std::string& key, const std::string& raw_output);
  // Rewrites the backing file with one line per key, sorted.
  void compact();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
  std::optional<std::filesystem::path> file_;
};

// Thread-safe. Remote requests go through the process-wide limiter for the
// endpoint, and 429/5xx/transport failures are retried with exponential backoff.
class GenerationClient {
 public:
  // Throws AuthError when the configured auth variable is unset.
  explicit GenerationClient(BackendConfig config);

  GenerationRecord generate(const RenderedPrompt& prompt, std::string_view query_id,
                            GenerationCache& cache);

  // Requests that reached the backend, counting each retry attempt.
  std::size_t backend_calls() const { return calls_.load(); }
  const BackendConfig& config() const { return config_; }

 private:
  std::string call_mock(const RenderedPrompt& prompt) const;
  std::string call_remote(const RenderedPrompt& prompt, int& retries);

  BackendConfig config_;
  Lexicon lexicon_;
  std::string bearer_;
  std::atomic<std::size_t> calls_{0};
};

// One-shot convenience over a temporary client.
GenerationRecord generate(const RenderedPrompt& prompt, const BackendConfig& config,
                          GenerationCache& cache, std::string_view query_id = "");

}  // namespace iclpara
