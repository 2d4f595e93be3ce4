#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "iclpara/corpus.hpp"
#include "iclpara/embedding.hpp"
#include "iclpara/genclient.hpp"
#include "iclpara/selection.hpp"
#include "json.hpp"

namespace iclpara {

struct CorpusRef {
  std::filesystem::path path;
  std::optional<CorpusFormat> format;  // inferred from the extension when absent
  ColumnMapping mapping;
};

struct EmbeddingConfig {
  std::string provider = "hashing";  // hashing | http
  std::size_t dimension = 256;       // hashing only
  std::string endpoint;              // http only
  std::string model_id = "sentence-embedder";
  std::filesystem::path store;  // precomputed store; used instead of embedding when set
  EmbedField field = EmbedField::source;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
};

struct ToxicityConfig {
  std::string scorer = "lexicon";  // lexicon | http
  std::filesystem::path lexicon;
  std::string endpoint;
};

struct TokenEmbeddingConfig {
  std::string embedder = "hashing";  // hashing | http
  std::size_t dimension = 64;
  std::string endpoint;
};

// Everything one evaluation run depends on. Serializes to JSON; the digest
// covers every field that can change results (not output paths, name or jobs).
struct ExperimentConfig {
  std::string name;  // system label; derived from the settings when empty
  CorpusRef corpus;
  EmbeddingConfig embedding;
  BackendConfig backend;
  std::optional<std::string> instruction;  // catalog id such as "appdia.instruction_1"
  SelectionStrategy strategy;
  bool with_context = false;
  double train_fraction = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  std::filesystem::path cache;  // defaults to <output_dir>/generation_cache.jsonl
  ToxicityConfig toxicity;
  TokenEmbeddingConfig bertscore;
  std::size_t jobs = 4;
  double failure_threshold = 0.10;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
// Relative paths resolve against `base_dir`. Unknown keys are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
std::string config_digest(const ExperimentConfig& config);
std::string run_label(const ExperimentConfig& config);
std::filesystem::path effective_cache_path(const ExperimentConfig& config);

// Reads a JSON or TOML (by extension) document into JSON.
nlohmann::json load_config_document(const std::filesystem::path& path);
nlohmann::json parse_toml(std::string_view text);

}  // namespace iclpara
