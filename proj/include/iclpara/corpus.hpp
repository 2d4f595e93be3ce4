#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iclpara {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
// Accepts train, validation/valid/val/dev, test (case-insensitive).
Split parse_split(std::string_view text);

// One offensive sentence with its gold paraphrase and up to two prior dialogue
// turns, earliest first.
struct SamplePair {
  std::string id;
  std::string source;
  std::optional<std::string> target;
  std::vector<std::string> context;
  Split split = Split::train;

  bool operator==(const SamplePair&) const = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  bool operator==(const SplitCounts&) const = default;
};

// Immutable once loaded. Iteration order is ingestion order.
struct Corpus {
  std::string name;
  std::vector<SamplePair> samples;
  std::map<std::string, std::string> metadata;

  std::vector<SamplePair> split(Split which) const;
  const SamplePair* find(std::string_view id) const;
};

enum class CorpusFormat { csv, jsonl };

std::string_view to_string(CorpusFormat format);
CorpusFormat parse_format(std::string_view text);
// Guesses from the extension (.csv, .jsonl/.json); throws InputError otherwise.
CorpusFormat format_from_path(const std::filesystem::path& path);

// Column names (CSV) or keys (JSONL). Only `source` must be present in the input.
struct ColumnMapping {
  std::string id = "id";
  std::string source = "source";
  std::string target = "target";
  std::string context_1 = "context_1";  // CSV
  std::string context_2 = "context_2";  // CSV
  std::string context = "context";      // JSONL array
  std::string split = "split";
  Split default_split = Split::train;
};

struct SubsamplePlan {
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const ColumnMapping& mapping = {});
Corpus parse_corpus(std::istream& in, CorpusFormat format, const ColumnMapping& mapping = {},
                    std::string name = "corpus");

// Writes with the canonical column/key names, so load_corpus(default mapping)
// reads it back field-identical.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);
std::string serialize_corpus(const Corpus& corpus, CorpusFormat format);

// max(1, floor(fraction * train_size)); fraction must lie in (0, 1].
std::size_t subsample_size(double fraction, std::size_t train_size);

// Uniform draw without replacement from the train split; validation and test
// samples pass through untouched, ingestion order is kept.
Corpus subsample_train(const Corpus& corpus, const SubsamplePlan& plan);

SplitCounts split_counts(const Corpus& corpus);

}  // namespace iclpara
