#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclpara/corpus.hpp"

namespace iclpara {

// Unit-norm embedding of one sample. Values are carried as doubles.
struct EmbeddingVector {
  std::string sample_id;
  std::vector<double> values;

  bool operator==(const EmbeddingVector&) const = default;
};

inline constexpr double kUnitNormTolerance = 1e-6;

// Raw (unnormalized) sentence embeddings. Implementations must be deterministic
// for a fixed configuration and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Offline provider: feature hashing of lowercase whitespace tokens into a
// fixed-dimension count vector. Any non-blank text yields a non-zero vector.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(std::size_t dimension = 256);
  std::string id() const override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::vector<double> embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
};

// POST {"texts": [...]} to `endpoint`, expects {"vectors": [[...], ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string model_id,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string id() const override { return model_id_; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::string endpoint_;
  std::string model_id_;
  std::chrono::milliseconds timeout_;
};

// Built single-writer, then read concurrently. Lookups are exact; a missing id
// is reported as nullptr, never as a zero vector.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dimension, std::string provider_id);

  // Validates dimension and unit norm; rejects duplicate ids.
  void insert(EmbeddingVector vector);
  const EmbeddingVector* find(std::string_view sample_id) const;
  const EmbeddingVector& at(std::string_view sample_id) const;  // throws InputError

  std::size_t dimension() const { return dimension_; }
  const std::string& provider_id() const { return provider_id_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, EmbeddingVector, std::less<>>& entries() const { return entries_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::size_t dimension_;
  std::string provider_id_;
  std::map<std::string, EmbeddingVector, std::less<>> entries_;
};

// L2 normalization; throws InputError for the zero vector.
std::vector<double> normalized(std::span<const double> values);
double l2_norm(std::span<const double> values);

enum class EmbedField { source, target };
EmbedField parse_embed_field(std::string_view text);

struct EmbedOptions {
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
};

EmbeddingStore embed_corpus(const Corpus& corpus, EmbeddingProvider& provider,
                            EmbedField field = EmbedField::source, const EmbedOptions& options = {});

// Dot product of two stored (unit) vectors, clamped to [-1, 1]. Exactly symmetric.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// One (id, score) per pool id, in pool order.
std::vector<std::pair<std::string, double>> similarities(const EmbeddingVector& query,
                                                         const EmbeddingStore& store,
                                                         std::span<const std::string> pool);

// JSONL: header {"dimension": d, "provider_id": "..."} then {"id": ..., "v": [...]}
// per entry, values printed with 9 significant digits.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
std::string serialize_store(const EmbeddingStore& store);
EmbeddingStore load_store(const std::filesystem::path& path);

}  // namespace iclpara
