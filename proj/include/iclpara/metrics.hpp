#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclpara/embedding.hpp"
#include "iclpara/genclient.hpp"
#include "json.hpp"

namespace iclpara {

using TokenSequence = std::vector<std::string>;
using TokenPair = std::pair<TokenSequence, TokenSequence>;  // (hypothesis, reference)

// Lowercases ASCII, makes every ASCII punctuation character its own token and
// splits on whitespace. Shared by every n-gram metric.
TokenSequence tokenize(std::string_view text);

// ---- BLEU -----------------------------------------------------------------

inline constexpr int kBleuOrder = 4;

// Pooled clipped n-gram statistics.
struct BleuStats {
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  void add(const TokenSequence& hypothesis, const TokenSequence& reference);
};

struct BleuResult {
  double score = 0.0;  // 0-100
  std::array<double, kBleuOrder> precisions{};
  double brevity_penalty = 0.0;
  BleuStats stats;
};

// Unsmoothed corpus BLEU: uniform weights, BP = exp(1 - r/c) when c < r.
// Any zero pooled precision gives 0.
BleuResult corpus_bleu_detailed(std::span<const TokenPair> pairs);
double corpus_bleu(std::span<const TokenPair> pairs);

// Per-sample diagnostic with epsilon added to zero numerators (denominators
// floored at 1). Not comparable with corpus BLEU.
double sentence_bleu_smoothed(const TokenSequence& hypothesis, const TokenSequence& reference,
                              double epsilon = 0.1);

// ---- ROUGE-L --------------------------------------------------------------

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);
PrecisionRecallF1 rouge_l(const TokenSequence& hypothesis, const TokenSequence& reference);

// ---- CIDEr-D --------------------------------------------------------------

struct CiderResult {
  double score = 0.0;            // mean of per_pair, 0-10
  std::vector<double> per_pair;  // same order as the input
};

// IDF from the references of this corpus, clipped TF-IDF cosine for n = 1..4,
// Gaussian length penalty with sigma, averaged over n and scaled by 10.
CiderResult cider(std::span<const TokenPair> pairs, double sigma = 6.0);

// ---- BERTScore matching ---------------------------------------------------

// Greedy matching over unit token vectors; no IDF weighting, no rescaling.
PrecisionRecallF1 bert_f1(std::span<const std::vector<double>> hypothesis,
                          std::span<const std::vector<double>> reference);

// Supplies one unit vector per token.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::vector<double>> embed_tokens(const TokenSequence& tokens) = 0;
};

// Offline embedder: a pseudo-random unit vector seeded by each token's hash.
// Equal tokens match exactly; distinct tokens are nearly orthogonal.
class HashingTokenEmbedder final : public TokenEmbedder {
 public:
  explicit HashingTokenEmbedder(std::size_t dimension = 64);
  std::string id() const override;
  std::vector<std::vector<double>> embed_tokens(const TokenSequence& tokens) override;

 private:
  std::size_t dimension_;
};

// Embeds every token as a one-word text through a sentence provider.
class ProviderTokenEmbedder final : public TokenEmbedder {
 public:
  explicit ProviderTokenEmbedder(EmbeddingProvider& provider) : provider_(provider) {}
  std::string id() const override { return provider_.id(); }
  std::vector<std::vector<double>> embed_tokens(const TokenSequence& tokens) override;

 private:
  EmbeddingProvider& provider_;
};

// ---- Toxicity -------------------------------------------------------------

class ToxicityScorer {
 public:
  virtual ~ToxicityScorer() = default;
  virtual std::string id() const = 0;
  // One probability in [0, 1] per text, order preserved.
  virtual std::vector<double> score(std::span<const std::string> texts) = 0;
};

// 1 if any token of the text is in the lexicon, else 0.
class LexiconToxicityScorer final : public ToxicityScorer {
 public:
  explicit LexiconToxicityScorer(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}
  std::string id() const override { return "lexicon"; }
  std::vector<double> score(std::span<const std::string> texts) override;
  double score_one(std::string_view text) const;

 private:
  Lexicon lexicon_;
};

// POST {"texts": [...]} -> {"scores": [...]}. A failed batch is retried text by
// text so that failures can be reported per text.
class HttpToxicityScorer final : public ToxicityScorer {
 public:
  HttpToxicityScorer(std::string endpoint, std::size_t max_in_flight = 4,
                     std::size_t batch_size = 32, RetryPolicy retry = {});
  std::string id() const override { return "http:" + endpoint_; }
  std::vector<double> score(std::span<const std::string> texts) override;

 private:
  std::vector<double> post_batch(std::span<const std::string> texts);

  std::string endpoint_;
  std::size_t max_in_flight_;
  std::size_t batch_size_;
  RetryPolicy retry_;
};

std::vector<double> toxicity_batch(std::span<const std::string> texts, ToxicityScorer& scorer);
// 100 x mean; 0 for an empty list.
double toxicity_mean_percent(std::span<const double> scores);

// ---- Significance ---------------------------------------------------------

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample
  double p_value = 1.0;
  bool exact = false;
};

// Midranks for ties. Exact enumeration when the smaller sample has fewer than
// 8 values (and the enumeration stays small), otherwise the tie-corrected
// normal approximation with continuity correction. Two-sided.
MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b);

// ---- Human scores ---------------------------------------------------------

enum class Rubric { capp_polite, offensive_generic };

std::string_view to_string(Rubric rubric);
Rubric parse_rubric(std::string_view text);
// Annotator-facing description of a 1-5 score.
std::string_view rubric_description(Rubric rubric, int score);

struct HumanScore {
  std::string sample_id;
  std::string system_id;
  int score = 0;  // 1..5
  Rubric rubric = Rubric::offensive_generic;
};

// CSV with header sample_id,system_id,score,rubric_id.
std::vector<HumanScore> load_human_scores(const std::filesystem::path& path);
std::vector<HumanScore> parse_human_scores(std::string_view csv_text);

struct QualityStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (ddof = 0)
  std::size_t count = 0;
};

QualityStats quality_stats(std::span<const double> scores);

// ---- Reports --------------------------------------------------------------

struct SampleScores {
  double bleu_smoothed = 0.0;
  double rouge_l_f1 = 0.0;
  double cider = 0.0;
  double bert_f1 = 0.0;
  double toxicity = 0.0;
};

struct CorpusScores {
  double bleu = 0.0;           // 0-100
  double bert_f1 = 0.0;        // 0-100
  double rouge = 0.0;          // 0-100, ROUGE-L F1
  double cider = 0.0;          // 0-10
  double toxicity_mean = 0.0;  // 0-100
};

struct MetricReport {
  std::map<std::string, SampleScores> per_sample;
  CorpusScores corpus;
  BleuResult bleu_detail;
  std::optional<double> source_toxicity_mean;     // the offensive inputs, 0-100
  std::optional<double> reference_toxicity_mean;  // the gold paraphrases, 0-100
  std::size_t count = 0;
};

struct EvaluationItem {
  std::string id;
  std::string hypothesis;
  std::string reference;
  std::string source;  // optional; scored for toxicity when non-empty
};

MetricReport evaluate(std::span<const EvaluationItem> items, ToxicityScorer& toxicity,
                      TokenEmbedder& token_embedder);

// `bleu_debug` adds pooled counts and per-order precisions.
nlohmann::ordered_json to_json(const MetricReport& report, bool bleu_debug = true);

}  // namespace iclpara
