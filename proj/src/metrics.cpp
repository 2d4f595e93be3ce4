#include "iclpara/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "iclpara/csv.hpp"
#include "iclpara/error.hpp"
#include "iclpara/http.hpp"
#include "iclpara/util.hpp"

namespace iclpara {

using nlohmann::json;

namespace {

// N-gram key: tokens joined by the unit separator, which tokenize() never emits.
using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const TokenSequence& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

double harmonic(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

void BleuStats::add(const TokenSequence& hypothesis, const TokenSequence& reference) {
  hyp_length += hypothesis.size();
  ref_length += reference.size();
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const auto hyp = count_ngrams(hypothesis, n);
    const auto ref = count_ngrams(reference, n);
    std::size_t clipped = 0;
    for (const auto& [gram, count] : hyp) {
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    matches[n - 1] += clipped;
    totals[n - 1] += hypothesis.size() >= n ? hypothesis.size() - n + 1 : 0;
  }
}

BleuResult corpus_bleu_detailed(std::span<const TokenPair> pairs) {
  BleuResult out;
  for (const auto& [hyp, ref] : pairs) out.stats.add(hyp, ref);
  const auto& s = out.stats;
  bool any_zero = false;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    out.precisions[n] = s.totals[n] == 0 ? 0.0
                                         : static_cast<double>(s.matches[n]) /
                                               static_cast<double>(s.totals[n]);
    if (out.precisions[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(out.precisions[n]);
    }
  }
  if (s.hyp_length == 0) {
    out.brevity_penalty = 0.0;
  } else if (s.hyp_length < s.ref_length) {
    out.brevity_penalty = std::exp(1.0 - static_cast<double>(s.ref_length) /
                                             static_cast<double>(s.hyp_length));
  } else {
    out.brevity_penalty = 1.0;
  }
  if (any_zero || s.hyp_length == 0) {
    out.score = 0.0;
  } else {
    out.score = 100.0 * out.brevity_penalty * std::exp(log_sum / kBleuOrder);
  }
  return out;
}

double corpus_bleu(std::span<const TokenPair> pairs) {
  return corpus_bleu_detailed(pairs).score;
}

double sentence_bleu_smoothed(const TokenSequence& hypothesis, const TokenSequence& reference,
                              double epsilon) {
  if (hypothesis.empty()) return 0.0;
  BleuStats s;
  s.add(hypothesis, reference);
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    const double denom = static_cast<double>(std::max<std::size_t>(1, s.totals[n]));
    const double numer = s.matches[n] == 0 ? epsilon : static_cast<double>(s.matches[n]);
    log_sum += std::log(numer / denom);
  }
  const double c = static_cast<double>(s.hyp_length);
  const double r = static_cast<double>(s.ref_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / kBleuOrder);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrecisionRecallF1 rouge_l(const TokenSequence& hypothesis, const TokenSequence& reference) {
  PrecisionRecallF1 out;
  const auto l = static_cast<double>(lcs_length(hypothesis, reference));
  if (!hypothesis.empty()) out.precision = l / static_cast<double>(hypothesis.size());
  if (!reference.empty()) out.recall = l / static_cast<double>(reference.size());
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

CiderResult cider(std::span<const TokenPair> pairs, double sigma) {
  if (pairs.empty()) throw InputError("CIDEr needs at least one pair");

  using Vec = std::array<std::unordered_map<std::string, double>, kBleuOrder>;
  struct Weighted {
    Vec vec;
    std::array<double, kBleuOrder> norm{};
    double length = 0.0;
  };

  std::vector<std::array<NgramCounts, kBleuOrder>> hyp_counts(pairs.size());
  std::vector<std::array<NgramCounts, kBleuOrder>> ref_counts(pairs.size());
  std::unordered_map<std::string, double> df;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
      hyp_counts[i][n - 1] = count_ngrams(pairs[i].first, n);
      ref_counts[i][n - 1] = count_ngrams(pairs[i].second, n);
      for (const auto& [gram, count] : ref_counts[i][n - 1]) df[gram] += 1.0;
    }
  }
  const double log_n = std::log(static_cast<double>(pairs.size()));

  auto weigh = [&](const std::array<NgramCounts, kBleuOrder>& counts, std::size_t length) {
    Weighted w;
    w.length = static_cast<double>(length);
    for (int n = 0; n < kBleuOrder; ++n) {
      for (const auto& [gram, tf] : counts[n]) {
        auto it = df.find(gram);
        const double doc_freq = it == df.end() ? 0.0 : it->second;
        const double v = static_cast<double>(tf) * (log_n - std::log(std::max(1.0, doc_freq)));
        w.vec[n][gram] = v;
        w.norm[n] += v * v;
      }
      w.norm[n] = std::sqrt(w.norm[n]);
    }
    return w;
  };

  CiderResult out;
  out.per_pair.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto hyp = weigh(hyp_counts[i], pairs[i].first.size());
    const auto ref = weigh(ref_counts[i], pairs[i].second.size());
    const double delta = hyp.length - ref.length;
    const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
    double sum = 0.0;
    for (int n = 0; n < kBleuOrder; ++n) {
      double val = 0.0;
      for (const auto& [gram, hv] : hyp.vec[n]) {
        auto it = ref.vec[n].find(gram);
        if (it != ref.vec[n].end()) val += std::min(hv, it->second) * it->second;
      }
      if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
      sum += val * penalty;
    }
    out.per_pair.push_back(10.0 * sum / kBleuOrder);
  }
  out.score = std::accumulate(out.per_pair.begin(), out.per_pair.end(), 0.0) /
              static_cast<double>(out.per_pair.size());
  return out;
}

PrecisionRecallF1 bert_f1(std::span<const std::vector<double>> hypothesis,
                          std::span<const std::vector<double>> reference) {
  if (hypothesis.empty() || reference.empty()) {
    throw InputError("BERTScore matching needs at least one token on each side");
  }
  std::vector<double> best_for_ref(reference.size(), -1.0);
  double precision_sum = 0.0;
  for (const auto& h : hypothesis) {
    double best = -1.0;
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const double sim = cosine(h, reference[j]);
      best = std::max(best, sim);
      best_for_ref[j] = std::max(best_for_ref[j], sim);
    }
    precision_sum += best;
  }
  PrecisionRecallF1 out;
  out.precision = precision_sum / static_cast<double>(hypothesis.size());
  out.recall = std::accumulate(best_for_ref.begin(), best_for_ref.end(), 0.0) /
               static_cast<double>(reference.size());
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

HashingTokenEmbedder::HashingTokenEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw InputError("token embedding dimension must be positive");
}

std::string HashingTokenEmbedder::id() const {
  return "hashing-token-" + std::to_string(dimension_);
}

std::vector<std::vector<double>> HashingTokenEmbedder::embed_tokens(const TokenSequence& tokens) {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::mt19937_64 rng(fnv1a64(t));
    std::vector<double> v(dimension_);
    for (auto& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    out.push_back(normalized(v));
  }
  return out;
}

std::vector<std::vector<double>> ProviderTokenEmbedder::embed_tokens(const TokenSequence& tokens) {
  auto raw = provider_.embed(tokens);
  for (auto& v : raw) v = normalized(v);
  return raw;
}

double LexiconToxicityScorer::score_one(std::string_view text) const {
  for (const auto& token : tokenize(text)) {
    if (lexicon_.contains(token)) return 1.0;
  }
  return 0.0;
}

std::vector<double> LexiconToxicityScorer::score(std::span<const std::string> texts) {
  std::vector<double> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(score_one(t));
  return out;
}

HttpToxicityScorer::HttpToxicityScorer(std::string endpoint, std::size_t max_in_flight,
                                       std::size_t batch_size, RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      max_in_flight_(max_in_flight),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      retry_(retry) {
  http::parse_url(endpoint_);
}

std::vector<double> HttpToxicityScorer::post_batch(std::span<const std::string> texts) {
  const json request = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto& limiter = http::shared_limiter(endpoint_, max_in_flight_);
  http::Response res;
  for (int attempt = 0;; ++attempt) {
    {
      http::LimiterSlot slot(limiter);
      res = http::post_json(endpoint_, request.dump(), {}, std::chrono::seconds(60));
    }
    if (res.status == 200 || !http::is_transient(res) || attempt >= retry_.max_retries) break;
    const auto delay = std::min<double>(
        static_cast<double>(retry_.max_delay.count()),
        static_cast<double>(retry_.base_delay.count()) * std::ldexp(1.0, attempt));
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay)));
  }
  if (res.status != 200) {
    throw BackendError("toxicity endpoint returned " +
                       (res.status ? "HTTP " + std::to_string(res.status) : res.transport_error) +
                       ": " + http::excerpt(res.body));
  }
  std::vector<double> scores;
  try {
    scores = json::parse(res.body).at("scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed toxicity response: ") + e.what() + ": " +
                       http::excerpt(res.body));
  }
  if (scores.size() != texts.size()) {
    throw BackendError("toxicity endpoint returned " + std::to_string(scores.size()) +
                       " scores for " + std::to_string(texts.size()) + " texts");
  }
  return scores;
}

std::vector<double> HttpToxicityScorer::score(std::span<const std::string> texts) {
  std::vector<double> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size_) {
    const auto chunk = texts.subspan(begin, std::min(batch_size_, texts.size() - begin));
    try {
      auto scores = post_batch(chunk);
      out.insert(out.end(), scores.begin(), scores.end());
      continue;
    } catch (const BackendError&) {
      if (chunk.size() == 1) throw;
    }
    std::string failed;
    std::string last_error;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      try {
        out.push_back(post_batch(chunk.subspan(i, 1)).front());
      } catch (const BackendError& e) {
        if (!failed.empty()) failed += ", ";
        failed += std::to_string(begin + i);
        last_error = e.what();
        out.push_back(0.0);
      }
    }
    if (!failed.empty()) {
      throw BackendError("toxicity scoring failed for text indices [" + failed + "]: " +
                         last_error);
    }
  }
  return out;
}

std::vector<double> toxicity_batch(std::span<const std::string> texts, ToxicityScorer& scorer) {
  auto scores = scorer.score(texts);
  if (scores.size() != texts.size()) {
    throw BackendError("toxicity scorer '" + scorer.id() + "' returned the wrong number of scores");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw BackendError("toxicity score out of [0, 1] for text " + std::to_string(i));
    }
  }
  return scores;
}

double toxicity_mean_percent(std::span<const double> scores) {
  if (scores.empty()) return 0.0;
  return 100.0 * std::accumulate(scores.begin(), scores.end(), 0.0) /
         static_cast<double>(scores.size());
}

namespace {

// Midranks of the pooled sample.
std::vector<double> midranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// Counts size-`need` subsets of ranks[from..] whose rank sum, added to `acc`,
// puts U at least as far from the mean as observed.
void enumerate_rank_sums(const std::vector<double>& ranks, std::size_t from, std::size_t need,
                         double acc, double offset, double mean, double observed_dev,
                         double& extreme, double& total) {
  if (need == 0) {
    total += 1.0;
    if (std::abs(acc - offset - mean) >= observed_dev - 1e-9) extreme += 1.0;
    return;
  }
  for (std::size_t i = from; i + need <= ranks.size(); ++i) {
    enumerate_rank_sums(ranks, i + 1, need - 1, acc + ranks[i], offset, mean, observed_dev,
                        extreme, total);
  }
}

}  // namespace

MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("Mann-Whitney needs two non-empty samples");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(na), 0.0);
  const double offset = static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;

  MannWhitneyResult out;
  out.u = rank_sum_a - offset;
  const double mean = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  const double dev = std::abs(out.u - mean);

  if (std::min(na, nb) < 8 && binomial(n, na) <= 2.0e6) {
    double extreme = 0.0;
    double total = 0.0;
    enumerate_rank_sums(ranks, 0, na, 0.0, offset, mean, dev, extreme, total);
    out.exact = true;
    out.p_value = std::min(1.0, extreme / total);
    return out;
  }

  std::map<double, std::size_t> ties;
  for (double v : pooled) ++ties[v];
  double tie_term = 0.0;
  for (const auto& [v, t] : ties) {
    const auto td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const auto nd = static_cast<double>(n);
  const double variance = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                          ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (variance <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, dev - 0.5) / std::sqrt(variance);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

std::string_view to_string(Rubric rubric) {
  return rubric == Rubric::capp_polite ? "capp_polite" : "offensive_generic";
}

Rubric parse_rubric(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "capp_polite") return Rubric::capp_polite;
  if (t == "offensive_generic") return Rubric::offensive_generic;
  throw InputError("unknown rubric '" + std::string(text) + "'");
}

std::string_view rubric_description(Rubric rubric, int score) {
  static constexpr std::array<std::string_view, 5> polite = {
      "Paraphrase that is very different in meaning and not more polite than the original.",
      "Paraphrase that is very different in meaning and somewhat more polite than the original.",
      "Meaning-preserving paraphrase that could be more polite.",
      "Paraphrase that is polite but somewhat distinct in meaning.",
      "Perfect meaning-preserving polite paraphrase.",
  };
  static constexpr std::array<std::string_view, 5> generic = {
      "Paraphrase that is very different in meaning and not less offensive than the original.",
      "Paraphrase that is very different in meaning and somewhat less offensive than the original.",
      "Meaning-preserving paraphrase that could be less offensive.",
      "Paraphrase that is inoffensive but somewhat distinct in meaning.",
      "Perfect meaning-preserving inoffensive paraphrase.",
  };
  if (score < 1 || score > 5) throw InputError("human score must be in 1..5");
  return (rubric == Rubric::capp_polite ? polite : generic)[static_cast<std::size_t>(score - 1)];
}

std::vector<HumanScore> parse_human_scores(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  const auto rows = csv::read(in);
  if (rows.empty()) throw InputError("human score CSV has no header");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) col[trim(rows[0].fields[i])] = i;
  for (const char* name : {"sample_id", "system_id", "score", "rubric_id"}) {
    if (!col.contains(name)) throw InputError(std::string("human score CSV lacks column ") + name);
  }
  std::vector<HumanScore> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    auto cell = [&](const char* name) {
      const auto i = col.at(name);
      return i < f.size() ? trim(f[i]) : std::string();
    };
    HumanScore h;
    h.sample_id = cell("sample_id");
    h.system_id = cell("system_id");
    const auto score_text = cell("score");
    if (score_text.size() != 1 || score_text[0] < '1' || score_text[0] > '5') {
      throw InputError("human score must be an integer 1-5, got '" + score_text + "' on line " +
                       std::to_string(rows[r].line));
    }
    h.score = score_text[0] - '0';
    try {
      h.rubric = parse_rubric(cell("rubric_id"));
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + " on line " + std::to_string(rows[r].line));
    }
    if (h.sample_id.empty() || h.system_id.empty()) {
      throw InputError("human score missing sample_id/system_id on line " +
                       std::to_string(rows[r].line));
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<HumanScore> load_human_scores(const std::filesystem::path& path) {
  try {
    return parse_human_scores(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

QualityStats quality_stats(std::span<const double> scores) {
  QualityStats s;
  s.count = scores.size();
  if (scores.empty()) return s;
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

MetricReport evaluate(std::span<const EvaluationItem> items, ToxicityScorer& toxicity,
                      TokenEmbedder& token_embedder) {
  MetricReport report;
  report.count = items.size();
  if (items.empty()) return report;

  std::vector<TokenPair> pairs;
  pairs.reserve(items.size());
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  std::vector<std::string> sources;
  bool have_sources = true;
  for (const auto& item : items) {
    pairs.emplace_back(tokenize(item.hypothesis), tokenize(item.reference));
    hyps.push_back(item.hypothesis);
    refs.push_back(item.reference);
    sources.push_back(item.source);
    have_sources = have_sources && !item.source.empty();
  }

  report.bleu_detail = corpus_bleu_detailed(pairs);
  const auto cider_result = cider(pairs);
  const auto hyp_tox = toxicity_batch(hyps, toxicity);

  double rouge_sum = 0.0;
  double bert_sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [hyp, ref] = pairs[i];
    SampleScores s;
    s.bleu_smoothed = sentence_bleu_smoothed(hyp, ref);
    s.rouge_l_f1 = rouge_l(hyp, ref).f1;
    s.cider = cider_result.per_pair[i];
    if (!hyp.empty() && !ref.empty()) {
      const auto hv = token_embedder.embed_tokens(hyp);
      const auto rv = token_embedder.embed_tokens(ref);
      s.bert_f1 = bert_f1(hv, rv).f1;
    }
    s.toxicity = hyp_tox[i];
    rouge_sum += s.rouge_l_f1;
    bert_sum += s.bert_f1;
    if (!report.per_sample.emplace(items[i].id, s).second) {
      throw InputError("duplicate sample id '" + items[i].id + "' in evaluation set");
    }
  }

  const auto n = static_cast<double>(items.size());
  report.corpus.bleu = report.bleu_detail.score;
  report.corpus.rouge = 100.0 * rouge_sum / n;
  report.corpus.bert_f1 = 100.0 * bert_sum / n;
  report.corpus.cider = cider_result.score;
  report.corpus.toxicity_mean = toxicity_mean_percent(hyp_tox);
  report.reference_toxicity_mean = toxicity_mean_percent(toxicity_batch(refs, toxicity));
  if (have_sources) report.source_toxicity_mean = toxicity_mean_percent(toxicity_batch(sources, toxicity));
  return report;
}

nlohmann::ordered_json to_json(const MetricReport& report, bool bleu_debug) {
  nlohmann::ordered_json j;
  j["count"] = report.count;
  j["corpus"] = {{"bleu", report.corpus.bleu},
                 {"bert_f1", report.corpus.bert_f1},
                 {"rouge", report.corpus.rouge},
                 {"cider", report.corpus.cider},
                 {"toxicity_mean", report.corpus.toxicity_mean}};
  if (report.source_toxicity_mean) j["source_toxicity_mean"] = *report.source_toxicity_mean;
  if (report.reference_toxicity_mean) j["reference_toxicity_mean"] = *report.reference_toxicity_mean;
  if (bleu_debug) {
    const auto& d = report.bleu_detail;
    j["bleu_debug"] = {{"precisions", d.precisions},
                       {"matches", d.stats.matches},
                       {"totals", d.stats.totals},
                       {"hyp_length", d.stats.hyp_length},
                       {"ref_length", d.stats.ref_length},
                       {"brevity_penalty", d.brevity_penalty}};
  }
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, s] : report.per_sample) {
    per[id] = {{"bleu_smoothed", s.bleu_smoothed},
               {"rouge_l_f1", s.rouge_l_f1},
               {"cider", s.cider},
               {"bert_f1", s.bert_f1},
               {"toxicity", s.toxicity}};
  }
  j["per_sample"] = per;
  return j;
}

}  // namespace iclpara
