#include "iclpara/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "iclpara/error.hpp"
#include "iclpara/http.hpp"
#include "iclpara/util.hpp"
#include "json.hpp"

namespace iclpara {

using nlohmann::json;

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension)
    : dimension_(dimension) {
  if (dimension_ == 0) throw InputError("embedding dimension must be positive");
}

std::string HashingEmbeddingProvider::id() const {
  return "hashing-bow-" + std::to_string(dimension_);
}

std::vector<double> HashingEmbeddingProvider::embed_one(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  std::istringstream words{to_lower(text)};
  std::string w;
  while (words >> w) v[fnv1a64(w) % dimension_] += 1.0;
  return v;
}

std::vector<std::vector<double>> HashingEmbeddingProvider::embed(
    std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::string model_id,
                                             std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), model_id_(std::move(model_id)), timeout_(timeout) {
  http::parse_url(endpoint_);
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
  const json request = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const auto res = http::post_json(endpoint_, request.dump(), {}, timeout_);
  if (res.status != 200) {
    throw BackendError("embedding endpoint returned " +
                       (res.status ? std::to_string(res.status) : res.transport_error) + ": " +
                       http::excerpt(res.body));
  }
  try {
    auto body = json::parse(res.body);
    auto vectors = body.at("vectors").get<std::vector<std::vector<double>>>();
    if (vectors.size() != texts.size()) {
      throw BackendError("embedding endpoint returned " + std::to_string(vectors.size()) +
                         " vectors for " + std::to_string(texts.size()) + " texts");
    }
    return vectors;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embedding response: ") + e.what() + ": " +
                       http::excerpt(res.body));
  }
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::string provider_id)
    : dimension_(dimension), provider_id_(std::move(provider_id)) {
  if (dimension_ == 0) throw InputError("embedding dimension must be positive");
}

void EmbeddingStore::insert(EmbeddingVector vector) {
  if (vector.values.size() != dimension_) {
    throw InputError("embedding for '" + vector.sample_id + "' has dimension " +
                     std::to_string(vector.values.size()) + ", store expects " +
                     std::to_string(dimension_));
  }
  if (std::abs(l2_norm(vector.values) - 1.0) > kUnitNormTolerance) {
    throw InputError("embedding for '" + vector.sample_id + "' is not unit-norm");
  }
  auto id = vector.sample_id;
  if (!entries_.emplace(id, std::move(vector)).second) {
    throw InputError("duplicate embedding id '" + id + "'");
  }
}

const EmbeddingVector* EmbeddingStore::find(std::string_view sample_id) const {
  auto it = entries_.find(sample_id);
  return it == entries_.end() ? nullptr : &it->second;
}

const EmbeddingVector& EmbeddingStore::at(std::string_view sample_id) const {
  if (const auto* v = find(sample_id)) return *v;
  throw InputError("no embedding for sample '" + std::string(sample_id) + "'");
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

std::vector<double> normalized(std::span<const double> values) {
  const double norm = l2_norm(values);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InputError("cannot normalize a zero or non-finite vector");
  }
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v /= norm;
  return out;
}

EmbedField parse_embed_field(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "source") return EmbedField::source;
  if (t == "target") return EmbedField::target;
  throw InputError("unknown embedding field '" + std::string(text) + "'");
}

EmbeddingStore embed_corpus(const Corpus& corpus, EmbeddingProvider& provider, EmbedField field,
                            const EmbedOptions& options) {
  if (corpus.samples.empty()) throw InputError("cannot embed an empty corpus");
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n = corpus.samples.size();
  const std::size_t batches = (n + batch - 1) / batch;

  std::vector<std::string> texts;
  texts.reserve(n);
  for (const auto& s : corpus.samples) {
    if (field == EmbedField::target && !s.target) {
      throw InputError("sample '" + s.id + "' has no target to embed");
    }
    texts.push_back(field == EmbedField::source ? s.source : *s.target);
  }

  std::vector<std::vector<double>> raw(n);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const auto b = next.fetch_add(1);
      if (b >= batches) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      const auto begin = b * batch;
      const auto end = std::min(n, begin + batch);
      try {
        auto out = provider.embed(std::span<const std::string>(texts).subspan(begin, end - begin));
        if (out.size() != end - begin) throw BackendError("provider returned wrong vector count");
        for (std::size_t i = begin; i < end; ++i) raw[i] = std::move(out[i - begin]);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!first_error) {
          first_error = std::make_exception_ptr(BackendError(
              "embedding provider '" + provider.id() + "' failed for samples " +
              corpus.samples[begin].id + ".." + corpus.samples[end - 1].id + ": " + e.what()));
        }
        return;
      }
    }
  };

  const auto workers = std::clamp<std::size_t>(options.max_in_flight, 1, batches);
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
  }
  if (first_error) std::rethrow_exception(first_error);

  const std::size_t dim = raw.front().size();
  if (dim == 0) throw BackendError("provider returned empty vectors");
  EmbeddingStore store(dim, provider.id());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = corpus.samples[i].id;
    if (raw[i].size() != dim) {
      throw BackendError("provider returned dimension " + std::to_string(raw[i].size()) +
                         " for sample '" + id + "', expected " + std::to_string(dim));
    }
    std::vector<double> unit;
    try {
      unit = normalized(raw[i]);
    } catch (const InputError&) {
      throw InputError("cannot normalize zero embedding for sample '" + id + "'");
    }
    store.insert(EmbeddingVector{id, std::move(unit)});
  }
  return store;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("cosine on vectors of dimension " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(a.values, b.values);
}

std::vector<std::pair<std::string, double>> similarities(const EmbeddingVector& query,
                                                         const EmbeddingStore& store,
                                                         std::span<const std::string> pool) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(pool.size());
  for (const auto& id : pool) out.emplace_back(id, cosine(query, store.at(id)));
  return out;
}

std::string serialize_store(const EmbeddingStore& store) {
  std::string out;
  nlohmann::ordered_json header;
  header["dimension"] = store.dimension();
  header["provider_id"] = store.provider_id();
  out += header.dump();
  out += '\n';
  for (const auto& [id, vec] : store.entries()) {
    out += "{\"id\":";
    out += json(id).dump();
    out += ",\"v\":[";
    for (std::size_t i = 0; i < vec.values.size(); ++i) {
      if (i) out += ',';
      out += format_general(vec.values[i], 9);
    }
    out += "]}\n";
  }
  return out;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  write_file(path, serialize_store(store));
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read embedding store: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("embedding store is empty: " + path.string());
  try {
    const auto header = json::parse(line);
    EmbeddingStore store(header.at("dimension").get<std::size_t>(),
                         header.at("provider_id").get<std::string>());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto obj = json::parse(line);
      EmbeddingVector v{obj.at("id").get<std::string>(), obj.at("v").get<std::vector<double>>()};
      try {
        store.insert(std::move(v));
      } catch (const InputError& e) {
        throw InputError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return store;
  } catch (const json::exception& e) {
    throw InputError("malformed embedding store " + path.string() + ": " + e.what());
  }
}

}  // namespace iclpara
