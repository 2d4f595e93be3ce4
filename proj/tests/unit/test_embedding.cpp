#include <cmath>

#include "doctest.h"
#include "iclpara/embedding.hpp"
#include "iclpara/error.hpp"
#include "json.hpp"
#include "testing.hpp"

using namespace iclpara;

TEST_CASE("hashing provider is deterministic and case-insensitive") {
  HashingEmbeddingProvider p(64);
  CHECK(p.embed_one("You idiot") == p.embed_one("you IDIOT"));
  CHECK(p.id() == "hashing-bow-64");
  auto v = p.embed_one("a a b");
  double sum = 0;
  for (double x : v) sum += x;
  CHECK(sum == 3.0);
}

TEST_CASE("store rejects wrong dimension, non-unit vectors and duplicates") {
  EmbeddingStore s(2, "p");
  s.insert({"a", {1.0, 0.0}});
  CHECK_THROWS_AS(s.insert({"b", {1.0, 0.0, 0.0}}), InputError);
  CHECK_THROWS_AS(s.insert({"b", {1.0, 1.0}}), InputError);
  try {
    s.insert({"a", {0.0, 1.0}});
    FAIL("expected duplicate error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  CHECK(s.find("a") != nullptr);
  CHECK(s.find("zz") == nullptr);
  CHECK_THROWS_AS(s.at("zz"), InputError);
}

TEST_CASE("cosine is symmetric, bounded and checks dimensions") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(16), b(16);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    a = normalized(a);
    b = normalized(b);
    const double ab = cosine(a, b);
    CHECK(ab == cosine(b, a));
    CHECK(ab <= 1.0);
    CHECK(ab >= -1.0);
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::vector<double> x{1.0}, y{1.0, 0.0};
  CHECK_THROWS_AS(cosine(x, y), InputError);
}

TEST_CASE("normalized rejects zero and non-finite vectors") {
  std::vector<double> z{0.0, 0.0};
  CHECK_THROWS_AS(normalized(z), InputError);
  std::vector<double> inf{INFINITY, 1.0};
  CHECK_THROWS_AS(normalized(inf), InputError);
  std::vector<double> v{3.0, 4.0};
  auto u = normalized(v);
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(l2_norm(u) == doctest::Approx(1.0));
}

TEST_CASE("embed_corpus is independent of batching and parallelism") {
  Corpus c = testing::make_split_corpus(53, 7);
  HashingEmbeddingProvider p(128);
  auto a = embed_corpus(c, p, EmbedField::source, {1, 1});
  auto b = embed_corpus(c, p, EmbedField::source, {8, 4});
  CHECK(a == b);
  CHECK(a.size() == 60);
  for (const auto& [id, v] : a.entries()) CHECK(std::abs(l2_norm(v.values) - 1.0) <= kUnitNormTolerance);
}

namespace {

class ZeroForOne final : public EmbeddingProvider {
 public:
  std::string id() const override { return "zero"; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(t == "bad" ? std::vector<double>{0, 0} : std::vector<double>{1, 2});
    return out;
  }
};

class Failing final : public EmbeddingProvider {
 public:
  std::string id() const override { return "failing"; }
  std::vector<std::vector<double>> embed(std::span<const std::string>) override {
    throw BackendError("boom");
  }
};

}  // namespace

TEST_CASE("zero embedding error names the sample") {
  Corpus c;
  c.samples.push_back({"ok", "fine", "x", {}, Split::train});
  c.samples.push_back({"z1", "bad", "x", {}, Split::train});
  ZeroForOne p;
  try {
    embed_corpus(c, p);
    FAIL("expected error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()) == "cannot normalize zero embedding for sample 'z1'");
  }
}

TEST_CASE("provider failure names the failing id range") {
  Corpus c = testing::make_split_corpus(3, 0);
  Failing p;
  try {
    embed_corpus(c, p, EmbedField::source, {2, 1});
    FAIL("expected error");
  } catch (const BackendError& e) {
    CHECK(std::string(e.what()).find("train-00000..train-00001") != std::string::npos);
  }
}

TEST_CASE("store save/load round-trip") {
  testing::TempDir dir;
  Corpus c = testing::make_split_corpus(10, 2);
  HashingEmbeddingProvider p(32);
  auto s = embed_corpus(c, p);
  save_store(s, dir / "store.jsonl");
  auto back = load_store(dir / "store.jsonl");
  CHECK(back.dimension() == 32);
  CHECK(back.provider_id() == s.provider_id());
  REQUIRE(back.size() == s.size());
  for (const auto& [id, v] : s.entries()) {
    const auto& w = back.at(id).values;
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(v.values[i]).epsilon(1e-8));
  }
}

TEST_CASE("similarities follow pool order") {
  EmbeddingStore s(2, "p");
  s.insert({"q", {1.0, 0.0}});
  s.insert({"a", {0.0, 1.0}});
  s.insert({"b", normalized(std::vector<double>{1.0, 1.0})});
  std::vector<std::string> pool{"b", "a"};
  auto sims = similarities(s.at("q"), s, pool);
  REQUIRE(sims.size() == 2);
  CHECK(sims[0].first == "b");
  CHECK(sims[0].second == doctest::Approx(std::sqrt(0.5)));
  CHECK(sims[1].second == doctest::Approx(0.0));
}

TEST_CASE("http embedding provider talks to a local server") {
  testing::LocalServer srv;
  srv.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto& t : body["texts"]) vectors.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  srv.start();
  HttpEmbeddingProvider p(srv.base_url() + "/embed", "test-model");
  Corpus c = testing::make_split_corpus(5, 1);
  auto store = embed_corpus(c, p, EmbedField::source, {2, 2});
  CHECK(store.size() == 6);
  CHECK(store.provider_id() == "test-model");
}
