#include <set>
#include <sstream>

#include "doctest.h"
#include "iclpara/corpus.hpp"
#include "iclpara/error.hpp"
#include "iclpara/util.hpp"
#include "testing.hpp"

using namespace iclpara;

namespace {

Corpus parse(const std::string& text, CorpusFormat fmt, const ColumnMapping& m = {}) {
  std::istringstream in(text);
  return parse_corpus(in, fmt, m);
}

std::string error_of(const std::string& text, CorpusFormat fmt, const ColumnMapping& m = {}) {
  try {
    parse(text, fmt, m);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv corpus with context and splits") {
  auto c = parse(
      "id,source,target,context_1,context_2,split\n"
      "a,you idiot,you are wrong,hello,how are you,train\n"
      "b,shut up,please stop,,,test\n"
      "c,go away,,,,dev\n",
      CorpusFormat::csv);
  REQUIRE(c.samples.size() == 3);
  CHECK(c.samples[0].context == std::vector<std::string>{"hello", "how are you"});
  CHECK(c.samples[1].context.empty());
  CHECK(c.samples[1].split == Split::test);
  CHECK_FALSE(c.samples[2].target.has_value());
  CHECK(c.samples[2].split == Split::validation);
  CHECK(split_counts(c) == SplitCounts{1, 1, 1});
  CHECK(c.find("b")->source == "shut up");
  CHECK(c.find("zz") == nullptr);
}

TEST_CASE("missing ids are synthesized from the split and row") {
  auto c = parse("source,target\nfoo,bar\nbaz,qux\n", CorpusFormat::csv);
  CHECK(c.samples[0].id == "train-0");
  CHECK(c.samples[1].id == "train-1");
}

TEST_CASE("custom column mapping") {
  ColumnMapping m;
  m.source = "offensive";
  m.target = "polite";
  m.default_split = Split::test;
  auto c = parse("offensive,polite\nrude,nice\n", CorpusFormat::csv, m);
  CHECK(c.samples[0].source == "rude");
  CHECK(c.samples[0].target == "nice");
  CHECK(c.samples[0].split == Split::test);
}

TEST_CASE("validation errors name the row") {
  CHECK(error_of("id,source\na,\n", CorpusFormat::csv).find("empty source in row 1") != std::string::npos);
  CHECK(error_of("id,source\na,x\na,y\n", CorpusFormat::csv).find("duplicate id 'a'") != std::string::npos);
  CHECK(error_of("id,text\na,x\n", CorpusFormat::csv).find("missing mapped source column 'source'") !=
        std::string::npos);
  CHECK(error_of("id,source\na,x,extra\n", CorpusFormat::csv).find("row 1") != std::string::npos);
  CHECK(error_of("id,source,split\na,x,holdout\n", CorpusFormat::csv).find("unknown split") != std::string::npos);
  CHECK(error_of("{\"id\":\"a\",\"source\":\"x\",\"context\":[\"1\",\"2\",\"3\"]}\n", CorpusFormat::jsonl)
            .find("more than two context turns") != std::string::npos);
  CHECK(error_of("{\"id\":\"a\",\"source\":\"x\",\"context\":[\"\"]}\n", CorpusFormat::jsonl)
            .find("empty context turn") != std::string::npos);
  CHECK(error_of("{\"id\":\"a\"}\n", CorpusFormat::jsonl).find("missing mapped source key") != std::string::npos);
  CHECK(error_of("not json\n", CorpusFormat::jsonl).find("invalid JSON in row 1") != std::string::npos);
}

TEST_CASE("jsonl and csv twins load identically") {
  const auto csv_text =
      "id,source,target,context_1,context_2,split\n"
      "a,\"you, idiot\",you are wrong,hello,how are you,train\n"
      "b,shut up,please stop,,,test\n";
  const auto jsonl_text =
      "{\"id\":\"a\",\"source\":\"you, idiot\",\"target\":\"you are wrong\",\"context\":[\"hello\",\"how are you\"],\"split\":\"train\"}\n"
      "{\"id\":\"b\",\"source\":\"shut up\",\"target\":\"please stop\",\"split\":\"test\"}\n";
  auto a = parse(csv_text, CorpusFormat::csv);
  auto b = parse(jsonl_text, CorpusFormat::jsonl);
  CHECK(a.samples == b.samples);
}

TEST_CASE("write then load round-trips field-identically in both formats") {
  testing::TempDir dir;
  Corpus c = testing::make_split_corpus(20, 5);
  c.samples[0].context = {"first, turn", "second \"turn\""};
  c.samples[1].target.reset();
  for (auto fmt : {CorpusFormat::csv, CorpusFormat::jsonl}) {
    auto p = dir / (std::string("c.") + std::string(to_string(fmt)));
    write_corpus(c, p, fmt);
    auto back = load_corpus(p, fmt);
    CHECK(back.samples == c.samples);
  }
}

TEST_CASE("load errors are prefixed with the path") {
  testing::TempDir dir;
  write_file(dir / "bad.csv", "id,source\na,\n");
  try {
    load_corpus(dir / "bad.csv", CorpusFormat::csv);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
  }
  CHECK_THROWS_AS(load_corpus(dir / "none.csv", CorpusFormat::csv), InputError);
}

TEST_CASE("format inference and split parsing") {
  CHECK(format_from_path("x.csv") == CorpusFormat::csv);
  CHECK(format_from_path("x.JSONL") == CorpusFormat::jsonl);
  CHECK_THROWS_AS(format_from_path("x.txt"), InputError);
  CHECK(parse_split("Valid") == Split::validation);
  CHECK_THROWS_AS(parse_split("holdout"), InputError);
}

TEST_CASE("subsample_size arithmetic") {
  CHECK(subsample_size(0.1, 1584) == 158);
  CHECK(subsample_size(0.5, 1584) == 792);
  CHECK(subsample_size(1.0, 1584) == 1584);
  CHECK(subsample_size(0.0001, 10) == 1);
  CHECK_THROWS_AS(subsample_size(0.0, 10), InputError);
  CHECK_THROWS_AS(subsample_size(1.5, 10), InputError);
}

TEST_CASE("subsample_train draws a deterministic subset and leaves other splits alone") {
  Corpus c = testing::make_split_corpus(1584, 199);
  auto a = subsample_train(c, {0.1, 5});
  auto b = subsample_train(c, {0.1, 5});
  auto other = subsample_train(c, {0.1, 6});
  CHECK(split_counts(a).train == 158);
  CHECK(split_counts(a).test == 199);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != other.samples);
  CHECK(a.metadata.at("train_fraction") == "0.1");

  // Subset of the original, ingestion order preserved.
  std::size_t cursor = 0;
  for (const auto& s : a.samples) {
    while (cursor < c.samples.size() && c.samples[cursor].id != s.id) ++cursor;
    REQUIRE(cursor < c.samples.size());
    CHECK(c.samples[cursor] == s);
  }
  CHECK(subsample_train(c, {1.0, 5}).samples == c.samples);
}

TEST_CASE("subsample property: sizes and membership over random fractions") {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 1 + rng() % 60;
    Corpus c = testing::make_split_corpus(n, 3, rng());
    const double f = static_cast<double>(1 + rng() % 1000) / 1000.0;
    auto sub = subsample_train(c, {f, rng()});
    const auto train = sub.split(Split::train);
    CHECK(train.size() == subsample_size(f, n));
    std::set<std::string> ids;
    for (const auto& s : train) ids.insert(s.id);
    CHECK(ids.size() == train.size());
  }
}

TEST_CASE("subsampling an empty train split fails") {
  Corpus c;
  c.samples.push_back({"t", "x", "y", {}, Split::test});
  CHECK_THROWS_AS(subsample_train(c, {0.5, 1}), InputError);
}
