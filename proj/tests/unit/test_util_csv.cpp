#include <set>
#include <sstream>

#include "doctest.h"
#include "iclpara/csv.hpp"
#include "iclpara/error.hpp"
#include "iclpara/util.hpp"
#include "testing.hpp"

using namespace iclpara;

TEST_CASE("sha256 matches known digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("uniform_below stays in range and covers it") {
  std::mt19937_64 rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto v = uniform_below(rng, 7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("draw_without_replacement is deterministic and distinct") {
  auto a = draw_without_replacement(100, 30, 42);
  auto b = draw_without_replacement(100, 30, 42);
  CHECK(a == b);
  std::set<std::size_t> s(a.begin(), a.end());
  CHECK(s.size() == 30);
  CHECK(*s.rbegin() < 100);
  CHECK(draw_without_replacement(100, 30, 43) != a);
  CHECK(draw_without_replacement(5, 5, 1).size() == 5);
}

TEST_CASE("trim and lower") {
  CHECK(trim("  a b \t\n") == "a b");
  CHECK(trim("") == "");
  CHECK(to_lower("AbC") == "abc");
}

TEST_CASE("format helpers") {
  CHECK(format_fixed(1.23456, 2) == "1.23");
  CHECK(format_general(0.5, 6) == "0.5");
}

TEST_CASE("write_file then read_file round-trips and creates parents") {
  testing::TempDir dir;
  auto p = dir / "a/b/c.txt";
  write_file(p, "hello\n");
  CHECK(read_file(p) == "hello\n");
  CHECK_THROWS_AS(read_file(dir / "missing.txt"), InputError);
}

TEST_CASE("csv reader handles quotes, embedded newlines and CRLF") {
  std::istringstream in("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\r\n\"multi\nline\",z\n\n");
  auto rows = csv::read(in);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].fields[0] == "x, y");
  CHECK(rows[1].fields[1] == "he said \"hi\"");
  CHECK(rows[2].fields[0] == "multi\nline");
  CHECK(rows[2].line == 3);
}

TEST_CASE("csv reader rejects an unterminated quote") {
  std::istringstream in("a,b\n\"open,x\n");
  CHECK_THROWS_AS(csv::read(in), InputError);
}

TEST_CASE("csv escape round-trips through the reader") {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "line\nbreak", ""};
  std::istringstream in(csv::join(fields) + "\n");
  auto rows = csv::read(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].fields == fields);
}
