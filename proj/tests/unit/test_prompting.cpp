#include <algorithm>

#include "doctest.h"
#include "golden.hpp"
#include "iclpara/error.hpp"
#include "iclpara/prompting.hpp"
#include "iclpara/util.hpp"

using namespace iclpara;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("golden prompt files are reproduced byte for byte") {
  for (const auto& g : testing::golden_cases()) {
    CAPTURE(g.file);
    const std::string expected = read_file(std::string(ICLPARA_FIXTURE_DIR) + "/prompts/" + g.file);
    CHECK(render(g.spec).text == expected);
  }
}

TEST_CASE("rendering is deterministic and the hash tracks content") {
  auto cases = testing::golden_cases();
  auto a = render(cases[0].spec);
  auto b = render(cases[0].spec);
  CHECK(a.hash == b.hash);
  CHECK(a.hash.size() == 64);
  CHECK(a.demo_count == 2);
  CHECK(a.token_estimate == (a.text.size() + 3) / 4);
  auto changed = cases[0].spec;
  changed.demos.demos[0].sample.target = "Are you okay?";
  CHECK(render(changed).hash != a.hash);
  auto chat = cases[0].spec;
  chat.template_kind = TemplateKind::chat;
  CHECK(render(chat).hash != a.hash);
}

TEST_CASE("demo count and instruction token properties") {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 200; ++iter) {
    PromptSpec spec;
    const bool with_instruction = rng() % 2;
    if (with_instruction) spec.instruction = catalog_lookup("appdia.instruction_1");
    const std::size_t n = (with_instruction ? 0 : 1) + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> ctx;
      if (rng() % 2) ctx = {"turn a " + std::to_string(i), "turn b"};
      spec.demos.demos.push_back(testing::demo("d" + std::to_string(i), "src " + std::to_string(i),
                                               "tgt " + std::to_string(i), ctx));
    }
    spec.query = testing::golden_query(rng() % 2 ? std::vector<std::string>{"hello"} : std::vector<std::string>{});
    spec.with_context = rng() % 2;
    auto r = render(spec);
    CHECK(count_of(r.text, "Paraphrase:") - 1 == n);
    CHECK(r.demo_count == n);
    CHECK((r.text.find("Instruction:") != std::string::npos) == with_instruction);
    std::size_t expected_ctx = 0;
    if (spec.with_context) {
      for (const auto& d : spec.demos.demos) expected_ctx += d.sample.context.empty() ? 0 : 1;
      expected_ctx += spec.query.context.empty() ? 0 : 1;
    }
    CHECK(count_of(r.text, "Context:") == expected_ctx);
    CHECK(r.text.ends_with("\nParaphrase:"));
  }
}

TEST_CASE("invalid specs are rejected") {
  PromptSpec empty;
  empty.query = testing::golden_query();
  CHECK_THROWS_AS(render(empty), InputError);
  PromptSpec missing_target;
  missing_target.query = testing::golden_query();
  auto d = testing::demo("d", "x", "y");
  d.sample.target.reset();
  missing_target.demos.demos.push_back(d);
  CHECK_THROWS_AS(render(missing_target), InputError);
}

TEST_CASE("chat template maps instruction to system and demos to turns") {
  auto spec = testing::golden_cases()[3].spec;
  spec.template_kind = TemplateKind::chat;
  auto r = render(spec);
  CHECK(r.text.empty());
  REQUIRE(r.messages.size() == 6);
  CHECK(r.messages[0] == ChatMessage{"system", "Instruction: Paraphrase the following sentence to be more polite."});
  CHECK(r.messages[1] ==
        ChatMessage{"user", "Context: Where were you last night? I was at the bar again.\nSentence: Drunk again?"});
  CHECK(r.messages[2] == ChatMessage{"assistant", "It seems you are drunk again."});
  CHECK(r.messages[3] == ChatMessage{"user", "Sentence: Get out of the way."});
  CHECK(r.messages[4] == ChatMessage{"assistant", "Can you please step aside?"});
  CHECK(r.messages[5] == ChatMessage{"user", "Context: Hi there. I need that chair.\nSentence: What's the matter with you?"});
}

TEST_CASE("instruction catalog holds the verbatim strings") {
  CHECK(catalog_lookup("appdia", "instruction_1").text == "Instruction: Rewrite the following sentence to be inoffensive");
  CHECK(catalog_lookup("appdia.instruction_2").text ==
        "Instruction: Rewrite the following sentence to be inoffensive and ensure that the paraphrased sentence is "
        "similar to the original sentence");
  CHECK(catalog_lookup("appdia.instruction_3").text ==
        "Instruction: Generate a paraphrased sentence that expresses a more balanced viewpoint");
  CHECK(catalog_lookup("appdia.instruction_4").text ==
        "Instruction: Rewrite the following sentence with a more objective tone");
  CHECK(catalog_lookup("paradetox.instruction_1").text ==
        "Instruction: Rewrite the following sentence to be inoffensive");
  CHECK(catalog_lookup("paradetox.instruction_2").text == "Instruction: Rewrite the following sentence to be not toxic");
  CHECK(catalog_lookup("capp.instruction_1").text ==
        "The following sentence can contain rude text. Please provide one paraphrased sentence that is semantically "
        "similar to it and is polite.");
  CHECK(catalog_lookup("appdia.vicuna_instruction_1").text ==
        "The following sentence contains offensive text. Please provide one paraphrased sentence that is "
        "semantically similar to it and is inoffensive.");
  CHECK(catalog_lookup("capp", "context_instruction_1").text.starts_with("Paraphrase only the below Sentence"));
  for (const auto& i : instruction_catalog()) CHECK(trim(i.text) == i.text);
}

TEST_CASE("catalog entries with their own label are not prefixed twice") {
  CHECK(instruction_line(catalog_lookup("appdia.instruction_1")) ==
        "Instruction: Rewrite the following sentence to be inoffensive");
  CHECK(instruction_line(catalog_lookup("capp.instruction_1")).starts_with("Instruction: The following"));
}

TEST_CASE("unknown instruction lists available keys") {
  try {
    catalog_lookup("appdia", "instruction_9");
    FAIL("expected error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("appdia.instruction_1") != std::string::npos);
  }
}

TEST_CASE("parse_completion examples") {
  CHECK(parse_completion(" Please step aside.\n") == "Please step aside.");
  CHECK(parse_completion("Please step aside.\nSentence: next one\nParaphrase: x") == "Please step aside.");
  CHECK(parse_completion("Paraphrase: Please step aside.") == "Please step aside.");
  CHECK(parse_completion("\n\nFirst line\nsecond line\n\nignored") == "First line\nsecond line");
  CHECK_THROWS_AS(parse_completion("\n\n"), GenerationFailure);
  CHECK_THROWS_AS(parse_completion("   "), GenerationFailure);
}
