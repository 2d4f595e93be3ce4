#pragma once

// Specs behind the golden prompt files in tests/fixtures/prompts.

#include <string>
#include <utility>
#include <vector>

#include "iclpara/prompting.hpp"

namespace testing {

inline iclpara::Instruction polite_instruction() {
  return {"example.polite", "Paraphrase the following sentence to be more polite.", "example"};
}

inline iclpara::Demo demo(std::string id, std::string source, std::string target,
                          std::vector<std::string> context = {}) {
  iclpara::Demo d;
  d.sample = {std::move(id), std::move(source), std::move(target), std::move(context), iclpara::Split::train};
  return d;
}

inline iclpara::SamplePair golden_query(std::vector<std::string> context = {}) {
  return {"q", "What's the matter with you?", std::nullopt, std::move(context), iclpara::Split::test};
}

struct GoldenCase {
  std::string file;
  iclpara::PromptSpec spec;
};

inline std::vector<GoldenCase> golden_cases() {
  using iclpara::PromptSpec;
  std::vector<GoldenCase> out;

  PromptSpec two;
  two.instruction = polite_instruction();
  two.demos.demos = {demo("d1", "What's wrong with you?", "Are you feeling alright?"),
                     demo("d2", "Get out of the way.", "Can you please step aside?")};
  two.query = golden_query();
  out.push_back({"instruction_two_demos.txt", two});

  PromptSpec none;
  none.demos.demos = {demo("d1", "What's wrong with you?", "Are you feeling alright?")};
  none.query = golden_query();
  out.push_back({"no_instruction.txt", none});

  PromptSpec zero;
  zero.instruction = polite_instruction();
  zero.query = golden_query();
  out.push_back({"zero_demos.txt", zero});

  PromptSpec ctx;
  ctx.instruction = polite_instruction();
  ctx.with_context = true;
  ctx.demos.demos = {
      demo("d1", "Drunk again?", "It seems you are drunk again.", {"Where were you last night?", "I was at the bar again."}),
      demo("d2", "Get out of the way.", "Can you please step aside?")};
  ctx.query = golden_query({"Hi there.", "I need that chair."});
  out.push_back({"context.txt", ctx});
  return out;
}

}  // namespace testing
