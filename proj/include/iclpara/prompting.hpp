#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iclpara/corpus.hpp"
#include "iclpara/selection.hpp"

namespace iclpara {

struct Instruction {
  std::string id;  // "<dataset>.<key>", e.g. "appdia.instruction_1"
  std::string text;
  std::string dataset_hint;

  bool operator==(const Instruction&) const = default;
};

enum class TemplateKind { completion, chat };

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view text);

struct PromptSpec {
  std::optional<Instruction> instruction;
  DemoSet demos;
  SamplePair query;
  bool with_context = false;
  TemplateKind template_kind = TemplateKind::completion;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct RenderedPrompt {
  TemplateKind template_kind = TemplateKind::completion;
  std::string text;                   // completion template
  std::vector<ChatMessage> messages;  // chat template
  std::string hash;                   // SHA-256 over the canonical rendering
  std::size_t token_estimate = 0;     // ceil(chars / 4)
  std::size_t demo_count = 0;
};

// Completion layout:
//
//   Instruction: <text>
//   <blank line>
//   Context: <turn 1> <turn 2>        (only with_context and turns present)
//   Sentence: <demo source>
//   Paraphrase: <demo target>
//   ...
//   Sentence: <query source>
//   Paraphrase:
//
// Catalog entries that already start with "Instruction:" are emitted as-is.
// Chat layout: the instruction line becomes the system message, each demo a
// user/assistant pair, and the query the final user message.
RenderedPrompt render(const PromptSpec& spec);

// The instruction line exactly as it appears in a completion prompt.
std::string instruction_line(const Instruction& instruction);

const std::vector<Instruction>& instruction_catalog();
const Instruction& catalog_lookup(std::string_view dataset, std::string_view key);
// Accepts "dataset.key".
const Instruction& catalog_lookup(std::string_view qualified_id);

// Trims, cuts at a following "Sentence:" line, drops a leading "Paraphrase:"
// label and returns the first paragraph. Throws GenerationFailure when nothing remains.
std::string parse_completion(std::string_view raw_model_output);

}  // namespace iclpara
