#include "iclpara/prompting.hpp"

#include <sstream>

#include "iclpara/error.hpp"
#include "iclpara/util.hpp"
#include "json.hpp"

namespace iclpara {

namespace {

constexpr std::string_view kInstructionLabel = "Instruction:";
constexpr std::string_view kSentenceLabel = "Sentence:";
constexpr std::string_view kParaphraseLabel = "Paraphrase:";
constexpr std::string_view kContextLabel = "Context:";

std::string context_line(const SamplePair& s, bool with_context) {
  if (!with_context || s.context.empty()) return {};
  std::string line(kContextLabel);
  for (const auto& turn : s.context) {
    line += ' ';
    line += turn;
  }
  line += '\n';
  return line;
}

std::string sentence_block(const SamplePair& s, bool with_context) {
  return context_line(s, with_context) + std::string(kSentenceLabel) + " " + s.source;
}

void check_spec(const PromptSpec& spec) {
  if (!spec.instruction && spec.demos.demos.empty()) {
    throw InputError("prompt needs an instruction or at least one demonstration");
  }
  for (const auto& d : spec.demos.demos) {
    if (!d.sample.target) {
      throw InputError("demonstration '" + d.sample.id + "' has no target paraphrase");
    }
  }
  if (spec.query.source.empty()) throw InputError("query has an empty source");
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  return kind == TemplateKind::completion ? "completion" : "chat";
}

TemplateKind parse_template_kind(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "completion") return TemplateKind::completion;
  if (t == "chat") return TemplateKind::chat;
  throw InputError("unknown template '" + std::string(text) + "'");
}

std::string instruction_line(const Instruction& instruction) {
  if (starts_with(instruction.text, kInstructionLabel)) return instruction.text;
  return std::string(kInstructionLabel) + " " + instruction.text;
}

RenderedPrompt render(const PromptSpec& spec) {
  check_spec(spec);
  RenderedPrompt out;
  out.template_kind = spec.template_kind;
  out.demo_count = spec.demos.demos.size();

  std::size_t chars = 0;
  if (spec.template_kind == TemplateKind::completion) {
    std::string& t = out.text;
    if (spec.instruction) {
      t += instruction_line(*spec.instruction);
      t += "\n\n";
    }
    for (const auto& d : spec.demos.demos) {
      t += sentence_block(d.sample, spec.with_context);
      t += '\n';
      t += kParaphraseLabel;
      t += ' ';
      t += *d.sample.target;
      t += '\n';
    }
    t += sentence_block(spec.query, spec.with_context);
    t += '\n';
    t += kParaphraseLabel;
    chars = t.size();
    out.hash = sha256_hex("completion\n" + t);
  } else {
    if (spec.instruction) out.messages.push_back({"system", instruction_line(*spec.instruction)});
    for (const auto& d : spec.demos.demos) {
      out.messages.push_back({"user", sentence_block(d.sample, spec.with_context)});
      out.messages.push_back({"assistant", *d.sample.target});
    }
    out.messages.push_back({"user", sentence_block(spec.query, spec.with_context)});
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : out.messages) {
      arr.push_back({{"role", m.role}, {"content", m.content}});
      chars += m.content.size();
    }
    out.hash = sha256_hex("chat\n" + arr.dump());
  }
  out.token_estimate = (chars + 3) / 4;
  return out;
}

const std::vector<Instruction>& instruction_catalog() {
  static const std::vector<Instruction> catalog = {
      {"appdia.instruction_1", "Instruction: Rewrite the following sentence to be inoffensive",
       "appdia"},
      {"appdia.instruction_2",
       "Instruction: Rewrite the following sentence to be inoffensive and ensure that the "
       "paraphrased sentence is similar to the original sentence",
       "appdia"},
      {"appdia.instruction_3",
       "Instruction: Generate a paraphrased sentence that expresses a more balanced viewpoint",
       "appdia"},
      {"appdia.instruction_4", "Instruction: Rewrite the following sentence with a more objective tone",
       "appdia"},
      {"paradetox.instruction_1", "Instruction: Rewrite the following sentence to be inoffensive",
       "paradetox"},
      {"paradetox.instruction_2", "Instruction: Rewrite the following sentence to be not toxic",
       "paradetox"},
      {"capp.instruction_1",
       "The following sentence can contain rude text. Please provide one paraphrased sentence "
       "that is semantically similar to it and is polite.",
       "capp"},
      {"appdia.vicuna_instruction_1",
       "The following sentence contains offensive text. Please provide one paraphrased sentence "
       "that is semantically similar to it and is inoffensive.",
       "appdia"},
      {"paradetox.vicuna_instruction_1",
       "The following sentence contains offensive text. Please provide one paraphrased sentence "
       "that is semantically similar to it and is inoffensive.",
       "paradetox"},
      {"capp.context_instruction_1",
       "Paraphrase only the below Sentence to be polite and semantically similar to the "
       "Sentence. Use the context as as reference but do not include any part of it in the "
       "final paraphrase.",
       "capp"},
  };
  return catalog;
}

const Instruction& catalog_lookup(std::string_view dataset, std::string_view key) {
  const auto wanted = to_lower(trim(dataset)) + "." + to_lower(trim(key));
  for (const auto& entry : instruction_catalog()) {
    if (entry.id == wanted) return entry;
  }
  std::string available;
  for (const auto& entry : instruction_catalog()) {
    if (!available.empty()) available += ", ";
    available += entry.id;
  }
  throw InputError("unknown instruction '" + wanted + "'; available: " + available);
}

const Instruction& catalog_lookup(std::string_view qualified_id) {
  const auto dot = qualified_id.find('.');
  if (dot == std::string_view::npos) return catalog_lookup(qualified_id, "");
  return catalog_lookup(qualified_id.substr(0, dot), qualified_id.substr(dot + 1));
}

std::string parse_completion(std::string_view raw_model_output) {
  std::istringstream lines{std::string(raw_model_output)};
  std::vector<std::string> kept;
  std::string line;
  bool seen_content = false;
  while (std::getline(lines, line)) {
    auto t = trim(line);
    if (seen_content && starts_with(t, kSentenceLabel)) break;
    if (!seen_content && starts_with(t, kParaphraseLabel)) t = trim(t.substr(kParaphraseLabel.size()));
    if (t.empty()) {
      if (seen_content) break;
      continue;
    }
    seen_content = true;
    kept.push_back(std::move(t));
  }
  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) out += '\n';
    out += kept[i];
  }
  if (out.empty()) throw GenerationFailure("model output is empty after cleaning");
  return out;
}

}  // namespace iclpara
