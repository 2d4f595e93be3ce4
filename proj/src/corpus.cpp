#include "iclpara/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "iclpara/csv.hpp"
#include "iclpara/error.hpp"
#include "iclpara/util.hpp"
#include "json.hpp"

namespace iclpara {

namespace {

using nlohmann::json;

std::string row_label(std::size_t row, std::size_t line) {
  return "row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

void validate_and_push(Corpus& corpus, SamplePair sample, std::size_t row, std::size_t line,
                       std::unordered_set<std::string>& seen) {
  if (sample.source.empty()) {
    throw InputError("empty source in " + row_label(row, line));
  }
  if (sample.context.size() > 2) {
    throw InputError("more than two context turns in " + row_label(row, line));
  }
  for (const auto& turn : sample.context) {
    if (turn.empty()) throw InputError("empty context turn in " + row_label(row, line));
  }
  if (sample.id.empty()) {
    // Synthesized ids depend only on the file position, so reloads are stable.
    sample.id = std::string(to_string(sample.split)) + "-" + std::to_string(row - 1);
  }
  if (!seen.insert(sample.id).second) {
    throw InputError("duplicate id '" + sample.id + "' in " + row_label(row, line));
  }
  corpus.samples.push_back(std::move(sample));
}

Corpus parse_csv(std::istream& in, const ColumnMapping& mapping, std::string name) {
  auto rows = csv::read(in);
  if (rows.empty()) throw InputError("CSV input has no header row");

  std::unordered_map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    columns.emplace(trim(rows[0].fields[i]), i);
  }
  auto column = [&](const std::string& key) -> std::optional<std::size_t> {
    if (key.empty()) return std::nullopt;
    auto it = columns.find(key);
    if (it == columns.end()) return std::nullopt;
    return it->second;
  };
  const auto source_col = column(mapping.source);
  if (!source_col) throw InputError("missing mapped source column '" + mapping.source + "'");
  const auto id_col = column(mapping.id);
  const auto target_col = column(mapping.target);
  const auto ctx1_col = column(mapping.context_1);
  const auto ctx2_col = column(mapping.context_2);
  const auto split_col = column(mapping.split);

  Corpus corpus;
  corpus.name = std::move(name);
  corpus.metadata["format"] = "csv";
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r].fields;
    auto cell = [&](std::optional<std::size_t> col) -> std::string {
      if (!col || *col >= fields.size()) return {};
      return trim(fields[*col]);
    };
    if (fields.size() != rows[0].fields.size()) {
      throw InputError("expected " + std::to_string(rows[0].fields.size()) + " fields, got " +
                       std::to_string(fields.size()) + " in " + row_label(r, rows[r].line));
    }
    SamplePair s;
    s.id = cell(id_col);
    s.source = cell(source_col);
    if (auto t = cell(target_col); target_col && !t.empty()) s.target = std::move(t);
    for (auto col : {ctx1_col, ctx2_col}) {
      if (auto turn = cell(col); !turn.empty()) s.context.push_back(std::move(turn));
    }
    const auto split_text = cell(split_col);
    try {
      s.split = split_text.empty() ? mapping.default_split : parse_split(split_text);
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + " in " + row_label(r, rows[r].line));
    }
    validate_and_push(corpus, std::move(s), r, rows[r].line, seen);
  }
  return corpus;
}

std::string json_string_field(const json& obj, const std::string& key, std::size_t row,
                              bool& present) {
  present = false;
  if (key.empty()) return {};
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw InputError("key '" + key + "' is not a string in " + row_label(row, row));
  }
  present = true;
  return trim(it->get<std::string>());
}

Corpus parse_jsonl(std::istream& in, const ColumnMapping& mapping, std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  corpus.metadata["format"] = "jsonl";
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("invalid JSON in " + row_label(row, line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw InputError("expected a JSON object in " + row_label(row, line_no));
    bool present = false;
    json_string_field(obj, mapping.source, row, present);
    if (!present) {
      throw InputError("missing mapped source key '" + mapping.source + "' in " +
                       row_label(row, line_no));
    }
    SamplePair s;
    s.id = json_string_field(obj, mapping.id, row, present);
    s.source = json_string_field(obj, mapping.source, row, present);
    auto target = json_string_field(obj, mapping.target, row, present);
    if (present && !target.empty()) s.target = std::move(target);
    if (auto it = obj.find(mapping.context); !mapping.context.empty() && it != obj.end() &&
                                             !it->is_null()) {
      if (!it->is_array()) {
        throw InputError("context must be an array in " + row_label(row, line_no));
      }
      for (const auto& turn : *it) {
        if (!turn.is_string()) {
          throw InputError("context entries must be strings in " + row_label(row, line_no));
        }
        s.context.push_back(trim(turn.get<std::string>()));
      }
    }
    const auto split_text = json_string_field(obj, mapping.split, row, present);
    try {
      s.split = split_text.empty() ? mapping.default_split : parse_split(split_text);
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + " in " + row_label(row, line_no));
    }
    validate_and_push(corpus, std::move(s), row, line_no, seen);
  }
  return corpus;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "train") return Split::train;
  if (t == "validation" || t == "valid" || t == "val" || t == "dev") return Split::validation;
  if (t == "test") return Split::test;
  throw InputError("unknown split '" + std::string(text) + "'");
}

std::vector<SamplePair> Corpus::split(Split which) const {
  std::vector<SamplePair> out;
  for (const auto& s : samples) {
    if (s.split == which) out.push_back(s);
  }
  return out;
}

const SamplePair* Corpus::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string_view to_string(CorpusFormat format) {
  return format == CorpusFormat::csv ? "csv" : "jsonl";
}

CorpusFormat parse_format(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "csv") return CorpusFormat::csv;
  if (t == "jsonl" || t == "json") return CorpusFormat::jsonl;
  throw InputError("unknown corpus format '" + std::string(text) + "' (expected csv or jsonl)");
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = to_lower(path.extension().string());
  if (ext == ".csv") return CorpusFormat::csv;
  if (ext == ".jsonl" || ext == ".json") return CorpusFormat::jsonl;
  throw InputError("cannot infer corpus format from '" + path.string() + "'");
}

Corpus parse_corpus(std::istream& in, CorpusFormat format, const ColumnMapping& mapping,
                    std::string name) {
  return format == CorpusFormat::csv ? parse_csv(in, mapping, std::move(name))
                                     : parse_jsonl(in, mapping, std::move(name));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read corpus file: " + path.string());
  try {
    auto corpus = parse_corpus(in, format, mapping, path.stem().string());
    corpus.metadata["source_path"] = path.string();
    return corpus;
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string serialize_corpus(const Corpus& corpus, CorpusFormat format) {
  std::ostringstream out;
  if (format == CorpusFormat::csv) {
    out << "id,source,target,context_1,context_2,split\n";
    for (const auto& s : corpus.samples) {
      out << csv::join({s.id, s.source, s.target.value_or(""),
                        s.context.size() > 0 ? s.context[0] : "",
                        s.context.size() > 1 ? s.context[1] : "", std::string(to_string(s.split))})
          << '\n';
    }
    return out.str();
  }
  for (const auto& s : corpus.samples) {
    nlohmann::ordered_json obj;
    obj["id"] = s.id;
    obj["source"] = s.source;
    if (s.target) obj["target"] = *s.target;
    obj["context"] = s.context;
    obj["split"] = to_string(s.split);
    out << obj.dump() << '\n';
  }
  return out.str();
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  write_file(path, serialize_corpus(corpus, format));
}

std::size_t subsample_size(double fraction, std::size_t train_size) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("train fraction must lie in (0, 1], got " + format_general(fraction, 6));
  }
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  const auto k = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(train_size) + 1e-9));
  return std::max<std::size_t>(1, std::min(k, train_size));
}

Corpus subsample_train(const Corpus& corpus, const SubsamplePlan& plan) {
  std::vector<std::size_t> train_positions;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    if (corpus.samples[i].split == Split::train) train_positions.push_back(i);
  }
  if (train_positions.empty()) throw InputError("corpus has no train samples to subsample");
  const auto k = subsample_size(plan.fraction, train_positions.size());

  auto chosen = draw_without_replacement(train_positions.size(), k, plan.seed);
  std::vector<bool> keep(corpus.samples.size(), true);
  for (auto pos : train_positions) keep[pos] = false;
  for (auto c : chosen) keep[train_positions[c]] = true;

  Corpus out;
  out.name = corpus.name;
  out.metadata = corpus.metadata;
  out.metadata["train_fraction"] = format_shortest(plan.fraction);
  out.metadata["subsample_seed"] = std::to_string(plan.seed);
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    if (keep[i]) out.samples.push_back(corpus.samples[i]);
  }
  return out;
}

SplitCounts split_counts(const Corpus& corpus) {
  SplitCounts c;
  for (const auto& s : corpus.samples) {
    switch (s.split) {
      case Split::train: ++c.train; break;
      case Split::validation: ++c.validation; break;
      case Split::test: ++c.test; break;
    }
  }
  return c;
}

}  // namespace iclpara
