#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iclpara/corpus.hpp"
#include "iclpara/embedding.hpp"

namespace iclpara {

enum class SelectionKind { random, least_similar, most_similar };
enum class DemoOrder { ascending, descending, as_drawn };

std::string_view to_string(SelectionKind kind);
std::string_view to_string(DemoOrder order);
SelectionKind parse_selection_kind(std::string_view text);
DemoOrder parse_demo_order(std::string_view text);

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::most_similar;
  DemoOrder order = DemoOrder::descending;
  int n = 0;
  std::uint64_t seed = 0;  // random only

  bool operator==(const SelectionStrategy&) const = default;
};

// Throws InputError when n < 0 or as_drawn is paired with a similarity kind.
void validate(const SelectionStrategy& strategy);

// "Most Similar (Descending Order)", ..., "Random".
std::string strategy_label(const SelectionStrategy& strategy);
// Inverse of strategy_label; also accepts "most_similar:descending" style.
SelectionStrategy parse_strategy(std::string_view text);
// The five strategies compared in the ablation: most/least x descending/ascending, random.
std::vector<SelectionStrategy> canonical_strategies(int n, std::uint64_t seed = 0);

// Per-query seed for random draws, so every query gets its own draw under one run seed.
std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id);

struct Demo {
  SamplePair sample;
  std::optional<double> score;  // absent for random draws kept as drawn

  bool operator==(const Demo&) const = default;
};

struct DemoSet {
  std::vector<Demo> demos;
  std::string query_id;
  SelectionStrategy strategy;

  bool operator==(const DemoSet&) const = default;
};

// Picks min(n, |pool \ {query}|) demos for `query`. Similarity ties break by
// ascending sample id; ascending order is the exact reverse of descending.
DemoSet select_demos(const SamplePair& query, std::span<const SamplePair> pool,
                     const EmbeddingStore& store, const SelectionStrategy& strategy);

}  // namespace iclpara
