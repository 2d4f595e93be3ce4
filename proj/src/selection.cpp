#include "iclpara/selection.hpp"

#include <algorithm>

#include "iclpara/error.hpp"
#include "iclpara/util.hpp"

namespace iclpara {

std::string_view to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::random: return "random";
    case SelectionKind::least_similar: return "least_similar";
    case SelectionKind::most_similar: return "most_similar";
  }
  return "random";
}

std::string_view to_string(DemoOrder order) {
  switch (order) {
    case DemoOrder::ascending: return "ascending";
    case DemoOrder::descending: return "descending";
    case DemoOrder::as_drawn: return "as_drawn";
  }
  return "as_drawn";
}

SelectionKind parse_selection_kind(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "random") return SelectionKind::random;
  if (t == "least_similar" || t == "least") return SelectionKind::least_similar;
  if (t == "most_similar" || t == "most") return SelectionKind::most_similar;
  throw InputError("unknown selection kind '" + std::string(text) + "'");
}

DemoOrder parse_demo_order(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "ascending" || t == "asc") return DemoOrder::ascending;
  if (t == "descending" || t == "desc") return DemoOrder::descending;
  if (t == "as_drawn" || t == "drawn") return DemoOrder::as_drawn;
  throw InputError("unknown demo order '" + std::string(text) + "'");
}

void validate(const SelectionStrategy& strategy) {
  if (strategy.n < 0) throw InputError("demo count must be non-negative");
  if (strategy.order == DemoOrder::as_drawn && strategy.kind != SelectionKind::random) {
    throw InputError("as_drawn order is only valid with random selection");
  }
}

std::string strategy_label(const SelectionStrategy& strategy) {
  std::string label;
  switch (strategy.kind) {
    case SelectionKind::random: label = "Random"; break;
    case SelectionKind::least_similar: label = "Least Similar"; break;
    case SelectionKind::most_similar: label = "Most Similar"; break;
  }
  switch (strategy.order) {
    case DemoOrder::ascending: label += " (Ascending Order)"; break;
    case DemoOrder::descending: label += " (Descending Order)"; break;
    case DemoOrder::as_drawn: break;
  }
  return label;
}

SelectionStrategy parse_strategy(std::string_view text) {
  const auto t = trim(text);
  for (const auto& s : canonical_strategies(0)) {
    if (to_lower(strategy_label(s)) == to_lower(t)) return s;
  }
  SelectionStrategy s;
  const auto colon = t.find(':');
  s.kind = parse_selection_kind(t.substr(0, colon));
  if (colon == std::string::npos) {
    s.order = s.kind == SelectionKind::random ? DemoOrder::as_drawn : DemoOrder::descending;
  } else {
    s.order = parse_demo_order(t.substr(colon + 1));
  }
  validate(s);
  return s;
}

std::vector<SelectionStrategy> canonical_strategies(int n, std::uint64_t seed) {
  return {
      {SelectionKind::most_similar, DemoOrder::descending, n, seed},
      {SelectionKind::most_similar, DemoOrder::ascending, n, seed},
      {SelectionKind::least_similar, DemoOrder::descending, n, seed},
      {SelectionKind::least_similar, DemoOrder::ascending, n, seed},
      {SelectionKind::random, DemoOrder::as_drawn, n, seed},
  };
}

std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id) {
  return mix64(run_seed ^ fnv1a64(query_id));
}

DemoSet select_demos(const SamplePair& query, std::span<const SamplePair> pool,
                     const EmbeddingStore& store, const SelectionStrategy& strategy) {
  validate(strategy);

  struct Candidate {
    const SamplePair* sample;
    std::optional<double> score;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(pool.size());
  for (const auto& s : pool) {
    if (s.id != query.id) candidates.push_back({&s, std::nullopt});
  }
  const auto k = std::min(static_cast<std::size_t>(strategy.n), candidates.size());

  const bool needs_scores =
      strategy.kind != SelectionKind::random || strategy.order != DemoOrder::as_drawn;
  if (needs_scores && k > 0) {
    const auto* q = store.find(query.id);
    if (!q) throw InputError("no embedding for query '" + query.id + "'");
    for (auto& c : candidates) {
      const auto* e = store.find(c.sample->id);
      if (!e) throw InputError("no embedding for pool sample '" + c.sample->id + "'");
      c.score = cosine(*q, *e);
    }
  }

  auto by_score_desc = [](const Candidate& a, const Candidate& b) {
    if (*a.score != *b.score) return *a.score > *b.score;
    return a.sample->id < b.sample->id;
  };
  auto by_score_asc = [](const Candidate& a, const Candidate& b) {
    if (*a.score != *b.score) return *a.score < *b.score;
    return a.sample->id < b.sample->id;
  };

  std::vector<Candidate> chosen;
  if (k > 0) {
    switch (strategy.kind) {
      case SelectionKind::most_similar:
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                          candidates.end(), by_score_desc);
        chosen.assign(candidates.begin(), candidates.begin() + static_cast<long>(k));
        break;
      case SelectionKind::least_similar:
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                          candidates.end(), by_score_asc);
        chosen.assign(candidates.begin(), candidates.begin() + static_cast<long>(k));
        break;
      case SelectionKind::random:
        for (auto idx : draw_without_replacement(candidates.size(), k, strategy.seed)) {
          chosen.push_back(candidates[idx]);
        }
        break;
    }
    if (strategy.order != DemoOrder::as_drawn) {
      std::sort(chosen.begin(), chosen.end(), by_score_desc);
      if (strategy.order == DemoOrder::ascending) std::reverse(chosen.begin(), chosen.end());
    }
  }

  DemoSet out;
  out.query_id = query.id;
  out.strategy = strategy;
  out.demos.reserve(chosen.size());
  for (const auto& c : chosen) out.demos.push_back({*c.sample, c.score});
  return out;
}

}  // namespace iclpara
