#pragma once

// Full-sort reference for demo selection.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "iclpara/embedding.hpp"
#include "iclpara/selection.hpp"
#include "iclpara/util.hpp"

namespace testing {

struct Scored {
  std::string id;
  double score;
};

inline std::vector<std::string> oracle_select(const iclpara::SamplePair& query,
                                              const std::vector<iclpara::SamplePair>& pool,
                                              const iclpara::EmbeddingStore& store,
                                              const iclpara::SelectionStrategy& st) {
  using namespace iclpara;
  std::vector<Scored> all;
  for (const auto& s : pool) {
    if (s.id == query.id) continue;
    double dot = 0;
    const auto& a = store.at(query.id).values;
    const auto& b = store.at(s.id).values;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    all.push_back({s.id, std::clamp(dot, -1.0, 1.0)});
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(st.n), all.size());
  auto desc = [](const Scored& x, const Scored& y) {
    return x.score != y.score ? x.score > y.score : x.id < y.id;
  };
  auto asc = [](const Scored& x, const Scored& y) {
    return x.score != y.score ? x.score < y.score : x.id < y.id;
  };
  std::vector<Scored> chosen;
  if (st.kind == SelectionKind::random) {
    for (auto idx : draw_without_replacement(all.size(), k, st.seed)) chosen.push_back(all[idx]);
  } else {
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end(), st.kind == SelectionKind::most_similar ? desc : asc);
    chosen.assign(sorted.begin(), sorted.begin() + static_cast<long>(k));
  }
  if (st.order != DemoOrder::as_drawn) {
    std::sort(chosen.begin(), chosen.end(), desc);
    if (st.order == DemoOrder::ascending) std::reverse(chosen.begin(), chosen.end());
  }
  std::vector<std::string> ids;
  for (const auto& c : chosen) ids.push_back(c.id);
  return ids;
}

struct FuzzPool {
  std::vector<iclpara::SamplePair> pool;
  iclpara::SamplePair query;
  iclpara::EmbeddingStore store{3, "fuzz"};
};

// Small integer-valued directions so that similarity ties are common.
inline FuzzPool make_fuzz_pool(std::mt19937_64& rng, std::size_t size) {
  using namespace iclpara;
  FuzzPool f;
  std::uniform_int_distribution<int> comp(-2, 2);
  auto vec = [&] {
    for (;;) {
      std::vector<double> v{double(comp(rng)), double(comp(rng)), double(comp(rng))};
      if (v[0] != 0 || v[1] != 0 || v[2] != 0) return normalized(v);
    }
  };
  f.query = {"query", "q", "t", {}, Split::test};
  f.store.insert({"query", vec()});
  for (std::size_t i = 0; i < size; ++i) {
    std::string id = "p" + std::to_string(rng() % 100000) + "-" + std::to_string(i);
    f.pool.push_back({id, "s", "t", {}, Split::train});
    f.store.insert({id, vec()});
  }
  return f;
}

}  // namespace testing
