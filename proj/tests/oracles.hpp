/**
 * Copyright 2026 The HetMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hetmatch/retrieval.hpp"

namespace hetmatch::testing {

/// Full sort of every candidate by (score desc, id asc), cut to k.
inline std::vector<std::uint64_t> sort_oracle(const EmbeddingStore& store, std::uint64_t ad_id, View v,
                                              const std::vector<std::uint64_t>& candidates, std::size_t k) {
  const Vec& a = store.at({NodeType::kAd, ad_id}, v);
  std::vector<std::pair<double, std::uint64_t>> all;
  for (auto q : candidates) all.push_back({-a.dot(store.at({NodeType::kKeyword, q}, v)), q});
  std::sort(all.begin(), all.end());
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

/// Union recall computed with flat vectors and linear scans.
inline double recall_oracle(const EvalTask& task, const Retrieved& got, std::size_t k) {
  std::vector<View> views;
  for (const auto& [ad, pv] : got)
    for (const auto& [v, list] : pv)
      if (std::find(views.begin(), views.end(), v) == views.end()) views.push_back(v);
  const std::size_t depth = views.empty() ? 0 : 3 * k / views.size();
  double hits = 0, total = 0;
  for (const auto& [ad, raw] : task.targets) {
    std::vector<std::uint64_t> t = raw;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    total += static_cast<double>(t.size());
    std::vector<std::uint64_t> pool;
    if (auto it = got.find(ad); it != got.end())
      for (const auto& [v, list] : it->second)
        for (std::size_t i = 0; i < std::min(depth, list.size()); ++i) pool.push_back(list[i]);
    for (auto x : t)
      if (std::find(pool.begin(), pool.end(), x) != pool.end()) hits += 1;
  }
  return hits / total;
}

/// Random store over `ads` x `keywords` with values drawn from a small grid
/// so that score ties are common.
inline EmbeddingStore random_store(std::size_t ads, std::size_t keywords, std::size_t dim,
                                   std::uint64_t seed, std::span<const View> views) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> grid(-2, 2);
  EmbeddingStore s(dim);
  auto draw = [&] {
    Vec x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = grid(rng) * 0.5;
    return x;
  };
  for (View v : views) {
    for (std::uint64_t a = 0; a < ads; ++a) s.put({NodeType::kAd, a}, v, draw());
    for (std::uint64_t q = 0; q < keywords; ++q) s.put({NodeType::kKeyword, q}, v, draw());
  }
  return s;
}

/// Random task and retrieval lists over `keywords` ids.
inline std::pair<EvalTask, Retrieved> random_task(std::mt19937_64& rng, std::size_t ads,
                                                  std::size_t keywords, std::size_t max_k) {
  EvalTask task;
  Retrieved got;
  std::uniform_int_distribution<std::uint64_t> kw(0, keywords - 1);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  std::uniform_int_distribution<int> view_count(1, 3);
  const int nv = view_count(rng);
  for (std::uint64_t a = 0; a < ads; ++a) {
    auto& t = task.targets[a];
    for (std::size_t i = len(rng); i > 0; --i) t.push_back(kw(rng));
    if (rng() % 5 == 0) continue;  // some ads retrieve nothing
    for (int v = 0; v < nv; ++v) {
      std::vector<std::uint64_t> ids(keywords);
      for (std::uint64_t i = 0; i < keywords; ++i) ids[i] = i;
      std::shuffle(ids.begin(), ids.end(), rng);
      ids.resize(std::min(keywords, 3 * max_k));
      got[a][kAllViews[static_cast<std::size_t>(v)]] = ids;
    }
  }
  return {task, got};
}

}  // namespace hetmatch::testing
