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

#include "hetmatch/category_index.hpp"

#include <cmath>
#include <random>

namespace hetmatch {

CategoryIndex::CategoryIndex(const HeteroGraph& g) {
  const std::size_t n = g.node_count(NodeType::kKeyword);
  for (std::uint32_t i = 0; i < n; ++i) {
    const NodeRecord& r = g.record(NodeType::kKeyword, i);
    if (!r.category) continue;
    categories_[*r.category].push_back({i, r.node.id, std::sqrt(r.searched_count)});
    keyword_category_[r.node.id] = *r.category;
  }
}

std::span<const CategoryIndex::Entry> CategoryIndex::category(std::uint64_t c) const {
  auto it = categories_.find(c);
  if (it == categories_.end()) return {};
  return it->second;
}

std::optional<std::uint64_t> CategoryIndex::category_of_keyword(std::uint64_t keyword_id) const {
  auto it = keyword_category_.find(keyword_id);
  if (it == keyword_category_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> sample_negative_indices(const CategoryIndex& idx,
                                                   std::uint64_t category,
                                                   std::uint64_t exclude_keyword_id,
                                                   std::size_t n, std::uint64_t rng_seed) {
  auto entries = idx.category(category);
  std::vector<const CategoryIndex::Entry*> pool;
  std::vector<double> weights;
  for (const auto& e : entries) {
    if (e.id == exclude_keyword_id || !(e.weight > 0.0)) continue;
    pool.push_back(&e);
    weights.push_back(e.weight);
  }
  if (pool.size() < n)
    throw CategoryTooSmall(ErrorCode::kData,
                           "category " + std::to_string(category) + " has " +
                               std::to_string(pool.size()) + " sampleable keywords besides the "
                               "positive, need " + std::to_string(n) + "; skip this pair");

  std::mt19937_64 rng(rng_seed);
  std::vector<std::uint32_t> out;
  out.reserve(n);
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t k = 0; k < n; ++k) {
    double u = uniform01(rng) * total;
    std::size_t pick = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      pick = i;
      if (u < weights[i]) break;
      u -= weights[i];
    }
    out.push_back(pool[pick]->keyword);
    total -= weights[pick];
    weights[pick] = 0.0;
  }
  return out;
}

std::vector<NodeRef> sample_negatives(const CategoryIndex& idx, const NodeRef& positive_kw,
                                      std::size_t n, std::uint64_t rng_seed) {
  if (positive_kw.type != NodeType::kKeyword)
    fail(ErrorCode::kUsage, "positive must be a keyword, got " + to_string(positive_kw));
  auto c = idx.category_of_keyword(positive_kw.id);
  if (!c)
    throw CategoryTooSmall(ErrorCode::kData,
                           "keyword " + to_string(positive_kw) + " has no leaf category");
  auto picks = sample_negative_indices(idx, *c, positive_kw.id, n, rng_seed);
  std::vector<NodeRef> out;
  out.reserve(picks.size());
  auto entries = idx.category(*c);
  for (auto k : picks) {
    for (const auto& e : entries) {
      if (e.keyword == k) {
        out.push_back({NodeType::kKeyword, e.id});
        break;
      }
    }
  }
  return out;
}

std::vector<NodeRef> candidate_keywords(const CategoryIndex& idx, const HeteroGraph& g,
                                        const NodeRef& ad) {
  const NodeRecord& r = g.record(ad);
  std::vector<NodeRef> out;
  if (!r.category || idx.category(*r.category).empty()) {
    idx.note_missing_category();
    return out;
  }
  for (const auto& e : idx.category(*r.category)) out.push_back({NodeType::kKeyword, e.id});
  return out;
}

}  // namespace hetmatch
