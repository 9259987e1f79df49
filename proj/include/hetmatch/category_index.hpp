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

#include <atomic>
#include <cstdint>
#include <map>
#include <vector>

#include "hetmatch/graph.hpp"

namespace hetmatch {

/// Thrown when a leaf category cannot supply the requested negatives; the
/// trainer skips such pairs instead of padding the slate.
class CategoryTooSmall : public Error {
 public:
  using Error::Error;
};

/// Leaf category -> keywords, each carrying a sqrt(searched count) weight.
class CategoryIndex {
 public:
  struct Entry {
    std::uint32_t keyword = 0;  // dense keyword index in the graph
    std::uint64_t id = 0;
    double weight = 0.0;
  };

  CategoryIndex() = default;
  explicit CategoryIndex(const HeteroGraph& g);
  CategoryIndex(const CategoryIndex& o) : categories_(o.categories_), keyword_category_(o.keyword_category_) {}
  CategoryIndex& operator=(const CategoryIndex& o) {
    categories_ = o.categories_;
    keyword_category_ = o.keyword_category_;
    return *this;
  }

  /// Keywords of one category in ascending id order; empty if unknown.
  std::span<const Entry> category(std::uint64_t c) const;
  std::optional<std::uint64_t> category_of_keyword(std::uint64_t keyword_id) const;
  std::size_t category_count() const { return categories_.size(); }
  const std::map<std::uint64_t, std::vector<Entry>>& categories() const { return categories_; }

  std::uint64_t missing_category_warnings() const { return warnings_.load(); }
  void note_missing_category() const { warnings_.fetch_add(1); }

 private:
  std::map<std::uint64_t, std::vector<Entry>> categories_;
  std::map<std::uint64_t, std::uint64_t> keyword_category_;
  mutable std::atomic<std::uint64_t> warnings_{0};
};

/// Draws n keywords without replacement from the positive's leaf category,
/// proportional to sqrt(searched count), never returning the positive.
std::vector<NodeRef> sample_negatives(const CategoryIndex& idx, const NodeRef& positive_kw,
                                      std::size_t n, std::uint64_t rng_seed);

/// Same, drawing from an explicit category. Returns dense keyword indices.
std::vector<std::uint32_t> sample_negative_indices(const CategoryIndex& idx,
                                                   std::uint64_t category,
                                                   std::uint64_t exclude_keyword_id,
                                                   std::size_t n, std::uint64_t rng_seed);

/// Full keyword set of the ad's leaf category. Missing or unknown category
/// yields an empty set and bumps the index's warning counter.
std::vector<NodeRef> candidate_keywords(const CategoryIndex& idx, const HeteroGraph& g,
                                        const NodeRef& ad);

/// Uniform double in [0, 1) from 53 random bits; portable across standard libraries.
template <typename Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace hetmatch
