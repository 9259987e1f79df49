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

#include <cstdint>
#include <string>
#include <vector>

#include "hetmatch/graph.hpp"
#include "hetmatch/synthgen.hpp"

namespace hetmatch::testing {

inline NodeRef ad(std::uint64_t id) { return {NodeType::kAd, id}; }
inline NodeRef kw(std::uint64_t id) { return {NodeType::kKeyword, id}; }
inline NodeRef item(std::uint64_t id) { return {NodeType::kItem, id}; }

inline EdgeRecord edge(NodeRef s, Relation r, NodeRef d, double w) {
  return EdgeRecord{s, r, d, w, "test"};
}

inline NodeRecord node(NodeRef n, std::optional<std::uint64_t> category = std::nullopt,
                       double searched = 1.0,
                       std::vector<std::pair<std::string, std::string>> features = {}) {
  NodeRecord r;
  r.node = n;
  r.category = category;
  r.searched_count = searched;
  r.features = std::move(features);
  r.location = "test";
  return r;
}

/// Node records for every endpoint of `edges` that is not already listed.
inline std::vector<NodeRecord> nodes_for(const std::vector<EdgeRecord>& edges,
                                         std::vector<NodeRecord> extra = {}) {
  auto has = [&](const NodeRef& n) {
    for (const auto& r : extra)
      if (r.node == n) return true;
    return false;
  };
  for (const auto& e : edges) {
    if (!has(e.src)) extra.push_back(node(e.src, 0));
    if (!has(e.dst)) extra.push_back(node(e.dst, 0));
  }
  return extra;
}

/// Small seeded synthetic dataset, scaled from the generator defaults.
inline SynthDataset small_synth(std::size_t ads, std::size_t seed = 7) {
  SynthConfig c;
  c.ads = ads;
  c.keywords = 2 * ads;
  c.items = ads / 2;
  c.clusters = std::max<std::size_t>(c.categories, ads / 50);
  c.seed = seed;
  return generate(c);
}

}  // namespace hetmatch::testing
