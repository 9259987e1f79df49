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

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetmatch/types.hpp"

namespace hetmatch {

/// One line of the edge file, before merging.
struct EdgeRecord {
  NodeRef src;
  Relation relation = Relation::kAdClickKw;
  NodeRef dst;
  double weight = 0.0;
  std::string location;  // "file:line" for diagnostics, may be empty
};

/// One line of the node file. `features` keeps the raw name=value pairs in
/// file order; interpretation happens in the feature encoder.
struct NodeRecord {
  NodeRef node;
  std::optional<std::uint64_t> category;
  double searched_count = 0.0;
  std::vector<std::pair<std::string, std::string>> features;
  std::string location;

  const std::string* feature(std::string_view name) const;
};

/// One hop of a metapath. `reverse` walks the relation from its dst side.
struct MetapathStep {
  Relation relation = Relation::kAdClickKw;
  bool reverse = false;

  NodeType from() const { return reverse ? relation_dst(relation) : relation_src(relation); }
  NodeType to() const { return reverse ? relation_src(relation) : relation_dst(relation); }
  friend bool operator==(const MetapathStep&, const MetapathStep&) = default;
};

struct Metapath {
  std::string name;
  std::vector<MetapathStep> steps;

  /// Throws kUsage when empty or when consecutive steps do not chain.
  void validate() const;
  NodeType source_type() const { return steps.front().from(); }
  std::size_t length() const { return steps.size(); }
};

/// Metapath groups used to build the towers.
enum class MetapathGroup { kAll, kBid, kItem };

/// The six standard paths. Ad tower paths start at an ad, keyword tower
/// paths at a keyword.
std::vector<Metapath> ad_tower_metapaths(MetapathGroup group = MetapathGroup::kAll);
std::vector<Metapath> keyword_tower_metapaths(MetapathGroup group = MetapathGroup::kAll);
Metapath metapath_by_name(std::string_view name);

struct Neighbor {
  std::uint32_t index = 0;  // dense index within the neighbor's node type
  double weight = 0.0;
};

/// Immutable typed, weighted heterogeneous graph. Every relation is indexed
/// from both endpoints; each adjacency list is sorted by descending weight,
/// ties by ascending node id.
class HeteroGraph {
 public:
  static constexpr std::size_t kAllNeighbors = std::numeric_limits<std::size_t>::max();

  HeteroGraph() = default;

  std::size_t node_count(NodeType t) const { return ids_[idx(t)].size(); }
  std::size_t edge_count(Relation r) const { return edge_counts_[static_cast<int>(r)]; }

  std::optional<std::uint32_t> index_of(const NodeRef& n) const;
  std::uint32_t require_index(const NodeRef& n) const;
  NodeRef node_at(NodeType t, std::uint32_t index) const {
    return {t, ids_[idx(t)][index]};
  }
  std::span<const std::uint64_t> ids(NodeType t) const { return ids_[idx(t)]; }
  const NodeRecord& record(NodeType t, std::uint32_t index) const {
    return records_[idx(t)][index];
  }
  const NodeRecord& record(const NodeRef& n) const {
    return record(n.type, require_index(n));
  }

  /// Full sorted adjacency of node `index` (of type step.from()) under `step`.
  std::span<const Neighbor> neighbors(std::uint32_t index, const MetapathStep& step) const;
  /// First min(m, degree) entries of neighbors().
  std::span<const Neighbor> top_neighbors(std::uint32_t index, const MetapathStep& step,
                                          std::size_t m) const;
  std::size_t degree(const NodeRef& n, Relation r) const;

  /// Order-sensitive hash over ids and adjacency; equal graphs hash equal.
  std::uint64_t fingerprint() const;
  bool same_structure(const HeteroGraph& other) const;

  friend HeteroGraph ingest(std::span<const EdgeRecord> edges,
                            std::span<const NodeRecord> nodes);

 private:
  struct Csr {
    std::vector<std::uint32_t> offsets;  // size = source count + 1
    std::vector<Neighbor> entries;
  };
  static int idx(NodeType t) { return static_cast<int>(t); }
  const Csr& csr(Relation r, bool reverse) const {
    return adj_[static_cast<int>(r) * 2 + (reverse ? 1 : 0)];
  }

  std::array<std::vector<std::uint64_t>, kNumNodeTypes> ids_;  // ascending
  std::array<std::vector<NodeRecord>, kNumNodeTypes> records_;
  std::array<Csr, kNumRelations * 2> adj_;
  std::array<std::size_t, kNumRelations> edge_counts_{};
};

/// Builds the frozen graph. Duplicate (src, relation, dst) triples merge by
/// summing weights. Throws Error(kData) naming the record location on schema
/// violations, dangling endpoints, duplicate node records or bad weights.
HeteroGraph ingest(std::span<const EdgeRecord> edges, std::span<const NodeRecord> nodes);

struct HopEntry {
  NodeRef node;
  int parent = -1;  // index into the previous hop (-1 for hop 1: the root)
  double weight = 0.0;
};

/// Tree-structured expansion along `path`, keeping the top-m neighbors of
/// every parent. Result has one list per hop.
std::vector<std::vector<HopEntry>> metapath_neighbors(const HeteroGraph& g, const NodeRef& v,
                                                      const Metapath& path, std::size_t m);

/// Top-kappa bid neighbors: keywords bid by an ad, or ads bidding on a
/// keyword. Items are rejected with kUsage.
std::vector<NodeRef> influential_neighbors(const HeteroGraph& g, const NodeRef& v,
                                           std::size_t kappa);
/// Same selection by dense index; `v_type` must be kAd or kKeyword.
std::span<const Neighbor> influential_neighbor_span(const HeteroGraph& g, NodeType v_type,
                                                    std::uint32_t index, std::size_t kappa);

// File formats ---------------------------------------------------------------

std::vector<EdgeRecord> read_edge_file(const std::string& path);
std::vector<NodeRecord> read_node_file(const std::string& path);
std::vector<EdgeRecord> parse_edge_lines(std::string_view text, const std::string& source);
std::vector<NodeRecord> parse_node_lines(std::string_view text, const std::string& source);
std::string format_edge(const EdgeRecord& e);
std::string format_node(const NodeRecord& n);

}  // namespace hetmatch
