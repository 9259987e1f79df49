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

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetmatch/graph.hpp"

namespace hetmatch {

enum class FeatureKind : std::uint8_t { kId, kCategoricalTerm, kNumeric };

std::string_view to_string(FeatureKind k);

/// One look-up table. Slots with the same feature name share it across
/// node types.
struct FeatureSpec {
  std::string feature_name;
  FeatureKind kind = FeatureKind::kCategoricalTerm;
  std::size_t vocabulary_size = 0;  // rows; bucket count for numeric features
  std::size_t embedding_width = 8;
};

struct QuantileBoundaries {
  std::string feature_name;
  std::vector<double> boundaries;  // strictly increasing
  bool degenerate = false;         // all fitted values were identical

  std::size_t bucket_count() const { return boundaries.size() + 1; }
};

/// Boundaries at the type-7 (linear interpolation) empirical quantiles k/B,
/// k = 1..B-1. Repeated boundaries are collapsed, reducing the bucket count.
QuantileBoundaries fit_quantiles(std::vector<double> values, std::size_t bucket_count,
                                 std::string feature_name = {});

/// Number of boundaries <= x. NaN maps to bucket 0 and bumps nan_count.
std::size_t discretize(double x, const QuantileBoundaries& q,
                       std::atomic<std::uint64_t>* nan_count = nullptr);

struct SchemaOptions {
  std::size_t embedding_width = 8;
  std::size_t bucket_count = 16;
  std::size_t hash_vocabulary = 50021;
};

/// A node's encoded features: for every slot of its type, the table rows to
/// mean-pool (empty = all-zero slot).
struct EncodedNode {
  std::vector<std::vector<std::uint32_t>> slot_rows;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;

  /// Standard slot layout; table sizes and quantiles are fitted from `g`.
  static FeatureSchema fit(const HeteroGraph& g, const SchemaOptions& opts = {});

  const std::vector<FeatureSpec>& tables() const { return tables_; }
  /// Table index for every slot of a node type, in concatenation order.
  const std::vector<int>& slots(NodeType t) const { return slots_[static_cast<int>(t)]; }
  std::size_t input_width(NodeType t) const;
  const QuantileBoundaries* quantiles(const std::string& feature_name) const;
  int table_index(const std::string& feature_name) const;

  EncodedNode encode(const NodeRecord& r) const;
  std::vector<EncodedNode> encode_all(const HeteroGraph& g, NodeType t) const;

  std::uint64_t oov_count() const { return oov_.load(); }
  std::uint64_t nan_count() const { return nan_.load(); }

  std::string manifest_text() const;
  std::string quantiles_text() const;
  static FeatureSchema from_text(std::string_view manifest, std::string_view quantiles);

  FeatureSchema(const FeatureSchema& o);
  FeatureSchema& operator=(const FeatureSchema& o);

 private:
  std::uint32_t token_row(const FeatureSpec& spec, std::string_view token) const;

  std::vector<FeatureSpec> tables_;
  std::array<std::vector<int>, kNumNodeTypes> slots_;
  std::map<std::string, QuantileBoundaries> quantiles_;
  SchemaOptions opts_;
  mutable std::atomic<std::uint64_t> oov_{0};
  mutable std::atomic<std::uint64_t> nan_{0};
};

/// Slot layout of each node type: (feature name, kind).
const std::vector<std::pair<std::string, FeatureKind>>& standard_slots(NodeType t);

}  // namespace hetmatch
