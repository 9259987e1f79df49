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
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetmatch/features.hpp"
#include "hetmatch/graph.hpp"
#include "hetmatch/params.hpp"
#include "hetmatch/tape.hpp"

namespace hetmatch {

enum class Aggregator : std::uint8_t { kAutoencoder, kSage };

/// Architecture switches. The ablation variants are combinations of these.
struct ModelConfig {
  std::size_t d = 64;
  std::size_t l = 16;
  std::size_t m = 10;
  std::size_t kappa = 3;
  bool siamese = true;
  bool dssm = false;  // bypass graph convolution and attention: fused = node embedding
  Aggregator aggregator = Aggregator::kAutoencoder;
  MetapathGroup groups = MetapathGroup::kAll;
  std::vector<View> views{View::kAdClick, View::kAdBid, View::kItemClick};
  bool attention_scale = false;  // divide attention logits by sqrt(d)
  bool normalize = false;        // L2-normalise view embeddings
  std::uint64_t seed = 20200826;

  std::map<std::string, std::string> to_meta() const;
  static ModelConfig from_meta(const std::map<std::string, std::string>& meta);
};

/// Feature encodings of every node, computed once per dataset.
struct EncodedGraph {
  std::array<std::vector<EncodedNode>, kNumNodeTypes> nodes;
  static EncodedGraph build(const HeteroGraph& g, const FeatureSchema& schema);
  const EncodedNode& at(NodeType t, std::uint32_t i) const {
    return nodes[static_cast<int>(t)][i];
  }
};

struct MlpParams {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct ConvParams {
  int W = -1, b = -1, V = -1, U = -1;  // autoencoder aggregator
  int Ws = -1, Wn = -1;                 // sage aggregator (bias shares b)
};

/// Parameters plus the tensor-id layout the forward pass needs.
class Model {
 public:
  Model(ModelConfig cfg, FeatureSchema schema);

  const ModelConfig& config() const { return cfg_; }
  const FeatureSchema& schema() const { return schema_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Tower metapaths; `tower` is kAd or kKeyword.
  const std::vector<Metapath>& paths(NodeType tower) const;
  const ConvParams& conv(NodeType tower, std::size_t path, std::size_t layer) const;
  const MlpParams& fusion(NodeType t) const { return fusion_[static_cast<int>(t)]; }
  const MlpParams& head(NodeType tower, View v) const;
  bool has_view(View v) const;
  int attention(NodeType tower) const { return attention_[tower_slot(tower)]; }
  const std::vector<int>& slot_tables(NodeType t) const { return slot_tables_[static_cast<int>(t)]; }
  /// Tensor id of each schema table.
  const std::vector<int>& tables() const { return tables_; }

  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& c);

  static int tower_slot(NodeType tower);

 private:
  void build();
  void initialize();

  ModelConfig cfg_;
  FeatureSchema schema_;
  ParamStore params_;
  std::vector<int> tables_;
  std::array<std::vector<int>, kNumNodeTypes> slot_tables_;
  std::array<MlpParams, kNumNodeTypes> fusion_;
  std::array<std::vector<Metapath>, 2> paths_;
  std::array<std::vector<std::vector<ConvParams>>, 2> conv_;  // [tower][path][layer-1]
  std::array<int, 2> attention_{-1, -1};
  std::array<std::array<MlpParams, kNumViews>, 2> heads_;
};

// Single-vector building blocks (no tape), used for inspection and tests.

/// relu(W * self + U * relu(V * sum(neighbors)) + b). Throws kUsage on
/// dimension mismatch. `b` may be empty.
Vec conv_layer(const Vec& self, std::span<const Vec> neighbors, const Mat& W, const Vec& b,
               const Mat& V, const Mat& U);

struct SemanticFusion {
  Vec fused;
  Vec weights;
};
/// Softmax over att . h_p (times scale) then weighted sum. Throws on empty input.
SemanticFusion semantic_fuse(std::span<const Vec> per_path, const Vec& att, double scale = 1.0);
/// fused + mean(neighbors); fused alone if no neighbors.
Vec siamese_embed(const Vec& fused, std::span<const Vec> neighbor_fused);
/// Two-layer perceptron: w2 * relu(w1 * z + b1) + b2.
Vec view_transform(const Vec& z, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2);

struct ForwardStats {
  std::size_t layer_computed = 0;
  std::size_t layer_hits = 0;
  std::size_t node_computed = 0;
  std::size_t node_hits = 0;
};

/// Memoised forward over one batch. Every intermediate is computed once per
/// (metapath, hop depth, layer, node): the subtree below a node at a given
/// depth depends only on the remaining relation suffix, so roots that share
/// relation paths share the work.
class ForwardPass {
 public:
  ForwardPass(const Model& model, const HeteroGraph& g, const EncodedGraph& enc, Tape& tape);

  int node_embedding(NodeType t, std::uint32_t i);
  int path_embedding(NodeType tower, std::size_t path, std::uint32_t root);
  int fused(NodeType t, std::uint32_t i);
  int siamese(NodeType t, std::uint32_t i);
  int view_embedding(NodeType t, std::uint32_t i, View v);

  const ForwardStats& stats() const { return stats_; }
  Tape& tape() { return *tape_; }

 private:
  int layer(NodeType tower, std::size_t path, std::size_t depth, std::size_t k, std::uint32_t node);
  static std::uint64_t key(int a, std::size_t b, std::size_t c, std::size_t d, std::uint32_t e);

  const Model* model_;
  const HeteroGraph* g_;
  const EncodedGraph* enc_;
  Tape* tape_;
  ForwardStats stats_;
  std::array<std::vector<int>, kNumNodeTypes> node_slot_;
  std::array<std::vector<int>, kNumNodeTypes> fused_slot_;
  std::array<std::vector<int>, kNumNodeTypes> siamese_slot_;
  std::unordered_map<std::uint64_t, int> cache_;
};

/// Every intermediate embedding of one tower node.
struct TowerEmbedding {
  Vec h;                       // node-level fusion
  std::vector<Vec> per_path;   // h_v^p, tower path order (empty for dssm)
  Vec path_weights;            // attention weights (empty for dssm)
  Vec fused;                   // attention output
  Vec z;                       // after neighbour matching
  std::map<View, Vec> views;   // per-view transformed
};

struct MemoizedResult {
  std::map<NodeRef, TowerEmbedding> embeddings;
  ForwardStats stats;
};

/// Forward for a batch of ad/keyword roots, sharing intermediates.
MemoizedResult memoized_forward(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                                std::span<const NodeRef> batch);

}  // namespace hetmatch
