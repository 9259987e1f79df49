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
#include <vector>

#include "hetmatch/graph.hpp"
#include "hetmatch/retrieval.hpp"
#include "hetmatch/trainer.hpp"

namespace hetmatch {

/// Planted-cluster generator settings. Densities are expected edge counts
/// divided by |src| * |dst| for each relation.
struct SynthConfig {
  std::size_t ads = 1000;
  std::size_t keywords = 2000;
  std::size_t items = 500;
  std::size_t categories = 4;
  std::size_t clusters = 20;
  std::size_t latent_dim = 8;
  double latent_noise = 0.6;
  double affinity = 2.0;  // intra-cluster edge propensity exp(affinity * cos)
  double density_ad_click = 0.015;
  double density_ad_bid = 0.005;
  double density_item_click = 0.02;
  double density_ad_coclick = 0.01;
  double noise_fraction = 0.1;
  double cold_fraction = 0.1;
  double target_fraction = 0.3;       // share of a warm ad's clicks held out as targets
  double view_target_fraction = 0.2;  // share of bid / item-click edges held out
  std::size_t labels_per_view = 3;
  std::size_t term_vocab = 1000;
  std::size_t terms_per_node = 4;
  double term_signal = 0.3;  // chance a term comes from the node's cluster topic
  std::size_t seed = 7;

  std::map<std::string, std::string> to_map() const;
  /// Applies `key = value` overrides; unknown keys or bad values are kUsage.
  void apply(const std::map<std::string, std::string>& kv);
  void validate() const;
};

struct SynthDataset {
  std::vector<EdgeRecord> edges;
  std::vector<NodeRecord> nodes;
  std::vector<LabeledPair> labels;
  EvalTask task;
  std::vector<std::uint64_t> cold_ads;
  /// Latent cluster of every node, indexed by node type then id.
  std::array<std::vector<std::size_t>, kNumNodeTypes> clusters;
  /// Counters such as generated.<relation>, graph.<relation>, targets.
  std::map<std::string, std::size_t> tallies;
  std::vector<std::string> warnings;
};

SynthDataset generate(const SynthConfig& cfg);

/// Writes edges.tsv, nodes.tsv, labels.tsv, eval_task.tsv and
/// synth_manifest.txt under `dir`.
void write_dataset(const SynthDataset& ds, const SynthConfig& cfg, const std::string& dir);

}  // namespace hetmatch
