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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hetmatch/category_index.hpp"
#include "hetmatch/features.hpp"
#include "hetmatch/retrieval.hpp"
#include "hetmatch/synthgen.hpp"
#include "hetmatch/trainer.hpp"

namespace hetmatch {

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` lines; `#` starts a comment. Duplicate keys are kUsage.
KeyValues parse_key_values(std::string_view text, const std::string& source);
KeyValues read_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

/// Applies the recognised training keys (learning_rate, batch_size, epochs,
/// d, l, m, kappa, negatives, gamma, seed, raw_probability_loss) and
/// removes them from `kv`.
void apply_train_overrides(TrainConfig& cfg, KeyValues& kv);

/// Git blob object id (SHA-1 of "blob <size>\0" + bytes).
std::string content_fingerprint(std::string_view bytes);
std::string file_fingerprint(const std::string& path);

struct Dataset {
  HeteroGraph graph;
  CategoryIndex index;
  std::vector<LabeledPair> labels;
  EvalTask task;
  KeyValues fingerprints;  // input name -> blob id
};

struct DatasetPaths {
  std::string edges;
  std::string nodes;
  std::string labels;  // optional
  std::string task;    // optional
};

Dataset load_dataset(const DatasetPaths& paths);
/// Paths of the files written by the synthetic generator under `dir`.
DatasetPaths dataset_paths(const std::string& dir);

/// Ablation rows in report order: full, \s, \v, \a, bid, item, dssm.
const std::vector<std::string>& variant_names();
/// Architecture of one variant with sizes and seed taken from `train`.
ModelConfig variant_config(const std::string& variant, const TrainConfig& train);

Model make_model(const HeteroGraph& g, const ModelConfig& cfg,
                 const SchemaOptions& schema_opts = {});

struct TrainedModel {
  Model model;
  FitResult fit;
};

TrainedModel train_model(const Dataset& ds, const ModelConfig& mc, const TrainConfig& tc,
                         const FitProgress& progress = {});

/// Recall of one model at every K in `ks`; cold-start numbers are filled
/// when the graph has a cold cohort among the task's ads.
VariantScores evaluate_model(const Model& model, const Dataset& ds, std::span<const std::size_t> ks,
                             const std::string& name);
VariantScores evaluate_store(const EmbeddingStore& store, const Dataset& ds,
                             std::span<const View> views, std::span<const std::size_t> ks,
                             const std::string& name);

struct AblationOptions {
  TrainConfig train;
  std::vector<std::string> variants = variant_names();
  std::vector<std::size_t> ks{100, 200, 500, 1000};
  /// Applied to every variant; only attention_scale and normalize are allowed.
  KeyValues shared_model_overrides;
};

struct AblationResult {
  std::vector<VariantScores> rows;
  std::map<std::string, FitResult> fits;
};

using AblationProgress = std::function<void(const std::string& variant)>;

AblationResult run_ablation(const Dataset& ds, const AblationOptions& opts,
                            const AblationProgress& progress = {});

/// Everything a CLI invocation can configure. Keys of the flat config:
/// training keys as in apply_train_overrides; model keys variant, siamese,
/// dssm, aggregator (hetmatch|sage), groups (all|bid|item), views,
/// attention_scale, normalize; evaluation keys ks and variants; gradcheck
/// keys probes, fd_epsilon, gradcheck_pairs; synthetic generator keys with a
/// `synth.` prefix.
struct RunConfig {
  TrainConfig train;
  std::string variant = "full";
  KeyValues model_overrides;
  std::vector<std::size_t> ks{100, 200, 500, 1000};
  std::vector<std::string> variants = variant_names();
  SynthConfig synth;
  std::size_t probes = 200;
  double fd_epsilon = 1e-4;
  std::size_t gradcheck_pairs = 8;

  /// Variant architecture with the explicit model keys applied on top.
  ModelConfig model() const;
  KeyValues to_key_values() const;
};

/// Unknown keys and malformed values are kUsage.
RunConfig parse_run_config(KeyValues kv);
void apply_model_overrides(ModelConfig& mc, const KeyValues& kv);

/// Run manifest: every config value, the seed, input fingerprints and the
/// per-epoch loss, as `key = value` lines.
KeyValues run_manifest(const TrainConfig& tc, const ModelConfig* mc, const KeyValues& fingerprints,
                       const FitResult* fit);

}  // namespace hetmatch
