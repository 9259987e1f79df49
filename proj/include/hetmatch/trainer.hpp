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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hetmatch/category_index.hpp"
#include "hetmatch/model.hpp"

namespace hetmatch {

/// Training hyperparameters. gamma scales scores inside the slate softmax.
struct TrainConfig {
  double learning_rate = 0.03;
  std::size_t batch_size = 512;
  std::size_t epochs = 5;
  std::size_t d = 64;
  std::size_t l = 16;
  std::size_t m = 10;
  std::size_t kappa = 3;
  std::size_t negatives = 5;
  double gamma = 1.0;
  std::uint64_t seed = 20200826;
  bool raw_probability_loss = false;  // -sum p instead of -sum log p
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  std::map<std::string, std::string> to_map() const;
};

/// One positive (ad, keyword) relation of a view, as read from the labels file.
struct LabeledPair {
  View view = View::kAdClick;
  std::uint64_t ad_id = 0;
  std::uint64_t keyword_id = 0;
};

std::vector<LabeledPair> read_labels(const std::string& path);
std::vector<LabeledPair> parse_labels(std::string_view text, const std::string& source);
std::string format_labels(std::span<const LabeledPair> labels);

/// A positive pair with its sampled slate of negatives (dense indices).
struct TrainingPair {
  std::uint32_t ad = 0;
  std::uint32_t positive = 0;
  View view = View::kAdClick;
  std::vector<std::uint32_t> negatives;
};

/// exp(gamma s+) / sum exp(gamma s) over {s+} and the negatives.
double posterior(double score_pos, std::span<const double> score_negs, double gamma);

/// Adam moments shaped like the parameters.
struct OptimizerState {
  Gradients m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

  static OptimizerState for_params(const ParamStore& p, const TrainConfig& cfg);
  void apply(ParamStore& params, const Gradients& grads, double lr);
};

/// Sum over pairs of -log p(positive | ad, slate), each pair scored in its
/// own view's transformed space. Recorded on `tape`; returns the loss slots.
std::vector<int> record_batch_loss(ForwardPass& fp, std::span<const TrainingPair> pairs,
                                   double gamma, bool raw_probability);

double batch_loss(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                  std::span<const TrainingPair> pairs, double gamma, bool raw_probability = false);

/// Loss and exact gradients of the batch loss w.r.t. every tensor.
double loss_and_gradients(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                          std::span<const TrainingPair> pairs, double gamma, bool raw_probability,
                          Gradients& grads);

/// One Adam step. Throws Error(kNumeric) naming the tensor when a gradient
/// is not finite; parameters are left untouched in that case.
double backward_and_step(Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                         std::span<const TrainingPair> pairs, OptimizerState& opt,
                         const TrainConfig& cfg);

/// Resolves labels to dense indices; unknown nodes are a data error.
std::vector<TrainingPair> resolve_pairs(const HeteroGraph& g, std::span<const LabeledPair> labels,
                                        std::span<const View> views);

/// Draws the negatives of every pair for one epoch. Pairs whose ad's leaf
/// category is too small are dropped; the count is returned via `skipped`.
std::vector<TrainingPair> with_negatives(const HeteroGraph& g, const CategoryIndex& idx,
                                         std::span<const TrainingPair> pairs, std::size_t n,
                                         std::uint64_t seed, std::size_t* skipped = nullptr);

struct FitResult {
  std::vector<double> batch_losses;  // mean loss per pair, one entry per batch
  std::vector<double> epoch_losses;  // mean loss per pair, one entry per epoch
  std::size_t skipped_pairs = 0;
  std::size_t steps = 0;
};

using FitProgress = std::function<void(std::size_t epoch, std::size_t batch, double mean_loss)>;

/// Epochs of shuffled multi-view pairs (views interleaved uniformly);
/// negatives resampled every epoch from an epoch-indexed seed.
FitResult fit(Model& model, const HeteroGraph& g, const EncodedGraph& enc, const CategoryIndex& idx,
              std::span<const LabeledPair> labels, const TrainConfig& cfg,
              const FitProgress& progress = {});

struct GradCheckProbe {
  std::string tensor;
  Eigen::Index row = 0, col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;  // a ReLU switched state inside [t - eps, t + eps]
};

struct GradCheckReport {
  std::vector<GradCheckProbe> probes;
  double max_rel_error = 0.0;        // over every probe
  double max_abs_error = 0.0;
  double max_rel_error_smooth = 0.0; // over probes without a kink
  std::size_t kink_probes = 0;
};

/// Relative error used by the checker: |a - n| / max(|a|, |n|, floor).
double grad_rel_error(double analytic, double numeric, double floor = 1e-6);

/// Compares analytic gradients with central differences (L(t+eps) - L(t-eps)) / 2 eps
/// on `probe_count` random scalars. Tensors are chosen uniformly; inside
/// embedding tables only columns the batch touches are probed. Probes whose
/// central difference straddles a ReLU kink are flagged, since the
/// difference quotient there is not a derivative estimate.
GradCheckReport grad_check(Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                           std::span<const TrainingPair> pairs, std::size_t probe_count, double eps,
                           std::uint64_t seed, double gamma = 1.0, bool raw_probability = false);

}  // namespace hetmatch
