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
#include <span>
#include <variant>
#include <vector>

#include "hetmatch/features.hpp"
#include "hetmatch/params.hpp"

namespace hetmatch {

/// Reverse-mode record of one forward computation over vector-valued slots.
/// Each op writes a fresh slot; ops are appended in dependency order so a
/// reverse sweep is a valid backward pass. Parameters are read from the
/// ParamStore at record time and must not change until backward() returns.
class Tape {
 public:
  explicit Tape(const ParamStore& params) : params_(&params) {}

  /// Concatenation of mean-pooled table columns, one segment per slot.
  /// `tables[k]` is the tensor id (width x rows) of slot k.
  int feature_input(std::span<const int> tables, const EncodedNode& node);
  /// w2 * relu(w1 * x + b1) + b2
  int mlp(int in, int w1, int b1, int w2, int b2);
  /// relu(W * self + b + U * relu(V * sum(children))); b may be -1.
  int conv(int self, std::vector<int> children, int W, int b, int V, int U);
  /// relu(Ws * self + Wn * mean(children) + b)
  int sage(int self, std::vector<int> children, int Ws, int Wn, int b);
  /// Softmax-weighted sum of `inputs` with logits scale * (att . input).
  int attention(std::vector<int> inputs, int att, double scale);
  /// self + mean(neighbors); self alone when neighbors is empty.
  int siamese(int self, std::vector<int> neighbors);
  int normalize(int in);
  /// Scalar slot: -log softmax(gamma * anchor . slate)[0], or -softmax(...)[0]
  /// when raw_probability is set. slate[0] is the positive.
  int softmax_loss(int anchor, std::vector<int> slate, double gamma, bool raw_probability);

  const Vec& value(int slot) const { return values_[static_cast<std::size_t>(slot)]; }
  /// Metapath weights of an attention slot.
  const Vec& attention_weights(int slot) const;
  /// Slate probabilities of a loss slot.
  const Vec& slate_probabilities(int slot) const;

  /// Accumulates d(sum of roots)/d(param) into grads.
  void backward(std::span<const int> roots, Gradients& grads);

  /// Hash of which ReLU units are active across the whole tape. Two
  /// recordings with equal signatures lie on the same linear piece.
  std::uint64_t activation_signature() const;

  std::size_t slot_count() const { return values_.size(); }
  std::size_t op_count() const { return ops_.size(); }

 private:
  struct FeatureOp {
    std::vector<int> tables;
    std::vector<std::vector<std::uint32_t>> rows;
  };
  struct MlpOp {
    int in, w1, b1, w2, b2;
    Vec hidden;
  };
  struct ConvOp {
    int self;
    std::vector<int> children;
    int W, b, V, U;
    Vec nsum, hidden;
  };
  struct SageOp {
    int self;
    std::vector<int> children;
    int Ws, Wn, b;
    Vec nmean;
  };
  struct AttnOp {
    std::vector<int> inputs;
    int att;
    double scale;
    Vec weights;
  };
  struct SiameseOp {
    int self;
    std::vector<int> neighbors;
  };
  struct NormOp {
    int in;
    double norm;
  };
  struct LossOp {
    int anchor;
    std::vector<int> slate;
    double gamma;
    bool raw;
    Vec probs;
  };
  using OpData = std::variant<FeatureOp, MlpOp, ConvOp, SageOp, AttnOp, SiameseOp, NormOp, LossOp>;
  struct Op {
    int out;
    OpData data;
  };

  int push(Vec v, OpData op);
  const Mat& P(int id) const { return (*params_)[id].value; }

  void back(const FeatureOp& op, const Vec& g, Gradients& grads);
  void back(const MlpOp& op, const Vec& g, int out, Gradients& grads);
  void back(const ConvOp& op, const Vec& g, int out, Gradients& grads);
  void back(const SageOp& op, const Vec& g, int out, Gradients& grads);
  void back(const AttnOp& op, const Vec& g, Gradients& grads);
  void back(const SiameseOp& op, const Vec& g);
  void back(const NormOp& op, const Vec& g, int out);
  void back(const LossOp& op, const Vec& g);
  void accumulate(int slot, const Vec& g);

  const ParamStore* params_;
  std::vector<Vec> values_;
  std::vector<int> op_of_slot_;
  std::vector<Op> ops_;
  std::vector<Vec> grads_;
  std::vector<char> has_grad_;
};

}  // namespace hetmatch
