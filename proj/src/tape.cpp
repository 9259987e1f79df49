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

#include "hetmatch/tape.hpp"

#include <cmath>

namespace hetmatch {

namespace {

Vec relu(const Vec& x) { return x.cwiseMax(0.0); }

// Subgradient of relu at 0 is taken as 0.
Vec relu_mask(const Vec& activated, const Vec& g) {
  return (activated.array() > 0.0).select(g, 0.0);
}

}  // namespace

int Tape::push(Vec v, OpData op) {
  const int slot = static_cast<int>(values_.size());
  values_.push_back(std::move(v));
  op_of_slot_.push_back(static_cast<int>(ops_.size()));
  ops_.push_back({slot, std::move(op)});
  return slot;
}

int Tape::feature_input(std::span<const int> tables, const EncodedNode& node) {
  if (tables.size() != node.slot_rows.size())
    fail(ErrorCode::kInternal, "feature slot count does not match the schema");
  Eigen::Index width = 0;
  for (int t : tables) width += P(t).rows();
  Vec x = Vec::Zero(width);
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const Mat& table = P(tables[k]);
    const auto& rows = node.slot_rows[k];
    if (!rows.empty()) {
      auto seg = x.segment(off, table.rows());
      for (auto r : rows) seg += table.col(r);
      seg /= static_cast<double>(rows.size());
    }
    off += table.rows();
  }
  return push(std::move(x), FeatureOp{{tables.begin(), tables.end()}, node.slot_rows});
}

int Tape::mlp(int in, int w1, int b1, int w2, int b2) {
  Vec hidden = relu(P(w1) * value(in) + P(b1).col(0));
  Vec out = P(w2) * hidden + P(b2).col(0);
  return push(std::move(out), MlpOp{in, w1, b1, w2, b2, std::move(hidden)});
}

int Tape::conv(int self, std::vector<int> children, int W, int b, int V, int U) {
  const Mat& Vm = P(V);
  Vec nsum = Vec::Zero(Vm.cols());
  for (int c : children) nsum += value(c);
  Vec hidden = relu(Vm * nsum);
  Vec pre = P(W) * value(self) + P(U) * hidden;
  if (b >= 0) pre += P(b).col(0);
  return push(relu(pre), ConvOp{self, std::move(children), W, b, V, U, std::move(nsum),
                                std::move(hidden)});
}

int Tape::sage(int self, std::vector<int> children, int Ws, int Wn, int b) {
  Vec nmean = Vec::Zero(P(Wn).cols());
  for (int c : children) nmean += value(c);
  if (!children.empty()) nmean /= static_cast<double>(children.size());
  Vec pre = P(Ws) * value(self) + P(Wn) * nmean + P(b).col(0);
  return push(relu(pre), SageOp{self, std::move(children), Ws, Wn, b, std::move(nmean)});
}

int Tape::attention(std::vector<int> inputs, int att, double scale) {
  if (inputs.empty()) fail(ErrorCode::kUsage, "semantic attention needs at least one input");
  const Vec a = P(att).col(0);
  Vec logits(static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t p = 0; p < inputs.size(); ++p)
    logits[static_cast<Eigen::Index>(p)] = scale * a.dot(value(inputs[p]));
  const double mx = logits.maxCoeff();
  Vec w = (logits.array() - mx).exp();
  w /= w.sum();
  Vec out = Vec::Zero(value(inputs[0]).size());
  for (std::size_t p = 0; p < inputs.size(); ++p)
    out += w[static_cast<Eigen::Index>(p)] * value(inputs[p]);
  return push(std::move(out), AttnOp{std::move(inputs), att, scale, std::move(w)});
}

int Tape::siamese(int self, std::vector<int> neighbors) {
  Vec out = value(self);
  if (!neighbors.empty()) {
    Vec mean = Vec::Zero(out.size());
    for (int n : neighbors) mean += value(n);
    out += mean / static_cast<double>(neighbors.size());
  }
  return push(std::move(out), SiameseOp{self, std::move(neighbors)});
}

int Tape::normalize(int in) {
  const double norm = value(in).norm();
  Vec out = norm > 0.0 ? Vec(value(in) / norm) : value(in);
  return push(std::move(out), NormOp{in, norm});
}

int Tape::softmax_loss(int anchor, std::vector<int> slate, double gamma, bool raw_probability) {
  const Vec& a = value(anchor);
  Vec logits(static_cast<Eigen::Index>(slate.size()));
  for (std::size_t j = 0; j < slate.size(); ++j)
    logits[static_cast<Eigen::Index>(j)] = gamma * a.dot(value(slate[j]));
  const double mx = logits.maxCoeff();
  Vec shifted = logits.array() - mx;
  Vec e = shifted.array().exp();
  const double z = e.sum();
  Vec probs = e / z;
  Vec loss(1);
  loss[0] = raw_probability ? -probs[0] : -(shifted[0] - std::log(z));
  return push(std::move(loss), LossOp{anchor, std::move(slate), gamma, raw_probability,
                                      std::move(probs)});
}

const Vec& Tape::attention_weights(int slot) const {
  const auto& op = ops_[static_cast<std::size_t>(op_of_slot_[static_cast<std::size_t>(slot)])];
  if (const auto* a = std::get_if<AttnOp>(&op.data)) return a->weights;
  fail(ErrorCode::kInternal, "slot is not an attention output");
}

const Vec& Tape::slate_probabilities(int slot) const {
  const auto& op = ops_[static_cast<std::size_t>(op_of_slot_[static_cast<std::size_t>(slot)])];
  if (const auto* l = std::get_if<LossOp>(&op.data)) return l->probs;
  fail(ErrorCode::kInternal, "slot is not a loss output");
}

void Tape::accumulate(int slot, const Vec& g) {
  const auto s = static_cast<std::size_t>(slot);
  if (!has_grad_[s]) {
    grads_[s] = g;
    has_grad_[s] = 1;
  } else {
    grads_[s] += g;
  }
}

void Tape::backward(std::span<const int> roots, Gradients& grads) {
  grads_.assign(values_.size(), Vec());
  has_grad_.assign(values_.size(), 0);
  for (int r : roots) accumulate(r, Vec::Ones(value(r).size()));
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const auto out = static_cast<std::size_t>(it->out);
    if (!has_grad_[out]) continue;
    const Vec g = std::move(grads_[out]);
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, FeatureOp>) back(op, g, grads);
          else if constexpr (std::is_same_v<T, MlpOp>) back(op, g, it->out, grads);
          else if constexpr (std::is_same_v<T, ConvOp>) back(op, g, it->out, grads);
          else if constexpr (std::is_same_v<T, SageOp>) back(op, g, it->out, grads);
          else if constexpr (std::is_same_v<T, AttnOp>) back(op, g, grads);
          else if constexpr (std::is_same_v<T, SiameseOp>) back(op, g);
          else if constexpr (std::is_same_v<T, NormOp>) back(op, g, it->out);
          else back(op, g);
        },
        it->data);
  }
  grads_.clear();
  has_grad_.clear();
}

void Tape::back(const FeatureOp& op, const Vec& g, Gradients& grads) {
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < op.tables.size(); ++k) {
    Mat& gt = grads[static_cast<std::size_t>(op.tables[k])];
    const auto w = gt.rows();
    const auto& rows = op.rows[k];
    if (!rows.empty()) {
      const Vec share = g.segment(off, w) / static_cast<double>(rows.size());
      for (auto r : rows) gt.col(r) += share;
    }
    off += w;
  }
}

void Tape::back(const MlpOp& op, const Vec& g, int, Gradients& grads) {
  grads[op.w2].noalias() += g * op.hidden.transpose();
  grads[op.b2].col(0) += g;
  const Vec gh = relu_mask(op.hidden, P(op.w2).transpose() * g);
  grads[op.w1].noalias() += gh * value(op.in).transpose();
  grads[op.b1].col(0) += gh;
  accumulate(op.in, P(op.w1).transpose() * gh);
}

void Tape::back(const ConvOp& op, const Vec& g, int out, Gradients& grads) {
  const Vec ga = relu_mask(value(out), g);
  grads[op.W].noalias() += ga * value(op.self).transpose();
  if (op.b >= 0) grads[op.b].col(0) += ga;
  accumulate(op.self, P(op.W).transpose() * ga);
  if (op.children.empty()) return;  // hidden is relu(V*0) = 0: no U/V gradient
  grads[op.U].noalias() += ga * op.hidden.transpose();
  const Vec gc = relu_mask(op.hidden, P(op.U).transpose() * ga);
  grads[op.V].noalias() += gc * op.nsum.transpose();
  const Vec gn = P(op.V).transpose() * gc;
  for (int c : op.children) accumulate(c, gn);
}

void Tape::back(const SageOp& op, const Vec& g, int out, Gradients& grads) {
  const Vec ga = relu_mask(value(out), g);
  grads[op.Ws].noalias() += ga * value(op.self).transpose();
  grads[op.Wn].noalias() += ga * op.nmean.transpose();
  grads[op.b].col(0) += ga;
  accumulate(op.self, P(op.Ws).transpose() * ga);
  if (op.children.empty()) return;
  const Vec gm = P(op.Wn).transpose() * ga / static_cast<double>(op.children.size());
  for (int c : op.children) accumulate(c, gm);
}

void Tape::back(const AttnOp& op, const Vec& g, Gradients& grads) {
  const Vec a = P(op.att).col(0);
  const auto n = op.inputs.size();
  Vec gw(static_cast<Eigen::Index>(n));
  for (std::size_t p = 0; p < n; ++p) gw[static_cast<Eigen::Index>(p)] = g.dot(value(op.inputs[p]));
  const double avg = op.weights.dot(gw);
  Vec gatt = Vec::Zero(a.size());
  for (std::size_t p = 0; p < n; ++p) {
    const auto pi = static_cast<Eigen::Index>(p);
    const double ge = op.weights[pi] * (gw[pi] - avg) * op.scale;
    gatt += ge * value(op.inputs[p]);
    accumulate(op.inputs[p], op.weights[pi] * g + ge * a);
  }
  grads[op.att].col(0) += gatt;
}

void Tape::back(const SiameseOp& op, const Vec& g) {
  accumulate(op.self, g);
  if (op.neighbors.empty()) return;
  const Vec share = g / static_cast<double>(op.neighbors.size());
  for (int n : op.neighbors) accumulate(n, share);
}

void Tape::back(const NormOp& op, const Vec& g, int out) {
  if (!(op.norm > 0.0)) {
    accumulate(op.in, g);
    return;
  }
  const Vec& o = value(out);
  accumulate(op.in, (g - o * o.dot(g)) / op.norm);
}

void Tape::back(const LossOp& op, const Vec& g) {
  const double gl = g[0];
  const auto n = static_cast<Eigen::Index>(op.slate.size());
  Vec gs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double delta = j == 0 ? 1.0 : 0.0;
    gs[j] = op.raw ? -op.gamma * op.probs[0] * (delta - op.probs[j])
                   : op.gamma * (op.probs[j] - delta);
    gs[j] *= gl;
  }
  Vec ga = Vec::Zero(value(op.anchor).size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const int s = op.slate[static_cast<std::size_t>(j)];
    ga += gs[j] * value(s);
    accumulate(s, gs[j] * value(op.anchor));
  }
  accumulate(op.anchor, ga);
}

std::uint64_t Tape::activation_signature() const {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  auto fold = [&h](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) h = mix64(h ^ (v[i] > 0.0 ? 0x9bULL : 0x3dULL));
  };
  for (const Op& op : ops_) {
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, MlpOp>) {
            fold(d.hidden);
          } else if constexpr (std::is_same_v<T, ConvOp>) {
            fold(d.hidden);
            fold(value(op.out));
          } else if constexpr (std::is_same_v<T, SageOp>) {
            fold(value(op.out));
          }
        },
        op.data);
  }
  return h;
}

}  // namespace hetmatch
