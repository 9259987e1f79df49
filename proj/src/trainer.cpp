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

#include "hetmatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "text.hpp"

namespace hetmatch {

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"learning_rate", text::exact(learning_rate)},
      {"optimizer", "adam"},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"d", std::to_string(d)},
      {"l", std::to_string(l)},
      {"m", std::to_string(m)},
      {"kappa", std::to_string(kappa)},
      {"negatives", std::to_string(negatives)},
      {"gamma", text::exact(gamma)},
      {"seed", std::to_string(seed)},
      {"raw_probability_loss", raw_probability_loss ? "1" : "0"},
      {"adam_beta1", text::exact(beta1)},
      {"adam_beta2", text::exact(beta2)},
      {"adam_epsilon", text::exact(epsilon)},
  };
}

// --- labels --------------------------------------------------------------------

std::vector<LabeledPair> parse_labels(std::string_view body, const std::string& source) {
  std::vector<LabeledPair> out;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f.size() != 3) fail(ErrorCode::kData, where + ": expected 'view ad_id keyword_id'");
    auto v = parse_view(f[0]);
    auto a = text::parse_u64(f[1]);
    auto k = text::parse_u64(f[2]);
    if (!v || !a || !k) fail(ErrorCode::kData, where + ": malformed label");
    out.push_back({*v, *a, *k});
  });
  return out;
}

std::vector<LabeledPair> read_labels(const std::string& path) {
  return parse_labels(text::read_file(path), path);
}

std::string format_labels(std::span<const LabeledPair> labels) {
  std::string s = "# view\tad_id\tkeyword_id\n";
  for (const auto& l : labels) {
    s += to_string(l.view);
    s += '\t' + std::to_string(l.ad_id) + '\t' + std::to_string(l.keyword_id) + '\n';
  }
  return s;
}

// --- loss ------------------------------------------------------------------------

double posterior(double score_pos, std::span<const double> score_negs, double gamma) {
  double mx = gamma * score_pos;
  for (double s : score_negs) mx = std::max(mx, gamma * s);
  double z = std::exp(gamma * score_pos - mx);
  const double num = z;
  for (double s : score_negs) z += std::exp(gamma * s - mx);
  return num / z;
}

std::vector<int> record_batch_loss(ForwardPass& fp, std::span<const TrainingPair> pairs,
                                   double gamma, bool raw_probability) {
  std::vector<int> roots;
  roots.reserve(pairs.size());
  for (const auto& p : pairs) {
    const int anchor = fp.view_embedding(NodeType::kAd, p.ad, p.view);
    std::vector<int> slate;
    slate.reserve(p.negatives.size() + 1);
    slate.push_back(fp.view_embedding(NodeType::kKeyword, p.positive, p.view));
    for (auto n : p.negatives) slate.push_back(fp.view_embedding(NodeType::kKeyword, n, p.view));
    roots.push_back(fp.tape().softmax_loss(anchor, std::move(slate), gamma, raw_probability));
  }
  return roots;
}

namespace {

double batch_loss_and_signature(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                                std::span<const TrainingPair> pairs, double gamma,
                                bool raw_probability, std::uint64_t* signature) {
  Tape tape(model.params());
  ForwardPass fp(model, g, enc, tape);
  double total = 0.0;
  for (int r : record_batch_loss(fp, pairs, gamma, raw_probability)) total += tape.value(r)[0];
  if (signature) *signature = tape.activation_signature();
  return total;
}

}  // namespace

double batch_loss(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                  std::span<const TrainingPair> pairs, double gamma, bool raw_probability) {
  return batch_loss_and_signature(model, g, enc, pairs, gamma, raw_probability, nullptr);
}

double loss_and_gradients(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                          std::span<const TrainingPair> pairs, double gamma, bool raw_probability,
                          Gradients& grads) {
  Tape tape(model.params());
  ForwardPass fp(model, g, enc, tape);
  const auto roots = record_batch_loss(fp, pairs, gamma, raw_probability);
  double total = 0.0;
  for (int r : roots) total += tape.value(r)[0];
  grads = zeros_like(model.params());
  tape.backward(roots, grads);
  return total;
}

// --- optimiser -------------------------------------------------------------------

OptimizerState OptimizerState::for_params(const ParamStore& p, const TrainConfig& cfg) {
  OptimizerState s;
  s.m = zeros_like(p);
  s.v = zeros_like(p);
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.epsilon = cfg.epsilon;
  return s;
}

void OptimizerState::apply(ParamStore& params, const Gradients& grads, double lr) {
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseAbs2();
    auto mhat = m[i].array() / c1;
    auto vhat = v[i].array() / c2;
    params[static_cast<int>(i)].value.array() -= lr * mhat / (vhat.sqrt() + epsilon);
  }
}

double backward_and_step(Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                         std::span<const TrainingPair> pairs, OptimizerState& opt,
                         const TrainConfig& cfg) {
  Gradients grads;
  const double loss =
      loss_and_gradients(model, g, enc, pairs, cfg.gamma, cfg.raw_probability_loss, grads);
  if (!std::isfinite(loss)) fail(ErrorCode::kNumeric, "batch loss is not finite");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite())
      fail(ErrorCode::kNumeric,
           "non-finite gradient in tensor " + model.params()[static_cast<int>(i)].name);
  }
  opt.apply(model.params(), grads, cfg.learning_rate);
  return loss;
}

// --- data --------------------------------------------------------------------------

std::vector<TrainingPair> resolve_pairs(const HeteroGraph& g, std::span<const LabeledPair> labels,
                                        std::span<const View> views) {
  std::vector<TrainingPair> out;
  for (const auto& l : labels) {
    if (std::find(views.begin(), views.end(), l.view) == views.end()) continue;
    TrainingPair p;
    p.ad = g.require_index({NodeType::kAd, l.ad_id});
    p.positive = g.require_index({NodeType::kKeyword, l.keyword_id});
    p.view = l.view;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<TrainingPair> with_negatives(const HeteroGraph& g, const CategoryIndex& idx,
                                         std::span<const TrainingPair> pairs, std::size_t n,
                                         std::uint64_t seed, std::size_t* skipped) {
  std::vector<TrainingPair> out;
  out.reserve(pairs.size());
  std::size_t skip = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& ad = g.record(NodeType::kAd, pairs[i].ad);
    if (!ad.category) {
      ++skip;
      continue;
    }
    TrainingPair p = pairs[i];
    try {
      p.negatives = sample_negative_indices(idx, *ad.category,
                                            g.node_at(NodeType::kKeyword, p.positive).id, n,
                                            derive_seed(seed, i));
    } catch (const CategoryTooSmall&) {
      ++skip;
      continue;
    }
    out.push_back(std::move(p));
  }
  if (skipped) *skipped = skip;
  return out;
}

FitResult fit(Model& model, const HeteroGraph& g, const EncodedGraph& enc, const CategoryIndex& idx,
              std::span<const LabeledPair> labels, const TrainConfig& cfg,
              const FitProgress& progress) {
  const auto base = resolve_pairs(g, labels, model.config().views);
  if (base.empty()) fail(ErrorCode::kData, "training set is empty for the configured views");
  if (cfg.batch_size == 0) fail(ErrorCode::kUsage, "batch_size must be positive");
  FitResult res;
  OptimizerState opt = OptimizerState::for_params(model.params(), cfg);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::size_t skipped = 0;
    auto pairs = with_negatives(g, idx, base, cfg.negatives, derive_seed(cfg.seed, 2 * epoch + 1),
                                &skipped);
    res.skipped_pairs += skipped;
    std::mt19937_64 rng(derive_seed(cfg.seed, 2 * epoch + 2));
    for (std::size_t i = pairs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(pairs[i - 1], pairs[std::min(j, i - 1)]);
    }
    double epoch_total = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(pairs.size(), start + cfg.batch_size);
      std::span<const TrainingPair> batch(pairs.data() + start, end - start);
      const double loss = backward_and_step(model, g, enc, batch, opt, cfg);
      epoch_total += loss;
      const double mean = loss / static_cast<double>(batch.size());
      res.batch_losses.push_back(mean);
      ++res.steps;
      if (progress) progress(epoch, batch_no, mean);
    }
    res.epoch_losses.push_back(pairs.empty() ? 0.0 : epoch_total / static_cast<double>(pairs.size()));
  }
  return res;
}

// --- gradient check ------------------------------------------------------------------

double grad_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                           std::span<const TrainingPair> pairs, std::size_t probe_count, double eps,
                           std::uint64_t seed, double gamma, bool raw_probability) {
  Gradients grads;
  loss_and_gradients(model, g, enc, pairs, gamma, raw_probability, grads);
  std::uint64_t base_sig = 0;
  batch_loss_and_signature(model, g, enc, pairs, gamma, raw_probability, &base_sig);
  ParamStore& params = model.params();
  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (std::size_t probe = 0; probe < probe_count; ++probe) {
    const auto ti = static_cast<int>(uniform01(rng) * static_cast<double>(params.size()));
    Tensor& t = params[ti];
    const Mat& gt = grads[static_cast<std::size_t>(ti)];
    Eigen::Index col = 0;
    if (t.name.rfind("table/", 0) == 0) {
      std::vector<Eigen::Index> touched;
      for (Eigen::Index c = 0; c < gt.cols(); ++c)
        if (!gt.col(c).isZero(0.0)) touched.push_back(c);
      if (touched.empty())
        col = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(gt.cols()));
      else
        col = touched[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(touched.size()))];
    } else {
      col = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(gt.cols()));
    }
    const auto row = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(gt.rows()));
    const double original = t.value(row, col);
    std::uint64_t sig_up = 0, sig_down = 0;
    t.value(row, col) = original + eps;
    const double up = batch_loss_and_signature(model, g, enc, pairs, gamma, raw_probability, &sig_up);
    t.value(row, col) = original - eps;
    const double down =
        batch_loss_and_signature(model, g, enc, pairs, gamma, raw_probability, &sig_down);
    t.value(row, col) = original;
    GradCheckProbe p;
    p.tensor = t.name;
    p.row = row;
    p.col = col;
    p.analytic = gt(row, col);
    p.numeric = (up - down) / (2.0 * eps);
    p.rel_error = grad_rel_error(p.analytic, p.numeric);
    p.kink = sig_up != base_sig || sig_down != base_sig;
    report.max_rel_error = std::max(report.max_rel_error, p.rel_error);
    if (p.kink)
      ++report.kink_probes;
    else
      report.max_rel_error_smooth = std::max(report.max_rel_error_smooth, p.rel_error);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(p.analytic - p.numeric));
    report.probes.push_back(std::move(p));
  }
  return report;
}

}  // namespace hetmatch
