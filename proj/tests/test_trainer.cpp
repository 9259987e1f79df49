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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hetmatch/category_index.hpp"
#include "hetmatch/trainer.hpp"
#include "naive_model.hpp"
#include "support.hpp"

using namespace hetmatch;
using namespace hetmatch::testing;

namespace {

ModelConfig model_config(std::size_t d, std::size_t l) {
  ModelConfig c;
  c.d = d;
  c.l = l;
  return c;
}

struct Setup {
  SynthDataset ds;
  HeteroGraph g;
  CategoryIndex idx;
  Model model;
  EncodedGraph enc;

  Setup(std::size_t ads, ModelConfig mc, std::size_t seed = 7)
      : ds(small_synth(ads, seed)), g(ingest(ds.edges, ds.nodes)), idx(g),
        model(mc, FeatureSchema::fit(g)), enc(EncodedGraph::build(g, model.schema())) {}

  std::vector<TrainingPair> pairs(std::size_t count, std::uint64_t seed = 1) const {
    const auto resolved = resolve_pairs(g, ds.labels, kAllViews);
    std::vector<TrainingPair> head(resolved.begin(),
                                   resolved.begin() + static_cast<std::ptrdiff_t>(std::min(count, resolved.size())));
    return with_negatives(g, idx, head, 5, seed);
  }
};

// Sum over pairs of -log softmax(gamma * a . slate)[0], from the naive forward.
double naive_loss(const NaiveModel& nv, std::span<const TrainingPair> pairs, double gamma) {
  double total = 0;
  for (const auto& p : pairs) {
    const Vec a = nv.view(NodeType::kAd, p.ad, p.view);
    std::vector<double> s = {gamma * a.dot(nv.view(NodeType::kKeyword, p.positive, p.view))};
    for (auto n : p.negatives) s.push_back(gamma * a.dot(nv.view(NodeType::kKeyword, n, p.view)));
    double z = 0;
    for (double x : s) z += std::exp(x);
    total += -(s[0] - std::log(z));
  }
  return total;
}

}  // namespace

TEST_CASE("posterior examples") {
  const std::vector<double> eq(5, 0.4);
  CHECK(posterior(0.4, eq, 1.0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(posterior(0.4, eq, 17.0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  const std::vector<double> mixed = {3, -2, 9, 0.5, 1};
  CHECK(posterior(-4, mixed, 0.0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  const std::vector<double> zeros(5, 0.0);
  const double e = std::exp(1.0);
  CHECK(posterior(1.0, zeros, 1.0) == doctest::Approx(e / (e + 5)).epsilon(1e-12));
  CHECK(posterior(1.0, zeros, 1.0) == doctest::Approx(0.35219).epsilon(1e-5));
  const double huge = posterior(1e6, zeros, 1.0);
  CHECK(std::isfinite(huge));
  CHECK(huge == doctest::Approx(1.0));
}

TEST_CASE("posterior over a slate sums to one; larger gamma sharpens a leading positive") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(6);
    for (double& x : s) x = n(rng);
    double total = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      std::vector<double> rest;
      for (std::size_t k = 0; k < 6; ++k)
        if (k != j) rest.push_back(s[k]);
      total += posterior(s[j], rest, 1.3);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);

    const double top = *std::max_element(s.begin() + 1, s.end()) + 0.5;
    const std::vector<double> negs(s.begin() + 1, s.end());
    double prev = posterior(top, negs, 0.1);
    for (double gamma = 0.2; gamma <= 3.0; gamma += 0.1) {
      const double p = posterior(top, negs, gamma);
      CHECK(p > prev);
      prev = p;
    }
  }
}

TEST_CASE("loss of a symmetric slate is log 6") {
  std::vector<NodeRecord> n = {node(ad(1), 0)};
  for (std::uint64_t q = 0; q < 6; ++q) n.push_back(node(kw(q), 0));
  const HeteroGraph g = ingest({}, n);
  Model model(model_config(4, 2), FeatureSchema::fit(g));
  // Zero heads make every view embedding zero, so all scores are equal.
  for (std::size_t i = 0; i < model.params().size(); ++i)
    if (model.params()[static_cast<int>(i)].name.rfind("head/", 0) == 0)
      model.params()[static_cast<int>(i)].value.setZero();
  const auto enc = EncodedGraph::build(g, model.schema());
  const TrainingPair p{0, 0, View::kAdClick, {1, 2, 3, 4, 5}};
  CHECK(batch_loss(model, g, enc, std::span(&p, 1), 1.0) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(batch_loss(model, g, enc, std::span(&p, 1), 1.0, true) == doctest::Approx(-1.0 / 6).epsilon(1e-12));
}

TEST_CASE("batch loss matches a naive recomputation") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 2),
                               edge(ad(1), Relation::kAdBidKw, kw(2), 1),
                               edge(ad(2), Relation::kAdClickKw, kw(2), 1),
                               edge(ad(3), Relation::kAdBidKw, kw(3), 4),
                               edge(item(1), Relation::kItemClickKw, kw(4), 1),
                               edge(ad(2), Relation::kAdCoclickItem, item(1), 1)};
  std::vector<NodeRecord> extra;
  for (std::uint64_t q = 1; q <= 8; ++q) extra.push_back(node(kw(q), 0, 1, {{"query_terms", std::to_string(q)}}));
  const HeteroGraph g = ingest(e, nodes_for(e, extra));
  Model model(model_config(2, 1), FeatureSchema::fit(g));
  const auto enc = EncodedGraph::build(g, model.schema());
  auto kwi = [&](std::uint64_t q) { return g.require_index(kw(q)); };
  auto adi = [&](std::uint64_t a) { return g.require_index(ad(a)); };
  const std::vector<TrainingPair> pairs = {
      {adi(1), kwi(1), View::kAdClick, {kwi(3), kwi(4), kwi(5), kwi(6), kwi(7)}},
      {adi(2), kwi(2), View::kAdBid, {kwi(1), kwi(8), kwi(5), kwi(6), kwi(7)}},
      {adi(3), kwi(4), View::kItemClick, {kwi(2), kwi(3), kwi(1), kwi(6), kwi(8)}}};
  NaiveModel nv(model, g, enc);
  for (double gamma : {1.0, 2.5}) {
    const double got = batch_loss(model, g, enc, pairs, gamma);
    CHECK(std::abs(got - naive_loss(nv, pairs, gamma)) <= 1e-6 * std::max(1.0, std::abs(got)));
  }
}

TEST_CASE("loss is invariant under permutation of negatives") {
  Setup s(100, model_config(8, 4));
  auto pairs = s.pairs(40);
  const double base = batch_loss(s.model, s.g, s.enc, pairs, 1.0);
  std::mt19937_64 rng(8);
  for (auto& p : pairs) std::shuffle(p.negatives.begin(), p.negatives.end(), rng);
  CHECK(std::abs(batch_loss(s.model, s.g, s.enc, pairs, 1.0) - base) <= 1e-9);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  Setup s(100, model_config(8, 4));
  const auto pairs = s.pairs(20);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  auto opt = OptimizerState::for_params(s.model.params(), cfg);
  const ParamStore before = s.model.params();
  const double l1 = backward_and_step(s.model, s.g, s.enc, pairs, opt, cfg);
  CHECK(s.model.params().bit_equal(before));
  CHECK(batch_loss(s.model, s.g, s.enc, pairs, cfg.gamma) == l1);
}

TEST_CASE("Adam follows the bias-corrected hand trace") {
  ParamStore p;
  p.add("w", 1, 1);
  p[0].value(0, 0) = 0.0;
  TrainConfig cfg;
  auto opt = OptimizerState::for_params(p, cfg);
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double w = 0, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2 * (w - 3);
    Gradients grads = zeros_like(p);
    grads[0](0, 0) = 2 * (p[0].value(0, 0) - 3);
    opt.apply(p, grads, lr);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(p[0].value(0, 0) == doctest::Approx(w).epsilon(1e-14));
  }
  CHECK(w > 0.0);
  CHECK(w < 3.0);
  CHECK(std::abs(w - 0.05) < 1e-4);  // early steps move by about lr each
}

TEST_CASE("non-finite parameters abort the step and name the tensor") {
  Setup s(60, model_config(8, 4));
  const auto pairs = s.pairs(5);
  TrainConfig cfg;
  auto opt = OptimizerState::for_params(s.model.params(), cfg);
  const int id = s.model.params().id("attention/ad");
  s.model.params()[id].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const ParamStore before = s.model.params();
  try {
    backward_and_step(s.model, s.g, s.enc, pairs, opt, cfg);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
  }
  for (std::size_t i = 0; i < before.size(); ++i) {
    const Mat& a = before[static_cast<int>(i)].value;
    const Mat& b = s.model.params()[static_cast<int>(i)].value;
    CHECK(((a.array() == b.array()) || (a.array().isNaN() && b.array().isNaN())).all());
  }
}

TEST_CASE("gradients agree with central differences away from kinks") {
  Setup s(120, model_config(8, 4));
  const auto pairs = s.pairs(6);
  const auto rep = grad_check(s.model, s.g, s.enc, pairs, 120, 1e-4, 3);
  CHECK(rep.probes.size() == 120);
  CHECK(rep.kink_probes < rep.probes.size() / 4);
  CHECK(rep.max_rel_error_smooth <= 1e-4);
}

TEST_CASE("dead hidden units have zero analytic and numeric gradients") {
  Setup s(60, model_config(8, 4));
  auto& p = s.model.params();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[static_cast<int>(i)].name.rfind("head/", 0) == 0 &&
        p[static_cast<int>(i)].name.ends_with("/b1"))
      p[static_cast<int>(i)].value.setConstant(-1e3);
  const auto rep = grad_check(s.model, s.g, s.enc, s.pairs(6), 100, 1e-4, 5);
  std::size_t checked = 0;
  for (const auto& probe : rep.probes) {
    if (probe.tensor.ends_with("/b2")) continue;
    CHECK(probe.analytic == 0.0);
    CHECK(std::abs(probe.numeric) <= 1e-8);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("repeated steps on one pair drive its loss down") {
  Setup s(60, model_config(8, 4));
  const auto pair = s.pairs(1);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  auto opt = OptimizerState::for_params(s.model.params(), cfg);
  std::vector<double> losses;
  for (int i = 0; i < 6; ++i) {
    backward_and_step(s.model, s.g, s.enc, pair, opt, cfg);
    losses.push_back(batch_loss(s.model, s.g, s.enc, pair, cfg.gamma));
  }
  std::size_t run = 0, best = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    run = losses[i] < losses[i - 1] ? run + 1 : 0;
    best = std::max(best, run);
  }
  CHECK(best >= 3);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("fit lowers the loss and is deterministic") {
  TrainConfig cfg;
  cfg.learning_rate = 0.003;
  cfg.batch_size = 64;
  cfg.epochs = 5;
  cfg.seed = 11;
  auto run = [&] {
    Setup s(200, model_config(16, 4));
    return fit(s.model, s.g, s.enc, s.idx, s.ds.labels, cfg);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.epoch_losses.size() == 5);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());
  CHECK(a.batch_losses == b.batch_losses);
  CHECK(a.steps == a.batch_losses.size());
}

TEST_CASE("empty training set and zero batch size are rejected") {
  Setup s(60, model_config(8, 4));
  TrainConfig cfg;
  CHECK_THROWS_AS(fit(s.model, s.g, s.enc, s.idx, std::vector<LabeledPair>{}, cfg), Error);
  cfg.batch_size = 0;
  try {
    fit(s.model, s.g, s.enc, s.idx, s.ds.labels, cfg);
    FAIL("expected usage error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUsage);
  }
}

TEST_CASE("negatives come from the ad's category and exclude the positive") {
  Setup s(100, model_config(8, 4));
  const auto pairs = s.pairs(200, 5);
  for (const auto& p : pairs) {
    CHECK(p.negatives.size() == 5);
    const auto cat = s.g.record(NodeType::kAd, p.ad).category;
    for (auto n : p.negatives) {
      CHECK(n != p.positive);
      CHECK(s.g.record(NodeType::kKeyword, n).category == cat);
    }
  }
}

TEST_CASE("labels file round-trips") {
  const std::vector<LabeledPair> l = {{View::kAdBid, 4, 9}, {View::kItemClick, 1, 2}};
  const auto back = parse_labels(format_labels(l), "x");
  REQUIRE(back.size() == 2);
  CHECK(back[0].view == View::kAdBid);
  CHECK(back[1].keyword_id == 2);
  CHECK_THROWS_AS(parse_labels("bogus\t1\t2\n", "x"), Error);
}

TEST_CASE("default configuration echoes the hyperparameter table") {
  const auto m = TrainConfig{}.to_map();
  CHECK(m.at("learning_rate") == "0.03");
  CHECK(m.at("optimizer") == "adam");
  CHECK(m.at("batch_size") == "512");
  CHECK(m.at("epochs") == "5");
  CHECK(m.at("l") == "16");
  CHECK(m.at("d") == "64");
  CHECK(m.at("m") == "10");
  CHECK(m.at("kappa") == "3");
  CHECK(m.at("negatives") == "5");
}
