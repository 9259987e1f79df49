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

#include <cmath>
#include <random>
#include <set>

#include "hetmatch/retrieval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hetmatch;
using namespace hetmatch::testing;

TEST_CASE("top-k equals the full-sort oracle, ties included") {
  const std::array<View, 1> one = {View::kAdBid};
  const auto store = random_store(20, 1000, 16, 3, one);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::uint64_t> cand(1000);
    for (std::uint64_t i = 0; i < 1000; ++i) cand[i] = i;
    std::shuffle(cand.begin(), cand.end(), rng);
    cand.resize(200 + rng() % 800);
    const std::uint64_t a = rng() % 20;
    const std::size_t k = 1 + rng() % 300;
    const auto got = topk_retrieve(store, a, View::kAdBid, cand, k);
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < got.size(); ++i) {
      ids.push_back(got[i].keyword_id);
      if (i > 0) CHECK(got[i - 1].score >= got[i].score);
    }
    CHECK(ids == sort_oracle(store, a, View::kAdBid, cand, k));
  }
}

TEST_CASE("top-k exhaustion, ties and empty candidates") {
  EmbeddingStore s(2);
  s.put(ad(1), View::kAdClick, Vec::Ones(2));
  for (std::uint64_t q : {9, 4, 7}) s.put(kw(q), View::kAdClick, Vec::Ones(2));
  s.put(kw(2), View::kAdClick, Vec::Constant(2, 3.0));
  const std::vector<std::uint64_t> cand = {9, 4, 7, 2};
  const auto all = topk_retrieve(s, 1, View::kAdClick, cand, 10);
  REQUIRE(all.size() == 4);
  CHECK(all[0].keyword_id == 2);
  CHECK(all[1].keyword_id == 4);
  CHECK(all[2].keyword_id == 7);
  CHECK(all[3].keyword_id == 9);
  std::size_t warnings = 0;
  CHECK(topk_retrieve(s, 1, View::kAdClick, {}, 5, &warnings).empty());
  CHECK(warnings == 1);
}

TEST_CASE("recall arithmetic") {
  EvalTask task;
  task.targets[1] = {10, 11};
  task.targets[2] = {20, 21, 22};
  Retrieved got;
  got[1][View::kAdClick] = {10, 99};
  got[2][View::kAdClick] = {20, 21, 98};
  const auto r = recall_at_k(task, got, 1);
  CHECK(r.recall_3k == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r.hits == 3);
  CHECK(r.total == 5);

  Retrieved perfect;
  perfect[1][View::kAdClick] = {10, 11};
  perfect[2][View::kAdClick] = {20, 21, 22};
  CHECK(recall_at_k(task, perfect, 1).recall_3k == 1.0);

  EvalTask dup;
  dup.targets[1] = {10, 10, 11};
  CHECK(recall_at_k(dup, perfect, 1).total == 2);

  EvalTask empty;
  empty.targets[1] = {};
  CHECK_THROWS_AS(recall_at_k(empty, got, 1), Error);
}

TEST_CASE("three views split the budget; union beats every single view") {
  EvalTask task;
  task.targets[1] = {1, 2, 3, 4, 5, 6};
  Retrieved got;
  got[1][View::kAdClick] = {1, 2, 50, 51};
  got[1][View::kAdBid] = {3, 1, 52, 4};
  got[1][View::kItemClick] = {5, 53, 6, 54};
  // k = 2: each view contributes its first two entries.
  const auto r = recall_at_k(task, got, 2);
  CHECK(r.hits == 4);
  CHECK(r.per_view.at(View::kAdClick) == doctest::Approx(2.0 / 6));
  for (const auto& [v, x] : r.per_view) CHECK(r.recall_3k >= x);

  Retrieved single;
  single[1][View::kAdClick] = {1, 2, 50, 51, 3, 4, 5};
  // One view: depth is 3k.
  CHECK(recall_at_k(task, single, 2).hits == 4);
  CHECK(recall_at_k(task, single, 1).hits == 2);
}

TEST_CASE("recall matches an independent oracle and is monotone in K") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [task, got] = random_task(rng, 30, 200, 40);
    double prev = -1;
    for (std::size_t k : {5, 10, 20, 40}) {
      const double r = recall_at_k(task, got, k).recall_3k;
      CHECK(std::abs(r - recall_oracle(task, got, k)) <= 1e-12);
      CHECK(r >= prev);
      CHECK(r <= 1.0);
      prev = r;
    }
  }
}

TEST_CASE("per-view recall uses each view's own targets") {
  EvalTask task;
  task.targets[1] = {1, 2};
  task.view_targets[View::kAdBid][1] = {7, 8, 9, 10};
  Retrieved got;
  got[1][View::kAdClick] = {1, 5};
  got[1][View::kAdBid] = {7, 8};
  const auto r = recall_at_k(task, got, 2);
  CHECK(r.per_view.at(View::kAdClick) == doctest::Approx(0.5));
  CHECK(r.per_view.at(View::kAdBid) == doctest::Approx(0.5));
}

TEST_CASE("cold-start split keeps ads without click or co-click edges") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 1),
                               edge(ad(2), Relation::kAdBidKw, kw(1), 1),
                               edge(ad(4), Relation::kAdCoclickItem, item(1), 1)};
  const HeteroGraph g = ingest(e, nodes_for(e, {node(ad(3)), node(kw(1))}));
  EvalTask task;
  for (std::uint64_t a = 1; a <= 5; ++a) task.targets[a] = {1};
  task.view_targets[View::kAdBid][2] = {1};
  task.view_targets[View::kAdBid][1] = {1};
  const auto cold = cold_start_split(task, g);
  CHECK(cold.ads() == std::vector<std::uint64_t>{2, 3});
  CHECK(cold.view_targets.at(View::kAdBid).size() == 1);

  EvalTask warm;
  warm.targets[1] = {1};
  CHECK_THROWS_AS(cold_start_split(warm, g), Error);

  // With every ad cold the split is the task itself.
  const HeteroGraph bare = ingest({}, std::vector<NodeRecord>{node(ad(1)), node(ad(2))});
  EvalTask both;
  both.targets[1] = {4};
  both.targets[2] = {5, 6};
  Retrieved got;
  got[1][View::kAdClick] = {4};
  got[2][View::kAdClick] = {9};
  CHECK(recall_at_k(cold_start_split(both, bare), got, 1).recall_3k == recall_at_k(both, got, 1).recall_3k);
}

TEST_CASE("eval task file round-trips") {
  EvalTask t;
  t.targets[3] = {1, 2};
  t.view_targets[View::kItemClick][3] = {5};
  const auto back = parse_eval_task(format_eval_task(t), "x");
  CHECK(back.targets == t.targets);
  CHECK(back.view_targets == t.view_targets);
  CHECK(&back.targets_for(View::kAdClick) == &back.targets);
  CHECK_THROWS_AS(parse_eval_task("target\tx\t1\n", "x"), Error);
}

TEST_CASE("exported embeddings reload bit-identically") {
  const auto ds = small_synth(80);
  const HeteroGraph g = ingest(ds.edges, ds.nodes);
  ModelConfig mc;
  mc.d = 8;
  mc.l = 4;
  Model model(mc, FeatureSchema::fit(g));
  const auto enc = EncodedGraph::build(g, model.schema());
  const auto store = export_embeddings(model, g, enc);
  const std::string dump = store.dump();
  CHECK(store.row_count() == (g.node_count(NodeType::kAd) + g.node_count(NodeType::kKeyword)) * 3);
  std::size_t lines = 0;
  for (char c : dump) lines += c == '\n' ? 1 : 0;
  CHECK(lines == store.row_count());
  const auto reload = EmbeddingStore::parse(dump, "dump");
  CHECK(reload.bit_equal(store));
  CHECK(export_embeddings(model, g, enc).dump() == dump);

  EmbeddingStore narrow(4);
  CHECK_THROWS_AS(narrow.put(ad(1), View::kAdClick, Vec::Zero(8)), Error);
  CHECK_THROWS_AS(narrow.put(ad(1), View::kAdClick, Vec::Constant(4, NAN)), Error);
}

TEST_CASE("report tables have one row per variant and one column per K") {
  EvalTask task;
  task.targets[1] = {1, 2};
  Retrieved got;
  for (View v : kAllViews) got[1][v] = {1, 3};
  VariantScores a{"full", {}, {}}, b{"dssm", {}, {}};
  const std::vector<std::size_t> ks = {1, 2};
  for (auto k : ks) {
    a.by_k[k] = recall_at_k(task, got, k);
    b.by_k[k] = recall_at_k(task, got, k);
  }
  const std::vector<VariantScores> rows = {a, b};
  const auto text = render_report(rows, ks);
  CHECK(text.find("K=1") != std::string::npos);
  CHECK(text.find("50.00") != std::string::npos);
  const auto tsv = render_report_tsv(rows, ks);
  std::size_t lines = 0;
  for (char c : tsv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 1 + 2 * 2 * 4);
}
