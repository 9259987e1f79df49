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
#include <map>
#include <random>
#include <set>

#include "hetmatch/category_index.hpp"
#include "hetmatch/graph.hpp"
#include "support.hpp"

using namespace hetmatch;
using namespace hetmatch::testing;

TEST_CASE("duplicate edges merge by summing weights") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 2),
                               edge(ad(1), Relation::kAdClickKw, kw(1), 3)};
  const HeteroGraph g = ingest(e, nodes_for(e));
  CHECK(g.edge_count(Relation::kAdClickKw) == 1);
  const auto nb = g.neighbors(g.require_index(ad(1)), {Relation::kAdClickKw, false});
  REQUIRE(nb.size() == 1);
  CHECK(nb[0].weight == 5.0);
}

TEST_CASE("empty edge stream leaves isolated nodes") {
  std::vector<NodeRecord> n = {node(ad(1)), node(kw(2)), node(item(3))};
  const HeteroGraph g = ingest({}, n);
  CHECK(g.node_count(NodeType::kAd) == 1);
  CHECK(g.node_count(NodeType::kKeyword) == 1);
  CHECK(g.node_count(NodeType::kItem) == 1);
  for (Relation r : kAllRelations) {
    CHECK(g.edge_count(r) == 0);
    for (bool rev : {false, true}) {
      const MetapathStep s{r, rev};
      const NodeRef probe = s.from() == NodeType::kAd ? ad(1)
                            : s.from() == NodeType::kKeyword ? kw(2) : item(3);
      CHECK(g.neighbors(g.require_index(probe), s).empty());
    }
  }
}

TEST_CASE("per-relation degrees match a direct tally of the input") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 1),
                               edge(ad(1), Relation::kAdClickKw, kw(2), 4),
                               edge(ad(1), Relation::kAdBidKw, kw(2), 2),
                               edge(item(1), Relation::kItemClickKw, kw(1), 7),
                               edge(ad(1), Relation::kAdCoclickItem, item(1), 1)};
  const HeteroGraph g = ingest(e, nodes_for(e));
  std::map<std::pair<NodeRef, Relation>, std::size_t> tally;
  for (const auto& x : e) {
    ++tally[{x.src, x.relation}];
    ++tally[{x.dst, x.relation}];
  }
  for (const auto& [key, count] : tally) CHECK(g.degree(key.first, key.second) == count);
  CHECK(g.degree(kw(2), Relation::kItemClickKw) == 0);
}

TEST_CASE("schema violations and dangling endpoints are rejected with a location") {
  std::vector<EdgeRecord> bad_type = {edge(kw(1), Relation::kAdClickKw, kw(2), 1)};
  bad_type[0].location = "edges.tsv:7";
  try {
    ingest(bad_type, nodes_for(bad_type));
    FAIL("expected rejection");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kData);
    CHECK(std::string(err.what()).find("edges.tsv:7") != std::string::npos);
  }
  std::vector<EdgeRecord> dangling = {edge(ad(1), Relation::kAdClickKw, kw(9), 1)};
  CHECK_THROWS_AS(ingest(dangling, std::vector<NodeRecord>{node(ad(1))}), Error);
  std::vector<EdgeRecord> negative = {edge(ad(1), Relation::kAdClickKw, kw(1), -1)};
  CHECK_THROWS_AS(ingest(negative, nodes_for(negative)), Error);
}

TEST_CASE("adjacency is sorted by weight then id, and ingestion is repeatable") {
  std::mt19937_64 rng(11);
  std::vector<EdgeRecord> e;
  for (int i = 0; i < 400; ++i)
    e.push_back(edge(ad(rng() % 20), Relation::kAdClickKw, kw(rng() % 30),
                     static_cast<double>(rng() % 4)));
  const auto n = nodes_for(e);
  const HeteroGraph g = ingest(e, n);
  for (bool rev : {false, true}) {
    const MetapathStep s{Relation::kAdClickKw, rev};
    const NodeType from = s.from();
    for (std::uint32_t i = 0; i < g.node_count(from); ++i) {
      const auto nb = g.neighbors(i, s);
      for (std::size_t j = 1; j < nb.size(); ++j) {
        const auto& a = nb[j - 1];
        const auto& b = nb[j];
        const bool ordered = a.weight > b.weight ||
                             (a.weight == b.weight && g.node_at(s.to(), a.index).id <
                                                          g.node_at(s.to(), b.index).id);
        CHECK(ordered);
      }
    }
  }
  const HeteroGraph again = ingest(e, n);
  CHECK(g.same_structure(again));
  CHECK(g.fingerprint() == again.fingerprint());
}

TEST_CASE("file formats round-trip and reject malformed lines") {
  const std::string edges =
      "# comment\nad\t1\tad_click_kw\tkeyword\t2\t3.5\nad\t1\tad_bid_kw\tkeyword\t2\t1\n";
  const std::string nodes =
      "ad\t1\t4\t0\tad_id=1\ttitle=3,4\nkeyword\t2\t4\t9\tkeyword_id=2\n";
  auto e = parse_edge_lines(edges, "e");
  auto n = parse_node_lines(nodes, "n");
  REQUIRE(e.size() == 2);
  REQUIRE(n.size() == 2);
  CHECK(e[0].weight == 3.5);
  CHECK(*n[0].category == 4);
  CHECK(*n[0].feature("title") == "3,4");
  CHECK(n[1].searched_count == 9.0);
  CHECK(parse_edge_lines(format_edge(e[0]) + "\n", "x")[0].weight == 3.5);
  CHECK(format_node(parse_node_lines(format_node(n[0]), "x")[0]) == format_node(n[0]));
  CHECK_THROWS_AS(parse_edge_lines("ad\t1\tad_click_kw\tkeyword\n", "e"), Error);
  CHECK_THROWS_AS(parse_edge_lines("ad\t1\tbogus\tkeyword\t2\t1\n", "e"), Error);
  CHECK_THROWS_AS(parse_node_lines("ad\t1\t4\t0\tnoequals\n", "n"), Error);
}

TEST_CASE("top-m keeps the m heaviest neighbors") {
  std::vector<EdgeRecord> e;
  for (int q = 0; q < 12; ++q) e.push_back(edge(ad(1), Relation::kAdClickKw, kw(q), 1.0 + q));
  const HeteroGraph g = ingest(e, nodes_for(e));
  const auto hops = metapath_neighbors(g, ad(1), metapath_by_name("a-click-q-click-a"), 10);
  REQUIRE(hops.size() == 2);
  std::set<std::uint64_t> got;
  for (const auto& h : hops[0]) got.insert(h.node.id);
  CHECK(got == std::set<std::uint64_t>{2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  CHECK(hops[0].front().node.id == 11);

  const auto one = metapath_neighbors(g, ad(1), metapath_by_name("a-click-q-click-a"), 1);
  REQUIRE(one[0].size() == 1);
  CHECK(one[0][0].node.id == 11);
  const auto all = metapath_neighbors(g, ad(1), metapath_by_name("a-click-q-click-a"),
                                      HeteroGraph::kAllNeighbors);
  CHECK(all[0].size() == 12);
}

TEST_CASE("isolated node yields empty hops; chain expands hop by hop") {
  const HeteroGraph iso = ingest({}, std::vector<NodeRecord>{node(ad(5))});
  for (const auto& p : ad_tower_metapaths()) {
    const auto hops = metapath_neighbors(iso, ad(5), p, 10);
    for (const auto& h : hops) CHECK(h.empty());
  }
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 1),
                               edge(ad(2), Relation::kAdClickKw, kw(1), 1)};
  const HeteroGraph g = ingest(e, nodes_for(e));
  const auto hops = metapath_neighbors(g, ad(1), metapath_by_name("a-click-q-click-a"), 10);
  REQUIRE(hops[0].size() == 1);
  CHECK(hops[0][0].node == kw(1));
  std::set<std::uint64_t> hop2;
  for (const auto& h : hops[1]) {
    CHECK(h.parent == 0);
    hop2.insert(h.node.id);
  }
  // a1 -> q1 -> {a1, a2}: the walk may return to the root.
  CHECK(hop2.count(2) == 1);
}

TEST_CASE("tree expansion repeats shared nodes per branch") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdClickKw, kw(1), 2),
                               edge(ad(1), Relation::kAdClickKw, kw(2), 1),
                               edge(ad(7), Relation::kAdClickKw, kw(1), 1),
                               edge(ad(7), Relation::kAdClickKw, kw(2), 1)};
  const HeteroGraph g = ingest(e, nodes_for(e));
  const auto hops = metapath_neighbors(g, ad(1), metapath_by_name("a-click-q-click-a"), 10);
  std::size_t sevens = 0;
  for (const auto& h : hops[1]) sevens += h.node == ad(7) ? 1 : 0;
  CHECK(sevens == 2);
}

TEST_CASE("metapath starting type is enforced") {
  const HeteroGraph g = ingest({}, std::vector<NodeRecord>{node(ad(1)), node(kw(1))});
  CHECK_THROWS_AS(metapath_neighbors(g, kw(1), metapath_by_name("a-click-q-click-a"), 3), Error);
  Metapath broken{"broken", {{Relation::kAdClickKw, false}, {Relation::kAdClickKw, false}}};
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("influential neighbors use bid edges") {
  std::vector<EdgeRecord> e = {edge(ad(1), Relation::kAdBidKw, kw(1), 5),
                               edge(ad(1), Relation::kAdBidKw, kw(2), 9),
                               edge(ad(1), Relation::kAdBidKw, kw(3), 1),
                               edge(ad(1), Relation::kAdClickKw, kw(4), 50)};
  auto n = nodes_for(e, {node(kw(8)), node(item(1))});
  const HeteroGraph g = ingest(e, n);
  CHECK(influential_neighbors(g, ad(1), 2) == std::vector<NodeRef>{kw(2), kw(1)});
  CHECK(influential_neighbors(g, kw(8), 3).empty());
  CHECK(influential_neighbors(g, kw(2), 3) == std::vector<NodeRef>{ad(1)});
  CHECK_THROWS_AS(influential_neighbors(g, item(1), 3), Error);
}

TEST_CASE("influential neighbors match an exhaustive sort") {
  std::mt19937_64 rng(5);
  std::vector<EdgeRecord> e;
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> merged;
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t a = rng() % 3, q = rng() % 8;
    const double w = static_cast<double>(rng() % 3 + 1);
    e.push_back(edge(ad(a), Relation::kAdBidKw, kw(q), w));
    merged[{a, q}] += w;
  }
  const HeteroGraph g = ingest(e, nodes_for(e));
  for (std::uint64_t a = 0; a < 3; ++a) {
    if (!g.index_of(ad(a))) continue;
    std::vector<std::pair<double, std::uint64_t>> oracle;
    for (const auto& [key, w] : merged)
      if (key.first == a) oracle.push_back({-w, key.second});
    std::sort(oracle.begin(), oracle.end());
    std::vector<NodeRef> want;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, oracle.size()); ++i)
      want.push_back(kw(oracle[i].second));
    CHECK(influential_neighbors(g, ad(a), 3) == want);
  }
}

TEST_CASE("negative sampling weights are sqrt of searched counts") {
  std::vector<NodeRecord> n = {node(kw(1), 7, 4.0), node(kw(2), 7, 9.0), node(kw(3), 7, 1.0)};
  const HeteroGraph g = ingest({}, n);
  const CategoryIndex idx(g);
  const auto entries = idx.category(7);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].weight == 2.0);
  CHECK(entries[1].weight == 3.0);

  std::size_t heavy = 0;
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto got = sample_negatives(idx, kw(3), 1, derive_seed(99, i));
    REQUIRE(got.size() == 1);
    CHECK_FALSE(got[0] == kw(3));
    heavy += got[0] == kw(2) ? 1 : 0;
  }
  const double freq = static_cast<double>(heavy) / draws;
  const double sigma = std::sqrt(0.6 * 0.4 / draws);
  CHECK(std::abs(freq - 0.6) <= 3 * sigma);
}

TEST_CASE("sampler exhausts, never duplicates and rejects small categories") {
  std::vector<NodeRecord> n;
  for (std::uint64_t q = 0; q < 6; ++q) n.push_back(node(kw(q), 1, 1.0 + static_cast<double>(q)));
  const HeteroGraph g = ingest({}, n);
  const CategoryIndex idx(g);
  auto all = sample_negatives(idx, kw(0), 5, 3);
  std::set<NodeRef> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 5);
  CHECK(uniq.count(kw(0)) == 0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto s = sample_negatives(idx, kw(2), 3, seed);
    std::set<NodeRef> u(s.begin(), s.end());
    CHECK(u.size() == 3);
    CHECK(u.count(kw(2)) == 0);
  }
  CHECK(sample_negatives(idx, kw(1), 3, 17) == sample_negatives(idx, kw(1), 3, 17));
  CHECK_THROWS_AS(sample_negatives(idx, kw(0), 6, 1), CategoryTooSmall);
}

TEST_CASE("candidate keywords follow the ad's category") {
  std::vector<NodeRecord> n = {node(ad(1), 7), node(ad(2)), node(ad(3), 8),
                               node(kw(1), 7), node(kw(2), 7), node(kw(9), 7), node(kw(4), 5)};
  const HeteroGraph g = ingest({}, n);
  const CategoryIndex idx(g);
  auto c = candidate_keywords(idx, g, ad(1));
  CHECK(std::set<NodeRef>(c.begin(), c.end()) == std::set<NodeRef>{kw(1), kw(2), kw(9)});
  CHECK(candidate_keywords(idx, g, ad(2)).empty());
  CHECK(candidate_keywords(idx, g, ad(3)).empty());
  CHECK(idx.missing_category_warnings() == 2);
}
