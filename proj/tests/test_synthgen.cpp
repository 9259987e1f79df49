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
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hetmatch/category_index.hpp"
#include "hetmatch/synthgen.hpp"
#include "support.hpp"

using namespace hetmatch;
using namespace hetmatch::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hetmatch_test_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("same seed writes byte-identical files; another seed differs") {
  SynthConfig cfg;
  cfg.ads = 200;
  cfg.keywords = 400;
  cfg.items = 100;
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
  write_dataset(generate(cfg), cfg, a.string());
  write_dataset(generate(cfg), cfg, b.string());
  SynthConfig other = cfg;
  other.seed = cfg.seed + 1;
  write_dataset(generate(other), other, c.string());
  for (const char* f : {"edges.tsv", "nodes.tsv", "labels.tsv", "eval_task.tsv", "synth_manifest.txt"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  CHECK(slurp(a / "edges.tsv") != slurp(c / "edges.tsv"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST_CASE("without noise every target shares its ad's cluster") {
  SynthConfig cfg;
  cfg.ads = 300;
  cfg.keywords = 600;
  cfg.items = 150;
  cfg.noise_fraction = 0.0;
  const auto ds = generate(cfg);
  std::size_t checked = 0;
  auto cluster = [&](NodeType t, std::uint64_t id) { return ds.clusters[static_cast<int>(t)].at(id); };
  for (const auto& [a, targets] : ds.task.targets)
    for (auto q : targets) {
      CHECK(cluster(NodeType::kAd, a) == cluster(NodeType::kKeyword, q));
      ++checked;
    }
  for (const auto& e : ds.edges)
    CHECK(cluster(e.src.type, e.src.id) == cluster(e.dst.type, e.dst.id));
  CHECK(checked > 0);
}

TEST_CASE("generated relation counts are close to density times possible pairs") {
  const SynthConfig cfg;
  const auto ds = generate(cfg);
  const double ad = static_cast<double>(cfg.ads), kw = static_cast<double>(cfg.keywords),
               it = static_cast<double>(cfg.items);
  const std::vector<std::pair<std::string, double>> expect = {
      {"generated.ad_click_kw", cfg.density_ad_click * ad * kw},
      {"generated.ad_bid_kw", cfg.density_ad_bid * ad * kw},
      {"generated.item_click_kw", cfg.density_item_click * it * kw},
      {"generated.ad_coclick_item", cfg.density_ad_coclick * ad * it}};
  for (const auto& [key, want] : expect) {
    const double got = static_cast<double>(ds.tallies.at(key));
    INFO(key << " got " << got << " want " << want);
    CHECK(std::abs(got - want) <= 0.05 * want);
  }
}

TEST_CASE("held-out relations never appear in the graph") {
  const auto ds = small_synth(300);
  std::set<std::tuple<Relation, std::uint64_t, std::uint64_t>> edges;
  for (const auto& e : ds.edges) edges.insert({e.relation, e.src.id, e.dst.id});
  for (const auto& [a, t] : ds.task.targets)
    for (auto q : t) CHECK(edges.count({Relation::kAdClickKw, a, q}) == 0);
  for (const auto& [a, t] : ds.task.targets_for(View::kAdBid))
    for (auto q : t) CHECK(edges.count({Relation::kAdBidKw, a, q}) == 0);
  CHECK_FALSE(ds.task.targets_for(View::kAdBid).empty());
  CHECK_FALSE(ds.task.targets_for(View::kItemClick).empty());
}

TEST_CASE("cold ads have bid edges only") {
  const auto ds = small_synth(300);
  const HeteroGraph g = ingest(ds.edges, ds.nodes);
  REQUIRE_FALSE(ds.cold_ads.empty());
  std::size_t with_bids = 0;
  for (auto a : ds.cold_ads) {
    CHECK(g.degree(ad(a), Relation::kAdClickKw) == 0);
    CHECK(g.degree(ad(a), Relation::kAdCoclickItem) == 0);
    with_bids += g.degree(ad(a), Relation::kAdBidKw) > 0 ? 1 : 0;
  }
  CHECK(with_bids == ds.cold_ads.size());
  const auto cold = cold_start_split(ds.task, g);
  CHECK(cold.targets.size() > 0);
  CHECK(cold.targets.size() <= ds.cold_ads.size());
}

TEST_CASE("categories partition the keywords and every node has one") {
  const auto ds = small_synth(200);
  std::map<std::uint64_t, std::set<std::uint64_t>> by_cat;
  for (const auto& n : ds.nodes) {
    REQUIRE(n.category.has_value());
    if (n.node.type == NodeType::kKeyword) by_cat[*n.category].insert(n.node.id);
  }
  std::set<std::uint64_t> seen;
  std::size_t total = 0;
  for (const auto& [c, ids] : by_cat) {
    total += ids.size();
    seen.insert(ids.begin(), ids.end());
  }
  CHECK(total == seen.size());
  CHECK(seen.size() == 400);
  const HeteroGraph g = ingest(ds.edges, ds.nodes);
  const CategoryIndex idx(g);
  std::size_t indexed = 0;
  for (const auto& [c, ids] : by_cat) indexed += idx.category(c).size();
  CHECK(indexed == 400);
}

TEST_CASE("labels reference graph edges of their view") {
  const auto ds = small_synth(200);
  std::set<std::tuple<Relation, std::uint64_t, std::uint64_t>> edges;
  for (const auto& e : ds.edges) edges.insert({e.relation, e.src.id, e.dst.id});
  for (const auto& l : ds.labels) {
    if (l.view == View::kAdClick) CHECK(edges.count({Relation::kAdClickKw, l.ad_id, l.keyword_id}) == 1);
    if (l.view == View::kAdBid) CHECK(edges.count({Relation::kAdBidKw, l.ad_id, l.keyword_id}) == 1);
  }
  for (View v : kAllViews) CHECK(ds.tallies.at("labels." + std::string(to_string(v))) > 0);
}

TEST_CASE("weights are heavy-tailed counts in [1, 100]") {
  const auto ds = small_synth(300);
  double max_w = 0;
  for (const auto& e : ds.edges) {
    CHECK(e.weight >= 1.0);
    CHECK(e.weight <= 100.0);
    CHECK(e.weight == std::floor(e.weight));
    max_w = std::max(max_w, e.weight);
  }
  CHECK(max_w >= 20.0);
}

TEST_CASE("invalid configurations and overrides") {
  SynthConfig cfg;
  CHECK_THROWS_AS(cfg.apply({{"bogus", "1"}}), Error);
  CHECK_THROWS_AS(cfg.apply({{"ads", "many"}}), Error);
  cfg.apply({{"ads", "50"}, {"noise_fraction", "0.25"}});
  CHECK(cfg.ads == 50);
  CHECK(cfg.noise_fraction == 0.25);
  SynthConfig bad;
  bad.cold_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  SynthConfig dense;
  dense.ads = 40;
  dense.keywords = 80;
  dense.items = 20;
  dense.density_ad_bid = 3.0;
  const auto ds = generate(dense);
  CHECK_FALSE(ds.warnings.empty());
}
