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

// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Progress goes to stderr.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hetmatch/category_index.hpp"
#include "hetmatch/pipeline.hpp"
#include "hetmatch/synthgen.hpp"
#include "hetmatch/trainer.hpp"
#include "naive_model.hpp"
#include "oracles.hpp"

using namespace hetmatch;
using namespace hetmatch::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... A>
std::string fmt(const char* f, A... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
  std::fflush(stderr);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HETMATCH_CLI_PATH) + " " + args + " >/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hetmatch_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Data {
  SynthDataset synth;
  HeteroGraph g;
  CategoryIndex idx;
};

Data build(std::size_t ads, std::size_t keywords, std::size_t items, std::size_t seed) {
  SynthConfig c;
  c.ads = ads;
  c.keywords = keywords;
  c.items = items;
  c.clusters = std::max<std::size_t>(c.categories, ads / 50);
  c.seed = seed;
  Data d{generate(c), {}, {}};
  d.g = ingest(d.synth.edges, d.synth.nodes);
  d.idx = CategoryIndex(d.g);
  return d;
}

std::vector<TrainingPair> first_pairs(const Data& d, std::size_t n, std::uint64_t seed) {
  const auto all = resolve_pairs(d.g, d.synth.labels, kAllViews);
  const std::vector<TrainingPair> head(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(n, all.size())));
  return with_negatives(d.g, d.idx, head, 5, seed);
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const Data d = build(200, 400, 100, 7);
  ModelConfig mc;
  mc.d = 8;
  mc.l = 4;
  Model model(mc, FeatureSchema::fit(d.g));
  const auto enc = EncodedGraph::build(d.g, model.schema());
  const auto pairs = first_pairs(d, 8, 1);
  const std::size_t paths = model.paths(NodeType::kAd).size() + model.paths(NodeType::kKeyword).size();

  // Probes whose +-eps interval crosses a ReLU kink do not estimate a
  // derivative; draw until 200 probes lie on one linear piece.
  const std::size_t wanted = 200;
  std::size_t smooth = 0, kinks = 0;
  double smooth_max = 0.0, raw_max = 0.0;
  for (std::uint64_t round = 0; smooth < wanted && round < 10; ++round) {
    const auto rep = grad_check(model, d.g, enc, pairs, wanted, 1e-4, 1000 + round);
    for (const auto& p : rep.probes) {
      raw_max = std::max(raw_max, p.rel_error);
      if (p.kink) {
        ++kinks;
        continue;
      }
      if (smooth < wanted) {
        smooth_max = std::max(smooth_max, p.rel_error);
        ++smooth;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = paths == 6 && smooth == wanted && smooth_max <= 1e-4 && secs < 60.0;
  return {pass, fmt("d=8 l=4 paths=%zu, %zu probes at eps=1e-4: max rel error %.3g "
                    "(%zu kink-straddling probes excluded, raw max %.3g), %.1fs",
                    paths, smooth, smooth_max, kinks, raw_max, secs)};
}

Outcome memoization_equivalence() {
  const Data d = build(300, 550, 150, 11);
  Model model(ModelConfig{}, FeatureSchema::fit(d.g));
  const auto enc = EncodedGraph::build(d.g, model.schema());
  std::vector<NodeRef> batch;
  for (std::uint32_t i = 0; i < 50; ++i) {
    batch.push_back(d.g.node_at(NodeType::kAd, i * 6));
    batch.push_back(d.g.node_at(NodeType::kKeyword, i * 11));
  }
  const auto res = memoized_forward(model, d.g, enc, batch);
  NaiveModel naive(model, d.g, enc);
  double worst = 0.0;
  for (const auto& n : batch) {
    const auto i = d.g.require_index(n);
    const auto& e = res.embeddings.at(n);
    auto cmp = [&](const Vec& a, const Vec& b) {
      for (Eigen::Index j = 0; j < a.size(); ++j) worst = std::max(worst, rel_diff(a[j], b[j]));
    };
    cmp(e.h, naive.node(n.type, i));
    cmp(e.fused, naive.fused(n.type, i));
    cmp(e.z, naive.siamese(n.type, i));
    for (View v : model.config().views) cmp(e.views.at(v), naive.view(n.type, i, v));
  }
  const std::size_t nodes = d.g.node_count(NodeType::kAd) + d.g.node_count(NodeType::kKeyword) +
                            d.g.node_count(NodeType::kItem);
  const bool pass = worst <= 1e-6 && res.stats.layer_hits > 0;
  return {pass, fmt("%zu-node graph, %zu-root batch, d=64: max rel diff %.3g, cache hits %zu "
                    "(computed %zu)",
                    nodes, batch.size(), worst, res.stats.layer_hits, res.stats.layer_computed)};
}

Outcome softmax_invariants() {
  const Data d = build(600, 1200, 300, 13);
  ModelConfig mc;
  mc.d = 16;
  mc.l = 4;
  Model model(mc, FeatureSchema::fit(d.g));
  const auto enc = EncodedGraph::build(d.g, model.schema());

  std::mt19937_64 rng(5);
  std::vector<NodeRef> nodes;
  while (nodes.size() < 1000) {
    const bool is_ad = rng() % 2 == 0;
    const NodeType t = is_ad ? NodeType::kAd : NodeType::kKeyword;
    const NodeRef n = d.g.node_at(t, static_cast<std::uint32_t>(rng() % d.g.node_count(t)));
    if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
  }
  const auto res = memoized_forward(model, d.g, enc, nodes);
  double att_dev = 0.0;
  for (const auto& [n, e] : res.embeddings) att_dev = std::max(att_dev, std::abs(e.path_weights.sum() - 1.0));

  const auto pairs = first_pairs(d, 300, 3);
  std::vector<NodeRef> roots;
  for (const auto& p : pairs) {
    roots.push_back(d.g.node_at(NodeType::kAd, p.ad));
    roots.push_back(d.g.node_at(NodeType::kKeyword, p.positive));
    for (auto q : p.negatives) roots.push_back(d.g.node_at(NodeType::kKeyword, q));
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  const auto emb = memoized_forward(model, d.g, enc, roots);
  double post_dev = 0.0;
  for (const auto& p : pairs) {
    const Vec& a = emb.embeddings.at(d.g.node_at(NodeType::kAd, p.ad)).views.at(p.view);
    std::vector<double> s = {a.dot(emb.embeddings.at(d.g.node_at(NodeType::kKeyword, p.positive)).views.at(p.view))};
    for (auto q : p.negatives) s.push_back(a.dot(emb.embeddings.at(d.g.node_at(NodeType::kKeyword, q)).views.at(p.view)));
    double total = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      std::vector<double> rest;
      for (std::size_t k = 0; k < s.size(); ++k)
        if (k != j) rest.push_back(s[k]);
      total += posterior(s[j], rest, 1.0);
    }
    post_dev = std::max(post_dev, std::abs(total - 1.0));
  }

  const double base = batch_loss(model, d.g, enc, pairs, 1.0);
  auto shuffled = pairs;
  for (auto& p : shuffled) std::shuffle(p.negatives.begin(), p.negatives.end(), rng);
  const double perm_dev = std::abs(batch_loss(model, d.g, enc, shuffled, 1.0) - base);

  const bool pass = att_dev <= 1e-6 && post_dev <= 1e-9 && perm_dev <= 1e-9;
  return {pass, fmt("attention |sum-1| max %.2g over %zu nodes; posterior |sum-1| max %.2g over %zu "
                    "slates; permuted-loss diff %.2g",
                    att_dev, res.embeddings.size(), post_dev, pairs.size(), perm_dev)};
}

Outcome retrieval_exactness() {
  const std::array<View, 1> view = {View::kAdClick};
  const auto store = random_store(100, 5000, 16, 21, view);
  std::mt19937_64 rng(22);
  std::size_t matches = 0;
  for (std::uint64_t a = 0; a < 100; ++a) {
    std::vector<std::uint64_t> cand(5000);
    for (std::uint64_t i = 0; i < 5000; ++i) cand[i] = i;
    std::shuffle(cand.begin(), cand.end(), rng);
    cand.resize(1000);
    const std::size_t k = 1 + rng() % 1000;
    const auto got = topk_retrieve(store, a, View::kAdClick, cand, k);
    std::vector<std::uint64_t> ids;
    for (const auto& s : got) ids.push_back(s.keyword_id);
    matches += ids == sort_oracle(store, a, View::kAdClick, cand, k) ? 1 : 0;
  }
  return {matches == 100, fmt("%zu/100 instances identical to the full-sort oracle (1000 candidates, "
                              "tie-heavy scores)",
                              matches)};
}

Outcome recall_arithmetic() {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  std::size_t monotone = 0;
  for (int t = 0; t < 50; ++t) {
    const auto [task, got] = random_task(rng, 40, 300, 60);
    double prev = -1.0;
    bool mono = true;
    for (std::size_t k : {5, 10, 20, 40, 60}) {
      const double r = recall_at_k(task, got, k).recall_3k;
      worst = std::max(worst, std::abs(r - recall_oracle(task, got, k)));
      mono = mono && r >= prev;
      prev = r;
    }
    monotone += mono ? 1 : 0;
  }
  return {worst <= 1e-12 && monotone == 50,
          fmt("50 random tasks: max |recall - oracle| %.2g, monotone in K on %zu/50", worst, monotone)};
}

Outcome sampler_distribution() {
  const std::vector<NodeRecord> nodes = {
      {{NodeType::kKeyword, 1}, 9, 4.0, {}, "c6"},
      {{NodeType::kKeyword, 2}, 9, 9.0, {}, "c6"}};
  const HeteroGraph g = ingest({}, nodes);
  const CategoryIndex idx(g);
  const std::uint32_t heavy = g.require_index({NodeType::kKeyword, 2});
  const std::size_t draws = 100000;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto pick = sample_negative_indices(idx, 9, ~std::uint64_t{0}, 1, derive_seed(2024, i));
    hits += pick.at(0) == heavy ? 1 : 0;
  }
  const double freq = static_cast<double>(hits) / draws;
  return {std::abs(freq - 0.6) <= 0.00466,
          fmt("heavier keyword drawn %.5f of %zu (|freq-0.6| = %.5f, bound 0.00466)", freq, draws,
              std::abs(freq - 0.6))};
}

// Criteria 7-9 share one set of training runs.
struct SeedRun {
  std::map<std::string, double> recall;
  std::map<std::string, double> cold;
  double full_train_seconds = 0.0;
  double seed_seconds = 0.0;
};

const std::vector<std::string> kExperimentVariants = {"full", "\\s", "\\v", "bid", "item", "dssm"};

TrainConfig experiment_train_config(std::size_t seed) {
  TrainConfig tc;
  tc.learning_rate = 0.003;
  tc.seed = seed;
  return tc;
}

std::vector<SeedRun> run_experiments() {
  std::vector<SeedRun> runs;
  const std::array<std::size_t, 1> ks = {50};
  for (std::size_t seed = 1; seed <= 5; ++seed) {
    const auto t0 = Clock::now();
    const fs::path dir = work_dir("seed" + std::to_string(seed));
    SynthConfig sc;
    sc.seed = seed;
    write_dataset(generate(sc), sc, dir.string());
    const Dataset ds = load_dataset(dataset_paths(dir.string()));
    const TrainConfig tc = experiment_train_config(seed);
    SeedRun r;
    for (const auto& v : kExperimentVariants) {
      ModelConfig mc = variant_config(v, tc);
      mc.attention_scale = true;
      const auto t1 = Clock::now();
      const auto trained = train_model(ds, mc, tc);
      if (v == "full") r.full_train_seconds = seconds_since(t1);
      const auto scores = evaluate_model(trained.model, ds, ks, v);
      r.recall[v] = scores.by_k.at(50).recall_3k;
      r.cold[v] = scores.cold_by_k.empty() ? 0.0 : scores.cold_by_k.at(50).recall_3k;
      note(fmt("seed %zu %-4s recall@3K %.4f cold %.4f", seed, v.c_str(), r.recall[v], r.cold[v]));
    }
    r.seed_seconds = seconds_since(t0);
    runs.push_back(std::move(r));
    fs::remove_all(dir);
  }
  return runs;
}

Outcome learning_signal(const std::vector<SeedRun>& runs) {
  std::size_t ok = 0;
  double slowest = 0.0;
  std::string per_seed;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i].recall;
    const bool good = r.at("full") >= 1.10 * r.at("dssm") && r.at("full") >= r.at("\\s");
    ok += good ? 1 : 0;
    slowest = std::max(slowest, runs[i].full_train_seconds);
    per_seed += fmt("%s%.4f/%.4f/%.4f", i ? " " : "", r.at("full"), r.at("\\s"), r.at("dssm"));
  }
  return {ok >= 4 && slowest < 600.0,
          fmt("full>=1.1*dssm and full>=\\s on %zu/5 seeds (full/\\s/dssm: %s); slowest full "
              "training run %.1fs",
              ok, per_seed.c_str(), slowest)};
}

Outcome cold_start_benefit(const std::vector<SeedRun>& runs) {
  std::size_t ok = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& c = runs[i].cold;
    ok += c.at("full") >= c.at("\\v") ? 1 : 0;
    per_seed += fmt("%s%.4f/%.4f", i ? " " : "", c.at("full"), c.at("\\v"));
  }
  return {ok >= 4, fmt("cold-start full>=\\v on %zu/5 seeds (full/\\v: %s)", ok, per_seed.c_str())};
}

Outcome metapath_crossover(const std::vector<SeedRun>& runs) {
  double full = 0, bid = 0, item = 0;
  for (const auto& r : runs) {
    full += r.recall.at("full") / runs.size();
    bid += r.recall.at("bid") / runs.size();
    item += r.recall.at("item") / runs.size();
  }
  return {full >= std::max(bid, item),
          fmt("mean recall@3K over 5 seeds: full %.4f, bid %.4f, item %.4f", full, bid, item)};
}

Outcome determinism() {
  const fs::path dir = work_dir("determinism");
  const std::string data = (dir / "data").string();
  if (run_cli("synth-gen --out " + data + " --set synth.ads=200 --set synth.keywords=400 "
              "--set synth.items=100 --set synth.clusters=4") != 0)
    return {false, "synth-gen failed"};
  for (const char* name : {"a.txt", "b.txt"})
    if (run_cli("ablate --data " + data + " --out " + (dir / name).string()) != 0)
      return {false, "ablate failed"};
  const bool same = slurp(dir / "a.txt") == slurp(dir / "b.txt") &&
                    slurp(dir / "a.txt.tsv") == slurp(dir / "b.txt.tsv");
  const auto bytes = slurp(dir / "a.txt").size();
  fs::remove_all(dir);
  return {same && bytes > 0, fmt("two ablate runs (7 variants, default training config): reports %s "
                                 "(%zu bytes)",
                                 same ? "identical" : "differ", bytes)};
}

Outcome hyperparameter_fidelity() {
  const fs::path dir = work_dir("defaults");
  const std::string data = (dir / "data").string();
  if (run_cli("synth-gen --out " + data + " --set synth.ads=60 --set synth.keywords=120 "
              "--set synth.items=30") != 0)
    return {false, "synth-gen failed"};
  const std::string ckpt = (dir / "model.ckpt").string();
  if (run_cli("train --data " + data + " --checkpoint " + ckpt) != 0) return {false, "train failed"};
  const KeyValues m = read_key_values(ckpt + ".manifest");
  fs::remove_all(dir);
  const std::vector<std::pair<std::string, std::string>> want = {
      {"train.learning_rate", "0.03"}, {"train.optimizer", "adam"}, {"train.batch_size", "512"},
      {"train.epochs", "5"},           {"train.l", "16"},           {"train.d", "64"},
      {"train.m", "10"},               {"train.kappa", "3"},        {"train.negatives", "5"}};
  std::string bad;
  for (const auto& [k, v] : want) {
    auto it = m.find(k);
    if (it == m.end() || it->second != v) bad += " " + k;
  }
  return {bad.empty(), bad.empty() ? "run manifest of a default train run: lr 0.03, adam, batch 512, "
                                     "epochs 5, l 16, d 64, m 10, kappa 3, negatives 5"
                                   : "mismatched:" + bad};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("error: ") + e.what()};
    }
  };

  report(1, "gradient correctness", guarded(gradient_correctness));
  report(2, "memoization equivalence", guarded(memoization_equivalence));
  report(3, "softmax and attention invariants", guarded(softmax_invariants));
  report(4, "retrieval exactness", guarded(retrieval_exactness));
  report(5, "recall arithmetic", guarded(recall_arithmetic));
  report(6, "negative sampler distribution", guarded(sampler_distribution));

  std::vector<SeedRun> runs;
  const Outcome experiments = guarded([&] {
    runs = run_experiments();
    return Outcome{true, ""};
  });
  auto needs_runs = [&](const std::function<Outcome()>& f) {
    return experiments.pass ? guarded(f) : experiments;
  };
  report(7, "learning signal", needs_runs([&] { return learning_signal(runs); }));
  report(8, "cold-start benefit", needs_runs([&] { return cold_start_benefit(runs); }));
  report(9, "metapath-group crossover", needs_runs([&] { return metapath_crossover(runs); }));
  report(10, "determinism", guarded(determinism));
  report(11, "hyperparameter fidelity", guarded(hyperparameter_fidelity));

  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
