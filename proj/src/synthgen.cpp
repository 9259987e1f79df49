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

#include "hetmatch/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>

#include "text.hpp"

namespace hetmatch {

namespace {

using Field = std::variant<std::size_t SynthConfig::*, double SynthConfig::*>;

const std::vector<std::pair<std::string, Field>>& synth_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"ads", &SynthConfig::ads},
      {"keywords", &SynthConfig::keywords},
      {"items", &SynthConfig::items},
      {"categories", &SynthConfig::categories},
      {"clusters", &SynthConfig::clusters},
      {"latent_dim", &SynthConfig::latent_dim},
      {"latent_noise", &SynthConfig::latent_noise},
      {"affinity", &SynthConfig::affinity},
      {"density_ad_click", &SynthConfig::density_ad_click},
      {"density_ad_bid", &SynthConfig::density_ad_bid},
      {"density_item_click", &SynthConfig::density_item_click},
      {"density_ad_coclick", &SynthConfig::density_ad_coclick},
      {"noise_fraction", &SynthConfig::noise_fraction},
      {"cold_fraction", &SynthConfig::cold_fraction},
      {"target_fraction", &SynthConfig::target_fraction},
      {"view_target_fraction", &SynthConfig::view_target_fraction},
      {"labels_per_view", &SynthConfig::labels_per_view},
      {"term_vocab", &SynthConfig::term_vocab},
      {"terms_per_node", &SynthConfig::terms_per_node},
      {"term_signal", &SynthConfig::term_signal},
      {"seed", &SynthConfig::seed},
  };
  return fields;
}

template <typename Rng>
double gaussian(Rng& rng) {
  // Box-Muller on portable uniforms; std::normal_distribution differs across libraries.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

template <typename Rng, typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

struct Population {
  std::size_t count = 0;
  std::vector<std::size_t> cluster;
  std::vector<Vec> latent;  // unit length
};

Population make_population(std::size_t n, const std::vector<Vec>& centers, double noise,
                           std::mt19937_64& rng) {
  Population p;
  p.count = n;
  const auto dim = centers.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % centers.size();
    Vec x = centers[c];
    for (Eigen::Index j = 0; j < dim; ++j) x[j] += noise * gaussian(rng);
    p.cluster.push_back(c);
    p.latent.push_back(x.normalized());
  }
  return p;
}

/// Heavy-tailed integer count in [1, 100], scaled up by affinity.
double edge_weight(std::mt19937_64& rng, double affinity) {
  const double u = 1.0 - uniform01(rng);
  const double pareto = std::pow(u, -1.0 / 1.5);
  return std::clamp(std::floor(pareto * (1.0 + affinity)), 1.0, 100.0);
}

struct RawEdge {
  std::size_t src = 0, dst = 0;
  double weight = 0.0;
};

std::vector<RawEdge> sample_relation(const Population& src, const Population& dst, double density,
                                     double affinity, double noise_fraction, std::mt19937_64& rng,
                                     std::size_t& clamped) {
  std::vector<double> f(src.count * dst.count, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < src.count; ++i) {
    for (std::size_t j = 0; j < dst.count; ++j) {
      if (src.cluster[i] != dst.cluster[j]) continue;
      const double v = std::exp(affinity * src.latent[i].dot(dst.latent[j]));
      f[i * dst.count + j] = v;
      total += v;
    }
  }
  const double mean = total / static_cast<double>(f.size());
  std::vector<RawEdge> out;
  for (std::size_t i = 0; i < src.count; ++i) {
    for (std::size_t j = 0; j < dst.count; ++j) {
      const double fij = f[i * dst.count + j];
      double p = density * ((1.0 - noise_fraction) * (mean > 0 ? fij / mean : 0.0) + noise_fraction);
      if (p > 1.0) {
        p = 1.0;
        ++clamped;
      }
      if (uniform01(rng) < p) out.push_back({i, j, edge_weight(rng, mean > 0 ? fij / mean : 0.0)});
    }
  }
  return out;
}

std::vector<std::uint64_t> pick_up_to(std::vector<std::uint64_t> pool, std::size_t n,
                                      std::mt19937_64& rng) {
  shuffle(rng, pool);
  if (pool.size() > n) pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::string term_list(std::size_t cluster, const SynthConfig& cfg, std::mt19937_64& rng) {
  const std::size_t topic = std::max<std::size_t>(1, cfg.term_vocab / cfg.clusters);
  std::string s;
  for (std::size_t t = 0; t < cfg.terms_per_node; ++t) {
    std::size_t term = uniform01(rng) < cfg.term_signal ? cluster * topic + uniform_index(rng, topic)
                                                        : uniform_index(rng, cfg.term_vocab);
    if (t) s += ',';
    s += std::to_string(std::min(term, cfg.term_vocab - 1));
  }
  return s;
}

}  // namespace

std::map<std::string, std::string> SynthConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, field] : synth_fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, double>)
            out[name] = text::exact(this->*member);
          else
            out[name] = std::to_string(this->*member);
        },
        field);
  }
  return out;
}

void SynthConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    auto it = std::find_if(synth_fields().begin(), synth_fields().end(),
                           [&](const auto& f) { return f.first == key; });
    if (it == synth_fields().end()) fail(ErrorCode::kUsage, "unknown synth option '" + key + "'");
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, double>) {
            auto v = text::parse_double(value);
            if (!v) fail(ErrorCode::kUsage, "option " + key + " expects a number");
            this->*member = *v;
          } else {
            auto v = text::parse_u64(value);
            if (!v) fail(ErrorCode::kUsage, "option " + key + " expects a non-negative integer");
            this->*member = static_cast<T>(*v);
          }
        },
        it->second);
  }
}

void SynthConfig::validate() const {
  if (ads == 0 || keywords == 0 || items == 0 || categories == 0 || clusters == 0 ||
      latent_dim == 0 || term_vocab == 0)
    fail(ErrorCode::kUsage, "synth counts must be positive");
  if (categories > clusters)
    fail(ErrorCode::kUsage, "need at least as many clusters as categories");
  for (double f : {noise_fraction, cold_fraction, target_fraction, view_target_fraction, term_signal})
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorCode::kUsage, "synth fractions must lie in [0, 1]");
  for (double d : {density_ad_click, density_ad_bid, density_item_click, density_ad_coclick})
    if (!(d >= 0.0)) fail(ErrorCode::kUsage, "synth densities must be non-negative");
}

SynthDataset generate(const SynthConfig& input) {
  SynthConfig cfg = input;
  cfg.validate();
  SynthDataset ds;
  for (auto* d : {&cfg.density_ad_click, &cfg.density_ad_bid, &cfg.density_item_click,
                  &cfg.density_ad_coclick}) {
    if (*d > 1.0) {
      ds.warnings.push_back("density " + text::exact(*d) + " exceeds a complete graph; clamped to 1");
      *d = 1.0;
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Vec> centers;
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    Vec x(static_cast<Eigen::Index>(cfg.latent_dim));
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = gaussian(rng);
    centers.push_back(x.normalized());
  }
  const Population ads = make_population(cfg.ads, centers, cfg.latent_noise, rng);
  const Population kws = make_population(cfg.keywords, centers, cfg.latent_noise, rng);
  const Population items = make_population(cfg.items, centers, cfg.latent_noise, rng);
  auto category_of = [&](std::size_t cluster) { return cluster % cfg.categories; };
  ds.clusters[static_cast<int>(NodeType::kAd)] = ads.cluster;
  ds.clusters[static_cast<int>(NodeType::kKeyword)] = kws.cluster;
  ds.clusters[static_cast<int>(NodeType::kItem)] = items.cluster;

  std::vector<bool> cold(cfg.ads, false);
  {
    std::vector<std::size_t> order(cfg.ads);
    for (std::size_t i = 0; i < cfg.ads; ++i) order[i] = i;
    shuffle(rng, order);
    const auto n_cold = static_cast<std::size_t>(std::llround(cfg.cold_fraction * cfg.ads));
    for (std::size_t i = 0; i < n_cold; ++i) cold[order[i]] = true;
  }
  for (std::size_t i = 0; i < cfg.ads; ++i)
    if (cold[i]) ds.cold_ads.push_back(i);

  std::vector<std::vector<std::size_t>> items_by_cluster(cfg.clusters);
  for (std::size_t i = 0; i < cfg.items; ++i) items_by_cluster[items.cluster[i]].push_back(i);
  std::vector<std::size_t> own_item(cfg.ads);
  for (std::size_t a = 0; a < cfg.ads; ++a) {
    const auto& pool = items_by_cluster[ads.cluster[a]];
    own_item[a] = pool.empty() ? uniform_index(rng, cfg.items) : pool[uniform_index(rng, pool.size())];
  }

  std::size_t clamped = 0;
  const auto click = sample_relation(ads, kws, cfg.density_ad_click, cfg.affinity,
                                     cfg.noise_fraction, rng, clamped);
  auto bid = sample_relation(ads, kws, cfg.density_ad_bid, cfg.affinity, cfg.noise_fraction,
                             rng, clamped);
  const auto item_click = sample_relation(items, kws, cfg.density_item_click, cfg.affinity,
                                          cfg.noise_fraction, rng, clamped);
  const auto coclick = sample_relation(ads, items, cfg.density_ad_coclick, cfg.affinity,
                                       cfg.noise_fraction, rng, clamped);
  if (clamped > 0)
    ds.warnings.push_back(std::to_string(clamped) + " pair probabilities clamped to 1");
  ds.tallies["clamped_pairs"] = clamped;
  ds.tallies["generated.ad_click_kw"] = click.size();
  ds.tallies["generated.ad_bid_kw"] = bid.size();
  ds.tallies["generated.item_click_kw"] = item_click.size();
  ds.tallies["generated.ad_coclick_item"] = coclick.size();

  // A cold ad must be reachable through bids: one without any gets a bid on
  // the closest keyword of its cluster.
  {
    std::vector<bool> has_bid(cfg.ads, false);
    for (const auto& e : bid) has_bid[e.src] = true;
    std::size_t filled = 0;
    for (std::size_t a : ds.cold_ads) {
      if (has_bid[a]) continue;
      std::size_t best = cfg.keywords;
      double best_cos = -2.0;
      for (std::size_t k = 0; k < cfg.keywords; ++k) {
        if (kws.cluster[k] != ads.cluster[a]) continue;
        const double c = ads.latent[a].dot(kws.latent[k]);
        if (c > best_cos) {
          best_cos = c;
          best = k;
        }
      }
      if (best == cfg.keywords) best = uniform_index(rng, cfg.keywords);
      bid.push_back({a, best, edge_weight(rng, 0.0)});
      ++filled;
    }
    ds.tallies["cold_bid_fill"] = filled;
  }

  auto edge = [](NodeType st, std::size_t s, Relation r, NodeType dt, std::size_t d, double w) {
    return EdgeRecord{{st, s}, r, {dt, d}, w, {}};
  };

  // Graph clicks, held-out targets and per-ad label pools.
  std::vector<std::vector<std::uint64_t>> graph_click(cfg.ads), graph_bid(cfg.ads),
      item_graph_click(cfg.items), item_heldout(cfg.items);
  for (const auto& e : click) {
    if (cold[e.src] || uniform01(rng) < cfg.target_fraction) {
      ds.task.targets[e.src].push_back(e.dst);
    } else {
      graph_click[e.src].push_back(e.dst);
      ds.edges.push_back(edge(NodeType::kAd, e.src, Relation::kAdClickKw, NodeType::kKeyword,
                              e.dst, e.weight));
    }
  }
  for (const auto& e : bid) {
    if (!cold[e.src] && uniform01(rng) < cfg.view_target_fraction) {
      ds.task.view_targets[View::kAdBid][e.src].push_back(e.dst);
    } else {
      graph_bid[e.src].push_back(e.dst);
      ds.edges.push_back(edge(NodeType::kAd, e.src, Relation::kAdBidKw, NodeType::kKeyword, e.dst,
                              e.weight));
    }
  }
  for (const auto& e : item_click) {
    if (uniform01(rng) < cfg.view_target_fraction) {
      item_heldout[e.src].push_back(e.dst);
    } else {
      item_graph_click[e.src].push_back(e.dst);
      ds.edges.push_back(edge(NodeType::kItem, e.src, Relation::kItemClickKw, NodeType::kKeyword,
                              e.dst, e.weight));
    }
  }
  for (const auto& e : coclick) {
    if (cold[e.src]) continue;
    ds.edges.push_back(edge(NodeType::kAd, e.src, Relation::kAdCoclickItem, NodeType::kItem, e.dst,
                            e.weight));
  }
  for (std::size_t a = 0; a < cfg.ads; ++a)
    if (!item_heldout[own_item[a]].empty())
      ds.task.view_targets[View::kItemClick][a] = item_heldout[own_item[a]];

  for (std::size_t a = 0; a < cfg.ads; ++a) {
    for (auto kw : pick_up_to(graph_click[a], cfg.labels_per_view, rng))
      ds.labels.push_back({View::kAdClick, a, kw});
    for (auto kw : pick_up_to(graph_bid[a], cfg.labels_per_view, rng))
      ds.labels.push_back({View::kAdBid, a, kw});
    for (auto kw : pick_up_to(item_graph_click[own_item[a]], cfg.labels_per_view, rng))
      ds.labels.push_back({View::kItemClick, a, kw});
  }

  // Node records.
  std::vector<std::size_t> bid_count(cfg.keywords, 0);
  for (const auto& e : bid) ++bid_count[e.dst];
  const std::size_t brands_per_cluster = 10;
  auto brand = [&](std::size_t cluster) {
    return uniform01(rng) < 0.5 ? cluster * brands_per_cluster + uniform_index(rng, brands_per_cluster)
                                : uniform_index(rng, cfg.clusters * brands_per_cluster);
  };
  auto add_offer = [&](NodeType t, std::size_t i, std::size_t cluster, std::string_view id_name) {
    NodeRecord r;
    r.node = {t, i};
    r.category = category_of(cluster);
    r.features = {{std::string(id_name), std::to_string(i)},
                  {"title", term_list(cluster, cfg, rng)},
                  {"category", std::to_string(category_of(cluster))},
                  {"brand", std::to_string(brand(cluster))},
                  {"props", std::to_string(uniform_index(rng, 50)) + "," +
                                std::to_string(uniform_index(rng, 50))},
                  {"shop", std::to_string(uniform_index(rng, 100))}};
    ds.nodes.push_back(std::move(r));
  };
  for (std::size_t a = 0; a < cfg.ads; ++a) add_offer(NodeType::kAd, a, ads.cluster[a], "ad_id");
  for (std::size_t i = 0; i < cfg.items; ++i)
    add_offer(NodeType::kItem, i, items.cluster[i], "item_id");
  for (std::size_t k = 0; k < cfg.keywords; ++k) {
    NodeRecord r;
    r.node = {NodeType::kKeyword, k};
    r.category = category_of(kws.cluster[k]);
    r.searched_count = edge_weight(rng, 0.0) * 10.0;
    r.features = {{"keyword_id", std::to_string(k)},
                  {"query_terms", term_list(kws.cluster[k], cfg, rng)},
                  {"category", std::to_string(category_of(kws.cluster[k]))},
                  {"avg_bid", text::fixed(0.1 + 2.0 * uniform01(rng), 2)},
                  {"bid_count", std::to_string(bid_count[k])},
                  {"shop_count", std::to_string(uniform_index(rng, 30))}};
    ds.nodes.push_back(std::move(r));
  }

  for (Relation r : kAllRelations) ds.tallies["graph." + std::string(to_string(r))] = 0;
  for (const auto& e : ds.edges) ++ds.tallies["graph." + std::string(to_string(e.relation))];
  std::size_t n_targets = 0;
  for (const auto& [ad, t] : ds.task.targets) n_targets += t.size();
  ds.tallies["targets"] = n_targets;
  ds.tallies["cold_ads"] = ds.cold_ads.size();
  for (View v : kAllViews) ds.tallies["labels." + std::string(to_string(v))] = 0;
  for (const auto& l : ds.labels) ++ds.tallies["labels." + std::string(to_string(l.view))];
  return ds;
}

void write_dataset(const SynthDataset& ds, const SynthConfig& cfg, const std::string& dir) {
  std::string edges = "# src_type\tsrc_id\trelation\tdst_type\tdst_id\tweight\n";
  for (const auto& e : ds.edges) edges += format_edge(e) + '\n';
  std::string nodes = "# type\tid\tcategory\tsearched_count\tfeatures...\n";
  for (const auto& n : ds.nodes) nodes += format_node(n) + '\n';

  std::string manifest = "format = hetmatch-synth-1\n";
  for (const auto& [k, v] : cfg.to_map()) manifest += "config." + k + " = " + v + '\n';
  for (const auto& [k, v] : ds.tallies) manifest += "tally." + k + " = " + std::to_string(v) + '\n';
  std::string cold;
  for (std::size_t i = 0; i < ds.cold_ads.size(); ++i)
    cold += (i ? "," : "") + std::to_string(ds.cold_ads[i]);
  manifest += "cold_ads = " + cold + '\n';
  for (const auto& w : ds.warnings) manifest += "warning = " + w + '\n';

  text::write_file_atomic(dir + "/edges.tsv", edges);
  text::write_file_atomic(dir + "/nodes.tsv", nodes);
  text::write_file_atomic(dir + "/labels.tsv", format_labels(ds.labels));
  text::write_file_atomic(dir + "/eval_task.tsv", format_eval_task(ds.task));
  text::write_file_atomic(dir + "/synth_manifest.txt", manifest);
}

}  // namespace hetmatch
