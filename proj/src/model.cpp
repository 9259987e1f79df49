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

#include "hetmatch/model.hpp"

#include <cmath>
#include <random>

#include "hetmatch/category_index.hpp"
#include "text.hpp"

namespace hetmatch {

namespace {

std::string views_to_string(const std::vector<View>& views) {
  std::string s;
  for (View v : views) {
    if (!s.empty()) s += ',';
    s += to_string(v);
  }
  return s;
}

std::string_view group_name(MetapathGroup g) {
  switch (g) {
    case MetapathGroup::kAll: return "all";
    case MetapathGroup::kBid: return "bid";
    case MetapathGroup::kItem: return "item";
  }
  return "all";
}

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& k) {
  auto it = meta.find(k);
  if (it == meta.end()) fail(ErrorCode::kData, "checkpoint metadata lacks '" + k + "'");
  return it->second;
}

std::size_t meta_size(const std::map<std::string, std::string>& meta, const std::string& k) {
  auto v = text::parse_u64(meta_at(meta, k));
  if (!v) fail(ErrorCode::kData, "checkpoint metadata '" + k + "' is not an integer");
  return *v;
}

bool meta_bool(const std::map<std::string, std::string>& meta, const std::string& k) {
  return meta_at(meta, k) == "1";
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_meta() const {
  return {
      {"model.d", std::to_string(d)},
      {"model.l", std::to_string(l)},
      {"model.m", std::to_string(m)},
      {"model.kappa", std::to_string(kappa)},
      {"model.siamese", siamese ? "1" : "0"},
      {"model.dssm", dssm ? "1" : "0"},
      {"model.aggregator", aggregator == Aggregator::kSage ? "sage" : "hetmatch"},
      {"model.groups", std::string(group_name(groups))},
      {"model.views", views_to_string(views)},
      {"model.attention_scale", attention_scale ? "1" : "0"},
      {"model.normalize", normalize ? "1" : "0"},
      {"model.seed", std::to_string(seed)},
  };
}

ModelConfig ModelConfig::from_meta(const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  c.d = meta_size(meta, "model.d");
  c.l = meta_size(meta, "model.l");
  c.m = meta_size(meta, "model.m");
  c.kappa = meta_size(meta, "model.kappa");
  c.siamese = meta_bool(meta, "model.siamese");
  c.dssm = meta_bool(meta, "model.dssm");
  c.aggregator = meta_at(meta, "model.aggregator") == "sage" ? Aggregator::kSage
                                                              : Aggregator::kAutoencoder;
  const auto& g = meta_at(meta, "model.groups");
  c.groups = g == "bid" ? MetapathGroup::kBid : g == "item" ? MetapathGroup::kItem : MetapathGroup::kAll;
  c.views.clear();
  for (auto tok : text::split(meta_at(meta, "model.views"), ',')) {
    auto v = parse_view(tok);
    if (!v) fail(ErrorCode::kData, "checkpoint has unknown view '" + std::string(tok) + "'");
    c.views.push_back(*v);
  }
  c.attention_scale = meta_bool(meta, "model.attention_scale");
  c.normalize = meta_bool(meta, "model.normalize");
  c.seed = meta_size(meta, "model.seed");
  return c;
}

EncodedGraph EncodedGraph::build(const HeteroGraph& g, const FeatureSchema& schema) {
  EncodedGraph e;
  for (NodeType t : kAllNodeTypes) e.nodes[static_cast<int>(t)] = schema.encode_all(g, t);
  return e;
}

int Model::tower_slot(NodeType tower) {
  switch (tower) {
    case NodeType::kAd: return 0;
    case NodeType::kKeyword: return 1;
    case NodeType::kItem: break;
  }
  fail(ErrorCode::kUsage, "items have no tower");
}

Model::Model(ModelConfig cfg, FeatureSchema schema) : cfg_(std::move(cfg)), schema_(std::move(schema)) {
  if (cfg_.d == 0 || cfg_.l == 0 || cfg_.m == 0)
    fail(ErrorCode::kUsage, "d, l and m must be positive");
  if (cfg_.aggregator == Aggregator::kAutoencoder && !cfg_.dssm && cfg_.l >= cfg_.d)
    fail(ErrorCode::kUsage, "latent size l must be smaller than d");
  if (cfg_.views.empty()) fail(ErrorCode::kUsage, "at least one view is required");
  build();
  initialize();
}

void Model::build() {
  const auto d = static_cast<Eigen::Index>(cfg_.d);
  const auto l = static_cast<Eigen::Index>(cfg_.l);
  for (const auto& spec : schema_.tables())
    tables_.push_back(params_.add("table/" + spec.feature_name,
                                  static_cast<Eigen::Index>(spec.embedding_width),
                                  static_cast<Eigen::Index>(spec.vocabulary_size)));
  for (NodeType t : kAllNodeTypes) {
    for (int ti : schema_.slots(t)) slot_tables_[static_cast<int>(t)].push_back(tables_[ti]);
    const std::string p = "fusion/" + std::string(to_string(t)) + "/";
    auto& f = fusion_[static_cast<int>(t)];
    f.w1 = params_.add(p + "w1", d, static_cast<Eigen::Index>(schema_.input_width(t)));
    f.b1 = params_.add(p + "b1", d, 1);
    f.w2 = params_.add(p + "w2", d, d);
    f.b2 = params_.add(p + "b2", d, 1);
  }
  paths_[0] = ad_tower_metapaths(cfg_.groups);
  paths_[1] = keyword_tower_metapaths(cfg_.groups);
  for (int tw = 0; tw < 2; ++tw) {
    const std::string tower = tw == 0 ? "ad" : "keyword";
    if (!cfg_.dssm) {
      for (const auto& path : paths_[tw]) {
        std::vector<ConvParams> layers;
        for (std::size_t k = 1; k <= path.length(); ++k) {
          const std::string p = "conv/" + path.name + "/" + std::to_string(k) + "/";
          ConvParams c;
          c.b = params_.add(p + "b", d, 1);
          if (cfg_.aggregator == Aggregator::kAutoencoder) {
            c.W = params_.add(p + "W", d, d);
            c.V = params_.add(p + "V", l, d);
            c.U = params_.add(p + "U", d, l);
          } else {
            c.Ws = params_.add(p + "Ws", d, d);
            c.Wn = params_.add(p + "Wn", d, d);
          }
          layers.push_back(c);
        }
        conv_[tw].push_back(std::move(layers));
      }
      attention_[tw] = params_.add("attention/" + tower, d, 1);
    }
    for (View v : cfg_.views) {
      const std::string p = "head/" + tower + "/" + std::string(to_string(v)) + "/";
      auto& h = heads_[tw][static_cast<int>(v)];
      h.w1 = params_.add(p + "w1", d, d);
      h.b1 = params_.add(p + "b1", d, 1);
      h.w2 = params_.add(p + "w2", d, d);
      h.b2 = params_.add(p + "b2", d, 1);
    }
  }
}

void Model::initialize() {
  std::mt19937_64 rng(cfg_.seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[static_cast<int>(i)];
    if (t.value.cols() == 1 && t.name.find("attention/") != 0) continue;  // biases start at zero
    double fan_in = static_cast<double>(t.value.cols());
    double fan_out = static_cast<double>(t.value.rows());
    if (t.name.rfind("table/", 0) == 0) fan_in = fan_out;  // one embedding per column
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < t.value.size(); ++j)
      t.value.data()[j] = (2.0 * uniform01(rng) - 1.0) * limit;
  }
}

const std::vector<Metapath>& Model::paths(NodeType tower) const { return paths_[tower_slot(tower)]; }

const ConvParams& Model::conv(NodeType tower, std::size_t path, std::size_t layer) const {
  return conv_[tower_slot(tower)].at(path).at(layer - 1);
}

bool Model::has_view(View v) const {
  for (View x : cfg_.views)
    if (x == v) return true;
  return false;
}

const MlpParams& Model::head(NodeType tower, View v) const {
  if (!has_view(v)) fail(ErrorCode::kUsage, "model has no head for view " + std::string(to_string(v)));
  return heads_[tower_slot(tower)][static_cast<int>(v)];
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint c;
  c.meta = cfg_.to_meta();
  c.meta["format"] = "hetmatch-checkpoint-1";
  c.meta["schema.manifest"] = schema_.manifest_text();
  c.meta["schema.quantiles"] = schema_.quantiles_text();
  c.params = params_;
  return c;
}

Model Model::from_checkpoint(const Checkpoint& c) {
  auto it = c.meta.find("format");
  if (it == c.meta.end() || it->second != "hetmatch-checkpoint-1")
    fail(ErrorCode::kData, "unsupported checkpoint format");
  Model m(ModelConfig::from_meta(c.meta),
          FeatureSchema::from_text(meta_at(c.meta, "schema.manifest"),
                                   meta_at(c.meta, "schema.quantiles")));
  if (m.params_.size() != c.params.size())
    fail(ErrorCode::kData, "checkpoint tensor count does not match its configuration");
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Tensor& src = c.params[static_cast<int>(i)];
    const int id = m.params_.find(src.name);
    if (id < 0) fail(ErrorCode::kData, "checkpoint tensor " + src.name + " is unexpected");
    Tensor& dst = m.params_[id];
    if (dst.value.rows() != src.value.rows() || dst.value.cols() != src.value.cols())
      fail(ErrorCode::kData, "checkpoint tensor " + src.name + " has the wrong shape");
    dst.value = src.value;
  }
  return m;
}

// --- single-vector building blocks -------------------------------------------

Vec conv_layer(const Vec& self, std::span<const Vec> neighbors, const Mat& W, const Vec& b,
               const Mat& V, const Mat& U) {
  const auto d = self.size();
  if (W.rows() != W.cols() || W.cols() != d || V.cols() != d || U.rows() != d ||
      U.cols() != V.rows() || (b.size() != 0 && b.size() != d))
    fail(ErrorCode::kUsage, "conv_layer: inconsistent dimensions");
  Vec n = Vec::Zero(d);
  for (const Vec& x : neighbors) {
    if (x.size() != d) fail(ErrorCode::kUsage, "conv_layer: neighbour dimension mismatch");
    n += x;
  }
  Vec pre = W * self + U * (V * n).cwiseMax(0.0);
  if (b.size() != 0) pre += b;
  return pre.cwiseMax(0.0);
}

SemanticFusion semantic_fuse(std::span<const Vec> per_path, const Vec& att, double scale) {
  if (per_path.empty()) fail(ErrorCode::kUsage, "semantic_fuse: no metapath embeddings");
  Vec logits(static_cast<Eigen::Index>(per_path.size()));
  for (std::size_t p = 0; p < per_path.size(); ++p)
    logits[static_cast<Eigen::Index>(p)] = scale * att.dot(per_path[p]);
  Vec w = (logits.array() - logits.maxCoeff()).exp();
  w /= w.sum();
  Vec fused = Vec::Zero(per_path[0].size());
  for (std::size_t p = 0; p < per_path.size(); ++p) fused += w[static_cast<Eigen::Index>(p)] * per_path[p];
  return {std::move(fused), std::move(w)};
}

Vec siamese_embed(const Vec& fused, std::span<const Vec> neighbor_fused) {
  if (neighbor_fused.empty()) return fused;
  Vec mean = Vec::Zero(fused.size());
  for (const Vec& n : neighbor_fused) mean += n;
  return fused + mean / static_cast<double>(neighbor_fused.size());
}

Vec view_transform(const Vec& z, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2) {
  return w2 * (w1 * z + b1).cwiseMax(0.0) + b2;
}

// --- memoised forward ---------------------------------------------------------

ForwardPass::ForwardPass(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                         Tape& tape)
    : model_(&model), g_(&g), enc_(&enc), tape_(&tape) {
  for (NodeType t : kAllNodeTypes) {
    const auto n = g.node_count(t);
    if (enc.nodes[static_cast<int>(t)].size() != n)
      fail(ErrorCode::kInternal, "encoded features do not match the graph");
    node_slot_[static_cast<int>(t)].assign(n, -1);
    fused_slot_[static_cast<int>(t)].assign(n, -1);
    siamese_slot_[static_cast<int>(t)].assign(n, -1);
  }
}

std::uint64_t ForwardPass::key(int a, std::size_t b, std::size_t c, std::size_t d, std::uint32_t e) {
  return (static_cast<std::uint64_t>(a) << 60) | (static_cast<std::uint64_t>(b) << 52) |
         (static_cast<std::uint64_t>(c) << 44) | (static_cast<std::uint64_t>(d) << 36) | e;
}

int ForwardPass::node_embedding(NodeType t, std::uint32_t i) {
  int& slot = node_slot_[static_cast<int>(t)][i];
  if (slot >= 0) {
    ++stats_.node_hits;
    return slot;
  }
  ++stats_.node_computed;
  const int x = tape_->feature_input(model_->slot_tables(t), enc_->at(t, i));
  const MlpParams& f = model_->fusion(t);
  slot = tape_->mlp(x, f.w1, f.b1, f.w2, f.b2);
  return slot;
}

int ForwardPass::layer(NodeType tower, std::size_t path, std::size_t depth, std::size_t k,
                       std::uint32_t node) {
  const Metapath& p = model_->paths(tower)[path];
  const NodeType here = depth == 0 ? p.source_type() : p.steps[depth - 1].to();
  if (k == 0) return node_embedding(here, node);
  const std::uint64_t cache_key = key(Model::tower_slot(tower), path, depth, k, node);
  if (auto it = cache_.find(cache_key); it != cache_.end()) {
    ++stats_.layer_hits;
    return it->second;
  }
  const int self = layer(tower, path, depth, k - 1, node);
  std::vector<int> children;
  for (const Neighbor& nb : g_->top_neighbors(node, p.steps[depth], model_->config().m))
    children.push_back(layer(tower, path, depth + 1, k - 1, nb.index));
  const ConvParams& c = model_->conv(tower, path, k);
  const int out = model_->config().aggregator == Aggregator::kAutoencoder
                      ? tape_->conv(self, std::move(children), c.W, c.b, c.V, c.U)
                      : tape_->sage(self, std::move(children), c.Ws, c.Wn, c.b);
  ++stats_.layer_computed;
  cache_.emplace(cache_key, out);
  return out;
}

int ForwardPass::path_embedding(NodeType tower, std::size_t path, std::uint32_t root) {
  return layer(tower, path, 0, model_->paths(tower)[path].length(), root);
}

int ForwardPass::fused(NodeType t, std::uint32_t i) {
  int& slot = fused_slot_[static_cast<int>(t)][i];
  if (slot >= 0) return slot;
  if (model_->config().dssm) {
    slot = node_embedding(t, i);
    return slot;
  }
  const auto& paths = model_->paths(t);
  std::vector<int> per_path;
  per_path.reserve(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) per_path.push_back(path_embedding(t, p, i));
  const double scale =
      model_->config().attention_scale ? 1.0 / std::sqrt(static_cast<double>(model_->config().d)) : 1.0;
  slot = tape_->attention(std::move(per_path), model_->attention(t), scale);
  return slot;
}

int ForwardPass::siamese(NodeType t, std::uint32_t i) {
  int& slot = siamese_slot_[static_cast<int>(t)][i];
  if (slot >= 0) return slot;
  const int self = fused(t, i);
  if (!model_->config().siamese) {
    slot = self;
    return slot;
  }
  const NodeType other = t == NodeType::kAd ? NodeType::kKeyword : NodeType::kAd;
  std::vector<int> nbs;
  for (const Neighbor& nb : influential_neighbor_span(*g_, t, i, model_->config().kappa))
    nbs.push_back(fused(other, nb.index));
  slot = tape_->siamese(self, std::move(nbs));
  return slot;
}

int ForwardPass::view_embedding(NodeType t, std::uint32_t i, View v) {
  const std::uint64_t cache_key = key(3, static_cast<std::size_t>(t), static_cast<std::size_t>(v), 0, i);
  if (auto it = cache_.find(cache_key); it != cache_.end()) return it->second;
  const MlpParams& h = model_->head(t, v);
  int out = tape_->mlp(siamese(t, i), h.w1, h.b1, h.w2, h.b2);
  if (model_->config().normalize) out = tape_->normalize(out);
  cache_.emplace(cache_key, out);
  return out;
}

MemoizedResult memoized_forward(const Model& model, const HeteroGraph& g, const EncodedGraph& enc,
                                std::span<const NodeRef> batch) {
  Tape tape(model.params());
  ForwardPass fp(model, g, enc, tape);
  MemoizedResult res;
  for (const NodeRef& n : batch) {
    if (n.type == NodeType::kItem) fail(ErrorCode::kUsage, "items have no tower embedding");
    const std::uint32_t i = g.require_index(n);
    TowerEmbedding e;
    e.h = tape.value(fp.node_embedding(n.type, i));
    if (!model.config().dssm) {
      for (std::size_t p = 0; p < model.paths(n.type).size(); ++p)
        e.per_path.push_back(tape.value(fp.path_embedding(n.type, p, i)));
      const int f = fp.fused(n.type, i);
      e.fused = tape.value(f);
      e.path_weights = tape.attention_weights(f);
    } else {
      e.fused = tape.value(fp.fused(n.type, i));
    }
    e.z = tape.value(fp.siamese(n.type, i));
    for (View v : model.config().views) e.views[v] = tape.value(fp.view_embedding(n.type, i, v));
    res.embeddings[n] = std::move(e);
  }
  res.stats = fp.stats();
  return res;
}

}  // namespace hetmatch
