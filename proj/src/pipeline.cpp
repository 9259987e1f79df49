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

#include "hetmatch/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "text.hpp"

namespace hetmatch {

KeyValues parse_key_values(std::string_view body, const std::string& source) {
  KeyValues kv;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    const auto hash = line.find('#');
    auto t = text::trim(hash == std::string_view::npos ? line : line.substr(0, hash));
    if (t.empty()) return;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::kUsage, where + ": expected 'key = value'");
    const std::string key(text::trim(t.substr(0, eq)));
    const std::string value(text::trim(t.substr(eq + 1)));
    if (key.empty()) fail(ErrorCode::kUsage, where + ": empty key");
    if (!kv.emplace(key, value).second) fail(ErrorCode::kUsage, where + ": duplicate key '" + key + "'");
  });
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kUsage, "config file not found: " + path);
  return parse_key_values(text::read_file(path), path);
}

std::string format_key_values(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + '\n';
  return s;
}

void apply_train_overrides(TrainConfig& cfg, KeyValues& kv) {
  auto take_size = [&](const char* key, std::size_t& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    auto v = text::parse_u64(it->second);
    if (!v) fail(ErrorCode::kUsage, std::string(key) + " expects a non-negative integer");
    dst = static_cast<std::size_t>(*v);
    kv.erase(it);
  };
  auto take_double = [&](const char* key, double& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    auto v = text::parse_double(it->second);
    if (!v || !std::isfinite(*v)) fail(ErrorCode::kUsage, std::string(key) + " expects a number");
    dst = *v;
    kv.erase(it);
  };
  take_double("learning_rate", cfg.learning_rate);
  take_size("batch_size", cfg.batch_size);
  take_size("epochs", cfg.epochs);
  take_size("d", cfg.d);
  take_size("l", cfg.l);
  take_size("m", cfg.m);
  take_size("kappa", cfg.kappa);
  take_size("negatives", cfg.negatives);
  take_double("gamma", cfg.gamma);
  std::size_t seed = cfg.seed;
  take_size("seed", seed);
  cfg.seed = seed;
  if (auto it = kv.find("raw_probability_loss"); it != kv.end()) {
    if (it->second != "0" && it->second != "1")
      fail(ErrorCode::kUsage, "raw_probability_loss expects 0 or 1");
    cfg.raw_probability_loss = it->second == "1";
    kv.erase(it);
  }
}

std::string content_fingerprint(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string file_fingerprint(const std::string& path) {
  return content_fingerprint(text::read_file(path));
}

Dataset load_dataset(const DatasetPaths& paths) {
  Dataset ds;
  for (const auto& p : {paths.edges, paths.nodes})
    if (!std::filesystem::exists(p)) fail(ErrorCode::kUsage, "input file not found: " + p);
  const std::string edges = text::read_file(paths.edges);
  const std::string nodes = text::read_file(paths.nodes);
  ds.graph = ingest(parse_edge_lines(edges, paths.edges), parse_node_lines(nodes, paths.nodes));
  ds.index = CategoryIndex(ds.graph);
  ds.fingerprints["input.edges"] = content_fingerprint(edges);
  ds.fingerprints["input.nodes"] = content_fingerprint(nodes);
  if (!paths.labels.empty()) {
    if (!std::filesystem::exists(paths.labels))
      fail(ErrorCode::kUsage, "input file not found: " + paths.labels);
    const std::string body = text::read_file(paths.labels);
    ds.labels = parse_labels(body, paths.labels);
    ds.fingerprints["input.labels"] = content_fingerprint(body);
  }
  if (!paths.task.empty()) {
    if (!std::filesystem::exists(paths.task))
      fail(ErrorCode::kUsage, "input file not found: " + paths.task);
    const std::string body = text::read_file(paths.task);
    ds.task = parse_eval_task(body, paths.task);
    ds.fingerprints["input.task"] = content_fingerprint(body);
  }
  return ds;
}

DatasetPaths dataset_paths(const std::string& dir) {
  return {dir + "/edges.tsv", dir + "/nodes.tsv", dir + "/labels.tsv", dir + "/eval_task.tsv"};
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"full", "\\s", "\\v", "\\a", "bid", "item", "dssm"};
  return names;
}

ModelConfig variant_config(const std::string& variant, const TrainConfig& train) {
  ModelConfig mc;
  mc.d = train.d;
  mc.l = train.l;
  mc.m = train.m;
  mc.kappa = train.kappa;
  mc.seed = train.seed;
  if (variant == "full") {
  } else if (variant == "\\s") {
    mc.siamese = false;
  } else if (variant == "\\v") {
    mc.views = {View::kAdClick};
  } else if (variant == "\\a") {
    mc.aggregator = Aggregator::kSage;
  } else if (variant == "bid") {
    mc.groups = MetapathGroup::kBid;
  } else if (variant == "item") {
    mc.groups = MetapathGroup::kItem;
  } else if (variant == "dssm") {
    mc.dssm = true;
    mc.siamese = false;
  } else {
    fail(ErrorCode::kUsage, "unknown variant '" + variant + "'");
  }
  return mc;
}

Model make_model(const HeteroGraph& g, const ModelConfig& cfg, const SchemaOptions& schema_opts) {
  return Model(cfg, FeatureSchema::fit(g, schema_opts));
}

TrainedModel train_model(const Dataset& ds, const ModelConfig& mc, const TrainConfig& tc,
                         const FitProgress& progress) {
  TrainedModel out{make_model(ds.graph, mc), {}};
  const EncodedGraph enc = EncodedGraph::build(ds.graph, out.model.schema());
  out.fit = fit(out.model, ds.graph, enc, ds.index, ds.labels, tc, progress);
  return out;
}

VariantScores evaluate_store(const EmbeddingStore& store, const Dataset& ds,
                             std::span<const View> views, std::span<const std::size_t> ks,
                             const std::string& name) {
  if (ks.empty()) fail(ErrorCode::kUsage, "no K values to evaluate");
  std::set<std::uint64_t> ad_set;
  for (const auto& [ad, t] : ds.task.targets) ad_set.insert(ad);
  for (const auto& [v, per_ad] : ds.task.view_targets)
    for (const auto& [ad, t] : per_ad) ad_set.insert(ad);
  std::vector<std::uint64_t> ads;
  for (std::uint64_t ad : ad_set)
    if (ds.graph.index_of({NodeType::kAd, ad})) ads.push_back(ad);

  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  const std::size_t depth = 3 * max_k / std::max<std::size_t>(1, views.size());
  const Retrieved retrieved = retrieve_all(store, ds.graph, ds.index, ads, views, depth);

  VariantScores scores;
  scores.variant = name;
  std::optional<EvalTask> cold;
  try {
    cold = cold_start_split(ds.task, ds.graph);
  } catch (const Error&) {
  }
  for (std::size_t k : ks) {
    scores.by_k[k] = recall_at_k(ds.task, retrieved, k);
    if (cold) scores.cold_by_k[k] = recall_at_k(*cold, retrieved, k);
  }
  return scores;
}

VariantScores evaluate_model(const Model& model, const Dataset& ds, std::span<const std::size_t> ks,
                             const std::string& name) {
  const EncodedGraph enc = EncodedGraph::build(ds.graph, model.schema());
  const EmbeddingStore store = export_embeddings(model, ds.graph, enc);
  return evaluate_store(store, ds, model.config().views, ks, name);
}

AblationResult run_ablation(const Dataset& ds, const AblationOptions& opts,
                            const AblationProgress& progress) {
  for (const auto& [key, value] : opts.shared_model_overrides)
    if (key != "attention_scale" && key != "normalize")
      fail(ErrorCode::kUsage, "option '" + key + "' defines a variant and cannot be set for ablate");
  AblationResult res;
  for (const std::string& v : opts.variants) {
    if (progress) progress(v);
    ModelConfig mc = variant_config(v, opts.train);
    apply_model_overrides(mc, opts.shared_model_overrides);
    TrainedModel t = train_model(ds, mc, opts.train);
    res.rows.push_back(evaluate_model(t.model, ds, opts.ks, v));
    res.fits[v] = std::move(t.fit);
  }
  return res;
}

namespace {

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  fail(ErrorCode::kUsage, key + " expects 0 or 1");
}

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = {"siamese", "dssm", "aggregator", "groups",
                                             "views", "attention_scale", "normalize"};
  return keys;
}

}  // namespace

void apply_model_overrides(ModelConfig& mc, const KeyValues& kv) {
  for (const auto& [key, v] : kv) {
    if (key == "siamese") {
      mc.siamese = parse_flag(key, v);
    } else if (key == "dssm") {
      mc.dssm = parse_flag(key, v);
    } else if (key == "attention_scale") {
      mc.attention_scale = parse_flag(key, v);
    } else if (key == "normalize") {
      mc.normalize = parse_flag(key, v);
    } else if (key == "aggregator") {
      if (v == "hetmatch") mc.aggregator = Aggregator::kAutoencoder;
      else if (v == "sage") mc.aggregator = Aggregator::kSage;
      else fail(ErrorCode::kUsage, "aggregator expects hetmatch or sage");
    } else if (key == "groups") {
      if (v == "all") mc.groups = MetapathGroup::kAll;
      else if (v == "bid") mc.groups = MetapathGroup::kBid;
      else if (v == "item") mc.groups = MetapathGroup::kItem;
      else fail(ErrorCode::kUsage, "groups expects all, bid or item");
    } else if (key == "views") {
      mc.views.clear();
      for (auto tok : text::split(v, ',')) {
        auto view = parse_view(text::trim(tok));
        if (!view) fail(ErrorCode::kUsage, "unknown view '" + std::string(tok) + "'");
        mc.views.push_back(*view);
      }
    } else {
      fail(ErrorCode::kUsage, "unknown model option '" + key + "'");
    }
  }
}

ModelConfig RunConfig::model() const {
  ModelConfig mc = variant_config(variant, train);
  apply_model_overrides(mc, model_overrides);
  return mc;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  for (const auto& [k, v] : train.to_map()) kv["train." + k] = v;
  kv["variant"] = variant;
  for (const auto& [k, v] : model_overrides) kv["model_override." + k] = v;
  std::string s;
  for (std::size_t k : ks) s += (s.empty() ? "" : ",") + std::to_string(k);
  kv["ks"] = s;
  s.clear();
  for (const auto& v : variants) s += (s.empty() ? "" : ",") + v;
  kv["variants"] = s;
  return kv;
}

RunConfig parse_run_config(KeyValues kv) {
  RunConfig rc;
  apply_train_overrides(rc.train, kv);
  KeyValues synth;
  for (const auto& [key, v] : kv) {
    if (model_keys().count(key)) {
      rc.model_overrides[key] = v;
    } else if (key.rfind("synth.", 0) == 0) {
      synth[key.substr(6)] = v;
    } else if (key == "variant") {
      rc.variant = v;
    } else if (key == "variants") {
      rc.variants.clear();
      for (auto tok : text::split(v, ',')) rc.variants.emplace_back(text::trim(tok));
    } else if (key == "ks") {
      rc.ks.clear();
      for (auto tok : text::split(v, ',')) {
        auto k = text::parse_u64(text::trim(tok));
        if (!k || *k == 0) fail(ErrorCode::kUsage, "ks expects a comma list of positive integers");
        rc.ks.push_back(static_cast<std::size_t>(*k));
      }
    } else if (key == "probes" || key == "gradcheck_pairs") {
      auto n = text::parse_u64(v);
      if (!n) fail(ErrorCode::kUsage, key + " expects a non-negative integer");
      (key == "probes" ? rc.probes : rc.gradcheck_pairs) = static_cast<std::size_t>(*n);
    } else if (key == "fd_epsilon") {
      auto e = text::parse_double(v);
      if (!e || !(*e > 0.0)) fail(ErrorCode::kUsage, "fd_epsilon expects a positive number");
      rc.fd_epsilon = *e;
    } else {
      fail(ErrorCode::kUsage, "unknown config key '" + key + "'");
    }
  }
  rc.synth.apply(synth);
  for (const auto& v : rc.variants) variant_config(v, rc.train);
  (void)rc.model();
  return rc;
}

KeyValues run_manifest(const TrainConfig& tc, const ModelConfig* mc, const KeyValues& fingerprints,
                       const FitResult* fit) {
  KeyValues m;
  for (const auto& [k, v] : tc.to_map()) m["train." + k] = v;
  if (mc)
    for (const auto& [k, v] : mc->to_meta()) m[k] = v;
  for (const auto& [k, v] : fingerprints) m[k] = v;
  m["seed"] = std::to_string(tc.seed);
  if (fit) {
    m["fit.steps"] = std::to_string(fit->steps);
    m["fit.skipped_pairs"] = std::to_string(fit->skipped_pairs);
    for (std::size_t e = 0; e < fit->epoch_losses.size(); ++e)
      m["fit.epoch_loss." + std::to_string(e)] = text::exact(fit->epoch_losses[e]);
  }
  return m;
}

}  // namespace hetmatch
