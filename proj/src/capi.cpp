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

#include "hetmatch/hetmatch.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <set>
#include <string>

#include "hetmatch/pipeline.hpp"
#include "text.hpp"

using namespace hetmatch;

struct hm_config {
  KeyValues kv;
};

struct hm_dataset {
  Dataset ds;
};

struct hm_model {
  Model model;
  KeyValues manifest;
  std::vector<double> batch_losses;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
hm_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<hm_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return HM_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kUsage, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

RunConfig resolve(const hm_config* cfg) { return parse_run_config(cfg ? cfg->kv : KeyValues{}); }

std::string format_retrieved(const Retrieved& r) {
  std::string s = "# ad_id\tview\tkeywords\n";
  for (const auto& [ad, per_view] : r) {
    for (const auto& [v, list] : per_view) {
      s += std::to_string(ad) + '\t' + std::string(to_string(v)) + '\t';
      for (std::size_t i = 0; i < list.size(); ++i) s += (i ? "," : "") + std::to_string(list[i]);
      s += '\n';
    }
  }
  return s;
}

Retrieved parse_retrieved(std::string_view body, const std::string& source) {
  Retrieved r;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f.size() != 2 && f.size() != 3) fail(ErrorCode::kData, where + ": expected 'ad view ids'");
    auto ad = text::parse_u64(f[0]);
    auto v = parse_view(f[1]);
    if (!ad || !v) fail(ErrorCode::kData, where + ": bad ad id or view");
    auto& list = r[*ad][*v];
    if (f.size() == 3) {
      for (auto tok : text::split(f[2], ',')) {
        auto id = text::parse_u64(tok);
        if (!id) fail(ErrorCode::kData, where + ": bad keyword id '" + std::string(tok) + "'");
        list.push_back(*id);
      }
    }
  });
  return r;
}

}  // namespace

extern "C" {

const char* hm_last_error(void) { return g_last_error.c_str(); }

const char* hm_version(void) { return "0.1.0"; }

void hm_string_free(char* s) { std::free(s); }

hm_status hm_config_new(hm_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hm_config();
  });
}

void hm_config_free(hm_config* cfg) { delete cfg; }

hm_status hm_config_load(hm_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    for (auto& [k, v] : read_key_values(path)) cfg->kv[k] = v;
    parse_run_config(cfg->kv);
  });
}

hm_status hm_config_set(hm_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    KeyValues next = cfg->kv;
    next[key] = value;
    parse_run_config(next);
    cfg->kv = std::move(next);
  });
}

hm_status hm_config_describe(const hm_config* cfg, char** out_text) {
  return guarded([&] {
    require(out_text, "out_text");
    *out_text = dup_string(format_key_values(resolve(cfg).to_key_values()));
  });
}

hm_status hm_synth_generate(const hm_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const RunConfig rc = resolve(cfg);
    write_dataset(generate(rc.synth), rc.synth, out_dir);
  });
}

hm_status hm_dataset_load(const char* edges_path, const char* nodes_path, const char* labels_path,
                          const char* task_path, hm_dataset** out) {
  return guarded([&] {
    require(edges_path, "edges_path");
    require(nodes_path, "nodes_path");
    require(out, "out");
    DatasetPaths p{edges_path, nodes_path, labels_path ? labels_path : "",
                   task_path ? task_path : ""};
    auto* ds = new hm_dataset{load_dataset(p)};
    *out = ds;
  });
}

void hm_dataset_free(hm_dataset* ds) { delete ds; }

hm_status hm_dataset_summary(const hm_dataset* ds, char** out_text) {
  return guarded([&] {
    require(ds, "ds");
    require(out_text, "out_text");
    KeyValues kv = ds->ds.fingerprints;
    const HeteroGraph& g = ds->ds.graph;
    for (NodeType t : kAllNodeTypes)
      kv["nodes." + std::string(to_string(t))] = std::to_string(g.node_count(t));
    for (Relation r : kAllRelations)
      kv["edges." + std::string(to_string(r))] = std::to_string(g.edge_count(r));
    kv["categories"] = std::to_string(ds->ds.index.category_count());
    kv["labels"] = std::to_string(ds->ds.labels.size());
    kv["task.ads"] = std::to_string(ds->ds.task.targets.size());
    kv["graph.fingerprint"] = std::to_string(g.fingerprint());
    *out_text = dup_string(format_key_values(kv));
  });
}

hm_status hm_model_init(const hm_dataset* ds, const hm_config* cfg, hm_model** out) {
  return guarded([&] {
    require(ds, "ds");
    require(out, "out");
    const RunConfig rc = resolve(cfg);
    const ModelConfig mc = rc.model();
    *out = new hm_model{make_model(ds->ds.graph, mc),
                        run_manifest(rc.train, &mc, ds->ds.fingerprints, nullptr), {}};
  });
}

hm_status hm_train(const hm_dataset* ds, const hm_config* cfg, hm_model** out) {
  return guarded([&] {
    require(ds, "ds");
    require(out, "out");
    const RunConfig rc = resolve(cfg);
    const ModelConfig mc = rc.model();
    TrainedModel t = train_model(ds->ds, mc, rc.train);
    KeyValues manifest = run_manifest(rc.train, &mc, ds->ds.fingerprints, &t.fit);
    *out = new hm_model{std::move(t.model), std::move(manifest), std::move(t.fit.batch_losses)};
  });
}

void hm_model_free(hm_model* m) { delete m; }

hm_status hm_model_save(const hm_model* m, const char* path) {
  return guarded([&] {
    require(m, "m");
    require(path, "path");
    Checkpoint c = m->model.to_checkpoint();
    for (const auto& [k, v] : m->manifest) c.meta["run." + k] = v;
    save_checkpoint(path, c);
  });
}

hm_status hm_model_load(const char* path, hm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const Checkpoint c = load_checkpoint(path);
    KeyValues manifest;
    for (const auto& [k, v] : c.meta)
      if (k.rfind("run.", 0) == 0) manifest[k.substr(4)] = v;
    *out = new hm_model{Model::from_checkpoint(c), std::move(manifest), {}};
  });
}

hm_status hm_model_manifest(const hm_model* m, char** out_text) {
  return guarded([&] {
    require(m, "m");
    require(out_text, "out_text");
    *out_text = dup_string(format_key_values(m->manifest));
  });
}

hm_status hm_model_loss_log(const hm_model* m, char** out_text) {
  return guarded([&] {
    require(m, "m");
    require(out_text, "out_text");
    std::string s;
    for (double l : m->batch_losses) s += text::exact(l) + '\n';
    *out_text = dup_string(s);
  });
}

hm_status hm_model_compare(const hm_model* a, const hm_model* b, size_t* differing) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(differing, "differing");
    const ParamStore& pa = a->model.params();
    const ParamStore& pb = b->model.params();
    if (pa.size() != pb.size()) fail(ErrorCode::kData, "models have different tensor layouts");
    std::size_t n = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const Mat& x = pa[static_cast<int>(i)].value;
      const Mat& y = pb[static_cast<int>(i)].value;
      if (x.rows() != y.rows() || x.cols() != y.cols())
        fail(ErrorCode::kData, "models have different tensor shapes");
      for (Eigen::Index j = 0; j < x.size(); ++j)
        if (std::memcmp(x.data() + j, y.data() + j, sizeof(double)) != 0) ++n;
    }
    *differing = n;
  });
}

hm_status hm_model_check_config(const hm_model* m, const hm_config* cfg) {
  return guarded([&] {
    require(m, "m");
    if (!cfg) return;
    const ModelConfig& mc = m->model.config();
    const std::pair<const char*, std::size_t> sizes[] = {
        {"d", mc.d}, {"l", mc.l}, {"m", mc.m}, {"kappa", mc.kappa}};
    for (const auto& [key, have] : sizes) {
      auto it = cfg->kv.find(key);
      if (it == cfg->kv.end()) continue;
      auto want = text::parse_u64(it->second);
      if (!want || *want != have)
        fail(ErrorCode::kData, std::string("checkpoint has ") + key + " = " + std::to_string(have) +
                                   " but the configuration asks for " + it->second);
    }
  });
}

hm_status hm_embed(const hm_model* m, const hm_dataset* ds, const char* out_path) {
  return guarded([&] {
    require(m, "m");
    require(ds, "ds");
    require(out_path, "out_path");
    const EncodedGraph enc = EncodedGraph::build(ds->ds.graph, m->model.schema());
    text::write_file_atomic(out_path, export_embeddings(m->model, ds->ds.graph, enc).dump());
  });
}

hm_status hm_retrieve(const char* embeddings_path, const hm_dataset* ds, size_t depth,
                      const char* out_path) {
  return guarded([&] {
    require(embeddings_path, "embeddings_path");
    require(ds, "ds");
    require(out_path, "out_path");
    if (depth == 0) fail(ErrorCode::kUsage, "retrieval depth must be positive");
    const EmbeddingStore store = EmbeddingStore::load(embeddings_path);
    std::set<std::uint64_t> wanted;
    for (const auto& [ad, t] : ds->ds.task.targets) wanted.insert(ad);
    for (const auto& [v, per_ad] : ds->ds.task.view_targets)
      for (const auto& [ad, t] : per_ad) wanted.insert(ad);
    std::vector<std::uint64_t> ads;
    for (std::uint64_t ad : wanted)
      if (ds->ds.graph.index_of({NodeType::kAd, ad})) ads.push_back(ad);
    if (ads.empty())
      for (std::uint64_t id : ds->ds.graph.ids(NodeType::kAd)) ads.push_back(id);
    const auto views = store.views();
    text::write_file_atomic(out_path, format_retrieved(retrieve_all(store, ds->ds.graph,
                                                                    ds->ds.index, ads, views, depth)));
  });
}

hm_status hm_evaluate(const hm_dataset* ds, const char* retrieved_path, const hm_config* cfg,
                      char** out_report, char** out_tsv) {
  return guarded([&] {
    require(ds, "ds");
    require(retrieved_path, "retrieved_path");
    require(out_report, "out_report");
    require(out_tsv, "out_tsv");
    const RunConfig rc = resolve(cfg);
    const Retrieved r = parse_retrieved(text::read_file(retrieved_path), retrieved_path);
    VariantScores row;
    row.variant = "retrieved";
    std::optional<EvalTask> cold;
    try {
      cold = cold_start_split(ds->ds.task, ds->ds.graph);
    } catch (const Error&) {
    }
    for (std::size_t k : rc.ks) {
      row.by_k[k] = recall_at_k(ds->ds.task, r, k);
      if (cold) row.cold_by_k[k] = recall_at_k(*cold, r, k);
    }
    *out_report = dup_string(render_report({row}, rc.ks));
    *out_tsv = dup_string(render_report_tsv({row}, rc.ks));
  });
}

hm_status hm_gradcheck(const hm_dataset* ds, const hm_config* cfg, char** out_report,
                       double* max_rel_error) {
  return guarded([&] {
    require(ds, "ds");
    require(out_report, "out_report");
    const RunConfig rc = resolve(cfg);
    Model model = make_model(ds->ds.graph, rc.model());
    const EncodedGraph enc = EncodedGraph::build(ds->ds.graph, model.schema());
    auto labels = ds->ds.labels;
    if (labels.size() > rc.gradcheck_pairs) labels.resize(rc.gradcheck_pairs);
    const auto base = resolve_pairs(ds->ds.graph, labels, model.config().views);
    const auto pairs = with_negatives(ds->ds.graph, ds->ds.index, base, rc.train.negatives,
                                      derive_seed(rc.train.seed, 1));
    if (pairs.empty()) fail(ErrorCode::kData, "no labelled pairs available for the gradient check");
    const GradCheckReport rep = grad_check(model, ds->ds.graph, enc, pairs, rc.probes, rc.fd_epsilon,
                                           derive_seed(rc.train.seed, 2), rc.train.gamma,
                                           rc.train.raw_probability_loss);
    std::string s = "tensor\trow\tcol\tanalytic\tnumeric\trel_error\tkink\n";
    for (const auto& p : rep.probes)
      s += p.tensor + '\t' + std::to_string(p.row) + '\t' + std::to_string(p.col) + '\t' +
           text::sig(p.analytic, 12) + '\t' + text::sig(p.numeric, 12) + '\t' +
           text::sig(p.rel_error, 6) + '\t' + (p.kink ? "1" : "0") + '\n';
    s += "# probes = " + std::to_string(rep.probes.size()) + "\n";
    s += "# kink_probes = " + std::to_string(rep.kink_probes) + "\n";
    s += "# max_rel_error = " + text::sig(rep.max_rel_error, 6) + "\n";
    s += "# max_rel_error_smooth = " + text::sig(rep.max_rel_error_smooth, 6) + "\n";
    s += "# max_abs_error = " + text::sig(rep.max_abs_error, 6) + "\n";
    *out_report = dup_string(s);
    if (max_rel_error) *max_rel_error = rep.max_rel_error_smooth;
  });
}

hm_status hm_ablate(const hm_dataset* ds, const hm_config* cfg, char** out_report, char** out_tsv) {
  return guarded([&] {
    require(ds, "ds");
    require(out_report, "out_report");
    require(out_tsv, "out_tsv");
    const RunConfig rc = resolve(cfg);
    AblationOptions opts;
    opts.train = rc.train;
    opts.variants = rc.variants;
    opts.ks = rc.ks;
    opts.shared_model_overrides = rc.model_overrides;
    if (rc.variant != "full") fail(ErrorCode::kUsage, "ablate runs every variant; drop 'variant'");
    const AblationResult res = run_ablation(ds->ds, opts);
    *out_report = dup_string(render_report(res.rows, rc.ks));
    *out_tsv = dup_string(render_report_tsv(res.rows, rc.ks));
  });
}

}  // extern "C"
