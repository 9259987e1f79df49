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

#include "hetmatch/retrieval.hpp"

#include <algorithm>
#include <cstring>
#include <optional>
#include <set>

#include "text.hpp"

namespace hetmatch {

std::vector<View> EmbeddingStore::views() const {
  std::vector<View> out;
  for (const auto& [v, rows] : rows_) out.push_back(v);
  return out;
}

std::size_t EmbeddingStore::row_count() const {
  std::size_t n = 0;
  for (const auto& [v, rows] : rows_) n += rows.size();
  return n;
}

void EmbeddingStore::put(const NodeRef& n, View v, Vec x) {
  if (static_cast<std::size_t>(x.size()) != dim_)
    fail(ErrorCode::kData, "embedding of " + to_string(n) + " has dimension " +
                               std::to_string(x.size()) + ", store expects " + std::to_string(dim_));
  if (!x.allFinite()) fail(ErrorCode::kNumeric, "embedding of " + to_string(n) + " is not finite");
  rows_[v][n] = std::move(x);
}

const Vec* EmbeddingStore::find(const NodeRef& n, View v) const {
  auto it = rows_.find(v);
  if (it == rows_.end()) return nullptr;
  auto jt = it->second.find(n);
  return jt == it->second.end() ? nullptr : &jt->second;
}

const Vec& EmbeddingStore::at(const NodeRef& n, View v) const {
  const Vec* x = find(n, v);
  if (!x)
    fail(ErrorCode::kData,
         "no " + std::string(to_string(v)) + " embedding for " + to_string(n));
  return *x;
}

std::string EmbeddingStore::dump() const {
  std::string s;
  for (const auto& [v, rows] : rows_) {
    for (const auto& [n, x] : rows) {
      s += to_string(n.type);
      s += '\t' + std::to_string(n.id) + '\t';
      s += to_string(v);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        s += i == 0 ? '\t' : ' ';
        s += text::sig(x[i], 9);
      }
      s += '\n';
    }
  }
  return s;
}

EmbeddingStore EmbeddingStore::parse(std::string_view body, const std::string& source) {
  EmbeddingStore store;
  bool have_dim = false;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f.size() < 4) fail(ErrorCode::kData, where + ": expected 'type id view v0 ...'");
    auto type = parse_node_type(f[0]);
    auto id = text::parse_u64(f[1]);
    auto view = parse_view(f[2]);
    if (!type || !id || !view) fail(ErrorCode::kData, where + ": malformed embedding row header");
    const std::size_t dim = f.size() - 3;
    if (!have_dim) {
      store.dim_ = dim;
      have_dim = true;
    } else if (dim != store.dim_) {
      fail(ErrorCode::kData, where + ": row has " + std::to_string(dim) + " values, expected " +
                                 std::to_string(store.dim_));
    }
    Vec x(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      auto val = text::parse_double(f[3 + i]);
      if (!val) fail(ErrorCode::kData, where + ": bad value '" + std::string(f[3 + i]) + "'");
      x[static_cast<Eigen::Index>(i)] = *val;
    }
    store.put({*type, *id}, *view, std::move(x));
  });
  return store;
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  return parse(text::read_file(path), path);
}

bool EmbeddingStore::bit_equal(const EmbeddingStore& o) const {
  if (dim_ != o.dim_ || rows_.size() != o.rows_.size()) return false;
  for (const auto& [v, rows] : rows_) {
    auto it = o.rows_.find(v);
    if (it == o.rows_.end() || it->second.size() != rows.size()) return false;
    for (const auto& [n, x] : rows) {
      auto jt = it->second.find(n);
      if (jt == it->second.end()) return false;
      if (std::memcmp(x.data(), jt->second.data(), sizeof(double) * dim_) != 0) return false;
    }
  }
  return true;
}

EmbeddingStore export_embeddings(const Model& model, const HeteroGraph& g, const EncodedGraph& enc) {
  std::vector<NodeRef> batch;
  for (NodeType t : {NodeType::kAd, NodeType::kKeyword})
    for (std::uint64_t id : g.ids(t)) batch.push_back({t, id});
  const MemoizedResult res = memoized_forward(model, g, enc, batch);

  EmbeddingStore raw(model.config().d);
  for (const auto& [n, emb] : res.embeddings)
    for (const auto& [v, x] : emb.views) raw.put(n, v, x);
  return EmbeddingStore::parse(raw.dump(), "export");
}

// --- retrieval ---------------------------------------------------------------

std::vector<Scored> topk_retrieve(const EmbeddingStore& store, std::uint64_t ad_id, View view,
                                  std::span<const std::uint64_t> candidates, std::size_t k,
                                  std::size_t* empty_warnings) {
  std::vector<Scored> scored;
  if (candidates.empty()) {
    if (empty_warnings) ++*empty_warnings;
    return scored;
  }
  const Vec& a = store.at({NodeType::kAd, ad_id}, view);
  scored.reserve(candidates.size());
  for (std::uint64_t kw : candidates)
    scored.push_back({kw, a.dot(store.at({NodeType::kKeyword, kw}, view))});
  auto better = [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.keyword_id < y.keyword_id;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), better);
  scored.resize(keep);
  return scored;
}

Retrieved retrieve_all(const EmbeddingStore& store, const HeteroGraph& g, const CategoryIndex& idx,
                       std::span<const std::uint64_t> ads, std::span<const View> views,
                       std::size_t depth, std::size_t* empty_warnings) {
  Retrieved out;
  for (std::uint64_t ad : ads) {
    std::vector<std::uint64_t> cands;
    for (const NodeRef& kw : candidate_keywords(idx, g, {NodeType::kAd, ad})) cands.push_back(kw.id);
    auto& per_view = out[ad];
    for (View v : views) {
      auto& list = per_view[v];
      for (const Scored& s : topk_retrieve(store, ad, v, cands, depth, empty_warnings))
        list.push_back(s.keyword_id);
    }
  }
  return out;
}

// --- evaluation ----------------------------------------------------------------

const std::map<std::uint64_t, std::vector<std::uint64_t>>& EvalTask::targets_for(View v) const {
  if (v == View::kAdClick) return targets;
  static const std::map<std::uint64_t, std::vector<std::uint64_t>> kEmpty;
  auto it = view_targets.find(v);
  return it == view_targets.end() ? kEmpty : it->second;
}

std::vector<std::uint64_t> EvalTask::ads() const {
  std::vector<std::uint64_t> out;
  for (const auto& [ad, t] : targets) out.push_back(ad);
  return out;
}

namespace {

std::vector<std::uint64_t> parse_id_list(std::string_view s, const std::string& where) {
  std::vector<std::uint64_t> out;
  for (auto tok : text::split(s, ',')) {
    auto v = text::parse_u64(tok);
    if (!v) fail(ErrorCode::kData, where + ": bad keyword id '" + std::string(tok) + "'");
    out.push_back(*v);
  }
  return out;
}

std::string join_ids(const std::vector<std::uint64_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::size_t count_hits(std::span<const std::uint64_t> ranked, std::size_t depth,
                       const std::set<std::uint64_t>& want, std::set<std::uint64_t>& seen) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(depth, ranked.size()); ++i)
    if (want.count(ranked[i]) && seen.insert(ranked[i]).second) ++hits;
  return hits;
}

}  // namespace

EvalTask parse_eval_task(std::string_view body, const std::string& source) {
  EvalTask task;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f[0] == "target" && f.size() == 3) {
      auto ad = text::parse_u64(f[1]);
      if (!ad) fail(ErrorCode::kData, where + ": bad ad id");
      auto ids = parse_id_list(f[2], where);
      auto& dst = task.targets[*ad];
      dst.insert(dst.end(), ids.begin(), ids.end());
    } else if (f[0] == "view_target" && f.size() == 4) {
      auto v = parse_view(f[1]);
      auto ad = text::parse_u64(f[2]);
      if (!v || !ad) fail(ErrorCode::kData, where + ": bad view or ad id");
      auto ids = parse_id_list(f[3], where);
      auto& dst = task.view_targets[*v][*ad];
      dst.insert(dst.end(), ids.begin(), ids.end());
    } else {
      fail(ErrorCode::kData, where + ": expected 'target <ad> <ids>' or "
                                     "'view_target <view> <ad> <ids>'");
    }
  });
  return task;
}

EvalTask read_eval_task(const std::string& path) {
  return parse_eval_task(text::read_file(path), path);
}

std::string format_eval_task(const EvalTask& task) {
  std::string s;
  for (const auto& [ad, ids] : task.targets)
    if (!ids.empty()) s += "target\t" + std::to_string(ad) + '\t' + join_ids(ids) + '\n';
  for (const auto& [v, per_ad] : task.view_targets)
    for (const auto& [ad, ids] : per_ad)
      if (!ids.empty())
        s += "view_target\t" + std::string(to_string(v)) + '\t' + std::to_string(ad) + '\t' +
             join_ids(ids) + '\n';
  return s;
}

RecallResult recall_at_k(const EvalTask& task, const Retrieved& retrieved, std::size_t k) {
  RecallResult r;
  std::set<View> views;
  for (const auto& [ad, per_view] : retrieved)
    for (const auto& [v, list] : per_view) views.insert(v);

  const std::size_t depth = views.empty() ? 0 : 3 * k / views.size();
  for (const auto& [ad, targets] : task.targets) {
    const std::set<std::uint64_t> want(targets.begin(), targets.end());
    r.total += want.size();
    auto it = retrieved.find(ad);
    if (it == retrieved.end()) continue;
    std::set<std::uint64_t> seen;
    for (const auto& [v, list] : it->second) r.hits += count_hits(list, depth, want, seen);
  }
  if (r.total == 0) fail(ErrorCode::kData, "evaluation task has no target relations");
  r.recall_3k = static_cast<double>(r.hits) / static_cast<double>(r.total);

  for (View v : views) {
    std::size_t hits = 0, total = 0;
    for (const auto& [ad, targets] : task.targets_for(v)) {
      const std::set<std::uint64_t> want(targets.begin(), targets.end());
      total += want.size();
      auto it = retrieved.find(ad);
      if (it == retrieved.end()) continue;
      auto jt = it->second.find(v);
      if (jt == it->second.end()) continue;
      std::set<std::uint64_t> seen;
      hits += count_hits(jt->second, k, want, seen);
    }
    if (total > 0) r.per_view[v] = static_cast<double>(hits) / static_cast<double>(total);
  }
  return r;
}

EvalTask cold_start_split(const EvalTask& task, const HeteroGraph& g) {
  auto cold = [&](std::uint64_t ad) {
    const NodeRef n{NodeType::kAd, ad};
    if (!g.index_of(n)) return false;
    return g.degree(n, Relation::kAdClickKw) == 0 && g.degree(n, Relation::kAdCoclickItem) == 0;
  };
  EvalTask out;
  for (const auto& [ad, t] : task.targets)
    if (cold(ad)) out.targets[ad] = t;
  for (const auto& [v, per_ad] : task.view_targets)
    for (const auto& [ad, t] : per_ad)
      if (cold(ad)) out.view_targets[v][ad] = t;
  if (out.targets.empty()) fail(ErrorCode::kData, "cold-start cohort is empty");
  return out;
}

// --- reports -------------------------------------------------------------------------

namespace {

struct Section {
  std::string title;
  std::string key;
  std::optional<View> view;
  bool cold = false;
};

std::vector<Section> report_sections(const std::vector<VariantScores>& rows) {
  std::vector<Section> out{{"Recall@3K", "recall_3k", std::nullopt, false}};
  for (View v : kAllViews)
    out.push_back({"Recall@K (" + std::string(to_string(v)) + " view)",
                   "recall_k", v, false});
  bool any_cold = false;
  for (const auto& r : rows) any_cold = any_cold || !r.cold_by_k.empty();
  if (any_cold) out.push_back({"Cold-start Recall@3K", "cold_recall_3k", std::nullopt, true});
  return out;
}

std::optional<double> cell(const VariantScores& row, const Section& s, std::size_t k) {
  const auto& m = s.cold ? row.cold_by_k : row.by_k;
  auto it = m.find(k);
  if (it == m.end()) return std::nullopt;
  if (!s.view) return it->second.recall_3k;
  auto jt = it->second.per_view.find(*s.view);
  if (jt == it->second.per_view.end()) return std::nullopt;
  return jt->second;
}

}  // namespace

std::string render_report(const std::vector<VariantScores>& rows, std::span<const std::size_t> ks) {
  std::size_t name_w = 8;
  for (const auto& r : rows) name_w = std::max(name_w, r.variant.size());
  const std::size_t col_w = 10;
  auto pad_left = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  auto pad_right = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };

  std::string out;
  for (const Section& s : report_sections(rows)) {
    out += s.title + "\n";
    std::string header = pad_right("variant", name_w);
    for (std::size_t k : ks) header += pad_left("K=" + std::to_string(k), col_w);
    out += header + "\n" + std::string(header.size(), '-') + "\n";
    for (const auto& r : rows) {
      std::string line = pad_right(r.variant, name_w);
      for (std::size_t k : ks) {
        auto v = cell(r, s, k);
        line += pad_left(v ? text::fixed(100.0 * *v, 2) + "%" : "-", col_w);
      }
      out += line + "\n";
    }
    out += "\n";
  }
  return out;
}

std::string render_report_tsv(const std::vector<VariantScores>& rows,
                              std::span<const std::size_t> ks) {
  std::string out = "section\tvariant\tview\tK\trecall\n";
  for (const Section& s : report_sections(rows)) {
    for (const auto& r : rows) {
      for (std::size_t k : ks) {
        auto v = cell(r, s, k);
        out += s.key + '\t' + r.variant + '\t' +
               (s.view ? std::string(to_string(*s.view)) : std::string("union")) + '\t' +
               std::to_string(k) + '\t' + (v ? text::sig(*v, 9) : std::string("-")) + '\n';
      }
    }
  }
  return out;
}

}  // namespace hetmatch
