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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetmatch/category_index.hpp"
#include "hetmatch/model.hpp"

namespace hetmatch {

/// Per-view vectors of every exported ad and keyword.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::vector<View> views() const;
  std::size_t row_count() const;

  void put(const NodeRef& n, View v, Vec x);
  const Vec* find(const NodeRef& n, View v) const;
  const Vec& at(const NodeRef& n, View v) const;  // kData when absent

  /// Text dump, one row per (node, view): type, id, view, then dim values
  /// at 9 significant digits. Rows ordered by view, node type, node id.
  std::string dump() const;
  static EmbeddingStore parse(std::string_view text, const std::string& source);
  static EmbeddingStore load(const std::string& path);

  bool bit_equal(const EmbeddingStore& o) const;

 private:
  std::size_t dim_ = 0;
  std::map<View, std::map<NodeRef, Vec>> rows_;
};

/// Computes view embeddings of every ad and keyword. The returned store is
/// the parse of its own dump, so values equal what a reload produces.
EmbeddingStore export_embeddings(const Model& model, const HeteroGraph& g, const EncodedGraph& enc);

struct Scored {
  std::uint64_t keyword_id = 0;
  double score = 0.0;
};

/// Exact top-K by z_ad . z_kw, descending, ties by ascending keyword id.
/// An empty candidate set yields an empty list and bumps `*empty_warnings`.
std::vector<Scored> topk_retrieve(const EmbeddingStore& store, std::uint64_t ad_id, View view,
                                  std::span<const std::uint64_t> candidates, std::size_t k,
                                  std::size_t* empty_warnings = nullptr);

/// Held-out ground truth. `targets` are the click relations scored by
/// Recall@3K; `view_targets` hold each view's own relations for per-view recall
/// (the ad-click view falls back to `targets`).
struct EvalTask {
  std::map<std::uint64_t, std::vector<std::uint64_t>> targets;
  std::map<View, std::map<std::uint64_t, std::vector<std::uint64_t>>> view_targets;

  const std::map<std::uint64_t, std::vector<std::uint64_t>>& targets_for(View v) const;
  std::vector<std::uint64_t> ads() const;
};

EvalTask parse_eval_task(std::string_view text, const std::string& source);
EvalTask read_eval_task(const std::string& path);
std::string format_eval_task(const EvalTask& task);

/// ad id -> view -> ranked keyword ids.
using Retrieved = std::map<std::uint64_t, std::map<View, std::vector<std::uint64_t>>>;

/// Candidates are the keywords of the ad's leaf category. Each view list
/// holds `depth` keywords.
Retrieved retrieve_all(const EmbeddingStore& store, const HeteroGraph& g, const CategoryIndex& idx,
                       std::span<const std::uint64_t> ads, std::span<const View> views,
                       std::size_t depth, std::size_t* empty_warnings = nullptr);

struct RecallResult {
  double recall_3k = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
  std::map<View, double> per_view;
};

/// Union recall with a 3K budget split evenly over the views present in
/// `retrieved` (K per view for three views, 3K for one), plus per-view
/// Recall@K against each view's own targets. Throws kData when the task has
/// no targets.
RecallResult recall_at_k(const EvalTask& task, const Retrieved& retrieved, std::size_t k);

/// Restriction to ads without click or co-click edges. Empty cohort is kData.
EvalTask cold_start_split(const EvalTask& task, const HeteroGraph& g);

// Reports --------------------------------------------------------------------

struct VariantScores {
  std::string variant;
  std::map<std::size_t, RecallResult> by_k;
  std::map<std::size_t, RecallResult> cold_by_k;  // empty when no cohort
};

/// Aligned text tables: Recall@3K, per-view Recall@K and cold-start Recall@3K,
/// one row per variant and one column per K.
std::string render_report(const std::vector<VariantScores>& rows, std::span<const std::size_t> ks);
/// The same numbers as tab-separated `section variant view K value` rows.
std::string render_report_tsv(const std::vector<VariantScores>& rows, std::span<const std::size_t> ks);

}  // namespace hetmatch
