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

#include "hetmatch/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "text.hpp"

namespace hetmatch {

std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kId: return "id";
    case FeatureKind::kCategoricalTerm: return "term";
    case FeatureKind::kNumeric: return "numeric";
  }
  return "?";
}

static std::optional<FeatureKind> parse_kind(std::string_view s) {
  for (auto k : {FeatureKind::kId, FeatureKind::kCategoricalTerm, FeatureKind::kNumeric})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

QuantileBoundaries fit_quantiles(std::vector<double> values, std::size_t bucket_count,
                                 std::string feature_name) {
  if (values.empty()) fail(ErrorCode::kData, "fit_quantiles: no values for " + feature_name);
  if (bucket_count == 0) fail(ErrorCode::kUsage, "fit_quantiles: bucket_count must be positive");
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  QuantileBoundaries q;
  q.feature_name = std::move(feature_name);
  if (values.empty()) {
    q.degenerate = true;
    return q;
  }
  std::sort(values.begin(), values.end());
  const double n1 = static_cast<double>(values.size() - 1);
  for (std::size_t k = 1; k < bucket_count; ++k) {
    const double h = n1 * static_cast<double>(k) / static_cast<double>(bucket_count);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double b = values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    if (q.boundaries.empty() || b > q.boundaries.back()) q.boundaries.push_back(b);
  }
  if (values.front() == values.back()) {
    // every boundary equals the common value; a single bucket remains
    q.boundaries.clear();
    q.degenerate = true;
  }
  return q;
}

std::size_t discretize(double x, const QuantileBoundaries& q,
                       std::atomic<std::uint64_t>* nan_count) {
  if (std::isnan(x)) {
    if (nan_count) nan_count->fetch_add(1);
    return 0;
  }
  return static_cast<std::size_t>(
      std::upper_bound(q.boundaries.begin(), q.boundaries.end(), x) - q.boundaries.begin());
}

const std::vector<std::pair<std::string, FeatureKind>>& standard_slots(NodeType t) {
  using K = FeatureKind;
  static const std::vector<std::pair<std::string, FeatureKind>> ad = {
      {"ad_id", K::kId},          {"title", K::kCategoricalTerm},
      {"category", K::kCategoricalTerm}, {"brand", K::kCategoricalTerm},
      {"props", K::kCategoricalTerm},    {"shop", K::kCategoricalTerm}};
  static const std::vector<std::pair<std::string, FeatureKind>> item = {
      {"item_id", K::kId},        {"title", K::kCategoricalTerm},
      {"category", K::kCategoricalTerm}, {"brand", K::kCategoricalTerm},
      {"props", K::kCategoricalTerm},    {"shop", K::kCategoricalTerm}};
  static const std::vector<std::pair<std::string, FeatureKind>> keyword = {
      {"keyword_id", K::kId},          {"query_terms", K::kCategoricalTerm},
      {"category", K::kCategoricalTerm}, {"avg_bid", K::kNumeric},
      {"bid_count", K::kNumeric},        {"shop_count", K::kNumeric}};
  switch (t) {
    case NodeType::kAd: return ad;
    case NodeType::kItem: return item;
    case NodeType::kKeyword: return keyword;
  }
  return ad;
}

namespace {

// Raw tokens of a slot for one record; empty when the value is missing.
std::vector<std::string> slot_tokens(const NodeRecord& r, const std::string& name,
                                     FeatureKind kind) {
  std::vector<std::string> out;
  if (kind == FeatureKind::kId) {
    out.push_back(std::to_string(r.node.id));
  } else if (name == "category") {
    if (r.category) out.push_back(std::to_string(*r.category));
  } else if (const std::string* v = r.feature(name)) {
    for (auto tok : text::split(*v, ','))
      if (!tok.empty()) out.emplace_back(tok);
  }
  return out;
}

std::optional<double> numeric_value(const NodeRecord& r, const std::string& name) {
  if (const std::string* v = r.feature(name)) {
    auto d = text::parse_double(*v);
    return d ? *d : std::numeric_limits<double>::quiet_NaN();
  }
  if (name == "shop_count") return r.searched_count;
  return std::nullopt;
}

}  // namespace

FeatureSchema::FeatureSchema(const FeatureSchema& o)
    : tables_(o.tables_), slots_(o.slots_), quantiles_(o.quantiles_), opts_(o.opts_) {}

FeatureSchema& FeatureSchema::operator=(const FeatureSchema& o) {
  tables_ = o.tables_;
  slots_ = o.slots_;
  quantiles_ = o.quantiles_;
  opts_ = o.opts_;
  return *this;
}

int FeatureSchema::table_index(const std::string& feature_name) const {
  for (std::size_t i = 0; i < tables_.size(); ++i)
    if (tables_[i].feature_name == feature_name) return static_cast<int>(i);
  return -1;
}

const QuantileBoundaries* FeatureSchema::quantiles(const std::string& feature_name) const {
  auto it = quantiles_.find(feature_name);
  return it == quantiles_.end() ? nullptr : &it->second;
}

std::size_t FeatureSchema::input_width(NodeType t) const {
  std::size_t w = 0;
  for (int s : slots(t)) w += tables_[s].embedding_width;
  return w;
}

FeatureSchema FeatureSchema::fit(const HeteroGraph& g, const SchemaOptions& opts) {
  FeatureSchema s;
  s.opts_ = opts;
  // collect per-table statistics over every node type that carries the slot
  std::map<std::string, std::size_t> vocab;
  std::map<std::string, bool> hashed;
  std::map<std::string, std::vector<double>> numeric;
  for (NodeType t : kAllNodeTypes) {
    for (const auto& [name, kind] : standard_slots(t)) {
      int ti = s.table_index(name);
      if (ti < 0) {
        s.tables_.push_back({name, kind, 1, opts.embedding_width});
        ti = static_cast<int>(s.tables_.size()) - 1;
      } else if (s.tables_[ti].kind != kind) {
        fail(ErrorCode::kUsage, "feature '" + name + "' declared with two kinds");
      }
      s.slots_[static_cast<int>(t)].push_back(ti);
      for (std::uint32_t i = 0; i < g.node_count(t); ++i) {
        const NodeRecord& r = g.record(t, i);
        if (kind == FeatureKind::kNumeric) {
          if (auto v = numeric_value(r, name); v && !std::isnan(*v)) numeric[name].push_back(*v);
          continue;
        }
        for (const auto& tok : slot_tokens(r, name, kind)) {
          auto u = text::parse_u64(tok);
          if (!u || *u >= opts.hash_vocabulary)
            hashed[name] = true;
          else
            vocab[name] = std::max<std::size_t>(vocab[name], *u + 1);
        }
      }
    }
  }
  for (auto& spec : s.tables_) {
    if (spec.kind == FeatureKind::kNumeric) {
      auto& vals = numeric[spec.feature_name];
      QuantileBoundaries q;
      if (vals.empty()) {
        q.feature_name = spec.feature_name;
        q.degenerate = true;
      } else {
        q = fit_quantiles(vals, opts.bucket_count, spec.feature_name);
      }
      spec.vocabulary_size = q.bucket_count();
      s.quantiles_[spec.feature_name] = std::move(q);
    } else {
      spec.vocabulary_size = hashed[spec.feature_name]
                                 ? opts.hash_vocabulary
                                 : std::max<std::size_t>(1, vocab[spec.feature_name]);
    }
  }
  return s;
}

std::uint32_t FeatureSchema::token_row(const FeatureSpec& spec, std::string_view token) const {
  const std::uint64_t vocab = spec.vocabulary_size;
  if (auto u = text::parse_u64(token)) {
    if (*u < vocab) return static_cast<std::uint32_t>(*u);
    oov_.fetch_add(1);
    return static_cast<std::uint32_t>(mix64(*u) % vocab);
  }
  return static_cast<std::uint32_t>(fnv1a(token) % vocab);
}

EncodedNode FeatureSchema::encode(const NodeRecord& r) const {
  EncodedNode e;
  const auto& layout = standard_slots(r.node.type);
  const auto& sl = slots(r.node.type);
  e.slot_rows.resize(sl.size());
  for (std::size_t k = 0; k < sl.size(); ++k) {
    const FeatureSpec& spec = tables_[sl[k]];
    const std::string& name = layout[k].first;
    if (spec.kind == FeatureKind::kNumeric) {
      auto v = numeric_value(r, name);
      const QuantileBoundaries* q = quantiles(name);
      std::size_t bucket = 0;
      if (v && q) bucket = discretize(*v, *q, &nan_);
      e.slot_rows[k].push_back(static_cast<std::uint32_t>(
          std::min<std::size_t>(bucket, spec.vocabulary_size - 1)));
      continue;
    }
    for (const auto& tok : slot_tokens(r, name, spec.kind))
      e.slot_rows[k].push_back(token_row(spec, tok));
  }
  return e;
}

std::vector<EncodedNode> FeatureSchema::encode_all(const HeteroGraph& g, NodeType t) const {
  std::vector<EncodedNode> out;
  out.reserve(g.node_count(t));
  for (std::uint32_t i = 0; i < g.node_count(t); ++i) out.push_back(encode(g.record(t, i)));
  return out;
}

std::string FeatureSchema::manifest_text() const {
  std::string s = "# hetmatch feature manifest v1\n";
  s += "option\tembedding_width\t" + std::to_string(opts_.embedding_width) + "\n";
  s += "option\tbucket_count\t" + std::to_string(opts_.bucket_count) + "\n";
  s += "option\thash_vocabulary\t" + std::to_string(opts_.hash_vocabulary) + "\n";
  for (const auto& t : tables_) {
    s += "table\t" + t.feature_name + "\t" + std::string(to_string(t.kind)) + "\t" +
         std::to_string(t.vocabulary_size) + "\t" + std::to_string(t.embedding_width) + "\n";
  }
  for (NodeType nt : kAllNodeTypes) {
    s += "slots\t" + std::string(to_string(nt));
    for (int ti : slots(nt)) s += "\t" + tables_[ti].feature_name;
    s += "\n";
  }
  return s;
}

std::string FeatureSchema::quantiles_text() const {
  std::string s = "# feature\tdegenerate\tboundaries...\n";
  for (const auto& [name, q] : quantiles_) {
    s += name + "\t" + (q.degenerate ? "1" : "0");
    for (double b : q.boundaries) s += "\t" + text::exact(b);
    s += "\n";
  }
  return s;
}

FeatureSchema FeatureSchema::from_text(std::string_view manifest, std::string_view quantiles) {
  FeatureSchema s;
  text::for_each_line(manifest, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    auto f = text::split_ws(t);
    const std::string where = "feature manifest:" + std::to_string(line_no);
    if (f[0] == "option" && f.size() == 3) {
      auto v = text::parse_u64(f[2]);
      if (!v) fail(ErrorCode::kData, where + ": bad option value");
      if (f[1] == "embedding_width") s.opts_.embedding_width = *v;
      else if (f[1] == "bucket_count") s.opts_.bucket_count = *v;
      else if (f[1] == "hash_vocabulary") s.opts_.hash_vocabulary = *v;
    } else if (f[0] == "table" && f.size() == 5) {
      auto kind = parse_kind(f[2]);
      auto rows = text::parse_u64(f[3]);
      auto width = text::parse_u64(f[4]);
      if (!kind || !rows || !width || *rows == 0 || *width == 0)
        fail(ErrorCode::kData, where + ": bad table line");
      s.tables_.push_back({std::string(f[1]), *kind, *rows, *width});
    } else if (f[0] == "slots" && f.size() >= 2) {
      auto nt = parse_node_type(f[1]);
      if (!nt) fail(ErrorCode::kData, where + ": bad node type");
      const auto& layout = standard_slots(*nt);
      if (f.size() - 2 != layout.size()) fail(ErrorCode::kData, where + ": slot count mismatch");
      for (std::size_t k = 2; k < f.size(); ++k) {
        int ti = s.table_index(std::string(f[k]));
        if (ti < 0 || f[k] != layout[k - 2].first)
          fail(ErrorCode::kData, where + ": unknown slot '" + std::string(f[k]) + "'");
        s.slots_[static_cast<int>(*nt)].push_back(ti);
      }
    } else {
      fail(ErrorCode::kData, where + ": unrecognised line");
    }
  });
  text::for_each_line(quantiles, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    auto f = text::split_ws(t);
    if (f.size() < 2) fail(ErrorCode::kData, "quantiles:" + std::to_string(line_no) + ": short line");
    QuantileBoundaries q;
    q.feature_name = std::string(f[0]);
    q.degenerate = f[1] == "1";
    for (std::size_t k = 2; k < f.size(); ++k) {
      auto b = text::parse_double(f[k]);
      if (!b || (!q.boundaries.empty() && *b <= q.boundaries.back()))
        fail(ErrorCode::kData, "quantiles:" + std::to_string(line_no) + ": bad boundary");
      q.boundaries.push_back(*b);
    }
    s.quantiles_[q.feature_name] = std::move(q);
  });
  for (NodeType nt : kAllNodeTypes)
    if (s.slots(nt).empty()) fail(ErrorCode::kData, "feature manifest lacks slots for a node type");
  return s;
}

}  // namespace hetmatch
